//! One master seed, split into independent streams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub generator: u64,
    pub partition: u64,
    pub solver: u64,
}

impl Seeds {
    pub fn split(master: u64) -> Self {
        Self { generator: derive(master, 1), partition: derive(master, 2), solver: derive(master, 3) }
    }
}

/// First word of the ChaCha stream `key` under `seed`.
pub fn derive(seed: u64, key: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng.next_u64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_differ_and_repeat() {
        let s = Seeds::split(7);
        assert_ne!(s.generator, s.partition);
        assert_ne!(s.partition, s.solver);
        assert_eq!(s, Seeds::split(7));
        assert_ne!(s, Seeds::split(8));
    }
}
