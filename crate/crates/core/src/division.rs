//! Circuit division: balanced two-way qubit split refined by a
//! Kernighan–Lin style swap search.
//!
//! The objective trades off the number of *active* qubits (those with at
//! least one cross-community gate) against the number of cross gates:
//!
//! ```text
//! L = k * (|Qa1| + |Qa2|) + (1 - k) * |E3|
//! ```
//!
//! Only swap candidates are considered for exchange: active qubits whose
//! cross incidence is at least their internal incidence.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::{Circuit, SubCircuit};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivisionOptions {
    /// Weight of the active-qubit term, in `[0, 1]`.
    pub k: f64,
    /// Maximum number of committed swaps.
    pub max_iter: usize,
    pub seed: u64,
}

impl DivisionOptions {
    /// `k = 0.5`, `max_iter = 10 * num_qubits`.
    pub fn for_circuit(c: &Circuit, seed: u64) -> Self {
        Self { k: 0.5, max_iter: 10 * c.num_qubits(), seed }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.k) {
            return Err(format!("k must lie in [0, 1], got {}", self.k));
        }
        Ok(())
    }
}

/// Two qubit communities, the induced gate classes, and the active/resolved
/// classification of each side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub q1: BTreeSet<usize>,
    pub q2: BTreeSet<usize>,
    /// Gate indices with both endpoints in `q1`.
    pub e1: Vec<usize>,
    /// Gate indices with both endpoints in `q2`.
    pub e2: Vec<usize>,
    /// Cross gate indices.
    pub e3: Vec<usize>,
    pub qa1: BTreeSet<usize>,
    pub qa2: BTreeSet<usize>,
    pub qr1: BTreeSet<usize>,
    pub qr2: BTreeSet<usize>,
}

impl Partition {
    /// Classifies gates and qubits for the split `q1` / complement.
    pub fn from_q1(c: &Circuit, q1: impl IntoIterator<Item = usize>) -> Self {
        let q1: BTreeSet<usize> = q1.into_iter().collect();
        let q2: BTreeSet<usize> = (0..c.num_qubits()).filter(|q| !q1.contains(q)).collect();
        let (mut e1, mut e2, mut e3) = (Vec::new(), Vec::new(), Vec::new());
        let (mut qa1, mut qa2) = (BTreeSet::new(), BTreeSet::new());
        for (i, g) in c.gates().iter().enumerate() {
            match (q1.contains(&g.0), q1.contains(&g.1)) {
                (true, true) => e1.push(i),
                (false, false) => e2.push(i),
                (true, false) => {
                    e3.push(i);
                    qa1.insert(g.0);
                    qa2.insert(g.1);
                }
                (false, true) => {
                    e3.push(i);
                    qa1.insert(g.1);
                    qa2.insert(g.0);
                }
            }
        }
        let qr1 = q1.difference(&qa1).copied().collect();
        let qr2 = q2.difference(&qa2).copied().collect();
        Self { q1, q2, e1, e2, e3, qa1, qa2, qr1, qr2 }
    }

    pub fn active(&self) -> BTreeSet<usize> {
        self.qa1.union(&self.qa2).copied().collect()
    }

    pub fn resolved(&self) -> BTreeSet<usize> {
        self.qr1.union(&self.qr2).copied().collect()
    }

    fn with_swap(&self, c: &Circuit, u: usize, v: usize) -> Self {
        let q1 = self.q1.iter().copied().filter(|&q| q != u).chain(std::iter::once(v));
        Self::from_q1(c, q1)
    }
}

/// Picks `q1` as a uniformly random `ceil(|Q| / 2)`-subset.
pub fn initial_partition(c: &Circuit, seed: u64) -> Partition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut qubits: Vec<usize> = (0..c.num_qubits()).collect();
    qubits.shuffle(&mut rng);
    let half = c.num_qubits().div_ceil(2);
    Partition::from_q1(c, qubits[..half].iter().copied())
}

pub fn loss(p: &Partition, k: f64) -> f64 {
    k * (p.qa1.len() + p.qa2.len()) as f64 + (1.0 - k) * p.e3.len() as f64
}

/// Active qubits whose cross incidence is at least their internal incidence,
/// per side. If exactly one side comes out empty it falls back to that
/// side's full active set.
pub fn swap_candidates(c: &Circuit, p: &Partition) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let count = |q: usize, set: &[usize]| set.iter().filter(|&&i| c.gates()[i].touches(q)).count();
    let pick = |active: &BTreeSet<usize>, internal: &[usize]| -> BTreeSet<usize> {
        active
            .iter()
            .copied()
            .filter(|&q| count(q, &p.e3) >= count(q, internal))
            .collect()
    };
    let mut s1 = pick(&p.qa1, &p.e1);
    let mut s2 = pick(&p.qa2, &p.e2);
    match (s1.is_empty(), s2.is_empty()) {
        (true, false) => s1 = p.qa1.clone(),
        (false, true) => s2 = p.qa2.clone(),
        _ => {}
    }
    (s1, s2)
}

/// One committed exchange during [`refine_traced`].
#[derive(Debug, Clone, PartialEq)]
pub struct SwapStep {
    pub u: usize,
    pub v: usize,
    pub loss_before: f64,
    pub loss_after: f64,
}

pub fn refine(c: &Circuit, p: &Partition, opts: &DivisionOptions) -> Partition {
    refine_traced(c, p, opts).0
}

/// Greedy swap refinement. Each round evaluates every candidate pair in
/// `Qs1 x Qs2` and commits the pair with the smallest loss strictly below the
/// current one, ties going to the lexicographically smallest `(u, v)`. Stops
/// when both candidate sets are empty, no pair improves, or `max_iter` swaps
/// have been committed.
pub fn refine_traced(c: &Circuit, p: &Partition, opts: &DivisionOptions) -> (Partition, Vec<SwapStep>) {
    let mut current = p.clone();
    let mut trace = Vec::new();
    while trace.len() < opts.max_iter {
        let (s1, s2) = swap_candidates(c, &current);
        if s1.is_empty() && s2.is_empty() {
            break;
        }
        let current_loss = loss(&current, opts.k);
        let mut best: Option<(f64, usize, usize, Partition)> = None;
        for &u in &s1 {
            for &v in &s2 {
                let candidate = current.with_swap(c, u, v);
                let l = loss(&candidate, opts.k);
                let bound = best.as_ref().map_or(current_loss, |b| b.0);
                if l < bound {
                    best = Some((l, u, v, candidate));
                }
            }
        }
        let Some((l, u, v, next)) = best else { break };
        trace.push(SwapStep { u, v, loss_before: current_loss, loss_after: l });
        current = next;
    }
    (current, trace)
}

/// Random balanced split followed by refinement.
pub fn divide(c: &Circuit, opts: &DivisionOptions) -> Partition {
    refine(c, &initial_partition(c, opts.seed), opts)
}

/// `QC1 = (q1, e1)`, `QC2 = (q2, e2)`, `QC3 = (qubits of e3, e3)`.
pub fn split_circuit(c: &Circuit, p: &Partition) -> (SubCircuit, SubCircuit, SubCircuit) {
    let take = |ids: &[usize]| ids.iter().map(|&i| (i, c.gates()[i])).collect::<Vec<_>>();
    let qc1 = SubCircuit { qubits: p.q1.iter().copied().collect(), gates: take(&p.e1) };
    let qc2 = SubCircuit { qubits: p.q2.iter().copied().collect(), gates: take(&p.e2) };
    let qc3 = SubCircuit { qubits: p.active().into_iter().collect(), gates: take(&p.e3) };
    (qc1, qc2, qc3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::generate_rand3reg;

    fn k4() -> Circuit {
        generate_rand3reg(4, 1).unwrap()
    }

    fn six_cycle() -> Circuit {
        Circuit::new(6, (0..6).map(|i| (i, (i + 1) % 6)), "c6").unwrap()
    }

    #[test]
    fn k4_balanced_split() {
        for seed in 0..8 {
            let p = initial_partition(&k4(), seed);
            assert_eq!((p.q1.len(), p.q2.len()), (2, 2));
            assert_eq!(p.e3.len(), 4);
            assert_eq!(p.qa1, p.q1);
            assert_eq!(p.qa2, p.q2);
            assert!(p.qr1.is_empty() && p.qr2.is_empty());
            assert_eq!(loss(&p, 0.5), 4.0);
        }
    }

    #[test]
    fn single_edge_is_cut() {
        let c = Circuit::new(2, [(0, 1)], "").unwrap();
        let p = initial_partition(&c, 3);
        assert_eq!(p.q1.len(), 1);
        assert_eq!(p.e3, vec![0]);
        assert_eq!(p.active().len(), 2);
    }

    #[test]
    fn disjoint_edges_resolve_fully() {
        let c = Circuit::new(4, [(0, 1), (2, 3)], "").unwrap();
        let seed = (0..100)
            .find(|&s| initial_partition(&c, s).q1 == BTreeSet::from([0, 1]))
            .expect("some seed puts {0,1} first");
        let p = initial_partition(&c, seed);
        assert_eq!((p.e1.clone(), p.e2.clone()), (vec![0], vec![1]));
        assert!(p.e3.is_empty());
        assert_eq!(p.resolved().len(), 4);
        for k in [0.0, 0.5, 1.0] {
            assert_eq!(loss(&p, k), 0.0);
        }
        let (s1, s2) = swap_candidates(&c, &p);
        assert!(s1.is_empty() && s2.is_empty());
        let opts = DivisionOptions { k: 0.5, max_iter: 10, seed };
        assert_eq!(refine(&c, &p, &opts), p);
        let (qc1, qc2, qc3) = split_circuit(&c, &p);
        assert_eq!((qc1.num_gates(), qc2.num_gates(), qc3.num_gates()), (1, 1, 0));
    }

    #[test]
    fn loss_at_unit_weight_counts_active_qubits() {
        let p = Partition::from_q1(&six_cycle(), [0, 2, 4]);
        assert_eq!(loss(&p, 1.0), 6.0);
    }

    #[test]
    fn k4_candidates_are_all_active() {
        let c = k4();
        let p = Partition::from_q1(&c, [0, 1]);
        let (s1, s2) = swap_candidates(&c, &p);
        assert_eq!(s1, p.qa1);
        assert_eq!(s2, p.qa2);
    }

    #[test]
    fn six_cycle_candidates() {
        let c = six_cycle();
        let p = Partition::from_q1(&c, [0, 1, 2]);
        let (s1, _) = swap_candidates(&c, &p);
        assert_eq!(s1, BTreeSet::from([0, 2]));
        assert!(!p.qa1.contains(&1));
    }

    #[test]
    fn six_cycle_refines_to_contiguous_split() {
        let c = six_cycle();
        let p = Partition::from_q1(&c, [0, 2, 4]);
        assert_eq!(loss(&p, 0.5), 6.0);
        let opts = DivisionOptions { k: 0.5, max_iter: 60, seed: 0 };
        let (r, trace) = refine_traced(&c, &p, &opts);
        assert_eq!(loss(&r, 0.5), 3.0);
        assert!(!trace.is_empty());
        assert_eq!(r.q1.len(), 3);
    }

    #[test]
    fn zero_budget_is_identity() {
        let c = six_cycle();
        let p = Partition::from_q1(&c, [0, 2, 4]);
        let opts = DivisionOptions { k: 0.5, max_iter: 0, seed: 0 };
        assert_eq!(refine(&c, &p, &opts), p);
    }

    #[test]
    fn k4_split_circuit() {
        let c = k4();
        let p = Partition::from_q1(&c, [0, 1]);
        let (qc1, qc2, qc3) = split_circuit(&c, &p);
        assert_eq!((qc1.num_gates(), qc2.num_gates()), (1, 1));
        assert_eq!(qc3.num_gates(), 4);
        assert_eq!(qc3.qubits, vec![0, 1, 2, 3]);
    }
}
