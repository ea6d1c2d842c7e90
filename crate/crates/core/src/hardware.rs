//! Site-discretized AOD/SLM array and the diagonal-quadrant plane split.
//!
//! Sites are spaced beyond the interaction range, so "within the blockade
//! radius" means "on the same site". There is one SLM trap per site and one
//! AOD row and column deflector per grid line.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HardwareError {
    #[error("array side {0} is too small (need at least 2)")]
    ArrayTooSmall(usize),
    #[error("array side {0} is too small to split into two regions (need at least 4)")]
    RegionTooSmall(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArraySpec {
    n: usize,
}

impl ArraySpec {
    pub fn new(n: usize) -> Result<Self, HardwareError> {
        if n < 2 {
            return Err(HardwareError::ArrayTooSmall(n));
        }
        Ok(Self { n })
    }

    /// Side length in sites.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn aod_rows(&self) -> usize {
        self.n
    }

    pub fn aod_cols(&self) -> usize {
        self.n
    }

    pub fn num_sites(&self) -> usize {
        self.n * self.n
    }

    /// The whole array as a region.
    pub fn full(&self) -> Region {
        Region {
            x_range: 0..self.n,
            y_range: 0..self.n,
            col_range: 0..self.n,
            row_range: 0..self.n,
        }
    }
}

/// A rectangular block of sites together with the AOD lines it owns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub x_range: Range<usize>,
    pub y_range: Range<usize>,
    pub col_range: Range<usize>,
    pub row_range: Range<usize>,
}

impl Region {
    pub fn contains_site(&self, x: usize, y: usize) -> bool {
        site_in_region(self, x, y)
    }

    pub fn num_sites(&self) -> usize {
        self.x_range.len() * self.y_range.len()
    }
}

pub fn site_in_region(r: &Region, x: usize, y: usize) -> bool {
    r.x_range.contains(&x) && r.y_range.contains(&y)
}

/// Splits the plane into the upper-left and lower-right quadrants, cutting
/// both axes and both AOD index sets at `ceil(n / 2)`. The off-diagonal
/// quadrants belong to neither region.
pub fn split_plane(a: &ArraySpec) -> Result<(Region, Region), HardwareError> {
    if a.n < 4 {
        return Err(HardwareError::RegionTooSmall(a.n));
    }
    let h = a.n.div_ceil(2);
    let first = Region { x_range: 0..h, y_range: 0..h, col_range: 0..h, row_range: 0..h };
    let second = Region {
        x_range: h..a.n,
        y_range: h..a.n,
        col_range: h..a.n,
        row_range: h..a.n,
    };
    Ok((first, second))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disjoint(a: &Range<usize>, b: &Range<usize>) -> bool {
        a.end <= b.start || b.end <= a.start
    }

    #[test]
    fn six_by_six_split() {
        let (r1, r2) = split_plane(&ArraySpec::new(6).unwrap()).unwrap();
        assert_eq!(r1.col_range, 0..3);
        assert_eq!(r1.row_range, 0..3);
        assert_eq!(r2.col_range, 3..6);
        assert_eq!(r2.row_range, 3..6);
        assert!(site_in_region(&r1, 0, 0));
        assert!(!site_in_region(&r1, 3, 0));
        assert!(site_in_region(&r2, 5, 5));
    }

    #[test]
    fn odd_and_larger_splits() {
        let (r1, r2) = split_plane(&ArraySpec::new(7).unwrap()).unwrap();
        assert_eq!((r1.x_range, r1.y_range), (0..4, 0..4));
        assert_eq!((r2.x_range, r2.y_range), (4..7, 4..7));
        let (r1, r2) = split_plane(&ArraySpec::new(16).unwrap()).unwrap();
        assert_eq!(r1.x_range, 0..8);
        assert_eq!(r2.x_range, 8..16);
    }

    #[test]
    fn too_small() {
        assert_eq!(split_plane(&ArraySpec::new(3).unwrap()), Err(HardwareError::RegionTooSmall(3)));
        assert_eq!(ArraySpec::new(1), Err(HardwareError::ArrayTooSmall(1)));
    }

    #[test]
    fn regions_share_no_resources() {
        for n in 4..40 {
            let a = ArraySpec::new(n).unwrap();
            let (r1, r2) = split_plane(&a).unwrap();
            assert!(disjoint(&r1.x_range, &r2.x_range));
            assert!(disjoint(&r1.y_range, &r2.y_range));
            assert!(disjoint(&r1.col_range, &r2.col_range));
            assert!(disjoint(&r1.row_range, &r2.row_range));
            for r in [&r1, &r2] {
                assert!(r.x_range.end <= n && r.col_range.end <= n);
            }
        }
    }
}
