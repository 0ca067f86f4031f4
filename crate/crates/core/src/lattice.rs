//! Frequency lattice of a 2π-periodic box.
//!
//! Modes are the nonzero integer vectors with `|k_i| <= M/2 - 1`. The
//! Nyquist planes `|k_i| = M/2` are left out so that `k -> -k` is a total
//! involution on the mode set, and the zero mode is left out so that every
//! field is mean-free and `|k| >= 1` holds everywhere.
//!
//! The canonical enumeration is lexicographic in `(k1, k2, k3)` over the
//! cube `[-h, h]^3` with the center removed. Reversing that order is exactly
//! the conjugate map, so the partner of mode `i` is `len - 1 - i`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Period of the box. Fixed so that lattice frequencies are integers.
pub const PERIOD: f64 = 2.0 * std::f64::consts::PI;

#[derive(Clone)]
pub struct FrequencyLattice {
    inner: Arc<Inner>,
}

struct Inner {
    m: usize,
    half: i32,
    modes: Vec<[i32; 3]>,
    radius: Vec<f64>,
    radius_sq: Vec<f64>,
}

impl FrequencyLattice {
    pub fn new(m: usize) -> Result<Self> {
        if !m.is_multiple_of(2) || !(4..=128).contains(&m) {
            return Err(Error::InvalidLatticeSize(m));
        }
        let half = (m / 2 - 1) as i32;
        let side = (2 * half + 1) as usize;
        let mut modes = Vec::with_capacity(side * side * side - 1);
        for k1 in -half..=half {
            for k2 in -half..=half {
                for k3 in -half..=half {
                    if (k1, k2, k3) != (0, 0, 0) {
                        modes.push([k1, k2, k3]);
                    }
                }
            }
        }
        let radius_sq: Vec<f64> = modes
            .iter()
            .map(|k| (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64)
            .collect();
        let radius = radius_sq.iter().map(|r| r.sqrt()).collect();
        Ok(Self {
            inner: Arc::new(Inner {
                m,
                half,
                modes,
                radius,
                radius_sq,
            }),
        })
    }

    /// Grid size `M` the lattice was built for.
    pub fn m(&self) -> usize {
        self.inner.m
    }

    /// Largest retained component magnitude, `M/2 - 1`.
    pub fn half(&self) -> i32 {
        self.inner.half
    }

    pub fn period(&self) -> f64 {
        PERIOD
    }

    /// Number of modes, `(M-1)^3 - 1`.
    pub fn len(&self) -> usize {
        self.inner.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.modes.is_empty()
    }

    pub fn modes(&self) -> &[[i32; 3]] {
        &self.inner.modes
    }

    pub fn mode(&self, idx: usize) -> [i32; 3] {
        self.inner.modes[idx]
    }

    /// Euclidean `|k|` per mode.
    pub fn radii(&self) -> &[f64] {
        &self.inner.radius
    }

    /// `|k|^2` per mode.
    pub fn radii_sq(&self) -> &[f64] {
        &self.inner.radius_sq
    }

    pub fn conjugate(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }

    /// Modes with index at or above this value form one representative of
    /// every conjugate pair.
    pub fn positive_half_start(&self) -> usize {
        self.len() / 2
    }

    /// Canonical index of `k`, or `None` if `k` is zero or outside the cube.
    pub fn index_of(&self, k: [i32; 3]) -> Option<usize> {
        let h = self.inner.half;
        if k.iter().any(|c| c.abs() > h) || k == [0, 0, 0] {
            return None;
        }
        let side = 2 * h + 1;
        let g = (((k[0] + h) * side + (k[1] + h)) * side + (k[2] + h)) as usize;
        let center = (self.len()) / 2;
        Some(if g < center { g } else { g - 1 })
    }

    pub fn same_as(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.m() == other.m()
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::LatticeMismatch {
                left: self.m(),
                right: other.m(),
            })
        }
    }
}

impl PartialEq for FrequencyLattice {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl fmt::Debug for FrequencyLattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrequencyLattice")
            .field("m", &self.m())
            .field("modes", &self.len())
            .finish()
    }
}

/// Builds the lattice for grid size `m`.
pub fn build_lattice(m: usize) -> Result<FrequencyLattice> {
    FrequencyLattice::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_counts() {
        let l4 = build_lattice(4).unwrap();
        assert_eq!(l4.len(), 26);
        assert!(l4.modes().iter().all(|k| k.iter().all(|c| c.abs() <= 1)));
        assert_eq!(build_lattice(6).unwrap().len(), 124);
        assert_eq!(build_lattice(8).unwrap().len(), 342);
    }

    #[test]
    fn rejects_bad_sizes() {
        for m in [0, 2, 3, 7, 130] {
            assert!(matches!(
                build_lattice(m),
                Err(Error::InvalidLatticeSize(_))
            ));
        }
        assert!(build_lattice(128).is_ok());
    }

    #[test]
    fn conjugate_is_total_involution() {
        let l = build_lattice(6).unwrap();
        for (i, k) in l.modes().iter().enumerate() {
            let j = l.conjugate(i);
            assert_ne!(i, j);
            assert_eq!(l.conjugate(j), i);
            assert_eq!(l.mode(j), [-k[0], -k[1], -k[2]]);
        }
    }

    #[test]
    fn index_round_trip() {
        let l = build_lattice(8).unwrap();
        for (i, k) in l.modes().iter().enumerate() {
            assert_eq!(l.index_of(*k), Some(i));
        }
        assert_eq!(l.index_of([0, 0, 0]), None);
        assert_eq!(l.index_of([4, 0, 0]), None);
    }

    #[test]
    fn positive_half_has_one_of_each_pair() {
        let l = build_lattice(6).unwrap();
        let start = l.positive_half_start();
        for i in start..l.len() {
            assert!(l.conjugate(i) < start);
        }
        assert_eq!(l.len() - start, l.len() / 2);
    }
}
