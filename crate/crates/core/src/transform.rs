//! Zero-padded 3D transforms between lattice coefficients and a physical grid.
//!
//! The padded grid has `P = 2M` points per axis. Products of two fields with
//! modes `|k_i| <= h` have modes `|k_i| <= 2h`, and `P > 3h` keeps every
//! alias off the retained modes, so truncating the transformed product
//! reproduces the exact lattice convolution.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::lattice::FrequencyLattice;

pub(crate) struct PaddedTransform {
    p: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Flat padded-grid index of each lattice mode.
    slots: Vec<usize>,
}

fn cache() -> &'static Mutex<HashMap<usize, Arc<PaddedTransform>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<PaddedTransform>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl PaddedTransform {
    pub(crate) fn for_lattice(lattice: &FrequencyLattice) -> Arc<Self> {
        let mut map = cache().lock().expect("transform cache poisoned");
        map.entry(lattice.m())
            .or_insert_with(|| Arc::new(Self::build(lattice)))
            .clone()
    }

    fn build(lattice: &FrequencyLattice) -> Self {
        let p = 2 * lattice.m();
        let mut planner = FftPlanner::new();
        let wrap = |c: i32| c.rem_euclid(p as i32) as usize;
        let slots = lattice
            .modes()
            .iter()
            .map(|k| (wrap(k[0]) * p + wrap(k[1])) * p + wrap(k[2]))
            .collect();
        Self {
            p,
            forward: planner.plan_fft_forward(p),
            inverse: planner.plan_fft_inverse(p),
            slots,
        }
    }

    pub(crate) fn grid_len(&self) -> usize {
        self.p * self.p * self.p
    }

    /// `Σ_k ĉ(k) e^{ik·x}` on the padded grid.
    pub(crate) fn to_physical(&self, coeffs: impl Iterator<Item = Complex64>) -> Vec<Complex64> {
        let mut grid = vec![Complex64::new(0.0, 0.0); self.grid_len()];
        for (slot, c) in self.slots.iter().zip(coeffs) {
            grid[*slot] = c;
        }
        self.transform_3d(&mut grid, &self.inverse);
        grid
    }

    /// Lattice coefficients of a grid function (truncated to the lattice).
    pub(crate) fn to_spectral(&self, mut grid: Vec<Complex64>) -> Vec<Complex64> {
        self.transform_3d(&mut grid, &self.forward);
        let scale = 1.0 / self.grid_len() as f64;
        self.slots.iter().map(|&s| grid[s] * scale).collect()
    }

    fn transform_3d(&self, grid: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let p = self.p;
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        // z lines are contiguous
        fft.process_with_scratch(grid, &mut scratch);
        let mut lines = vec![Complex64::new(0.0, 0.0); p * p];
        // y lines, one x-plane at a time
        for x in 0..p {
            for y in 0..p {
                for z in 0..p {
                    lines[z * p + y] = grid[(x * p + y) * p + z];
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            for y in 0..p {
                for z in 0..p {
                    grid[(x * p + y) * p + z] = lines[z * p + y];
                }
            }
        }
        // x lines, one y-plane at a time
        for y in 0..p {
            for x in 0..p {
                for z in 0..p {
                    lines[z * p + x] = grid[(x * p + y) * p + z];
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            for x in 0..p {
                for z in 0..p {
                    grid[(x * p + y) * p + z] = lines[z * p + x];
                }
            }
        }
    }
}

/// Splits the transform of `p + i q` (p, q real on the grid) into the
/// coefficients of `p` and `q`.
pub(crate) fn unpack_pair(lattice: &FrequencyLattice, h: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let half_i = Complex64::new(0.0, -0.5);
    let n = h.len();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for i in 0..n {
        let hc = h[lattice.conjugate(i)].conj();
        a.push((h[i] + hc) * 0.5);
        b.push((h[i] - hc) * half_i);
    }
    (a, b)
}
