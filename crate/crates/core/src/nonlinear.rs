//! The bilinear term `B(u, v) = P div(u ⊗ v)`.
//!
//! Products are exact lattice convolutions truncated back to the mode set.
//! `Direct` sums over all mode pairs and serves as the reference; `Fast`
//! goes through the zero-padded physical grid in [`crate::transform`].

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::{enforce_hermitian, leray_project, ScalarField, SpectralVectorField, Vec3};
use crate::lattice::FrequencyLattice;
use crate::transform::{unpack_pair, PaddedTransform};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvolutionMethod {
    Direct,
    #[default]
    Fast,
}

impl std::str::FromStr for ConvolutionMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "direct" => Ok(Self::Direct),
            "fast" => Ok(Self::Fast),
            other => Err(format!("unknown convolution method `{other}`")),
        }
    }
}

pub type Mat3 = [[Complex64; 3]; 3];

/// Coefficients of `u ⊗ v`; entry `[j][i]` holds `(u_j v_i)^`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    lattice: FrequencyLattice,
    coeffs: Vec<Mat3>,
}

impl TensorField {
    pub fn lattice(&self) -> &FrequencyLattice {
        &self.lattice
    }

    pub fn coeffs(&self) -> &[Mat3] {
        &self.coeffs
    }

    /// Frobenius magnitude per mode.
    pub fn frobenius(&self) -> impl Iterator<Item = f64> + '_ {
        self.coeffs
            .iter()
            .map(|m| m.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
    }

    /// `(div T)_i = i Σ_j k_j T[j][i]`, without projection.
    pub fn divergence(&self) -> SpectralVectorField {
        let lat = &self.lattice;
        let i_unit = Complex64::new(0.0, 1.0);
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, t)| {
                let k = lat.mode(idx);
                std::array::from_fn(|i| {
                    let s = t[0][i] * k[0] as f64 + t[1][i] * k[1] as f64 + t[2][i] * k[2] as f64;
                    i_unit * s
                })
            })
            .collect();
        SpectralVectorField::from_coeffs(lat, coeffs)
    }
}

/// `ĥ(k) = Σ_m f̂(k-m) ĝ(m)` over `m, k-m` in the lattice.
pub fn convolve_direct(f: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
    f.lattice().check_same(g.lattice())?;
    let lat = f.lattice();
    let fc = f.coeffs();
    let gc = g.coeffs();
    let nonzero_g: Vec<usize> = (0..gc.len()).filter(|&m| gc[m] != Complex64::new(0.0, 0.0)).collect();
    let out: Vec<Complex64> = lat
        .modes()
        .par_iter()
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for &m in &nonzero_g {
                let q = lat.mode(m);
                if let Some(j) = lat.index_of([k[0] - q[0], k[1] - q[1], k[2] - q[2]]) {
                    acc += fc[j] * gc[m];
                }
            }
            acc
        })
        .collect();
    Ok(ScalarField::from_coeffs(lat, out))
}

/// Same result as [`convolve_direct`] through the padded transform.
pub fn convolve_fast(f: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
    f.lattice().check_same(g.lattice())?;
    let lat = f.lattice();
    let tr = PaddedTransform::for_lattice(lat);
    let pf = tr.to_physical(f.coeffs().iter().copied());
    let pg = tr.to_physical(g.coeffs().iter().copied());
    let prod: Vec<Complex64> = pf.iter().zip(&pg).map(|(a, b)| a * b).collect();
    Ok(ScalarField::from_coeffs(lat, tr.to_spectral(prod)))
}

pub fn convolve(f: &ScalarField, g: &ScalarField, method: ConvolutionMethod) -> Result<ScalarField> {
    match method {
        ConvolutionMethod::Direct => convolve_direct(f, g),
        ConvolutionMethod::Fast => convolve_fast(f, g),
    }
}

/// `u ⊗ v` by componentwise convolution.
pub fn tensor_product(u: &SpectralVectorField, v: &SpectralVectorField, method: ConvolutionMethod) -> Result<TensorField> {
    u.lattice().check_same(v.lattice())?;
    match method {
        ConvolutionMethod::Direct => tensor_direct(u, v),
        ConvolutionMethod::Fast => Ok(tensor_fast(u, v)),
    }
}

fn tensor_direct(u: &SpectralVectorField, v: &SpectralVectorField) -> Result<TensorField> {
    let lat = u.lattice().clone();
    let uc: Vec<ScalarField> = (0..3).map(|c| u.component(c)).collect();
    let vc: Vec<ScalarField> = (0..3).map(|c| v.component(c)).collect();
    let mut coeffs = vec![[[Complex64::new(0.0, 0.0); 3]; 3]; lat.len()];
    for j in 0..3 {
        for i in 0..3 {
            let h = convolve_direct(&uc[j], &vc[i])?;
            for (dst, c) in coeffs.iter_mut().zip(h.coeffs()) {
                dst[j][i] = *c;
            }
        }
    }
    Ok(TensorField { lattice: lat, coeffs })
}

/// Physical-grid products with two real grid functions packed per complex
/// transform.
fn tensor_fast(u: &SpectralVectorField, v: &SpectralVectorField) -> TensorField {
    let lat = u.lattice().clone();
    if u.is_zero() || v.is_zero() {
        return TensorField {
            coeffs: vec![[[Complex64::new(0.0, 0.0); 3]; 3]; lat.len()],
            lattice: lat,
        };
    }
    let tr = PaddedTransform::for_lattice(&lat);
    let i_unit = Complex64::new(0.0, 1.0);
    let packed = |a: &SpectralVectorField, ca: usize, b: &SpectralVectorField, cb: usize| {
        tr.to_physical(a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| x[ca] + i_unit * y[cb]))
    };
    let symmetric = u == v;

    // Real physical components.
    let (up, vp): ([Vec<f64>; 3], [Vec<f64>; 3]) = if symmetric {
        let g01 = packed(u, 0, u, 1);
        let g2 = tr.to_physical(u.coeffs().iter().map(|x| x[2]));
        let up = [
            g01.iter().map(|c| c.re).collect(),
            g01.iter().map(|c| c.im).collect(),
            g2.iter().map(|c| c.re).collect(),
        ];
        (up.clone(), up)
    } else {
        let g01 = packed(u, 0, u, 1);
        let g2 = packed(u, 2, v, 0);
        let g3 = packed(v, 1, v, 2);
        (
            [
                g01.iter().map(|c| c.re).collect(),
                g01.iter().map(|c| c.im).collect(),
                g2.iter().map(|c| c.re).collect(),
            ],
            [
                g2.iter().map(|c| c.im).collect(),
                g3.iter().map(|c| c.re).collect(),
                g3.iter().map(|c| c.im).collect(),
            ],
        )
    };

    let pairs: Vec<(usize, usize)> = if symmetric {
        vec![(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
    } else {
        (0..3).flat_map(|j| (0..3).map(move |i| (j, i))).collect()
    };
    let mut spectra: Vec<Vec<Complex64>> = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(2) {
        let (j0, i0) = chunk[0];
        let second = chunk.get(1).copied();
        let grid: Vec<Complex64> = (0..tr.grid_len())
            .map(|x| {
                let re = up[j0][x] * vp[i0][x];
                let im = second.map_or(0.0, |(j1, i1)| up[j1][x] * vp[i1][x]);
                Complex64::new(re, im)
            })
            .collect();
        let h = tr.to_spectral(grid);
        let (a, b) = unpack_pair(&lat, &h);
        spectra.push(a);
        if second.is_some() {
            spectra.push(b);
        }
    }

    let mut coeffs = vec![[[Complex64::new(0.0, 0.0); 3]; 3]; lat.len()];
    for ((j, i), s) in pairs.iter().zip(&spectra) {
        for (dst, c) in coeffs.iter_mut().zip(s) {
            dst[*j][*i] = *c;
            if symmetric {
                dst[*i][*j] = *c;
            }
        }
    }
    TensorField { lattice: lat, coeffs }
}

/// `B(u, v) = P div(u ⊗ v)`, Hermitian and divergence-free.
pub fn bilinear_b(u: &SpectralVectorField, v: &SpectralVectorField, method: ConvolutionMethod) -> Result<SpectralVectorField> {
    let t = tensor_product(u, v, method)?;
    Ok(leray_project(&enforce_hermitian(&t.divergence())))
}

/// Relative difference `max_k |a - b| / max_k |b|` (0 when both vanish).
pub fn relative_max_diff(a: &[Vec3], b: &[Vec3]) -> f64 {
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
        num = num.max(crate::field::vec_norm(&d));
        den = den.max(crate::field::vec_norm(y));
    }
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
