//! Weighted ℓ¹ Fourier norms `Σ_k |k|^ρ e^{a|k|^{1/σ}} |û(k)|`.
//!
//! With `a = 0` these are the unweighted `X^ρ` norms. Sums run in canonical
//! mode order with Neumaier compensation, so results do not depend on how a
//! caller schedules work.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{vec_norm, ScalarField, SpectralVectorField};
use crate::lattice::FrequencyLattice;
use crate::nonlinear::TensorField;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GevreyParams {
    pub rho: i32,
    pub a: f64,
    pub sigma: f64,
}

impl GevreyParams {
    pub fn new(rho: i32, a: f64, sigma: f64) -> Result<Self> {
        let p = Self { rho, a, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-1..=1).contains(&self.rho) {
            return Err(Error::InvalidParameter(format!("rho={} not in {{-1,0,1}}", self.rho)));
        }
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidParameter(format!("a={} must be >= 0", self.a)));
        }
        if !(self.sigma > 1.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma={} must be > 1", self.sigma)));
        }
        Ok(())
    }

    /// Same `(a, σ)` with a different exponent `ρ`.
    pub fn with_rho(self, rho: i32) -> Self {
        Self { rho, ..self }
    }

    pub fn with_a(self, a: f64) -> Self {
        Self { a, ..self }
    }
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

fn weight_from_radius(r: f64, p: &GevreyParams) -> f64 {
    let power = match p.rho {
        -1 => 1.0 / r,
        0 => 1.0,
        _ => r,
    };
    if p.a == 0.0 {
        power
    } else {
        power * (p.a * r.powf(1.0 / p.sigma)).exp()
    }
}

/// `|k|^ρ e^{a|k|^{1/σ}}` for a nonzero frequency.
pub fn gevrey_weight(k: [i32; 3], p: &GevreyParams) -> Result<f64> {
    if k == [0, 0, 0] {
        return Err(Error::ZeroFrequency);
    }
    p.validate()?;
    let r = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
    Ok(weight_from_radius(r, p))
}

/// Per-mode weights in canonical order.
pub fn weights(lattice: &FrequencyLattice, p: &GevreyParams) -> Vec<f64> {
    lattice
        .radii()
        .iter()
        .map(|&r| weight_from_radius(r, p))
        .collect()
}

/// Weighted sum of per-mode magnitudes.
pub fn weighted_sum(lattice: &FrequencyLattice, p: &GevreyParams, magnitudes: impl Iterator<Item = f64>) -> f64 {
    lattice
        .radii()
        .iter()
        .zip(magnitudes)
        .map(|(&r, m)| if m == 0.0 { 0.0 } else { weight_from_radius(r, p) * m })
        .collect::<CompensatedSum>()
        .value()
}

/// `‖f‖_{Z^ρ_{a,σ}}` with the Euclidean magnitude of `û(k) ∈ ℂ³`.
pub fn z_norm(f: &SpectralVectorField, p: &GevreyParams) -> f64 {
    weighted_sum(f.lattice(), p, f.coeffs().iter().map(vec_norm))
}

pub fn z_norm_scalar(f: &ScalarField, p: &GevreyParams) -> f64 {
    weighted_sum(f.lattice(), p, f.coeffs().iter().map(|c| c.norm()))
}

/// Tensor norm with the Frobenius magnitude of each 3×3 coefficient.
pub fn z_norm_tensor(t: &TensorField, p: &GevreyParams) -> f64 {
    weighted_sum(t.lattice(), p, t.frobenius())
}

/// `x² e^{-b x^{1/σ}}` with `b = a/√σ - a/σ`.
pub fn lemma4_profile(x: f64, a: f64, sigma: f64) -> f64 {
    let b = a / sigma.sqrt() - a / sigma;
    if x == 0.0 {
        return 0.0;
    }
    (2.0 * x.ln() - b * x.powf(1.0 / sigma)).exp()
}

/// `sup_{x >= 0} x² e^{-b x^{1/σ}}`, attained at `x* = (2σ/b)^σ`.
pub fn lemma4_constant(a: f64, sigma: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("a={a} must be > 0")));
    }
    if !(sigma > 1.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma={sigma} must be > 1")));
    }
    let b = a / sigma.sqrt() - a / sigma;
    let ln_xstar = sigma * (2.0 * sigma / b).ln();
    // ln c = 2 ln x* - b x*^{1/σ} = 2 ln x* - 2σ
    let c = (2.0 * ln_xstar - 2.0 * sigma).exp();
    let xstar = ln_xstar.exp();
    debug_assert!([0.5, 0.9, 0.999, 1.001, 1.1, 2.0]
        .iter()
        .all(|s| lemma4_profile(xstar * s, a, sigma) <= c * (1.0 + 1e-12)));
    Ok(c)
}

/// Location `x*` of the maximum in [`lemma4_constant`].
pub fn lemma4_argmax(a: f64, sigma: f64) -> f64 {
    let b = a / sigma.sqrt() - a / sigma;
    (2.0 * sigma / b).powf(sigma)
}
