//! Heat semigroup `e^{νsΔ}` and exponential-trapezoidal Duhamel quadrature.

use crate::error::{Error, Result};
use crate::field::SpectralVectorField;
use crate::lattice::FrequencyLattice;

/// `û(k) ↦ e^{-ν s |k|²} û(k)`.
pub fn heat_apply(f: &SpectralVectorField, s: f64, nu: f64) -> Result<SpectralVectorField> {
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter(format!("heat time s={s} must be >= 0")));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!("nu={nu} must be > 0")));
    }
    let factors: Vec<f64> = f
        .lattice()
        .radii_sq()
        .iter()
        .map(|k2| (-(nu * k2 * s)).exp())
        .collect();
    Ok(f.map_modes(|i, v| v.map(|c| c * factors[i])))
}

/// `∫₀¹ e^{-z u} u du`
fn phi_start(z: f64) -> f64 {
    if z < 1.0 {
        series(z, |n| 1.0 / (n + 2.0))
    } else {
        (1.0 - (-z).exp() * (1.0 + z)) / (z * z)
    }
}

/// `∫₀¹ e^{-z u} (1-u) du`
fn phi_end(z: f64) -> f64 {
    if z < 1.0 {
        series(z, |n| 1.0 / ((n + 1.0) * (n + 2.0)))
    } else {
        (z - 1.0 + (-z).exp()) / (z * z)
    }
}

/// `Σ_n (-z)^n / n! · c(n)`, for `0 <= z < 1`.
fn series(z: f64, c: impl Fn(f64) -> f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for n in 0..30 {
        let nf = n as f64;
        sum += term * c(nf);
        term *= -z / (nf + 1.0);
    }
    sum
}

/// Per-mode weights of one exponential-trapezoidal step of length `dt`.
///
/// On `[t_n, t_n + dt]` the forcing is linear between its end values and the
/// kernel `e^{-ν(t-τ)|k|²}` is integrated exactly:
/// `I_{n+1} = decay·I_n + w_start·F_n + w_end·F_{n+1}`.
#[derive(Clone, Debug)]
pub struct DuhamelKernel {
    pub dt: f64,
    pub nu: f64,
    pub decay: Vec<f64>,
    pub w_start: Vec<f64>,
    pub w_end: Vec<f64>,
}

impl DuhamelKernel {
    pub fn new(lattice: &FrequencyLattice, dt: f64, nu: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt={dt} must be > 0")));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidParameter(format!("nu={nu} must be > 0")));
        }
        let z: Vec<f64> = lattice.radii_sq().iter().map(|k2| nu * k2 * dt).collect();
        Ok(Self {
            dt,
            nu,
            decay: z.iter().map(|z| (-z).exp()).collect(),
            w_start: z.iter().map(|&z| dt * phi_start(z)).collect(),
            w_end: z.iter().map(|&z| dt * phi_end(z)).collect(),
        })
    }

    /// `decay·prev + w_start·f_start + w_end·f_end`, mode by mode.
    pub fn advance(
        &self,
        prev: &SpectralVectorField,
        f_start: &SpectralVectorField,
        f_end: &SpectralVectorField,
    ) -> SpectralVectorField {
        let fs = f_start.coeffs();
        let fe = f_end.coeffs();
        prev.map_modes(|i, v| {
            std::array::from_fn(|c| v[c] * self.decay[i] + fs[i][c] * self.w_start[i] + fe[i][c] * self.w_end[i])
        })
    }

    /// `e^{νdtΔ} f`.
    pub fn propagate(&self, f: &SpectralVectorField) -> SpectralVectorField {
        f.map_modes(|i, v| v.map(|c| c * self.decay[i]))
    }
}

/// Forcing samples `F(t_i)` on the uniform grid `t_i = i·dt`.
#[derive(Clone, Debug)]
pub struct DuhamelSamples {
    dt: f64,
    fields: Vec<SpectralVectorField>,
}

impl DuhamelSamples {
    pub fn new(dt: f64, fields: Vec<SpectralVectorField>) -> Result<Self> {
        if fields.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "Duhamel quadrature needs at least 2 nodes, got {}",
                fields.len()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt={dt} must be > 0")));
        }
        for f in &fields[1..] {
            fields[0].lattice().check_same(f.lattice())?;
        }
        Ok(Self { dt, fields })
    }

    /// Accepts explicit node times; they must start at 0 and be uniform.
    pub fn from_times(times: &[f64], fields: Vec<SpectralVectorField>) -> Result<Self> {
        if times.len() != fields.len() {
            return Err(Error::GridMismatch(format!(
                "{} times for {} fields",
                times.len(),
                fields.len()
            )));
        }
        if times.len() < 2 {
            return Self::new(1.0, fields);
        }
        if times[0] != 0.0 {
            return Err(Error::GridMismatch("time grid must start at 0".into()));
        }
        let dt = times[1] - times[0];
        for (i, t) in times.iter().enumerate() {
            if !(dt > 0.0) || (t - i as f64 * dt).abs() > 1e-12 * dt.max(*t) {
                return Err(Error::GridMismatch("time grid must be uniform and increasing".into()));
            }
        }
        Self::new(dt, fields)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn fields(&self) -> &[SpectralVectorField] {
        &self.fields
    }

    pub fn end_time(&self) -> f64 {
        self.dt * (self.fields.len() - 1) as f64
    }
}

/// `∫₀^{t_j} e^{ν(t_j-τ)Δ} F(τ) dτ` at every node `t_j`, starting from 0.
pub fn duhamel_trajectory(samples: &DuhamelSamples, nu: f64) -> Result<Vec<SpectralVectorField>> {
    let fields = samples.fields();
    let kernel = DuhamelKernel::new(fields[0].lattice(), samples.dt(), nu)?;
    let mut out = Vec::with_capacity(fields.len());
    out.push(SpectralVectorField::zeros(fields[0].lattice()));
    for n in 0..fields.len() - 1 {
        let next = kernel.advance(&out[n], &fields[n], &fields[n + 1]);
        out.push(next);
    }
    Ok(out)
}

/// The Duhamel integral over the whole grid `[0, t_n]`.
pub fn duhamel_quadrature(samples: &DuhamelSamples, nu: f64) -> Result<SpectralVectorField> {
    Ok(duhamel_trajectory(samples, nu)?.pop().expect("at least two nodes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{divergence_residual, random_divfree_field, single_mode};
    use crate::lattice::build_lattice;
    use crate::norms::{z_norm, GevreyParams};
    use num_complex::Complex64;

    #[test]
    fn heat_identity_and_half_life() {
        let l = build_lattice(6).unwrap();
        let f = random_divfree_field(&l, 0.2, 1.0, 3);
        assert_eq!(heat_apply(&f, 0.0, 1.0).unwrap(), f);
        let s = single_mode(&l, 1.0);
        let h = heat_apply(&s, std::f64::consts::LN_2, 1.0).unwrap();
        assert!((h.get([1, 0, 0]).unwrap()[1].re - 0.5).abs() < 1e-13);
        assert!(heat_apply(&f, -1e-9, 1.0).is_err());
    }

    #[test]
    fn semigroup_property() {
        let l = build_lattice(6).unwrap();
        let f = random_divfree_field(&l, 0.1, 1.0, 9);
        let two = heat_apply(&heat_apply(&f, 0.013, 0.7).unwrap(), 0.21, 0.7).unwrap();
        let one = heat_apply(&f, 0.223, 0.7).unwrap();
        let rel = crate::nonlinear::relative_max_diff(two.coeffs(), one.coeffs());
        assert!(rel <= 1e-13, "{rel}");
        assert_eq!(two.hermitian_defect(), 0.0);
        assert!(divergence_residual(&two) <= 1e-12);
    }

    #[test]
    fn heat_does_not_expand_norms() {
        let l = build_lattice(6).unwrap();
        let f = random_divfree_field(&l, 0.1, 1.0, 4);
        for rho in -1..=1 {
            let p = GevreyParams::new(rho, 1.0, 2.0).unwrap();
            for s in [0.0, 1e-3, 0.5, 10.0] {
                assert!(z_norm(&heat_apply(&f, s, 1.3).unwrap(), &p) <= z_norm(&f, &p));
            }
        }
    }

    #[test]
    fn weight_series_matches_closed_form_near_switch() {
        for z in [0.3f64, 0.7, 0.99, 1.0, 1.01, 2.0] {
            let cs = (1.0 - (-z).exp() * (1.0 + z)) / (z * z);
            let ce = (z - 1.0 + (-z).exp()) / (z * z);
            assert!((series(z, |n| 1.0 / (n + 2.0)) - cs).abs() < 1e-14);
            assert!((series(z, |n| 1.0 / ((n + 1.0) * (n + 2.0))) - ce).abs() < 1e-14);
        }
        assert!((phi_start(0.0) - 0.5).abs() < 1e-16);
        assert!((phi_end(0.0) - 0.5).abs() < 1e-16);
    }

    fn one_mode(l: &FrequencyLattice, k: [i32; 3], amp: f64) -> SpectralVectorField {
        let mut f = SpectralVectorField::zeros(l);
        f.set_pair(k, [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(amp, 0.0)]);
        f
    }

    #[test]
    fn constant_forcing_is_exact() {
        let l = build_lattice(6).unwrap();
        let (nu, dt, n) = (0.8, 0.037, 40);
        for k in [[1, 0, 0], [1, 1, 1], [2, 2, 1]] {
            let kappa = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
            let f = one_mode(&l, k, 1.7);
            let samples = DuhamelSamples::new(dt, vec![f.clone(); n + 1]).unwrap();
            let got = duhamel_quadrature(&samples, nu).unwrap().get(k).unwrap()[2].re;
            let t = dt * n as f64;
            let exact = (1.0 - (-nu * kappa * t).exp()) / (nu * kappa) * 1.7;
            assert!((got - exact).abs() <= 1e-13 * exact, "{k:?}: {got} vs {exact}");
        }
    }

    #[test]
    fn zero_forcing_and_bad_grids() {
        let l = build_lattice(4).unwrap();
        let z = SpectralVectorField::zeros(&l);
        let s = DuhamelSamples::new(0.1, vec![z.clone(); 5]).unwrap();
        assert!(duhamel_quadrature(&s, 1.0).unwrap().is_zero());
        assert!(DuhamelSamples::new(0.1, vec![z.clone()]).is_err());
        assert!(DuhamelSamples::from_times(&[0.0, 0.1, 0.25], vec![z.clone(); 3]).is_err());
        assert!(DuhamelSamples::from_times(&[0.0, 0.1, 0.2], vec![z.clone(); 3]).is_ok());
    }

    #[test]
    fn second_order_convergence() {
        // F(τ) = e^{-τ} on |k| = 1, ν = 1: ∫₀¹ e^{-(1-τ)} e^{-τ} dτ = e^{-1}.
        let l = build_lattice(4).unwrap();
        let exact = (-1.0f64).exp();
        let mut errs = Vec::new();
        for n in [8usize, 16, 32, 64, 128] {
            let dt = 1.0 / n as f64;
            let fields = (0..=n).map(|i| one_mode(&l, [1, 0, 0], (-(i as f64) * dt).exp())).collect();
            let s = DuhamelSamples::new(dt, fields).unwrap();
            let got = duhamel_quadrature(&s, 1.0).unwrap().get([1, 0, 0]).unwrap()[2].re;
            errs.push((got - exact).abs());
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.95, "observed order {order} ({errs:?})");
        }
    }
}
