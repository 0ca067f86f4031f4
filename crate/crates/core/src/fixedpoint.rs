//! Local existence by Picard iteration in a small ball of `Z_T`.
//!
//! The initial datum is split into a low-frequency part `v⁰`, carried by the
//! heat flow, and a small high-frequency tail `w⁰`. The remainder `w = u - v`
//! is the fixed point of
//!
//! ```text
//! ψ(w)(t) = e^{νtΔ} w⁰ - ∫₀ᵗ e^{ν(t-τ)Δ} B(v + w, v + w) dτ
//! ```
//!
//! in `B_r = { ‖w‖_{L∞(Z^{-1})} ≤ r, ‖w‖_{L¹(Z¹)} ≤ r }`, with
//! `‖f‖_{Z_T} = ‖f‖_{L∞_T(Z^{-1}_{a,σ})} + ‖f‖_{L¹_T(Z¹_{a,σ})}`.
//!
//! All smallness conditions are stated for unit viscosity. Public entry
//! points take any `ν > 0` and work on `ũ⁰ = u⁰/ν` in the time variable
//! `t̃ = νt`; [`PicardParams`] horizons and steps are in that normalized time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpectralVectorField;
use crate::nonlinear::{bilinear_b, ConvolutionMethod};
use crate::norms::{weighted_sum, z_norm, GevreyParams};
use crate::semigroup::{duhamel_trajectory, heat_apply, DuhamelSamples};

/// Which form of the contraction smallness condition to impose.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContractionCondition {
    /// `4(ε + 2r + ‖u⁰‖) ≤ 1/2`, which the contraction estimate uses.
    #[default]
    Required,
    /// `4(ε + 2r‖u⁰‖) ≤ 1/2`, the weaker form appearing first in the argument.
    Stated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardParams {
    /// Frequency cutoff `N`; modes with `|k| <= N` go to `v⁰`.
    pub cutoff: f64,
    /// Ball radius `r ∈ (0, 1/10)`.
    pub radius: f64,
    pub epsilon: f64,
    /// Horizon `T` in normalized time.
    pub horizon: f64,
    /// Grid spacing in normalized time; `horizon = steps * dt`.
    pub dt: f64,
    pub steps: usize,
    pub max_iters: usize,
    pub tol: f64,
    /// `(a, σ)` of the working norm; `rho` is ignored.
    pub gevrey: GevreyParams,
    pub method: ConvolutionMethod,
    pub condition: ContractionCondition,
    /// Drop the nonlinear term, leaving the heat flow.
    #[serde(default)]
    pub linearized: bool,
}

impl PicardParams {
    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| i as f64 * self.dt).collect()
    }

    fn norm(&self, rho: i32) -> GevreyParams {
        self.gevrey.with_rho(rho)
    }
}

/// Every smallness condition evaluated for one datum and parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// `‖ũ⁰‖_{Z^{-1}_{a,σ}}` (normalized datum).
    pub z0: f64,
    pub radius: f64,
    pub epsilon: f64,
    pub w0_tail: f64,
    /// `‖v‖_{L¹_T(Z¹)}` from the closed-form time integral.
    pub v_l1_closed_form: f64,
    /// `4(ε + 2r + z0)`.
    pub contraction_required: f64,
    /// `4(ε + 2r z0)`.
    pub contraction_stated: f64,
    pub radius_ok: bool,
    pub tail_ok: bool,
    pub two_eps_z0_ok: bool,
    pub z0_plus_eps_ok: bool,
    pub contraction_required_ok: bool,
    pub contraction_stated_ok: bool,
    pub v_l1_ok: bool,
}

impl ConstraintReport {
    pub fn holds(&self, condition: ContractionCondition) -> bool {
        let contraction = match condition {
            ContractionCondition::Required => self.contraction_required_ok,
            ContractionCondition::Stated => self.contraction_stated_ok,
        };
        self.radius_ok && self.tail_ok && self.two_eps_z0_ok && self.z0_plus_eps_ok && contraction && self.v_l1_ok
    }
}

/// `(v⁰, w⁰)` with `v⁰ = 1_{|k| <= N} û⁰` and `w⁰ = 1_{|k| > N} û⁰`.
pub fn split_frequencies(u0: &SpectralVectorField, cutoff: f64) -> (SpectralVectorField, SpectralVectorField) {
    let radii = u0.lattice().radii().to_vec();
    let zero = [num_complex::Complex64::new(0.0, 0.0); 3];
    let low = u0.map_modes(|i, v| if radii[i] <= cutoff { *v } else { zero });
    let high = u0.map_modes(|i, v| if radii[i] <= cutoff { zero } else { *v });
    (low, high)
}

/// `Σ_k (1 - e^{-T|k|²}) |k|^{-1} e^{a|k|^{1/σ}} |v̂⁰(k)|` at unit viscosity.
pub fn heat_l1_z1(v0: &SpectralVectorField, horizon: f64, gevrey: &GevreyParams) -> f64 {
    let lat = v0.lattice();
    let mags = v0
        .coeffs()
        .iter()
        .zip(lat.radii_sq())
        .map(|(v, k2)| -(-horizon * k2).exp_m1() * crate::field::vec_norm(v));
    weighted_sum(lat, &gevrey.with_rho(-1), mags)
}

pub fn evaluate_constraints(u0_normalized: &SpectralVectorField, params: &PicardParams) -> ConstraintReport {
    let p = params.norm(-1);
    let z0 = z_norm(u0_normalized, &p);
    let (v0, w0) = split_frequencies(u0_normalized, params.cutoff);
    let w0_tail = z_norm(&w0, &p);
    let v_l1 = heat_l1_z1(&v0, params.horizon, &p);
    let (r, eps) = (params.radius, params.epsilon);
    let required = 4.0 * (eps + 2.0 * r + z0);
    let stated = 4.0 * (eps + 2.0 * r * z0);
    ConstraintReport {
        z0,
        radius: r,
        epsilon: eps,
        w0_tail,
        v_l1_closed_form: v_l1,
        contraction_required: required,
        contraction_stated: stated,
        radius_ok: r > 0.0 && r < 0.1,
        tail_ok: w0_tail < r / 5.0,
        two_eps_z0_ok: 2.0 * eps * z0 < r / 5.0,
        z0_plus_eps_ok: z0 + eps < 0.2,
        contraction_required_ok: required <= 0.5,
        contraction_stated_ok: stated <= 0.5,
        v_l1_ok: v_l1 < eps,
    }
}

pub fn choose_parameters(u0: &SpectralVectorField, nu: f64, gevrey: &GevreyParams, dt: f64) -> Result<PicardParams> {
    choose_parameters_with(u0, nu, gevrey, dt, ContractionCondition::Required)
}

/// Picks `(N, r, ε, T)` satisfying every smallness condition for `u0`.
///
/// `dt` is in physical time; the grid is refined so that it divides `T`.
pub fn choose_parameters_with(
    u0: &SpectralVectorField,
    nu: f64,
    gevrey: &GevreyParams,
    dt: f64,
    condition: ContractionCondition,
) -> Result<PicardParams> {
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!("nu={nu} must be > 0")));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt={dt} must be > 0")));
    }
    gevrey.validate()?;
    let p = gevrey.with_rho(-1);
    let un = u0.scaled(1.0 / nu);
    let z0 = z_norm(&un, &p);

    let (radius, epsilon) = if z0 == 0.0 {
        (0.05, 0.05 / 20.0)
    } else {
        match condition {
            ContractionCondition::Required => {
                let slack = 0.125 - z0;
                if slack <= 0.0 {
                    return Err(Error::Infeasible(format!(
                        "‖u⁰/ν‖_Z^-1 = {z0:.6} but 4(ε + 2r + ‖u⁰‖) ≤ 1/2 needs ‖u⁰‖ < 1/8"
                    )));
                }
                let r = (slack / 3.0).min(0.05);
                let eps = 0.9 * (slack - 2.0 * r).min(r / (10.0 * z0)).min(0.2 - z0);
                (r, eps)
            }
            ContractionCondition::Stated => {
                if z0 >= 0.2 {
                    return Err(Error::Infeasible(format!(
                        "‖u⁰/ν‖_Z^-1 = {z0:.6} violates ‖u⁰‖ + ε < 1/5"
                    )));
                }
                let r = 0.05;
                let eps = 0.9 * (0.125 - 2.0 * r * z0).min(r / (10.0 * z0)).min(0.2 - z0);
                (r, eps)
            }
        }
    };

    // Smallest integer cutoff with a small enough tail.
    let max_radius = u0.lattice().radii().iter().cloned().fold(0.0, f64::max);
    let mut cutoff = 1.0;
    while z_norm(&split_frequencies(&un, cutoff).1, &p) >= radius / 5.0 {
        cutoff += 1.0;
        if cutoff > max_radius + 1.0 {
            unreachable!("tail vanishes once the cutoff exceeds the lattice radius");
        }
    }

    let v0 = split_frequencies(&un, cutoff).0;
    let target = 0.9 * epsilon;
    let horizon = if heat_l1_z1(&v0, 1.0, &p) <= target {
        1.0
    } else {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if heat_l1_z1(&v0, mid, &p) <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    if horizon <= 0.0 {
        return Err(Error::Infeasible("no positive horizon keeps ‖v‖_L¹(Z¹) < ε".into()));
    }
    let steps = ((horizon / (dt * nu) - 1e-9).ceil() as usize).max(1);

    let params = PicardParams {
        cutoff,
        radius,
        epsilon,
        horizon,
        dt: horizon / steps as f64,
        steps,
        max_iters: 200,
        tol: 1e-13,
        gevrey: p,
        method: ConvolutionMethod::Fast,
        condition,
        linearized: false,
    };
    let report = evaluate_constraints(&un, &params);
    if !report.holds(condition) {
        return Err(Error::Infeasible(format!("selected parameters fail a condition: {report:?}")));
    }
    Ok(params)
}

/// Per-node norms of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeNorms {
    pub t: f64,
    pub z_m1: f64,
    pub z_0: f64,
    pub z_p1: f64,
}

/// Fields on the uniform grid `t_i = i·dt` with their norm ledgers.
#[derive(Clone, Debug)]
pub struct Trajectory {
    dt: f64,
    fields: Vec<SpectralVectorField>,
    norms: Vec<NodeNorms>,
    gevrey: GevreyParams,
}

impl Trajectory {
    pub fn new(dt: f64, fields: Vec<SpectralVectorField>, gevrey: &GevreyParams) -> Self {
        let norms = fields
            .par_iter()
            .enumerate()
            .map(|(i, f)| NodeNorms {
                t: i as f64 * dt,
                z_m1: z_norm(f, &gevrey.with_rho(-1)),
                z_0: z_norm(f, &gevrey.with_rho(0)),
                z_p1: z_norm(f, &gevrey.with_rho(1)),
            })
            .collect();
        Self {
            dt,
            fields,
            norms,
            gevrey: *gevrey,
        }
    }

    /// `t ↦ e^{νtΔ} f` on `steps + 1` nodes.
    pub fn heat_flow(f: &SpectralVectorField, dt: f64, steps: usize, nu: f64, gevrey: &GevreyParams) -> Result<Self> {
        let fields = (0..=steps)
            .map(|i| heat_apply(f, i as f64 * dt, nu))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(dt, fields, gevrey))
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn fields(&self) -> &[SpectralVectorField] {
        &self.fields
    }

    pub fn norms(&self) -> &[NodeNorms] {
        &self.norms
    }

    pub fn gevrey(&self) -> &GevreyParams {
        &self.gevrey
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn last(&self) -> &SpectralVectorField {
        self.fields.last().expect("non-empty trajectory")
    }

    pub fn sup_z_m1(&self) -> f64 {
        self.norms.iter().map(|n| n.z_m1).fold(0.0, f64::max)
    }

    /// Trapezoid-rule `∫₀ᵀ ‖f‖_{Z¹} dt`.
    pub fn l1_z_p1(&self) -> f64 {
        trapezoid(self.dt, self.norms.iter().map(|n| n.z_p1))
    }

    pub fn zt_norm(&self) -> f64 {
        self.sup_z_m1() + self.l1_z_p1()
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() || (self.dt - other.dt).abs() > 1e-15 * self.dt {
            return Err(Error::GridMismatch(format!(
                "{} nodes at dt={} vs {} nodes at dt={}",
                self.len(),
                self.dt,
                other.len(),
                other.dt
            )));
        }
        self.fields[0].lattice().check_same(other.fields[0].lattice())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        let fields = self
            .fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.add(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(self.dt, fields, &self.gevrey))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        let fields = self
            .fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(self.dt, fields, &self.gevrey))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.dt, self.fields.iter().map(|f| f.scaled(s)).collect(), &self.gevrey)
    }

    /// Same fields on a time axis stretched by `1/nu`, amplitudes times `nu`.
    fn to_physical_units(&self, nu: f64) -> Self {
        Self::new(
            self.dt / nu,
            self.fields.iter().map(|f| f.scaled(nu)).collect(),
            &self.gevrey,
        )
    }
}

/// Uniform-grid trapezoid rule.
pub fn trapezoid(dt: f64, values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    match v.len() {
        0 | 1 => 0.0,
        n => dt * (0.5 * (v[0] + v[n - 1]) + v[1..n - 1].iter().sum::<f64>()),
    }
}

/// `B(a_i, b_i)` at every node.
fn bilinear_nodes(a: &Trajectory, b: &Trajectory, method: ConvolutionMethod) -> Result<Vec<SpectralVectorField>> {
    a.fields
        .par_iter()
        .zip(&b.fields)
        .map(|(x, y)| bilinear_b(x, y, method))
        .collect()
}

/// Duhamel integral `∫₀ᵗ e^{ν(t-τ)Δ} B(a, b) dτ` at every node.
pub fn duhamel_of_product(a: &Trajectory, b: &Trajectory, nu: f64, method: ConvolutionMethod) -> Result<Trajectory> {
    a.check_grid(b)?;
    let forcing = bilinear_nodes(a, b, method)?;
    let samples = DuhamelSamples::new(a.dt, forcing)?;
    Ok(Trajectory::new(a.dt, duhamel_trajectory(&samples, nu)?, &a.gevrey))
}

/// `ψ(w)` node by node.
pub fn psi_apply(
    w: &Trajectory,
    v: &Trajectory,
    w0: &SpectralVectorField,
    params: &PicardParams,
    nu: f64,
) -> Result<Trajectory> {
    w.check_grid(v)?;
    if w.len() != params.steps + 1 {
        return Err(Error::GridMismatch(format!(
            "trajectory has {} nodes, params expect {}",
            w.len(),
            params.steps + 1
        )));
    }
    let u = v.add(w)?;
    mild_map(w0, &u, nu, params)
}

/// `‖ψ(w₂) - ψ(w₁)‖_{Z_T} / ‖w₂ - w₁‖_{Z_T}`.
pub fn contraction_ratio(
    w1: &Trajectory,
    w2: &Trajectory,
    v: &Trajectory,
    w0: &SpectralVectorField,
    params: &PicardParams,
    nu: f64,
) -> Result<f64> {
    let den = w2.sub(w1)?.zt_norm();
    if den == 0.0 {
        return Err(Error::ZeroDenominator("‖w₂ - w₁‖_Z_T = 0"));
    }
    let num = psi_apply(w2, v, w0, params, nu)?
        .sub(&psi_apply(w1, v, w0, params, nu)?)?
        .zt_norm();
    Ok(num / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallEntry {
    pub iteration: usize,
    pub sup_z_m1: f64,
    pub l1_z_p1: f64,
    pub inside: bool,
}

/// One of the ten estimate margins: `value / (r/5)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateMargin {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardDiagnostics {
    pub params: PicardParams,
    pub constraints: ConstraintReport,
    pub iterations: usize,
    pub converged: bool,
    /// `‖w_{m+1} - w_m‖_{Z_T}` per iteration.
    pub gaps: Vec<f64>,
    /// `gaps[m] / gaps[m-1]`.
    pub ratios: Vec<f64>,
    pub ball: Vec<BallEntry>,
    pub estimates: Vec<EstimateMargin>,
    /// `‖u - (e^{tΔ}u⁰ - ∫ e^{(t-τ)Δ} B(u,u))‖_{Z_T}` in normalized units.
    pub residual: f64,
}

impl PicardDiagnostics {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().cloned().fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagnostics serialize")
    }
}

#[derive(Clone, Debug)]
pub struct PicardSolution {
    /// `u = v + w` in physical units.
    pub trajectory: Trajectory,
    pub diagnostics: PicardDiagnostics,
}

/// Iterates `w_{m+1} = ψ(w_m)` from the heat flow of `w⁰` until the gap
/// drops below `params.tol`.
pub fn picard_solve(u0: &SpectralVectorField, nu: f64, params: &PicardParams) -> Result<PicardSolution> {
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!("nu={nu} must be > 0")));
    }
    let un = u0.scaled(1.0 / nu);
    let constraints = evaluate_constraints(&un, params);
    if !constraints.holds(params.condition) {
        return Err(Error::Infeasible(format!("{constraints:?}")));
    }
    let g = params.gevrey;
    let (v0, w0) = split_frequencies(&un, params.cutoff);
    let v = Trajectory::heat_flow(&v0, params.dt, params.steps, 1.0, &g)?;
    let mut w = Trajectory::heat_flow(&w0, params.dt, params.steps, 1.0, &g)?;

    let mut gaps = Vec::new();
    let mut ratios = Vec::new();
    let mut ball = vec![ball_entry(0, &w, params.radius)];
    let mut converged = false;
    let mut expanding = 0;
    for m in 1..=params.max_iters {
        let next = psi_apply(&w, &v, &w0, params, 1.0)?;
        let gap = next.sub(&w)?.zt_norm();
        if let Some(prev) = gaps.last().copied() {
            let ratio = if prev > 0.0 { gap / prev } else { 0.0 };
            ratios.push(ratio);
            expanding = if ratio > 1.0 { expanding + 1 } else { 0 };
        }
        gaps.push(gap);
        ball.push(ball_entry(m, &next, params.radius));
        w = next;
        log::debug!("picard iteration {m}: gap {gap:.3e}");
        if gap <= params.tol {
            converged = true;
            break;
        }
        if expanding >= 3 || !gap.is_finite() {
            return Err(Error::Divergence {
                iterations: m,
                last_ratio: ratios.last().copied().unwrap_or(f64::NAN),
            });
        }
    }

    let u = v.add(&w)?;
    let residual = mild_residual(&un, &u, 1.0, params)?;
    let estimates = estimate_margins(&v, &w, &w0, params)?;
    let diagnostics = PicardDiagnostics {
        params: params.clone(),
        constraints,
        iterations: gaps.len(),
        converged,
        gaps,
        ratios,
        ball,
        estimates,
        residual,
    };
    Ok(PicardSolution {
        trajectory: u.to_physical_units(nu),
        diagnostics,
    })
}

fn ball_entry(iteration: usize, w: &Trajectory, radius: f64) -> BallEntry {
    let (s, l) = (w.sup_z_m1(), w.l1_z_p1());
    BallEntry {
        iteration,
        sup_z_m1: s,
        l1_z_p1: l,
        inside: s <= radius * 1.1 && l <= radius * 1.1,
    }
}

/// `t ↦ e^{νtΔ}f - ∫₀ᵗ e^{ν(t-τ)Δ} B(u, u) dτ` on the grid of `u`.
fn mild_map(f: &SpectralVectorField, u: &Trajectory, nu: f64, params: &PicardParams) -> Result<Trajectory> {
    let fields = if params.linearized {
        (0..u.len())
            .map(|i| heat_apply(f, i as f64 * u.dt, nu))
            .collect::<Result<Vec<_>>>()?
    } else {
        let duhamel = duhamel_of_product(u, u, nu, params.method)?;
        duhamel
            .fields
            .iter()
            .enumerate()
            .map(|(i, d)| heat_apply(f, i as f64 * u.dt, nu)?.sub(d))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(Trajectory::new(u.dt, fields, &params.gevrey))
}

/// `‖u - (e^{νtΔ}u⁰ - ∫ e^{ν(t-τ)Δ}B(u,u) dτ)‖_{Z_T}`.
pub fn mild_residual(u0: &SpectralVectorField, u: &Trajectory, nu: f64, params: &PicardParams) -> Result<f64> {
    Ok(u.sub(&mild_map(u0, u, nu, params)?)?.zt_norm())
}

/// The five `I` (sup-in-time `Z^{-1}`) and five `J` (time-integrated `Z¹`)
/// terms bounding `ψ(w)`, each against `r/5`.
pub fn estimate_margins(
    v: &Trajectory,
    w: &Trajectory,
    w0: &SpectralVectorField,
    params: &PicardParams,
) -> Result<Vec<EstimateMargin>> {
    let bound = params.radius / 5.0;
    let heat = Trajectory::heat_flow(w0, params.dt, params.steps, 1.0, &params.gevrey)?;
    let mut terms = vec![("0", heat)];
    for (name, a, b) in [("1", v, v), ("2", v, w), ("3", w, v), ("4", w, w)] {
        terms.push((name, duhamel_of_product(a, b, 1.0, params.method)?));
    }
    let mut out = Vec::with_capacity(10);
    for (name, t) in &terms {
        let value = t.sup_z_m1();
        out.push(EstimateMargin {
            name: format!("I{name}"),
            value,
            bound,
            ratio: value / bound,
        });
    }
    for (name, t) in &terms {
        let value = t.l1_z_p1();
        out.push(EstimateMargin {
            name: format!("J{name}"),
            value,
            bound,
            ratio: value / bound,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{random_divfree_field, single_mode};
    use crate::lattice::build_lattice;
    use crate::nonlinear::relative_max_diff;
    use num_complex::Complex64;

    fn gp() -> GevreyParams {
        GevreyParams::new(-1, 1.0, 2.0).unwrap()
    }

    fn normalized(u: SpectralVectorField, target: f64) -> SpectralVectorField {
        let z = z_norm(&u, &gp());
        u.scaled(target / z)
    }

    #[test]
    fn split_examples() {
        let l = build_lattice(6).unwrap();
        let u = random_divfree_field(&l, 0.2, 1.0, 1);
        let (v, w) = split_frequencies(&u, 100.0);
        assert_eq!(v, u);
        assert!(w.is_zero());
        let (v, w) = split_frequencies(&u, 0.9);
        assert!(v.is_zero());
        assert_eq!(w, u);

        let mut s = SpectralVectorField::zeros(&l);
        let c = Complex64::new(1.0, 0.0);
        s.set_pair([1, 1, 0], [c, -c, Complex64::new(0.0, 0.0)]);
        let (v, w) = split_frequencies(&s, 1.2);
        assert!(v.is_zero());
        assert_eq!(w, s);

        // Closed low-pass at |k| = N, and v + w = u exactly.
        let (v, w) = split_frequencies(&u, 2.0);
        assert_eq!(v.get([2, 0, 0]), u.get([2, 0, 0]));
        assert_eq!(v.add(&w).unwrap(), u);
    }

    #[test]
    fn zero_datum_defaults() {
        let l = build_lattice(6).unwrap();
        let p = choose_parameters(&SpectralVectorField::zeros(&l), 1.0, &gp(), 0.1).unwrap();
        assert_eq!(p.radius, 0.05);
        assert_eq!(p.epsilon, 0.05 / 20.0);
        assert_eq!(p.horizon, 1.0);
        assert_eq!(p.steps, 10);
    }

    #[test]
    fn feasible_parameters_satisfy_every_condition() {
        let l = build_lattice(6).unwrap();
        for (z, seed) in [(0.01, 1), (0.05, 2), (0.1, 3), (0.12, 4)] {
            let u = normalized(random_divfree_field(&l, 0.3, 1.0, seed), z);
            let p = choose_parameters(&u, 1.0, &gp(), 0.01).unwrap();
            let r = evaluate_constraints(&u, &p);
            assert!(r.radius_ok && r.tail_ok && r.two_eps_z0_ok && r.z0_plus_eps_ok);
            assert!(r.contraction_required_ok && r.contraction_stated_ok && r.v_l1_ok, "{r:?}");
            assert!((p.dt * p.steps as f64 - p.horizon).abs() < 1e-14);
        }
    }

    #[test]
    fn condition_forms_disagree_at_0_15() {
        let l = build_lattice(6).unwrap();
        let u = normalized(random_divfree_field(&l, 0.3, 1.0, 7), 0.15);
        assert!(matches!(choose_parameters(&u, 1.0, &gp(), 0.01), Err(Error::Infeasible(_))));
        let p = choose_parameters_with(&u, 1.0, &gp(), 0.01, ContractionCondition::Stated).unwrap();
        let r = evaluate_constraints(&u, &p);
        assert!(r.radius_ok && r.tail_ok && r.two_eps_z0_ok && r.z0_plus_eps_ok);
        assert!(r.contraction_stated_ok && r.v_l1_ok);
        assert!(!r.contraction_required_ok);
    }

    #[test]
    fn large_datum_is_infeasible() {
        let l = build_lattice(6).unwrap();
        let u = normalized(random_divfree_field(&l, 0.3, 1.0, 7), 0.5);
        for c in [ContractionCondition::Required, ContractionCondition::Stated] {
            assert!(matches!(choose_parameters_with(&u, 1.0, &gp(), 0.01, c), Err(Error::Infeasible(_))));
        }
    }

    #[test]
    fn viscosity_rescaling_is_consistent() {
        let l = build_lattice(4).unwrap();
        let u = normalized(random_divfree_field(&l, 0.3, 1.0, 5), 0.05);
        let nu = 2.5;
        let p1 = choose_parameters(&u, 1.0, &gp(), 0.02).unwrap();
        let pn = choose_parameters(&u.scaled(nu), nu, &gp(), 0.02 / nu).unwrap();
        assert!((p1.horizon - pn.horizon).abs() < 1e-12);
        assert_eq!(p1.steps, pn.steps);
        let s1 = picard_solve(&u, 1.0, &p1).unwrap();
        let sn = picard_solve(&u.scaled(nu), nu, &pn).unwrap();
        assert!((sn.trajectory.dt() * nu - s1.trajectory.dt()).abs() < 1e-15);
        let rel = relative_max_diff(sn.trajectory.last().scaled(1.0 / nu).coeffs(), s1.trajectory.last().coeffs());
        assert!(rel < 1e-10, "{rel}");
    }

    #[test]
    fn psi_without_nonlinearity_is_heat_flow() {
        let l = build_lattice(6).unwrap();
        let u = normalized(random_divfree_field(&l, 0.3, 1.0, 2), 0.05);
        let p = choose_parameters(&u, 1.0, &gp(), 0.02).unwrap();
        let zero = Trajectory::heat_flow(&SpectralVectorField::zeros(&l), p.dt, p.steps, 1.0, &gp()).unwrap();
        // With v = w = 0 the Duhamel term vanishes and ψ is the heat flow of w⁰.
        let w0 = single_mode(&l, 0.01);
        let out = psi_apply(&zero, &zero, &w0, &p, 1.0).unwrap();
        for (i, f) in out.fields().iter().enumerate() {
            let h = heat_apply(&w0, i as f64 * p.dt, 1.0).unwrap();
            assert!(relative_max_diff(f.coeffs(), h.coeffs()) < 1e-15);
        }
        let z = psi_apply(&zero, &zero, &SpectralVectorField::zeros(&l), &p, 1.0).unwrap();
        assert!(z.fields().iter().all(|f| f.is_zero()));
    }

    #[test]
    fn one_step_matches_composition() {
        let l = build_lattice(6).unwrap();
        let u = normalized(random_divfree_field(&l, 0.3, 1.0, 3), 0.05);
        let mut p = choose_parameters(&u, 1.0, &gp(), 0.05).unwrap();
        p.method = ConvolutionMethod::Direct;
        let (v0, w0) = split_frequencies(&u, p.cutoff);
        let v = Trajectory::heat_flow(&v0, p.dt, p.steps, 1.0, &gp()).unwrap();
        let zero = Trajectory::heat_flow(&SpectralVectorField::zeros(&l), p.dt, p.steps, 1.0, &gp()).unwrap();
        let got = psi_apply(&zero, &v, &w0, &p, 1.0).unwrap();
        // e^{tΔ}w⁰ - Duhamel(B(v, v)), assembled from the tested pieces.
        let forcing: Vec<_> = v.fields().iter().map(|f| bilinear_b(f, f, ConvolutionMethod::Direct).unwrap()).collect();
        let duh = duhamel_trajectory(&DuhamelSamples::new(p.dt, forcing).unwrap(), 1.0).unwrap();
        for (i, f) in got.fields().iter().enumerate() {
            let want = heat_apply(&w0, i as f64 * p.dt, 1.0).unwrap().sub(&duh[i]).unwrap();
            assert!(relative_max_diff(f.coeffs(), want.coeffs()) <= 1e-13);
        }
    }

    #[test]
    fn zero_datum_converges_immediately() {
        let l = build_lattice(6).unwrap();
        let z = SpectralVectorField::zeros(&l);
        let p = choose_parameters(&z, 1.0, &gp(), 0.1).unwrap();
        let sol = picard_solve(&z, 1.0, &p).unwrap();
        assert_eq!(sol.diagnostics.iterations, 1);
        assert!(sol.diagnostics.converged);
        assert!(sol.trajectory.fields().iter().all(|f| f.is_zero()));
    }

    #[test]
    fn contraction_ratio_rejects_equal_arguments_and_scales_bilinearly() {
        let l = build_lattice(6).unwrap();
        let z = SpectralVectorField::zeros(&l);
        let p = choose_parameters(&z, 1.0, &gp(), 0.1).unwrap();
        let zero = Trajectory::heat_flow(&z, p.dt, p.steps, 1.0, &gp()).unwrap();
        let base1 = random_divfree_field(&l, 0.3, 1.0, 10);
        let base2 = random_divfree_field(&l, 0.3, 1.0, 11);
        let w = Trajectory::heat_flow(&base1, p.dt, p.steps, 1.0, &gp()).unwrap();
        assert!(matches!(contraction_ratio(&w, &w, &zero, &z, &p, 1.0), Err(Error::ZeroDenominator(_))));
        let mut prev = f64::INFINITY;
        for eta in [1e-1, 1e-2, 1e-3] {
            let w1 = Trajectory::heat_flow(&base1.scaled(eta), p.dt, p.steps, 1.0, &gp()).unwrap();
            let w2 = Trajectory::heat_flow(&base2.scaled(eta), p.dt, p.steps, 1.0, &gp()).unwrap();
            let r = contraction_ratio(&w1, &w2, &zero, &z, &p, 1.0).unwrap();
            assert!(r < prev * 0.2, "ratio {r} after {prev}");
            prev = r;
        }
    }

    #[test]
    fn trapezoid_rule() {
        assert_eq!(trapezoid(0.5, [1.0, 1.0, 1.0].into_iter()), 1.0);
        assert_eq!(trapezoid(1.0, [0.0, 2.0].into_iter()), 1.0);
        assert_eq!(trapezoid(1.0, std::iter::once(3.0)), 0.0);
    }
}
