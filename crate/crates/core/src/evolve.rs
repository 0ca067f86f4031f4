//! Time marching of the mild formulation with a priori monitors.
//!
//! [`Stepper`] is an exponential predictor-corrector: the heat part is exact
//! and the nonlinear forcing is integrated against the heat kernel with the
//! same trapezoid weights as the Duhamel quadrature. [`simulate`] records
//! norm ledgers at every node; the monitors then evaluate the dissipation
//! inequality, the Gronwall bound and an exponential decay envelope. Monitors
//! never stop a run, they only record verdicts.

use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{
    divergence_residual, enforce_hermitian, leray_project, random_divfree_field, single_mode, taylor_green,
    SpectralVectorField,
};
use crate::lattice::{build_lattice, FrequencyLattice};
use crate::nonlinear::{bilinear_b, ConvolutionMethod};
use crate::norms::{z_norm, CompensatedSum, GevreyParams};
use crate::semigroup::DuhamelKernel;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    #[default]
    TaylorGreen,
    RandomDivfree,
    SingleMode,
    Snapshot,
}

/// How `amplitude` scales the initial field.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeKind {
    /// Passed to the generator as its coefficient amplitude.
    #[default]
    Coefficient,
    /// The field is rescaled so that `‖u⁰‖_{Z^{-1}_{a,σ}} = amplitude`.
    ZM1,
}

fn default_decay_rate() -> f64 {
    0.5
}

fn default_picard_tol() -> f64 {
    1e-13
}

fn default_picard_max_iters() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(rename = "M")]
    pub m: usize,
    pub nu: f64,
    pub a: f64,
    pub sigma: f64,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub init: InitKind,
    pub amplitude: f64,
    #[serde(default)]
    pub amplitude_kind: AmplitudeKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_decay_rate")]
    pub decay_rate: f64,
    #[serde(default)]
    pub n_max: usize,
    /// Drop the nonlinear term.
    #[serde(default)]
    pub linearized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<PathBuf>,
    /// Gronwall constant; the smallest admissible one is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gronwall_c: Option<f64>,
    #[serde(default)]
    pub method: ConvolutionMethod,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_max_iters")]
    pub picard_max_iters: usize,
}

impl SimConfig {
    /// A Taylor-Green run with coefficient amplitude `amplitude`.
    pub fn new(m: usize, nu: f64, a: f64, sigma: f64, dt: f64, t_end: f64, amplitude: f64) -> Self {
        Self {
            m,
            nu,
            a,
            sigma,
            dt,
            t_end,
            init: InitKind::TaylorGreen,
            amplitude,
            amplitude_kind: AmplitudeKind::Coefficient,
            seed: 0,
            decay_rate: default_decay_rate(),
            n_max: 0,
            linearized: false,
            snapshot: None,
            gronwall_c: None,
            method: ConvolutionMethod::Fast,
            picard_tol: default_picard_tol(),
            picard_max_iters: default_picard_max_iters(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        build_lattice(self.m)?;
        self.gevrey(-1).validate()?;
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name}={x} must be > 0")))
            }
        };
        positive("nu", self.nu)?;
        positive("dt", self.dt)?;
        positive("picard_tol", self.picard_tol)?;
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_end={} must be >= dt={}", self.t_end, self.dt)));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("amplitude={} must be >= 0", self.amplitude)));
        }
        if !(self.decay_rate >= 0.0 && self.decay_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("decay_rate={} must be >= 0", self.decay_rate)));
        }
        if let Some(c) = self.gronwall_c {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::InvalidParameter(format!("gronwall_c={c} must be >= 0")));
            }
        }
        if self.init == InitKind::Snapshot && self.snapshot.is_none() {
            return Err(Error::InvalidParameter("init = snapshot needs a snapshot path".into()));
        }
        Ok(())
    }

    pub fn gevrey(&self, rho: i32) -> GevreyParams {
        GevreyParams {
            rho,
            a: self.a,
            sigma: self.sigma,
        }
    }

    pub fn lattice(&self) -> Result<FrequencyLattice> {
        build_lattice(self.m)
    }

    /// Number of steps and the step that divides `t_end` exactly.
    pub fn grid(&self) -> (usize, f64) {
        let steps = ((self.t_end / self.dt - 1e-9).ceil() as usize).max(1);
        (steps, self.t_end / steps as f64)
    }

    pub fn initial_field(&self) -> Result<SpectralVectorField> {
        let lattice = self.lattice()?;
        let coefficient = match self.amplitude_kind {
            AmplitudeKind::Coefficient => self.amplitude,
            AmplitudeKind::ZM1 => 1.0,
        };
        let base = match self.init {
            InitKind::TaylorGreen => taylor_green(&lattice, coefficient),
            InitKind::SingleMode => single_mode(&lattice, coefficient),
            InitKind::RandomDivfree => random_divfree_field(&lattice, self.decay_rate, coefficient, self.seed),
            InitKind::Snapshot => {
                let path = self.snapshot.as_ref().expect("validated");
                let file = std::fs::File::open(path)?;
                let f = crate::snapshot::read_snapshot(std::io::BufReader::new(file))?;
                f.lattice().check_same(&lattice)?;
                f
            }
        };
        Ok(match self.amplitude_kind {
            AmplitudeKind::Coefficient if self.init == InitKind::Snapshot => base.scaled(self.amplitude),
            AmplitudeKind::Coefficient => base,
            AmplitudeKind::ZM1 => {
                let z = z_norm(&base, &self.gevrey(-1));
                if z == 0.0 || self.amplitude == 0.0 {
                    SpectralVectorField::zeros(&lattice)
                } else {
                    base.scaled(self.amplitude / z)
                }
            }
        })
    }
}

/// One step `u(t) ↦ u(t + dt)` of the exponential predictor-corrector.
#[derive(Clone, Debug)]
pub struct Stepper {
    kernel: DuhamelKernel,
    method: ConvolutionMethod,
    linearized: bool,
}

impl Stepper {
    pub fn new(
        lattice: &FrequencyLattice,
        dt: f64,
        nu: f64,
        method: ConvolutionMethod,
        linearized: bool,
    ) -> Result<Self> {
        Ok(Self {
            kernel: DuhamelKernel::new(lattice, dt, nu)?,
            method,
            linearized,
        })
    }

    pub fn dt(&self) -> f64 {
        self.kernel.dt
    }

    pub fn step(&self, u: &SpectralVectorField) -> Result<SpectralVectorField> {
        if self.linearized {
            return Ok(self.kernel.propagate(u));
        }
        let bu = bilinear_b(u, u, self.method)?;
        let predictor = self.kernel.propagate(&u.axpy(-self.kernel.dt, &bu)?);
        let bp = bilinear_b(&predictor, &predictor, self.method)?;
        let next = self.kernel.advance(u, &bu.scaled(-1.0), &bp.scaled(-1.0));
        Ok(leray_project(&enforce_hermitian(&next)))
    }
}

pub fn step(u: &SpectralVectorField, dt: f64, nu: f64) -> Result<SpectralVectorField> {
    Stepper::new(u.lattice(), dt, nu, ConvolutionMethod::Fast, false)?.step(u)
}

/// `u⁰, u(dt), …, u(steps·dt)`.
pub fn march(u0: &SpectralVectorField, stepper: &Stepper, steps: usize) -> Result<Vec<SpectralVectorField>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(u0.clone());
    for n in 0..steps {
        let next = stepper.step(&out[n])?;
        out.push(next);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub t: f64,
    pub z_m1: f64,
    pub z_0: f64,
    pub z_p1: f64,
    pub x_m1: f64,
    pub x_0: f64,
    pub x_1: f64,
    /// `Z^{-1}_{a/σ^{n/2},σ}` for `n = 0..=n_max`.
    pub z_m1_scale: Vec<f64>,
    /// `Z^{-1}_{a/√σ,σ}`, the Gronwall integrand's norm.
    pub z_m1_half: f64,
    /// `∫₀ᵗ ‖Δu‖_{Z^{-1}_{a,σ}}`.
    pub dissipation: f64,
    /// `Σ dt·‖u‖²_{X⁰}`.
    pub x0_sq_integral: f64,
    pub thm6_lhs: f64,
    pub thm6_ok: bool,
    pub gronwall_rhs: f64,
    pub decay_bound_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowUp {
    pub t: f64,
    pub quantity: String,
    /// `Σ dt·‖u‖²_{X⁰}` up to the last finite node.
    pub x0_sq_integral: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem6Report {
    /// `‖u⁰‖_{Z^{-1}} < ν`; without it the verdicts are informational.
    pub precondition_ok: bool,
    pub tol: f64,
    /// Largest `lhs / z(0)` over nodes.
    pub worst_ratio: f64,
    pub all_ok: bool,
    #[serde(skip)]
    pub lhs: Vec<f64>,
    #[serde(skip)]
    pub ok: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub c: f64,
    /// Smallest `c` for which the bound holds at every node.
    pub c_star: f64,
    pub all_ok: bool,
    #[serde(skip)]
    pub rhs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    /// First node time with `z(t) <= z(0)/2`.
    pub t_half: Option<f64>,
    pub terminal_ratio: f64,
    /// Least-squares rate of `ln z` over the last quarter of the run.
    pub fitted_rate: Option<f64>,
    /// Envelope rate `0.95 (ν - z(0))`.
    pub envelope_rate: f64,
    pub bound_ok: bool,
    #[serde(skip)]
    pub ok: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub config: SimConfig,
    pub dt: f64,
    pub steps: usize,
    pub records: Vec<NodeRecord>,
    pub max_divergence_residual: f64,
    pub max_hermitian_defect: f64,
    /// `z` nonincreasing (to `1e-8`) wherever `z < ν`.
    pub monotone_ok: bool,
    pub blowup: Option<BlowUp>,
    pub theorem6: Theorem6Report,
    pub gronwall: GronwallReport,
    pub decay: DecayReport,
}

impl TimeSeries {
    pub fn z0(&self) -> f64 {
        self.records.first().map_or(0.0, |r| r.z_m1)
    }

    pub fn divergence_ok(&self) -> bool {
        self.max_divergence_residual <= 1e-10 * self.z0()
    }

    /// Every monitor whose precondition holds passed, and nothing blew up.
    pub fn all_monitors_ok(&self) -> bool {
        let pre = self.theorem6.precondition_ok;
        self.blowup.is_none()
            && self.divergence_ok()
            && self.gronwall.all_ok
            && (!pre || (self.theorem6.all_ok && self.decay.bound_ok && self.monotone_ok))
    }

    pub fn csv_header(&self) -> String {
        let mut cols: Vec<String> = ["t", "z_m1", "z_0", "z_p1", "x_m1", "x_0", "x_1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        cols.extend((0..=self.config.n_max).map(|n| format!("z_m1_scale_{n}")));
        cols.extend(
            ["dissipation", "thm6_lhs", "thm6_ok", "gronwall_rhs", "decay_bound_ok"]
                .iter()
                .map(|s| s.to_string()),
        );
        cols.join(",")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.csv_header())?;
        for r in &self.records {
            let mut row = vec![
                format!("{:e}", r.t),
                format!("{:e}", r.z_m1),
                format!("{:e}", r.z_0),
                format!("{:e}", r.z_p1),
                format!("{:e}", r.x_m1),
                format!("{:e}", r.x_0),
                format!("{:e}", r.x_1),
            ];
            row.extend(r.z_m1_scale.iter().map(|z| format!("{z:e}")));
            row.push(format!("{:e}", r.dissipation));
            row.push(format!("{:e}", r.thm6_lhs));
            row.push(r.thm6_ok.to_string());
            row.push(format!("{:e}", r.gronwall_rhs));
            row.push(r.decay_bound_ok.to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            config: self.config.clone(),
            dt: self.dt,
            steps: self.steps,
            nodes: self.records.len(),
            z0: self.z0(),
            z_end: self.records.last().map_or(0.0, |r| r.z_m1),
            max_divergence_residual: self.max_divergence_residual,
            max_hermitian_defect: self.max_hermitian_defect,
            monotone_ok: self.monotone_ok,
            theorem6: self.theorem6.clone(),
            gronwall: self.gronwall.clone(),
            decay: self.decay.clone(),
            blowup: self.blowup.clone(),
            all_monitors_ok: self.all_monitors_ok(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: SimConfig,
    pub dt: f64,
    pub steps: usize,
    pub nodes: usize,
    pub z0: f64,
    pub z_end: f64,
    pub max_divergence_residual: f64,
    pub max_hermitian_defect: f64,
    pub monotone_ok: bool,
    pub theorem6: Theorem6Report,
    pub gronwall: GronwallReport,
    pub decay: DecayReport,
    pub blowup: Option<BlowUp>,
    pub all_monitors_ok: bool,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

struct NodeNorms {
    z: [f64; 3],
    x: [f64; 3],
    scale: Vec<f64>,
    half: f64,
}

fn node_norms(u: &SpectralVectorField, config: &SimConfig) -> NodeNorms {
    let g = config.gevrey(-1);
    let x = g.with_a(0.0);
    NodeNorms {
        z: [-1, 0, 1].map(|r| z_norm(u, &g.with_rho(r))),
        x: [-1, 0, 1].map(|r| z_norm(u, &x.with_rho(r))),
        scale: (0..=config.n_max)
            .map(|n| z_norm(u, &g.with_a(config.a / config.sigma.powf(n as f64 / 2.0))))
            .collect(),
        half: z_norm(u, &g.with_a(config.a / config.sigma.sqrt())),
    }
}

/// Marches `config` to `t_end` and evaluates every monitor.
pub fn simulate(config: &SimConfig) -> Result<TimeSeries> {
    config.validate()?;
    let u0 = config.initial_field()?;
    simulate_from(config, u0)
}

/// As [`simulate`], from an explicit initial field.
pub fn simulate_from(config: &SimConfig, u0: SpectralVectorField) -> Result<TimeSeries> {
    config.validate()?;
    u0.lattice().check_same(&config.lattice()?)?;
    let (steps, dt) = config.grid();
    let stepper = Stepper::new(u0.lattice(), dt, config.nu, config.method, config.linearized)?;

    let mut records: Vec<NodeRecord> = Vec::with_capacity(steps + 1);
    let mut dissipation = CompensatedSum::default();
    let mut x0_sq = CompensatedSum::default();
    let mut max_div = 0.0f64;
    let mut max_herm = 0.0f64;
    let mut blowup = None;
    let mut u = u0;
    for n in 0..=steps {
        let t = n as f64 * dt;
        let norms = node_norms(&u, config);
        let bad = norms
            .z
            .iter()
            .chain(&norms.x)
            .zip(["z_m1", "z_0", "z_p1", "x_m1", "x_0", "x_1"])
            .find(|(v, _)| !v.is_finite());
        if let Some((_, name)) = bad {
            log::warn!("non-finite {name} at t={t}; stopping");
            blowup = Some(BlowUp {
                t,
                quantity: name.to_string(),
                x0_sq_integral: x0_sq.value(),
            });
            break;
        }
        if let Some(prev) = records.last() {
            dissipation.add(0.5 * dt * (prev.z_p1 + norms.z[2]));
            x0_sq.add(0.5 * dt * (prev.x_0 * prev.x_0 + norms.x[1] * norms.x[1]));
        }
        max_div = max_div.max(divergence_residual(&u));
        max_herm = max_herm.max(u.hermitian_defect());
        records.push(NodeRecord {
            t,
            z_m1: norms.z[0],
            z_0: norms.z[1],
            z_p1: norms.z[2],
            x_m1: norms.x[0],
            x_0: norms.x[1],
            x_1: norms.x[2],
            z_m1_scale: norms.scale,
            z_m1_half: norms.half,
            dissipation: dissipation.value(),
            x0_sq_integral: x0_sq.value(),
            thm6_lhs: 0.0,
            thm6_ok: false,
            gronwall_rhs: 0.0,
            decay_bound_ok: false,
        });
        if n < steps {
            u = stepper.step(&u)?;
        }
        if n > 0 && n % 1000 == 0 {
            log::debug!("t={t:.4} z_m1={:.6e}", norms.z[0]);
        }
    }

    let mut series = TimeSeries {
        config: config.clone(),
        dt,
        steps,
        records,
        max_divergence_residual: max_div,
        max_hermitian_defect: max_herm,
        monotone_ok: true,
        blowup,
        theorem6: Theorem6Report {
            precondition_ok: false,
            tol: 0.0,
            worst_ratio: 0.0,
            all_ok: false,
            lhs: vec![],
            ok: vec![],
        },
        gronwall: GronwallReport {
            c: 0.0,
            c_star: 0.0,
            all_ok: false,
            rhs: vec![],
        },
        decay: DecayReport {
            t_half: None,
            terminal_ratio: 0.0,
            fitted_rate: None,
            envelope_rate: 0.0,
            bound_ok: false,
            ok: vec![],
        },
    };
    series.theorem6 = theorem6_monitor(&series, config.nu);
    let c_star = gronwall_c_star(&series);
    series.gronwall = gronwall_monitor(&series, config.gronwall_c.unwrap_or(c_star));
    series.decay = decay_metric(&series);
    series.monotone_ok = monotone_below_nu(&series, config.nu);
    for (i, r) in series.records.iter_mut().enumerate() {
        r.thm6_lhs = series.theorem6.lhs[i];
        r.thm6_ok = series.theorem6.ok[i];
        r.gronwall_rhs = series.gronwall.rhs[i];
        r.decay_bound_ok = series.decay.ok[i];
    }
    Ok(series)
}

fn monotone_below_nu(series: &TimeSeries, nu: f64) -> bool {
    series
        .records
        .windows(2)
        .all(|w| w[0].z_m1 >= nu || w[1].z_m1 <= w[0].z_m1 + 1e-8)
}

/// `z(t) + ((ν - z(0))/2) D(t) <= z(0)(1 + tol)` at every node, with
/// `tol = 1e-6 + 2·dt²·max|z''|` estimated by second differences.
pub fn theorem6_monitor(series: &TimeSeries, nu: f64) -> Theorem6Report {
    let z0 = series.z0();
    let z: Vec<f64> = series.records.iter().map(|r| r.z_m1).collect();
    let curvature = z
        .windows(3)
        .map(|w| (w[2] - 2.0 * w[1] + w[0]).abs())
        .fold(0.0, f64::max);
    // second difference is dt²·z''
    let tol = 1e-6 + 2.0 * curvature;
    let lhs: Vec<f64> = series
        .records
        .iter()
        .map(|r| r.z_m1 + 0.5 * (nu - z0) * r.dissipation)
        .collect();
    let ok: Vec<bool> = lhs.iter().map(|l| *l <= z0 * (1.0 + tol)).collect();
    Theorem6Report {
        precondition_ok: z0 < nu,
        tol,
        worst_ratio: if z0 > 0.0 {
            lhs.iter().map(|l| l / z0).fold(0.0, f64::max)
        } else {
            0.0
        },
        all_ok: ok.iter().all(|b| *b),
        lhs,
        ok,
    }
}

/// `∫₀ᵗ ‖u‖²_{Z^{-1}_{a/√σ,σ}}` at every node.
fn gronwall_integral(series: &TimeSeries) -> Vec<f64> {
    let mut acc = CompensatedSum::default();
    let mut out = Vec::with_capacity(series.records.len());
    for (i, r) in series.records.iter().enumerate() {
        if i > 0 {
            let p = series.records[i - 1].z_m1_half;
            acc.add(0.5 * series.dt * (p * p + r.z_m1_half * r.z_m1_half));
        }
        out.push(acc.value());
    }
    out
}

/// Smallest `c >= 0` with `z(t) <= z(0) exp(c ∫₀ᵗ ‖u‖²_{Z^{-1}_{a/√σ,σ}})` at
/// every node; the bound is monotone in `c`, so this is exact.
pub fn gronwall_c_star(series: &TimeSeries) -> f64 {
    let z0 = series.z0();
    if z0 == 0.0 {
        return 0.0;
    }
    let g = gronwall_integral(series);
    series
        .records
        .iter()
        .zip(&g)
        .filter(|(r, g)| r.z_m1 > z0 && **g > 0.0)
        .map(|(r, g)| (r.z_m1 / z0).ln() / g)
        .fold(0.0, f64::max)
}

pub fn gronwall_monitor(series: &TimeSeries, c: f64) -> GronwallReport {
    let z0 = series.z0();
    let rhs: Vec<f64> = gronwall_integral(series).iter().map(|g| z0 * (c * g).exp()).collect();
    let all_ok = series
        .records
        .iter()
        .zip(&rhs)
        .all(|(r, b)| r.z_m1 <= b * (1.0 + 1e-12));
    GronwallReport {
        c,
        c_star: gronwall_c_star(series),
        all_ok,
        rhs,
    }
}

pub fn decay_metric(series: &TimeSeries) -> DecayReport {
    let nu = series.config.nu;
    let z0 = series.z0();
    let rate = 0.95 * (nu - z0);
    let ok: Vec<bool> = series
        .records
        .iter()
        .map(|r| r.z_m1 <= z0 * (-rate * r.t).exp() * (1.0 + 1e-12))
        .collect();
    let bound_ok = ok.iter().all(|b| *b);
    if z0 == 0.0 {
        return DecayReport {
            t_half: Some(0.0),
            terminal_ratio: 0.0,
            fitted_rate: None,
            envelope_rate: rate,
            bound_ok,
            ok,
        };
    }
    let t_half = series.records.iter().find(|r| r.z_m1 <= 0.5 * z0).map(|r| r.t);
    let terminal_ratio = series.records.last().map_or(0.0, |r| r.z_m1 / z0);
    let tail = &series.records[series.records.len() * 3 / 4..];
    let pts: Vec<(f64, f64)> = tail.iter().filter(|r| r.z_m1 > 0.0).map(|r| (r.t, r.z_m1.ln())).collect();
    let fitted_rate = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
        -sxy / sxx
    });
    DecayReport {
        t_half,
        terminal_ratio,
        fitted_rate,
        envelope_rate: rate,
        bound_ok,
        ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinear::relative_max_diff;
    use crate::semigroup::heat_apply;

    fn cfg(m: usize, dt: f64, t_end: f64) -> SimConfig {
        SimConfig::new(m, 1.0, 1.0, 2.0, dt, t_end, 0.1)
    }

    #[test]
    fn linearized_step_is_heat_apply() {
        let l = build_lattice(6).unwrap();
        let u = random_divfree_field(&l, 0.3, 1.0, 4);
        let s = Stepper::new(&l, 0.01, 0.7, ConvolutionMethod::Fast, true).unwrap();
        assert_eq!(s.step(&u).unwrap(), heat_apply(&u, 0.01, 0.7).unwrap());
    }

    #[test]
    fn zero_is_fixed() {
        let l = build_lattice(6).unwrap();
        let z = SpectralVectorField::zeros(&l);
        assert!(step(&z, 0.1, 1.0).unwrap().is_zero());
    }

    #[test]
    fn second_order_self_convergence() {
        let l = build_lattice(6).unwrap();
        let u0 = taylor_green(&l, 2.0);
        let g = GevreyParams::new(-1, 1.0, 2.0).unwrap();
        let t_end = 0.5;
        let run = |n: usize| {
            let s = Stepper::new(&l, t_end / n as f64, 1.0, ConvolutionMethod::Fast, false).unwrap();
            march(&u0, &s, n).unwrap().pop().unwrap()
        };
        let reference = run(8 * 64);
        let errs: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| z_norm(&run(n).sub(&reference).unwrap(), &g))
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.9, "order {order}, errors {errs:?}");
        }
    }

    #[test]
    fn zero_amplitude_run() {
        let mut c = cfg(4, 0.1, 1.0);
        c.amplitude = 0.0;
        let s = simulate(&c).unwrap();
        assert!(s.records.iter().all(|r| r.z_m1 == 0.0 && r.z_p1 == 0.0 && r.x_0 == 0.0));
        assert!(s.all_monitors_ok());
        assert_eq!(s.decay.t_half, Some(0.0));
        assert_eq!(s.decay.terminal_ratio, 0.0);
        assert_eq!(s.gronwall.c_star, 0.0);
    }

    #[test]
    fn linearized_single_mode_decays_exactly() {
        let mut c = cfg(6, 0.01, 2.0);
        c.init = InitKind::SingleMode;
        c.linearized = true;
        c.nu = 0.5;
        let s = simulate(&c).unwrap();
        let z0 = s.z0();
        for r in &s.records {
            assert!((r.z_m1 - z0 * (-0.5 * r.t).exp()).abs() <= 1e-10 * z0);
        }
        assert!((s.decay.fitted_rate.unwrap() - 0.5).abs() < 1e-9);
        assert!(s.theorem6.all_ok && s.decay.bound_ok);
        // The norms only decay, so no growth constant is needed.
        assert_eq!(s.gronwall.c_star, 0.0);
        assert!(gronwall_monitor(&s, 0.0).all_ok);
    }

    #[test]
    fn theorem6_closed_form_for_heat_flow() {
        // On |k| = 1 the dissipation integrand equals z(t), so
        // lhs(t) = z0 e^{-νt} + ((ν - z0)/2)(z0/ν)(1 - e^{-νt}).
        let mut c = cfg(4, 0.01, 3.0);
        c.init = InitKind::SingleMode;
        c.linearized = true;
        c.amplitude_kind = AmplitudeKind::ZM1;
        c.amplitude = 0.3;
        let s = simulate(&c).unwrap();
        let (nu, z0) = (1.0, 0.3);
        for r in &s.records {
            let e = (-nu * r.t).exp();
            let want = z0 * e + 0.5 * (nu - z0) * (z0 / nu) * (1.0 - e);
            assert!((r.thm6_lhs - want).abs() < 1e-5, "{} vs {want}", r.thm6_lhs);
            assert!(want <= z0);
        }
        assert!(s.theorem6.all_ok);
    }

    #[test]
    fn nonlinear_run_monitors() {
        let mut c = cfg(6, 5e-3, 4.0);
        c.init = InitKind::RandomDivfree;
        c.seed = 3;
        c.amplitude_kind = AmplitudeKind::ZM1;
        c.amplitude = 0.8;
        c.n_max = 3;
        let s = simulate(&c).unwrap();
        assert!((s.z0() - 0.8).abs() < 1e-14);
        assert!(s.theorem6.precondition_ok && s.theorem6.all_ok, "{:?}", s.theorem6);
        assert!(s.decay.bound_ok && s.monotone_ok && s.divergence_ok());
        assert!(s.all_monitors_ok());
        for w in s.records.windows(2) {
            assert!(w[1].dissipation >= w[0].dissipation);
        }
        for r in &s.records {
            for w in r.z_m1_scale.windows(2) {
                assert!(w[0] >= w[1]);
            }
            assert!(*r.z_m1_scale.last().unwrap() >= r.x_m1);
            assert_eq!(r.z_m1_scale[0], r.z_m1);
        }
        let c_star = s.gronwall.c_star;
        assert!(c_star.is_finite());
        assert!(gronwall_monitor(&s, 2.0 * c_star).all_ok);
    }

    #[test]
    fn csv_layout() {
        let mut c = cfg(4, 0.25, 0.5);
        c.n_max = 2;
        let s = simulate(&c).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,z_m1,z_0,z_p1,x_m1,x_0,x_1,z_m1_scale_0,z_m1_scale_1,z_m1_scale_2,dissipation,thm6_lhs,thm6_ok,gronwall_rhs,decay_bound_ok"
        );
        assert_eq!(lines.count(), 3);
        assert!(s.summary().to_json().contains("\"all_monitors_ok\": true"));
    }

    #[test]
    fn grid_divides_t_end() {
        assert_eq!(cfg(4, 1e-3, 20.0).grid().0, 20000);
        let (n, dt) = cfg(4, 0.3, 1.0).grid();
        assert_eq!(n, 4);
        assert_eq!(dt, 0.25);
    }

    #[test]
    fn invalid_configs() {
        assert!(cfg(5, 0.1, 1.0).validate().is_err());
        assert!(cfg(4, 0.0, 1.0).validate().is_err());
        assert!(cfg(4, 0.1, 0.05).validate().is_err());
        let mut c = cfg(4, 0.1, 1.0);
        c.amplitude = -1.0;
        assert!(c.validate().is_err());
        let mut c = cfg(4, 0.1, 1.0);
        c.init = InitKind::Snapshot;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_parses_from_json_names() {
        let c: SimConfig = serde_json::from_str(
            r#"{"M": 6, "nu": 1.0, "a": 1.0, "sigma": 2.0, "dt": 0.01, "t_end": 1.0,
                "init": "random-divfree", "amplitude": 0.5, "amplitude_kind": "z_m1"}"#,
        )
        .unwrap();
        assert_eq!(c.init, InitKind::RandomDivfree);
        assert_eq!(c.amplitude_kind, AmplitudeKind::ZM1);
        let bad = serde_json::from_str::<SimConfig>(
            r#"{"M": 6, "nu": 1.0, "a": 1.0, "sigma": 2.0, "dt": 0.01, "t_end": 1.0, "amplitude": 0.5, "amplitud": 1}"#,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn fast_and_direct_runs_agree() {
        let mut c = cfg(4, 0.05, 0.5);
        c.init = InitKind::RandomDivfree;
        c.amplitude = 0.5;
        let fast = simulate(&c).unwrap();
        c.method = ConvolutionMethod::Direct;
        let direct = simulate(&c).unwrap();
        let l = build_lattice(4).unwrap();
        let u0 = c.initial_field().unwrap();
        let s = Stepper::new(&l, 0.05, 1.0, ConvolutionMethod::Fast, false).unwrap();
        let d = Stepper::new(&l, 0.05, 1.0, ConvolutionMethod::Direct, false).unwrap();
        let a = march(&u0, &s, 10).unwrap();
        let b = march(&u0, &d, 10).unwrap();
        assert!(relative_max_diff(a[10].coeffs(), b[10].coeffs()) < 1e-12);
        for (x, y) in fast.records.iter().zip(&direct.records) {
            assert!((x.z_m1 - y.z_m1).abs() <= 1e-12 * x.z_m1);
        }
    }
}
