//! `gns`: experiment runner for the spectral Navier-Stokes toolkit.
//!
//! Exit status is 0 when every monitor passes, 2 when a monitor fails and 1
//! on usage or configuration errors. Logging verbosity comes from `GNS_LOG`.

mod config;
mod error;
mod output;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gns_core::evolve::RunSummary;
use gns_core::fixedpoint::choose_parameters_with;
use gns_core::verify::{check_lemma1, check_lemma23_random, check_lemma4};
use gns_core::{build_lattice, lemma4_constant, picard_solve, simulate, ContractionCondition, GevreyParams, MarginReport};
use rayon::prelude::*;

use crate::error::CliError;
use crate::output::StagedDir;

#[derive(Parser)]
#[command(name = "gns", version, about = "Spectral Navier-Stokes experiments in Gevrey-weighted Fourier norms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// March a configuration in time and record the monitors.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the local solution by Picard iteration and report diagnostics.
    Picard {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Condition::Required)]
        condition: Condition,
    },
    /// Check the product, Duhamel and interpolation estimates on random data.
    Verify {
        #[arg(long, value_enum)]
        lemma: Lemma,
        #[arg(long, default_value_t = 6)]
        grid: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 2.0)]
        sigma: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the interpolation constant c(a, σ).
    #[command(name = "lemma4-const")]
    Lemma4Const {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        sigma: f64,
    },
    /// Run a configuration over a range of amplitudes.
    Decay {
        #[arg(long)]
        config: PathBuf,
        /// `lo:hi:steps`
        #[arg(long)]
        sweep_amplitude: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Condition {
    Required,
    Stated,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Lemma {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    #[value(name = "4")]
    Four,
    All,
}

enum Outcome {
    Passed,
    MonitorFailed,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GNS_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(Outcome::Passed) => ExitCode::SUCCESS,
        Ok(Outcome::MonitorFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::Simulate { config, out } => run_simulate(&config, &out),
        Command::Picard { config, out, condition } => run_picard(&config, &out, condition),
        Command::Verify {
            lemma,
            grid,
            samples,
            seed,
            a,
            sigma,
            out,
        } => run_verify(lemma, grid, samples, seed, a, sigma, out.as_deref()),
        Command::Lemma4Const { a, sigma } => {
            println!("{}", lemma4_constant(a, sigma)?);
            Ok(Outcome::Passed)
        }
        Command::Decay {
            config,
            sweep_amplitude,
            out,
            jobs,
        } => run_decay(&config, &sweep_amplitude, &out, jobs),
    }
}

fn verdict(ok: bool) -> Outcome {
    if ok {
        Outcome::Passed
    } else {
        Outcome::MonitorFailed
    }
}

fn simulate_into(cfg: &gns_core::SimConfig, dir: &mut StagedDir) -> Result<RunSummary, CliError> {
    let series = simulate(cfg)?;
    let mut csv = Vec::new();
    series.write_csv(&mut csv)?;
    dir.write("timeseries.csv", &csv)?;
    let summary = series.summary();
    dir.write("summary.json", summary.to_json().as_bytes())?;
    Ok(summary)
}

fn run_simulate(config_path: &Path, out: &Path) -> Result<Outcome, CliError> {
    let cfg = config::load(config_path)?;
    let mut dir = StagedDir::create(out)?;
    let summary = simulate_into(&cfg, &mut dir)?;
    let path = dir.finish("simulate", Some(config_path), Some(cfg.seed))?;
    println!(
        "z(0) = {:.6e}, z(t_end) = {:.6e}, monitors {} -> {}",
        summary.z0,
        summary.z_end,
        if summary.all_monitors_ok { "passed" } else { "FAILED" },
        path.display()
    );
    Ok(verdict(summary.all_monitors_ok))
}

fn run_picard(config_path: &Path, out: &Path, condition: Condition) -> Result<Outcome, CliError> {
    let cfg = config::load(config_path)?;
    let condition = match condition {
        Condition::Required => ContractionCondition::Required,
        Condition::Stated => ContractionCondition::Stated,
    };
    let u0 = cfg.initial_field()?;
    let mut params = choose_parameters_with(&u0, cfg.nu, &cfg.gevrey(-1), cfg.dt, condition)?;
    params.tol = cfg.picard_tol;
    params.max_iters = cfg.picard_max_iters;
    params.method = cfg.method;
    params.linearized = cfg.linearized;
    let mut dir = StagedDir::create(out)?;
    let solution = picard_solve(&u0, cfg.nu, &params)?;
    let diag = &solution.diagnostics;
    dir.write("picard.json", diag.to_json().as_bytes())?;
    let mut csv = String::from("t,z_m1,z_0,z_p1\n");
    for n in solution.trajectory.norms() {
        writeln!(csv, "{:e},{:e},{:e},{:e}", n.t, n.z_m1, n.z_0, n.z_p1).expect("string write");
    }
    dir.write("trajectory.csv", csv.as_bytes())?;
    let ok = diag.converged
        && diag.max_ratio() <= 0.55
        && diag.ball.iter().all(|b| b.inside)
        && diag.residual <= 10.0 * params.tol;
    let path = dir.finish("picard", Some(config_path), Some(cfg.seed))?;
    println!(
        "{} iterations, max gap ratio {:.4}, residual {:.3e}, T = {:.6} -> {}",
        diag.iterations,
        diag.max_ratio(),
        diag.residual,
        params.horizon / cfg.nu,
        path.display()
    );
    Ok(verdict(ok))
}

fn run_verify(
    lemma: Lemma,
    grid: usize,
    samples: usize,
    seed: u64,
    a: f64,
    sigma: f64,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    if samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    let lattice = build_lattice(grid)?;
    let p = GevreyParams::new(-1, a, sigma)?;
    let wants = |l: Lemma| lemma == l || lemma == Lemma::All;
    // Fail on bad output paths before spending time on samples.
    let mut dir = out.map(StagedDir::create).transpose()?;
    let mut reports: Vec<MarginReport> = Vec::new();
    if wants(Lemma::One) {
        reports.push(check_lemma1(samples, &lattice, seed, &p)?);
    }
    if wants(Lemma::Two) || wants(Lemma::Three) {
        let (l2, l3) = check_lemma23_random(samples, &lattice, seed, &p, 1.0)?;
        if wants(Lemma::Two) {
            reports.push(l2);
        }
        if wants(Lemma::Three) {
            reports.push(l3);
        }
    }
    if wants(Lemma::Four) {
        reports.extend(check_lemma4(samples, &lattice, a, sigma, seed)?);
    }
    for r in &reports {
        println!(
            "{}: worst ratio {:.6e} over {} samples ({} skipped), {}",
            r.id,
            r.worst_ratio,
            r.samples,
            r.skipped,
            if r.passed() { "PASS" } else { "FAIL" }
        );
    }
    if let Some(mut dir) = dir.take() {
        let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
        dir.write("verify.json", json.as_bytes())?;
        dir.finish("verify", None, Some(seed))?;
    }
    Ok(verdict(reports.iter().all(MarginReport::passed)))
}

fn run_decay(config_path: &Path, sweep: &str, out: &Path, jobs: Option<usize>) -> Result<Outcome, CliError> {
    let cfg = config::load(config_path)?;
    let amplitudes = config::parse_sweep(sweep)?;
    if jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut dir = StagedDir::create(out)?;
    let runs = pool.install(|| {
        amplitudes
            .par_iter()
            .map(|&amplitude| {
                let mut c = cfg.clone();
                c.amplitude = amplitude;
                let series = simulate(&c)?;
                let mut csv = Vec::new();
                series.write_csv(&mut csv)?;
                Ok((csv, series.summary()))
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let mut table = String::from("amplitude,z0,terminal_ratio,fitted_rate,t_half,all_monitors_ok\n");
    let opt = |x: Option<f64>| x.map_or_else(String::new, |v| format!("{v:e}"));
    for (i, (amplitude, (csv, summary))) in amplitudes.iter().zip(&runs).enumerate() {
        let prefix = format!("run_{i:03}/");
        dir.write(&format!("{prefix}timeseries.csv"), csv)?;
        dir.write(&format!("{prefix}summary.json"), summary.to_json().as_bytes())?;
        writeln!(
            table,
            "{amplitude:e},{:e},{:e},{},{},{}",
            summary.z0,
            summary.decay.terminal_ratio,
            opt(summary.decay.fitted_rate),
            opt(summary.decay.t_half),
            summary.all_monitors_ok
        )
        .expect("string write");
    }
    dir.write("decay.csv", table.as_bytes())?;
    let ok = runs.iter().all(|(_, s)| s.all_monitors_ok);
    let path = dir.finish("decay", Some(config_path), Some(cfg.seed))?;
    println!("{} runs -> {}", runs.len(), path.display());
    Ok(verdict(ok))
}
