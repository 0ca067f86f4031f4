use std::path::Path;

use gns_core::SimConfig;

use crate::error::CliError;

/// Reads a flat TOML run configuration. Unknown keys are rejected and a
/// relative snapshot path is taken relative to the config file.
pub fn load(path: &Path) -> Result<SimConfig, CliError> {
    let err = |msg: String| CliError::Config {
        path: path.to_path_buf(),
        msg,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let mut config: SimConfig = toml::from_str(&text).map_err(|e| err(e.message().to_string()))?;
    if let Some(snap) = &config.snapshot {
        if snap.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            config.snapshot = Some(base.join(snap));
        }
    }
    config.validate().map_err(|e| err(e.to_string()))?;
    Ok(config)
}

/// `lo:hi:steps` into `steps` evenly spaced values.
pub fn parse_sweep(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("sweep {spec:?} must be lo:hi:steps with 0 <= lo <= hi, steps >= 1"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}
