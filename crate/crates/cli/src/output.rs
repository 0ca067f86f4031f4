//! Output directories that appear atomically, with a hashed manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Option<PathBuf>,
    pub output: PathBuf,
    pub seed: Option<u64>,
    pub timestamp: String,
    /// sha256 of every emitted file, keyed by path relative to the output.
    pub artifacts: BTreeMap<String, String>,
}

/// Files are written into a hidden sibling directory that is renamed onto
/// the target once the manifest is in place.
pub struct StagedDir {
    target: PathBuf,
    staging: PathBuf,
    artifacts: BTreeMap<String, String>,
}

impl StagedDir {
    pub fn create(target: &Path) -> Result<Self, CliError> {
        if target.exists() {
            let empty = target.is_dir() && fs::read_dir(target)?.next().is_none();
            if !empty {
                return Err(CliError::Usage(format!(
                    "output directory {} exists and is not empty",
                    target.display()
                )));
            }
        }
        let name = target
            .file_name()
            .ok_or_else(|| CliError::Usage(format!("invalid output path {}", target.display())))?
            .to_string_lossy();
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| unwritable(&parent, e))?;
        let staging = parent.join(format!(".{name}.partial-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir(&staging).map_err(|e| unwritable(&parent, e))?;
        Ok(Self {
            target: target.to_path_buf(),
            staging,
            artifacts: BTreeMap::new(),
        })
    }

    pub fn write(&mut self, relative: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.staging.join(relative);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, bytes)?;
        self.artifacts.insert(relative.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    pub fn finish(self, subcommand: &str, config: Option<&Path>, seed: Option<u64>) -> Result<PathBuf, CliError> {
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            config: config.map(Path::to_path_buf),
            output: self.target.clone(),
            seed,
            timestamp: chrono::Utc::now().to_rfc3339(),
            artifacts: self.artifacts.clone(),
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(self.staging.join("manifest.json"), json)?;
        if self.target.exists() {
            fs::remove_dir(&self.target)?;
        }
        fs::rename(&self.staging, &self.target)?;
        Ok(self.target.clone())
    }
}

impl Drop for StagedDir {
    fn drop(&mut self) {
        if self.staging.exists() {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

fn unwritable(path: &Path, e: std::io::Error) -> CliError {
    CliError::Usage(format!("cannot write under {}: {e}", path.display()))
}
