use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config {path}: {msg}")]
    Config { path: PathBuf, msg: String },
    #[error(transparent)]
    Core(#[from] gns_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Divergence of the Picard iteration is a monitor failure, everything
    /// else is a usage or configuration problem.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(gns_core::Error::Divergence { .. }) => 2,
            _ => 1,
        }
    }
}
