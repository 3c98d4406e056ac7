//! Experiment runner for the `aht-core` simulator: configuration, presets,
//! single runs, sweeps and report aggregation.

use std::path::PathBuf;

pub mod config;
pub mod experiment;
pub mod presets;
pub mod report;
pub mod sweep;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, RunStatus, RunSummary};
pub use presets::{preset, PRESET_NAMES};
pub use report::build_report;
pub use sweep::{run_sweep, SweepParam, SweepRow};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Setup(String),
    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unreadable diagnostics {}: {message}", path.display())]
    Report { path: PathBuf, message: String },
}

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const CONFIG: u8 = 2;
    pub const BLOWUP: u8 = 3;
    pub const IO: u8 = 4;
}

impl HarnessError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Setup(_) => exit::CONFIG,
            Self::Io { .. } | Self::Report { .. } => exit::IO,
        }
    }
}
