//! Parameter sweeps, one experiment per value, run concurrently.

use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConfigError, ExperimentConfig};
use crate::experiment::{run_experiment, RunStatus, RunSummary};
use crate::HarnessError;

pub const SUMMARY_FILE: &str = "summary.csv";
/// Environment variable holding the sweep worker count.
pub const WORKERS_ENV: &str = "AHT_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Amplitude,
    N,
    Theta0Scale,
    Epsilon,
}

impl SweepParam {
    pub const NAMES: [&'static str; 4] = ["amplitude", "n", "theta0_scale", "epsilon"];

    pub fn name(self) -> &'static str {
        match self {
            Self::Amplitude => "amplitude",
            Self::N => "n",
            Self::Theta0Scale => "theta0_scale",
            Self::Epsilon => "epsilon",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = base.clone();
        match self {
            Self::Amplitude => {
                *cfg.z0.amplitude_mut().ok_or_else(|| {
                    ConfigError::new("z0.kind", "an amplitude sweep needs a random, gradient-only or ipm z0")
                })? = value;
            }
            Self::N => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(ConfigError::new("n", format!("{value} is not a grid size")));
                }
                cfg.n = value as usize;
            }
            Self::Theta0Scale => cfg.background.theta0_scale = value,
            Self::Epsilon => {
                cfg.oracle.enabled = true;
                cfg.oracle.epsilon = Some(value);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FromStr for SweepParam {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "amplitude" => Ok(Self::Amplitude),
            "n" => Ok(Self::N),
            "theta0_scale" => Ok(Self::Theta0Scale),
            "epsilon" => Ok(Self::Epsilon),
            _ => Err(ConfigError::new(
                "param",
                format!("unknown sweep parameter `{s}`; expected one of {}", Self::NAMES.join(", ")),
            )),
        }
    }
}

/// Parses a comma-separated list of numbers.
pub fn parse_values(text: &str) -> Result<Vec<f64>, ConfigError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| ConfigError::new("values", format!("`{s}` is not a number")))
        })
        .collect()
}

/// One line of the sweep summary; empty cells mean "not available".
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub status: String,
    pub blowup: bool,
    pub fitted_rate_l2: Option<f64>,
    pub fitted_rate_hs: Option<f64>,
    pub balance_residual: Option<f64>,
    pub moment_drift_max: Option<f64>,
    pub solenoidal_resid: Option<f64>,
    pub hessian_min_eig: Option<f64>,
    pub oracle_map_error: Option<f64>,
    pub error: String,
}

impl SweepRow {
    fn new(param: SweepParam, value: f64, outcome: Result<RunSummary, HarnessError>) -> Self {
        let mut row = Self {
            parameter: param.name().to_string(),
            value,
            status: String::new(),
            blowup: false,
            fitted_rate_l2: None,
            fitted_rate_hs: None,
            balance_residual: None,
            moment_drift_max: None,
            solenoidal_resid: None,
            hessian_min_eig: None,
            oracle_map_error: None,
            error: String::new(),
        };
        match outcome {
            Ok(s) => {
                let d = &s.diagnostics;
                row.status = match s.status {
                    RunStatus::Completed => "completed".into(),
                    RunStatus::Blowup => "blowup".into(),
                };
                row.blowup = s.status == RunStatus::Blowup;
                row.fitted_rate_l2 = d.fitted_rate_l2;
                row.fitted_rate_hs = d.fitted_rate_hs;
                row.balance_residual = d.balance_residual;
                row.moment_drift_max = Some(d.moment_drift_max);
                row.solenoidal_resid = Some(d.solenoidal_resid);
                row.hessian_min_eig = Some(d.hessian_min_eig);
                row.oracle_map_error = d.oracle.as_ref().map(|o| o.map_error);
            }
            Err(e) => {
                row.status = "error".into();
                row.error = e.to_string();
            }
        }
        row
    }
}

/// Worker count from [`WORKERS_ENV`], `None` when unset.
pub fn workers_from_env() -> Result<Option<usize>, ConfigError> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(ConfigError::new(WORKERS_ENV, format!("`{v}` is not a positive integer"))),
        },
    }
}

/// Runs one experiment per value in `base.output/<param>-<value>` and
/// writes `summary.csv` in `base.output`. Failed runs still produce a row.
pub fn run_sweep(
    base: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    workers: Option<usize>,
) -> Result<Vec<SweepRow>, HarnessError> {
    if values.is_empty() {
        return Err(ConfigError::new("values", "sweep needs at least one value").into());
    }
    base.validate()?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = workers {
            b = b.num_threads(w);
        }
        b.build().map_err(|e| HarnessError::Setup(e.to_string()))?
    };
    let rows: Vec<SweepRow> = pool.install(|| {
        values
            .par_iter()
            .map(|&v| {
                let outcome = param.apply(base, v).map_err(HarnessError::from).and_then(|mut cfg| {
                    cfg.output = base.output.join(format!("{}-{v}", param.name()));
                    run_experiment(&cfg)
                });
                SweepRow::new(param, v, outcome)
            })
            .collect()
    });
    write_rows(&base.output.join(SUMMARY_FILE), &rows)?;
    Ok(rows)
}

pub(crate) fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| io(e.into()))?;
    for r in rows {
        w.serialize(r).map_err(|e| io(e.into()))?;
    }
    w.flush().map_err(io)
}
