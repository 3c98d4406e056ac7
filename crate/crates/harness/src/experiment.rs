//! One experiment: build the setup, run it, and persist every artifact.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use aht_core::diagnostics::{commutator_ratio, summarize, DiagnosticsSummary};
use aht_core::dynamics::{run_monitored, BackgroundMap, RunError, SimState};
use aht_core::fields::{random_field, sobolev_norm, write_snapshot, Grid, RandomFieldSpec, ScalarField, VectorField};
use aht_core::leray::{random_gradient, random_solenoidal};
use aht_core::oracle::compare_with_flow;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ExperimentConfig, InitialCondition};
use crate::HarnessError;

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const FINAL_SNAPSHOT_FILE: &str = "final.ahtf";
pub const SAMPLES_FILE: &str = "oracle_samples.csv";
pub const PLAN_FILE: &str = "oracle_plan.csv";
pub const COMMUTATOR_FILE: &str = "commutator.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    Blowup,
}

/// Contents of the diagnostics JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub status: RunStatus,
    /// Last finite time reached.
    pub t_final: f64,
    pub records: usize,
    #[serde(flatten)]
    pub diagnostics: DiagnosticsSummary,
}

pub fn snapshot_name(index: usize) -> String {
    format!("snapshot_{index:03}.ahtf")
}

/// `A` shifted by `−(1 − scale)·θ₀·I` so the margin becomes `scale·θ₀`.
pub fn build_background(cfg: &ExperimentConfig, grid: Grid) -> Result<BackgroundMap, ConfigError> {
    let spec = &cfg.background;
    let bad = |e: aht_core::dynamics::DynamicsError| ConfigError::new("background", e.to_string());
    let bg = BackgroundMap::with_cosine_modes(grid, spec.a, &spec.phi_modes).map_err(bad)?;
    if spec.theta0_scale == 1.0 {
        return Ok(bg);
    }
    let shift = (1.0 - spec.theta0_scale) * bg.theta0();
    let mut a = spec.a;
    a[0][0] -= shift;
    a[1][1] -= shift;
    BackgroundMap::new(a, bg.phi().clone()).map_err(bad)
}

pub fn build_initial(cfg: &ExperimentConfig, grid: Grid) -> Result<VectorField, ConfigError> {
    let bad = |e: &dyn std::fmt::Display| ConfigError::new("z0", e.to_string());
    match &cfg.z0 {
        InitialCondition::Random {
            seed,
            amplitude,
            decay_exponent,
        } => {
            let spec = random_spec(cfg, *seed, *amplitude, *decay_exponent);
            random_field(grid, &spec).map_err(|e| bad(&e))
        }
        InitialCondition::GradientOnly {
            seed,
            amplitude,
            decay_exponent,
        } => {
            let spec = random_spec(cfg, *seed, *amplitude, *decay_exponent);
            random_gradient(grid, &spec).map_err(|e| bad(&e))
        }
        InitialCondition::Modes { modes } => Ok(VectorField::from_fn(grid, |x1, x2| {
            modes.iter().fold([0.0, 0.0], |acc, &(k1, k2, c1, c2)| {
                let s = (k1 as f64 * x1 + k2 as f64 * x2).sin();
                [acc[0] + c1 * s, acc[1] + c2 * s]
            })
        })),
        InitialCondition::Ipm {
            seed,
            amplitude,
            decay_exponent,
        } => {
            let spec = random_spec(cfg, *seed, 1.0, *decay_exponent);
            let raw = random_field(grid, &spec).map_err(|e| bad(&e))?;
            let z = VectorField::new(ScalarField::zeros(grid), raw.component(1).clone()).map_err(|e| bad(&e))?;
            if *amplitude == 0.0 {
                return Ok(VectorField::zeros(grid));
            }
            let norm = sobolev_norm(&z, cfg.sim.s).map_err(|e| bad(&e))?;
            Ok(z.scale(amplitude / norm))
        }
    }
}

fn random_spec(cfg: &ExperimentConfig, seed: u64, amplitude: f64, decay_exponent: f64) -> RandomFieldSpec {
    RandomFieldSpec {
        sobolev_index: cfg.sim.s,
        ..RandomFieldSpec::new(seed, amplitude, decay_exponent)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: PathBuf, contents: &str) -> Result<(), HarnessError> {
    fs::write(&path, contents).map_err(io_err(&path))
}

fn write_state(path: PathBuf, t: f64, z: &VectorField) -> Result<(), HarnessError> {
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    write_snapshot(BufWriter::new(file), t, z).map_err(io_err(&path))
}

/// Runs `cfg` and writes the time series, snapshots, diagnostics JSON and,
/// when enabled, the oracle and commutator CSVs into `cfg.output`.
///
/// A blow-up is not an error here: its partial artifacts are written and
/// the summary carries [`RunStatus::Blowup`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary, HarnessError> {
    cfg.validate()?;
    let grid = Grid::new(cfg.n).map_err(|e| ConfigError::new("n", e.to_string()))?;
    let bg = build_background(cfg, grid)?;
    let z0 = build_initial(cfg, grid)?;

    let out = &cfg.output;
    fs::create_dir_all(out).map_err(io_err(out))?;

    let mut pending: Vec<f64> = cfg.snapshots.clone();
    pending.sort_by(f64::total_cmp);
    let mut next_snapshot = 0usize;
    let mut snapshot_error = None;
    let monitor = |state: &SimState| {
        while next_snapshot < pending.len() && state.t >= pending[next_snapshot] - 1e-9 {
            if snapshot_error.is_none() {
                let path = out.join(snapshot_name(next_snapshot));
                snapshot_error = write_state(path, state.t, state.z()).err();
            }
            next_snapshot += 1;
        }
    };
    let result = run_monitored(&cfg.sim, &bg, &z0, cfg.mode, monitor);
    if let Some(e) = snapshot_error {
        return Err(e);
    }

    let (series, state, status) = match result {
        Ok((series, state)) => (series, state, RunStatus::Completed),
        Err(RunError::Diverged(b)) => (b.series, b.last_state, RunStatus::Blowup),
        Err(RunError::Setup(e)) => return Err(HarnessError::Setup(e.to_string())),
    };
    write_file(out.join(TIMESERIES_FILE), &series.to_csv())?;
    write_state(out.join(FINAL_SNAPSHOT_FILE), state.t, state.z())?;

    let mut diagnostics = summarize(&series, state.z(), &bg);
    if cfg.oracle.enabled && status == RunStatus::Completed {
        let (report, samples, plan) = compare_with_flow(&z0, state.z(), &bg, cfg.oracle.stride, cfg.oracle.epsilon)
            .map_err(|e| ConfigError::new("oracle", e.to_string()))?;
        write_file(out.join(SAMPLES_FILE), &samples.to_csv())?;
        write_file(out.join(PLAN_FILE), &plan.to_csv())?;
        diagnostics.oracle = Some(report);
    }
    if cfg.commutator.samples > 0 {
        let ratios = commutator_ensemble(cfg, grid)?;
        let mut csv = String::from("i,ratio\n");
        for (i, r) in ratios.iter().enumerate() {
            csv.push_str(&format!("{i},{r:e}\n"));
        }
        write_file(out.join(COMMUTATOR_FILE), &csv)?;
        diagnostics.commutator_ratio_max = ratios.iter().copied().reduce(f64::max);
    }

    let summary = RunSummary {
        scenario: cfg.scenario.clone(),
        status,
        t_final: state.t,
        records: series.len(),
        diagnostics,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(out.join(DIAGNOSTICS_FILE), &json)?;
    Ok(summary)
}

/// Ratios for `samples` seeded pairs: solenoidal `u` against a general `z`.
pub fn commutator_ensemble(cfg: &ExperimentConfig, grid: Grid) -> Result<Vec<f64>, HarnessError> {
    let c = &cfg.commutator;
    let base = cfg.sim.seed;
    (0..c.samples as u64)
        .map(|i| {
            let spec = |seed| random_spec(cfg, seed, 1.0, c.decay_exponent);
            let u = random_solenoidal(grid, &spec(base.wrapping_add(i)))
                .map_err(|e| ConfigError::new("commutator", e.to_string()))?;
            let z = random_field(grid, &spec(base.wrapping_add(10_000 + i)))
                .map_err(|e| ConfigError::new("commutator", e.to_string()))?;
            commutator_ratio(&u, &z, cfg.sim.s).map_err(|e| HarnessError::Setup(e.to_string()))
        })
        .collect()
}
