//! Named scenarios.

use std::path::PathBuf;

use aht_core::dynamics::{RhsMode, SimConfig};

use crate::config::{BackgroundSpec, CommutatorSettings, ConfigError, ExperimentConfig, InitialCondition, OracleSettings};

pub const PRESET_NAMES: [&str; 6] = [
    "stability",
    "linearized",
    "ipm",
    "commutator-bench",
    "oracle-compare",
    "blowup-probe",
];

const IDENTITY: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];

fn base(name: &str) -> ExperimentConfig {
    ExperimentConfig {
        scenario: name.to_string(),
        n: 128,
        mode: RhsMode::Nonlinear,
        sim: SimConfig {
            s: 3,
            cfl: 0.5,
            dt_max: 0.01,
            t_end: 20.0,
            observer_stride: 2,
            dealias: true,
            seed: 1,
        },
        background: BackgroundSpec {
            a: IDENTITY,
            phi_modes: Vec::new(),
            theta0_scale: 1.0,
        },
        z0: InitialCondition::Random {
            seed: 1,
            amplitude: 0.01,
            decay_exponent: 4.0,
        },
        oracle: OracleSettings {
            enabled: false,
            stride: 2,
            epsilon: None,
        },
        commutator: CommutatorSettings {
            samples: 0,
            decay_exponent: 4.0,
        },
        snapshots: vec![0.0, 5.0, 10.0, 20.0],
        output: PathBuf::from("out").join(name),
    }
}

/// A fully populated configuration for `name`.
pub fn preset(name: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = base(name);
    match name {
        "stability" => {}
        "linearized" => {
            cfg.mode = RhsMode::Linearized;
            cfg.n = 64;
            cfg.sim.t_end = 3.0;
            cfg.sim.observer_stride = 1;
            cfg.background.a = [[1.0, 0.0], [0.0, 2.0]];
            cfg.z0 = InitialCondition::Modes {
                modes: vec![(0, 1, 0.01, 0.0)],
            };
            cfg.snapshots = vec![0.0, 3.0];
        }
        "ipm" => {
            // ∇y* = diag(δ, 1): the second component plays the stratified density
            cfg.n = 64;
            cfg.sim.t_end = 40.0;
            cfg.background.a = [[0.1, 0.0], [0.0, 1.0]];
            cfg.z0 = InitialCondition::Ipm {
                seed: 1,
                amplitude: 0.01,
                decay_exponent: 4.0,
            };
            cfg.snapshots = vec![0.0, 10.0, 40.0];
        }
        "commutator-bench" => {
            cfg.sim.t_end = 1.0;
            cfg.commutator.samples = 100;
            cfg.snapshots = Vec::new();
        }
        "oracle-compare" => {
            cfg.n = 64;
            cfg.oracle = OracleSettings {
                enabled: true,
                stride: 2,
                epsilon: Some(0.05),
            };
        }
        "blowup-probe" => {
            cfg.n = 64;
            cfg.sim.t_end = 10.0;
            cfg.z0 = InitialCondition::Random {
                seed: 1,
                amplitude: 50.0,
                decay_exponent: 3.0,
            };
            cfg.snapshots = vec![0.0, 1.0, 10.0];
        }
        _ => {
            return Err(ConfigError::new(
                "scenario",
                format!("unknown preset `{name}`; available: {}", PRESET_NAMES.join(", ")),
            ))
        }
    }
    Ok(cfg)
}
