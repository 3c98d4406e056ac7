//! Experiment configuration and its two interchangeable text forms.
//!
//! The flat form is one `key = value` per line with dotted keys for nested
//! sections. Values are JSON literals (numbers, booleans, `null`, arrays,
//! quoted strings); anything that is not valid JSON is taken as a bare
//! string. Blank lines and lines starting with `#` are ignored.
//!
//! ```text
//! scenario = stability
//! n = 128
//! sim.t_end = 20.0
//! background.a = [[1.0,0.0],[0.0,1.0]]
//! z0.kind = random
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use aht_core::dynamics::{DynamicsError, RhsMode, SimConfig};
use aht_core::fields::Grid;
use aht_core::oracle::EXACT_LIMIT;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{key}: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

/// Background map `y* = Ax + ∇φ`, `φ = Σ amp·cos(k·x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundSpec {
    pub a: [[f64; 2]; 2],
    /// `(k1, k2, amp)` cosine modes of `φ`.
    #[serde(default)]
    pub phi_modes: Vec<(i64, i64, f64)>,
    /// Shifts `A` by a multiple of the identity so the convexity margin
    /// becomes `theta0_scale · θ₀`.
    #[serde(default = "one")]
    pub theta0_scale: f64,
}

fn one() -> f64 {
    1.0
}

/// Initial perturbation `z0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Seeded random field with both solenoidal and gradient parts.
    Random {
        seed: u64,
        amplitude: f64,
        decay_exponent: f64,
    },
    /// Pure gradient: already steady, the run stops at once.
    GradientOnly {
        seed: u64,
        amplitude: f64,
        decay_exponent: f64,
    },
    /// `Σ (c1, c2)·sin(k·x)` over `(k1, k2, c1, c2)` entries.
    Modes { modes: Vec<(i64, i64, f64, f64)> },
    /// `(0, ρ′)` with `ρ′` a seeded random scalar.
    Ipm {
        seed: u64,
        amplitude: f64,
        decay_exponent: f64,
    },
}

impl InitialCondition {
    pub fn amplitude_mut(&mut self) -> Option<&mut f64> {
        match self {
            Self::Random { amplitude, .. } | Self::GradientOnly { amplitude, .. } | Self::Ipm { amplitude, .. } => {
                Some(amplitude)
            }
            Self::Modes { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSettings {
    pub enabled: bool,
    /// Lattice stride of the sample points.
    pub stride: usize,
    /// Entropic regularization; `null` skips Sinkhorn.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommutatorSettings {
    /// Ensemble size; 0 disables the benchmark.
    pub samples: usize,
    pub decay_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub n: usize,
    pub mode: RhsMode,
    pub sim: SimConfig,
    pub background: BackgroundSpec,
    pub z0: InitialCondition,
    pub oracle: OracleSettings,
    pub commutator: CommutatorSettings,
    /// Times at which the state is written; each file holds the first state
    /// at or after the requested time.
    #[serde(default)]
    pub snapshots: Vec<f64>,
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        Grid::new(self.n).map_err(|e| ConfigError::new("n", e.to_string()))?;
        self.sim.validate().map_err(|e| match e {
            DynamicsError::Config { key, message } => ConfigError::new(format!("sim.{key}"), message),
            other => ConfigError::new("sim", other.to_string()),
        })?;

        let bg = &self.background;
        if bg.a.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ConfigError::new("background.a", "entries must be finite"));
        }
        if bg.a[0][1] != bg.a[1][0] {
            return Err(ConfigError::new("background.a", "matrix must be symmetric"));
        }
        if !(bg.theta0_scale > 0.0 && bg.theta0_scale.is_finite()) {
            return Err(ConfigError::new("background.theta0_scale", "must be positive"));
        }
        if bg.phi_modes.iter().any(|m| !m.2.is_finite()) {
            return Err(ConfigError::new("background.phi_modes", "amplitudes must be finite"));
        }

        match &self.z0 {
            InitialCondition::Random {
                amplitude,
                decay_exponent,
                ..
            }
            | InitialCondition::GradientOnly {
                amplitude,
                decay_exponent,
                ..
            }
            | InitialCondition::Ipm {
                amplitude,
                decay_exponent,
                ..
            } => {
                if !(*amplitude >= 0.0 && amplitude.is_finite()) {
                    return Err(ConfigError::new("z0.amplitude", "must be finite and >= 0"));
                }
                if !(*decay_exponent >= 3.0 && decay_exponent.is_finite()) {
                    return Err(ConfigError::new("z0.decay_exponent", "must be >= 3"));
                }
            }
            InitialCondition::Modes { modes } => {
                if modes.iter().any(|m| !(m.2.is_finite() && m.3.is_finite())) {
                    return Err(ConfigError::new("z0.modes", "coefficients must be finite"));
                }
            }
        }

        let o = &self.oracle;
        if o.enabled {
            if o.stride == 0 || self.n % o.stride != 0 {
                return Err(ConfigError::new("oracle.stride", format!("must divide n = {}", self.n)));
            }
            let samples = (self.n / o.stride).pow(2);
            if samples > EXACT_LIMIT {
                return Err(ConfigError::new(
                    "oracle.stride",
                    format!("{samples} samples exceed the exact-assignment limit {EXACT_LIMIT}"),
                ));
            }
        }
        if let Some(eps) = o.epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(ConfigError::new("oracle.epsilon", "must be positive"));
            }
        }
        if self.commutator.samples > 0 && !(self.commutator.decay_exponent >= 3.0) {
            return Err(ConfigError::new("commutator.decay_exponent", "must be >= 3"));
        }
        if let Some(t) = self.snapshots.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(ConfigError::new("snapshots", format!("invalid time {t}")));
        }
        Ok(())
    }

    /// Flat `key = value` text, keys sorted.
    pub fn to_flat(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let mut out = String::new();
        for (key, leaf) in flatten(&value) {
            out.push_str(&key);
            out.push_str(" = ");
            out.push_str(&emit_leaf(&leaf));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_flat(text: &str) -> Result<Self, ConfigError> {
        Self::from_entries(parse_flat(text)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::new("<json>", e.to_string()))?;
        from_value(value)
    }

    /// Parses either form; text whose first non-blank character is `{` is
    /// read as JSON.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        if text.trim_start().starts_with('{') {
            Self::from_json(text)
        } else {
            Self::from_flat(text)
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("<file>", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies `key=value` overrides with the flat-value grammar.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self, ConfigError> {
        let value = serde_json::to_value(self).expect("config serializes");
        let mut entries: BTreeMap<String, Value> = flatten(&value).into_iter().collect();
        for raw in overrides {
            let raw = raw.as_ref();
            let (key, val) = raw
                .split_once('=')
                .ok_or_else(|| ConfigError::new(raw, "override must look like key=value"))?;
            let key = key.trim();
            check_key(key)?;
            // a new leaf replaces any section or leaf it overlaps
            entries.retain(|k, _| !(k.starts_with(&format!("{key}.")) || key.starts_with(&format!("{k}."))));
            entries.insert(key.to_string(), parse_leaf(val.trim()));
        }
        Self::from_entries(entries.into_iter().collect())
    }

    fn from_entries(entries: Vec<(String, Value)>) -> Result<Self, ConfigError> {
        from_value(unflatten(entries)?)
    }
}

fn from_value(value: Value) -> Result<ExperimentConfig, ConfigError> {
    let z0 = value.get("z0").cloned();
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        if path == "z0" {
            if let Some(refined) = z0.and_then(refine_z0_error) {
                return refined;
            }
        }
        ConfigError::new(if path == "." { "<root>".to_string() } else { path }, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

// Tagged enums buffer their content, which hides the failing field; replay
// the section through a plain struct of the same shape to recover it.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct RandomProbe {
    seed: u64,
    amplitude: f64,
    decay_exponent: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct ModesProbe {
    modes: Vec<(i64, i64, f64, f64)>,
}

fn refine_z0_error(mut z0: Value) -> Option<ConfigError> {
    let kind = z0.as_object_mut()?.remove("kind")?;
    let err = match kind.as_str()? {
        "random" | "gradient-only" | "ipm" => serde_path_to_error::deserialize::<_, RandomProbe>(z0).err()?,
        "modes" => serde_path_to_error::deserialize::<_, ModesProbe>(z0).err()?,
        _ => return None,
    };
    let path = err.path().to_string();
    let key = if path == "." { "z0".to_string() } else { format!("z0.{path}") };
    Some(ConfigError::new(key, err.into_inner().to_string()))
}

fn flatten(value: &Value) -> Vec<(String, Value)> {
    fn walk(prefix: &str, value: &Value, out: &mut Vec<(String, Value)>) {
        match value {
            Value::Object(map) if !map.is_empty() || prefix.is_empty() => {
                for (k, v) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, v, out);
                }
            }
            _ => out.push((prefix.to_string(), value.clone())),
        }
    }
    let mut out = Vec::new();
    walk("", value, &mut out);
    out
}

fn unflatten(entries: Vec<(String, Value)>) -> Result<Value, ConfigError> {
    let mut root = Map::new();
    for (key, leaf) in entries {
        let parts: Vec<&str> = key.split('.').collect();
        let mut node = &mut root;
        for part in &parts[..parts.len() - 1] {
            let slot = node.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
            node = match slot {
                Value::Object(m) => m,
                _ => return Err(ConfigError::new(key.clone(), format!("`{part}` is already a value"))),
            };
        }
        let last = parts[parts.len() - 1];
        if node.contains_key(last) {
            return Err(ConfigError::new(key.clone(), "set more than once"));
        }
        node.insert(last.to_string(), leaf);
    }
    Ok(Value::Object(root))
}

fn check_key(key: &str) -> Result<(), ConfigError> {
    let ok = !key.is_empty()
        && key
            .split('.')
            .all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'));
    if ok {
        Ok(())
    } else {
        Err(ConfigError::new(key, "malformed key"))
    }
}

fn parse_leaf(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

fn emit_leaf(v: &Value) -> String {
    match v {
        // bare strings only when they cannot be mistaken for another literal
        Value::String(s) if !s.is_empty() && s.trim() == s && serde_json::from_str::<Value>(s).is_err() => s.clone(),
        _ => serde_json::to_string(v).expect("json value serializes"),
    }
}

fn parse_flat(text: &str) -> Result<Vec<(String, Value)>, ConfigError> {
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, val) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::new(format!("line {}", lineno + 1), "expected `key = value`"))?;
        let key = key.trim();
        check_key(key)?;
        entries.push((key.to_string(), parse_leaf(val.trim())));
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{preset, PRESET_NAMES};

    #[test]
    fn flat_round_trip_for_every_preset() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            let text = cfg.to_flat();
            assert_eq!(ExperimentConfig::from_flat(&text).unwrap(), cfg, "{name}:\n{text}");
            assert_eq!(ExperimentConfig::parse(&cfg.to_json()).unwrap(), cfg);
        }
    }

    #[test]
    fn strings_that_look_like_literals_are_quoted() {
        let mut cfg = preset("stability").unwrap();
        cfg.scenario = "true".into();
        cfg.output = PathBuf::from("12");
        let text = cfg.to_flat();
        assert!(text.contains("scenario = \"true\""));
        assert_eq!(ExperimentConfig::from_flat(&text).unwrap(), cfg);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let cfg = preset("linearized").unwrap();
        let text = format!("# header\n\n{}\n   # trailing\n", cfg.to_flat());
        assert_eq!(ExperimentConfig::from_flat(&text).unwrap(), cfg);
    }

    #[test]
    fn errors_name_the_key() {
        let cfg = preset("stability").unwrap();
        let err = cfg.with_overrides(&["z0.amplitude=abc"]).unwrap_err();
        assert_eq!(err.key, "z0.amplitude");
        let err = cfg.with_overrides(&["z0.amplitude=-1"]).unwrap_err();
        assert_eq!(err.key, "z0.amplitude");
        let err = cfg.with_overrides(&["n=100"]).unwrap_err();
        assert_eq!(err.key, "n");
        let err = cfg.with_overrides(&["background.a=[[1,0.5],[0,1]]"]).unwrap_err();
        assert_eq!(err.key, "background.a");
        let err = cfg.with_overrides(&["sim.bogus=1"]).unwrap_err();
        assert_eq!(err.key, "sim.bogus");
        let err = cfg.with_overrides(&["sim.cfl=2"]).unwrap_err();
        assert_eq!(err.key, "sim.cfl");
        let err = cfg.with_overrides(&["oracle.enabled=true", "oracle.stride=3"]).unwrap_err();
        assert_eq!(err.key, "oracle.stride");
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let text = format!("{}n = 64\n", preset("stability").unwrap().to_flat());
        assert_eq!(ExperimentConfig::from_flat(&text).unwrap_err().key, "n");
    }

    #[test]
    fn overrides_can_switch_variants() {
        let cfg = preset("stability").unwrap();
        let out = cfg.with_overrides(&["z0={\"kind\":\"modes\",\"modes\":[[0,1,0.01,0.0]]}"]).unwrap();
        assert_eq!(
            out.z0,
            InitialCondition::Modes {
                modes: vec![(0, 1, 0.01, 0.0)]
            }
        );
        let out = cfg.with_overrides(&["sim.t_end=1.5", "n=32"]).unwrap();
        assert_eq!(out.sim.t_end, 1.5);
        assert_eq!(out.n, 32);
    }
}
