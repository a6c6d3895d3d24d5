//! Run configuration: a preset, optionally patched by a JSON file, then by
//! command-line flags.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use kpp_core::harness::{preset, ExperimentConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const DEFAULT_PRESET: &str = "ci";
pub const DEFAULT_OUTPUT_DIR: &str = "out";

/// Keys of the file that describe the run rather than the experiment.
const RUN_KEYS: [&str; 3] = ["preset", "experiment", "output_dir"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    MediaPreview,
    Theorem1,
    LiminfProbe,
    VerifyBounds,
    Speed,
    Zlatos,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::MediaPreview => "media-preview",
            Experiment::Theorem1 => "theorem1",
            Experiment::LiminfProbe => "liminf-probe",
            Experiment::VerifyBounds => "verify-bounds",
            Experiment::Speed => "speed",
            Experiment::Zlatos => "zlatos",
        }
    }
}

/// Effective configuration of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: String,
    pub experiment: Experiment,
    pub output_dir: PathBuf,
    pub config: ExperimentConfig,
}

impl RunConfig {
    /// The configuration as one flat JSON object, readable by
    /// [`parse_config`].
    pub fn to_json(&self) -> Value {
        let mut map = match serde_json::to_value(&self.config) {
            Ok(Value::Object(map)) => map,
            _ => Map::new(),
        };
        map.insert("preset".into(), Value::String(self.preset.clone()));
        map.insert("experiment".into(), Value::String(self.experiment.name().into()));
        map.insert(
            "output_dir".into(),
            Value::String(self.output_dir.to_string_lossy().into_owned()),
        );
        Value::Object(map)
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub preset: Option<String>,
    pub output_dir: Option<PathBuf>,
    /// Replaces the traced levels when non-empty.
    pub gamma: Vec<f64>,
    pub horizon: Option<f64>,
    pub dx: Option<f64>,
    pub dt: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },

    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("parse error at key `{key}`: {message}")]
    Key { key: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),
}

/// Overlays `patch` onto `base`. Objects merge key by key, except the
/// `sequence` block, which is replaced as a whole because its parameters
/// depend on its kind.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(base), Value::Object(patch)) => {
            for (key, value) in patch {
                match base.get_mut(&key) {
                    Some(slot) if key != "sequence" => merge(slot, value),
                    _ => {
                        base.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}

fn string_key(map: &mut Map<String, Value>, key: &str) -> Result<Option<String>, ConfigError> {
    match map.remove(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(other) => Err(ConfigError::Key {
            key: key.into(),
            message: format!("expected a string, got {other}"),
        }),
    }
}

fn read_file(path: &Path) -> Result<Map<String, Value>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(ConfigError::Key {
            key: "(top level)".into(),
            message: "the configuration must be a JSON object".into(),
        }),
        Err(e) => Err(ConfigError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }),
    }
}

/// Expands the preset, applies the file and the flags, and validates.
///
/// The command being run wins over an `experiment` key in the file.
pub fn parse_config(file: Option<&Path>, experiment: Experiment, flags: &Overrides) -> Result<RunConfig, ConfigError> {
    let mut patch = match file {
        Some(path) => read_file(path)?,
        None => Map::new(),
    };
    let file_preset = string_key(&mut patch, RUN_KEYS[0])?;
    if let Some(name) = string_key(&mut patch, RUN_KEYS[1])? {
        Experiment::from_str(&name, false).map_err(|message| ConfigError::Key {
            key: RUN_KEYS[1].into(),
            message,
        })?;
    }
    let file_dir = string_key(&mut patch, RUN_KEYS[2])?;

    let preset_name = flags
        .preset
        .clone()
        .or(file_preset)
        .unwrap_or_else(|| DEFAULT_PRESET.into());
    let base = preset(&preset_name).map_err(|e| ConfigError::Key {
        key: RUN_KEYS[0].into(),
        message: e.to_string(),
    })?;
    let mut value = serde_json::to_value(base).map_err(|e| ConfigError::Key {
        key: RUN_KEYS[0].into(),
        message: e.to_string(),
    })?;
    merge(&mut value, Value::Object(patch));
    let mut config: ExperimentConfig = serde_json::from_value(value).map_err(|e| ConfigError::Key {
        key: offending_key(&e.to_string()),
        message: e.to_string(),
    })?;

    if !flags.gamma.is_empty() {
        config.levels = flags.gamma.clone();
    }
    if let Some(h) = flags.horizon {
        config.horizon = h;
    }
    if let Some(dx) = flags.dx {
        config.solver.dx = dx;
    }
    if let Some(dt) = flags.dt {
        config.solver.dt = dt;
    }
    config.validate().map_err(|e| ConfigError::Validation(e.to_string()))?;

    let output_dir = flags
        .output_dir
        .clone()
        .or(file_dir.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    Ok(RunConfig {
        preset: preset_name,
        experiment,
        output_dir,
        config,
    })
}

/// First back-quoted name in a serde message, if any.
fn offending_key(message: &str) -> String {
    message
        .split('`')
        .nth(1)
        .map(str::to_owned)
        .unwrap_or_else(|| "(config)".into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn merge_replaces_sequence_blocks_whole() {
        let mut base =
            json!({"media": {"mu_minus": 1.0, "sequence": {"kind": "explicit", "params": {"xs": [1], "ys": [2]}}}});
        merge(&mut base, json!({"media": {"sequence": {"kind": "factorial"}}}));
        assert_eq!(
            base,
            json!({"media": {"mu_minus": 1.0, "sequence": {"kind": "factorial"}}})
        );
    }

    #[test]
    fn merge_is_recursive_elsewhere() {
        let mut base = json!({"solver": {"dx": 0.05, "dt": 0.02}, "horizon": 1.0});
        merge(&mut base, json!({"solver": {"dt": 0.01}}));
        assert_eq!(base, json!({"solver": {"dx": 0.05, "dt": 0.01}, "horizon": 1.0}));
    }

    #[test]
    fn offending_key_extraction() {
        assert_eq!(offending_key("unknown field `foo`, expected one of `a`"), "foo");
        assert_eq!(offending_key("invalid type"), "(config)");
    }
}
