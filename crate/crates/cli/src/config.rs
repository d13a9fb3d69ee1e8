//! Run configuration: one TOML file, then `--set` overrides, then validation.

use std::path::{Path, PathBuf};

use icann_core::refmodels::{PathKind, PathSpec, Plane, TschoeglParams, VmAfParams};
use icann_core::training::TrainConfig;
use serde::{Deserialize, Serialize};
use toml::Value;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Von Mises yield with Armstrong–Frederick hardening (`[vm_af]`).
    #[default]
    VmAf,
    /// `[vm_af]` with the hardening switched off.
    VmPerfect,
    /// Paraboloid yield with tension-compression asymmetry (`[tschoegl]`).
    Tschoegl,
    /// Network weights read from `weights`.
    Network,
}

/// Load-path settings shared by `generate` and `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadSettings {
    /// Peak stretch; the case default when absent.
    pub stretch: Option<f64>,
    pub compression_stretch: Option<f64>,
    pub steps_per_ramp: usize,
    pub n_cycles: usize,
    pub dt: f64,
}

impl Default for LoadSettings {
    fn default() -> Self {
        Self { stretch: None, compression_stretch: None, steps_per_ramp: 200, n_cycles: 1, dt: 1.0 }
    }
}

impl LoadSettings {
    pub fn spec(&self, kind: PathKind) -> PathSpec {
        let mut s = PathSpec::default_for(kind);
        if let Some(l) = self.stretch {
            s.stretch = l;
        }
        if let Some(l) = self.compression_stretch {
            s.compression_stretch = l;
        }
        s.steps_per_ramp = self.steps_per_ramp;
        s.n_cycles = self.n_cycles;
        s.dt = self.dt;
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateConfig {
    pub model: ModelKind,
    pub weights: Option<PathBuf>,
    pub cases: Vec<PathKind>,
    pub load: LoadSettings,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::VmAf,
            weights: None,
            cases: vec![PathKind::Ut, PathKind::Eb, PathKind::Uc],
            load: LoadSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub datasets: Vec<PathBuf>,
    /// Start from these weights (physical units) and skip pretraining.
    pub weights: Option<PathBuf>,
    /// Held-out datasets reported after training.
    pub test: Vec<PathBuf>,
    pub optimizer: TrainConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub model: ModelKind,
    pub weights: Option<PathBuf>,
    pub case: PathKind,
    pub load: LoadSettings,
    /// Replay the deformation history of this dataset instead of `case` and
    /// report the RMS difference.
    pub reference: Option<PathBuf>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { model: ModelKind::VmAf, weights: None, case: PathKind::Ut, load: LoadSettings::default(), reference: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    #[default]
    Plane,
    Cloud,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceConfig {
    pub model: ModelKind,
    pub weights: Option<PathBuf>,
    pub mode: TraceMode,
    pub plane: Plane,
    /// Rays in the plane (even).
    pub rays: usize,
    /// Directions of the 3D point cloud.
    pub points: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self { model: ModelKind::VmAf, weights: None, mode: TraceMode::Plane, plane: Plane::S11S22, rays: 72, points: 400 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Random cases per property.
    pub samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { samples: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; overrides `train.optimizer.seed`.
    pub seed: u64,
    pub vm_af: VmAfParams,
    pub tschoegl: TschoeglParams,
    pub generate: GenerateConfig,
    pub train: TrainSection,
    pub simulate: SimulateConfig,
    pub trace: TraceConfig,
    pub verify: VerifyConfig,
}

impl RunConfig {
    /// Reads `file` (if any), applies `key=value` overrides in order and
    /// deserializes the result. Unknown keys are errors at every level.
    pub fn load(file: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self, CliError> {
        let mut root = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>().map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for (key, value) in overrides {
            set_path(&mut root, key, value.clone())?;
        }
        let mut cfg: RunConfig = Value::Table(root).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.train.optimizer.seed = cfg.seed;
        Ok(cfg)
    }

    pub fn resolved(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

/// Parses `key=value`; the value is read as a TOML literal, falling back to a
/// bare string (`--set generate.model=tschoegl`).
pub fn parse_override(s: &str) -> Result<(String, Value), CliError> {
    let (k, v) = s.split_once('=').ok_or_else(|| CliError::Config(format!("override `{s}` is not key=value")))?;
    let key = k.trim();
    if key.is_empty() {
        return Err(CliError::Config(format!("override `{s}` has an empty key")));
    }
    let v = v.trim();
    let value = format!("v = {v}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(v.to_string()));
    Ok((key.to_string(), value))
}

fn set_path(root: &mut toml::Table, key: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut table = root;
    for p in parents {
        let entry = table.entry(p.to_string()).or_insert_with(|| Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| CliError::Config(format!("`{p}` in `{key}` is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse_as_toml_or_string() {
        let (k, v) = parse_override("train.optimizer.learning_rate=0.5").unwrap();
        assert_eq!(k, "train.optimizer.learning_rate");
        assert_eq!(v, Value::Float(0.5));
        assert_eq!(parse_override("generate.model=tschoegl").unwrap().1, Value::String("tschoegl".into()));
        assert_eq!(
            parse_override("generate.cases=[\"UT\",\"UC\"]").unwrap().1,
            Value::Array(vec![Value::String("UT".into()), Value::String("UC".into())])
        );
        assert!(parse_override("novalue").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = parse_override("train.optimizer.learning_rat=0.5").unwrap();
        assert!(matches!(RunConfig::load(None, &[bad]), Err(CliError::Config(_))));
        let bad = parse_override("nosuch=1").unwrap();
        assert!(RunConfig::load(None, &[bad]).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let sets = [parse_override("seed=7").unwrap(), parse_override("vm_af.c=0.0").unwrap()];
        let cfg = RunConfig::load(None, &sets).unwrap();
        assert_eq!(cfg.train.optimizer.seed, 7);
        let back: RunConfig = toml::from_str(&cfg.resolved()).unwrap();
        assert_eq!(back, cfg);
    }
}
