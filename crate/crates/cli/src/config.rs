//! Experiment configuration: a TOML file, overridden by flags.

use std::path::{Path, PathBuf};

use bilateral_core::{InstanceSpec, LearnerSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learner: Option<LearnerSpec>,
    /// Horizon of `run` and `adversary`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    /// Horizons of `sweep`, ascending.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub horizons: Vec<usize>,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub adversary: AdversaryConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub indist: IndistConfig,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Defaults to `$BILATERAL_OUT_DIR`, then `out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryConfig {
    #[serde(default = "default_adversary_epsilon")]
    pub epsilon: f64,
    /// Probe replicas; 1 for deterministic learners and 512 otherwise when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
}

fn default_adversary_epsilon() -> f64 {
    0.05
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        AdversaryConfig {
            epsilon: default_adversary_epsilon(),
            replicas: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_oracle_grid")]
    pub grid: usize,
}

fn default_oracle_grid() -> usize {
    101
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            grid: default_oracle_grid(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndistConfig {
    #[serde(default = "default_indist_grid")]
    pub grid: usize,
    /// Shift one square of `f` by 1/16 (a distinguishable control).
    #[serde(default)]
    pub perturb: bool,
}

fn default_indist_grid() -> usize {
    10_000
}

impl Default for IndistConfig {
    fn default() -> Self {
        IndistConfig {
            grid: default_indist_grid(),
            perturb: false,
        }
    }
}

impl ExperimentConfig {
    #[cfg(test)]
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let table = text
            .parse::<toml::Table>()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self, CliError> {
        let cfg: Self = toml::Value::Table(table.clone())
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        // Unit variants such as `uniform` accept stray keys; catch them here.
        let echoed = cfg.to_toml().parse::<toml::Table>().expect("config reparses");
        for section in ["instance", "learner"] {
            let given = table.get(section).and_then(|v| v.as_table());
            let kept = echoed.get(section).and_then(|v| v.as_table());
            if let (Some(given), Some(kept)) = (given, kept) {
                if let Some(k) = given.keys().find(|k| !kept.contains_key(*k)) {
                    return Err(CliError::Config(format!("unknown field `{k}` in `{section}`")));
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Read `path` (if any) and apply `key=value` overrides, where keys are
    /// dotted paths and values are TOML literals (bare words are strings).
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for (key, value) in overrides {
            set_path(&mut table, key, parse_value(value))?;
        }
        Self::from_table(table)
    }

    pub fn require_instance(&self) -> Result<&InstanceSpec, CliError> {
        self.instance
            .as_ref()
            .ok_or_else(|| CliError::Config("missing key `instance`".into()))
    }

    pub fn require_learner(&self) -> Result<&LearnerSpec, CliError> {
        self.learner
            .as_ref()
            .ok_or_else(|| CliError::Config("missing key `learner`".into()))
    }

    pub fn require_horizon(&self) -> Result<usize, CliError> {
        self.horizon
            .ok_or_else(|| CliError::Config("missing key `horizon`".into()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var_os("BILATERAL_OUT_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn parse_value(raw: &str) -> toml::Value {
    // Parse as a TOML literal; fall back to a plain string.
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| {
        CliError::Config(format!("empty override key `{key}`"))
    })?;
    let mut cur = table;
    for part in parts {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{part}` in `{key}` is not a table")))?;
    }
    // Renaming a tagged spec drops the previous variant's parameters.
    if last == "name" {
        if let Some(old) = cur.get("name") {
            if old != &value {
                cur.clear();
            }
        }
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Split `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use bilateral_core::bandits::BanditChoice;

    const FULL: &str = r#"
horizon = 10000
horizons = [1000, 3000]
replications = 5
seed = 7
jobs = 2

[instance]
name = "two_third"
epsilon = 0.3

[learner]
name = "sb"
density_bound = 24.0
bandit = "action_elim"
doubling = true

[output]
dir = "results"

[adversary]
epsilon = 0.03
replicas = 64

[oracle]
grid = 5

[indist]
grid = 100
perturb = true
"#;

    #[test]
    fn round_trip() {
        let cfg = ExperimentConfig::from_toml(FULL).unwrap();
        assert_eq!(
            cfg.learner,
            Some(LearnerSpec::Sb {
                density_bound: Some(24.0),
                epsilon: None,
                bandit: BanditChoice::ActionElimination,
                doubling: true,
            })
        );
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        let minimal = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(minimal, ExperimentConfig::from_toml(&minimal.to_toml()).unwrap());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("horizon = 5\ncolour = 1").is_err());
        assert!(ExperimentConfig::from_toml("[instance]\nname = \"uniform\"\nx = 1").is_err());
        assert!(ExperimentConfig::from_toml("[oracle]\ngrids = 3").is_err());
    }

    #[test]
    fn overrides_apply_on_top_of_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, FULL).unwrap();
        let cfg = ExperimentConfig::load(
            Some(&path),
            &[
                ("seed".into(), "9".into()),
                ("instance.name".into(), "needle".into()),
                ("instance.x".into(), "0.5".into()),
                ("learner.epsilon".into(), "0.1".into()),
            ],
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.instance, Some(InstanceSpec::Needle { x: 0.5 }));
        assert!(matches!(cfg.learner, Some(LearnerSpec::Sb { epsilon: Some(e), .. }) if e == 0.1));
        assert_eq!(cfg.horizons, [1000, 3000]);
    }
}
