//! Scenario files.
//!
//! A scenario is a TOML document: which environments to run, how many
//! trials, the base seed, and robot parameter overrides. Custom environments
//! go in `[[environments]]`; an entry with `base = "<built-in name>"` only
//! needs the keys it changes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::mission::{MissionError, RobotConfig};
use crate::sim::{build_environment, Environment, SimError, BUILTIN_ENVIRONMENTS};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

impl From<SimError> for ConfigError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidParameter { field, reason } => invalid(field, reason),
            SimError::UnknownEnvironment(name) => invalid("environment", format!("unknown environment '{name}'")),
            other => invalid("environments", other.to_string()),
        }
    }
}

impl From<MissionError> for ConfigError {
    fn from(e: MissionError) -> Self {
        match e {
            MissionError::Sim(s) => s.into(),
            MissionError::InvalidParameter { field, reason } => invalid(format!("robot.{field}"), reason),
            other => invalid("robot", other.to_string()),
        }
    }
}

/// One environment name, `"all"`, or a list of names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvSelection {
    One(String),
    Many(Vec<String>),
}

impl Default for EnvSelection {
    fn default() -> Self {
        EnvSelection::One("all".into())
    }
}

impl EnvSelection {
    pub fn parse(s: &str) -> Self {
        if s.contains(',') {
            EnvSelection::Many(s.split(',').map(|p| p.trim().to_string()).collect())
        } else {
            EnvSelection::One(s.trim().to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub environment: EnvSelection,
    pub trials: usize,
    /// Trial `i` of each environment runs with seed `seed + i`.
    pub seed: u64,
    pub robot: RobotConfig,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub environments: Vec<Environment>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            environment: EnvSelection::default(),
            trials: 10,
            seed: 42,
            robot: RobotConfig::default(),
            environments: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials < 1 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(invalid("seed", "must fit in a signed 64-bit integer"));
        }
        for (i, env) in self.environments.iter().enumerate() {
            if self.environments[..i].iter().any(|e| e.name == env.name) {
                return Err(invalid(
                    "environments.name",
                    format!("duplicate environment '{}'", env.name),
                ));
            }
            env.validate()?;
        }
        self.robot.validate()?;
        self.resolve_environments().map(|_| ())
    }

    fn lookup(&self, name: &str) -> Result<Environment, ConfigError> {
        match self.environments.iter().find(|e| e.name == name) {
            Some(e) => Ok(e.clone()),
            None => Ok(build_environment(name)?),
        }
    }

    /// Environments to run, in order. `"all"` means the built-ins followed by
    /// custom environments that do not replace one.
    pub fn resolve_environments(&self) -> Result<Vec<Environment>, ConfigError> {
        let names: Vec<String> = match &self.environment {
            EnvSelection::One(n) if n == "all" => {
                let mut v: Vec<String> = BUILTIN_ENVIRONMENTS.iter().map(|s| s.to_string()).collect();
                v.extend(
                    self.environments
                        .iter()
                        .map(|e| e.name.clone())
                        .filter(|n| !BUILTIN_ENVIRONMENTS.contains(&n.as_str())),
                );
                v
            }
            EnvSelection::One(n) => vec![n.clone()],
            EnvSelection::Many(v) => v.clone(),
        };
        if names.is_empty() {
            return Err(invalid("environment", "selects no environments"));
        }
        names.iter().map(|n| self.lookup(n)).collect()
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Replace `base = "<name>"` entries with the named built-in overlaid by the
/// entry's own keys. Returns whether any entry had a base.
fn expand_bases(doc: &mut toml::Table) -> Result<bool, ConfigError> {
    let Some(toml::Value::Array(entries)) = doc.get_mut("environments") else {
        return Ok(false);
    };
    let mut any = false;
    for entry in entries.iter_mut() {
        let toml::Value::Table(t) = entry else { continue };
        let Some(base) = t.remove("base") else { continue };
        any = true;
        let name = base
            .as_str()
            .ok_or_else(|| invalid("environments.base", "must be a string"))?;
        let mut full =
            toml::Table::try_from(build_environment(name)?).map_err(|e| ConfigError::Parse(e.to_string()))?;
        merge(&mut full, std::mem::take(t));
        *t = full;
    }
    Ok(any)
}

/// Parse and validate a scenario from TOML text.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    let cfg: ScenarioConfig = if expand_bases(&mut doc)? {
        doc.try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?
    } else {
        // Direct parse keeps line numbers in type errors.
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// Render a scenario as TOML with every default spelled out.
pub fn dump_config(cfg: &ScenarioConfig) -> Result<String, ConfigError> {
    toml::to_string_pretty(cfg).map_err(|e| ConfigError::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn name_only_gives_defaults() {
        let cfg = parse_config("environment = \"standard_greenhouse\"\n").unwrap();
        assert_eq!(cfg.trials, 10);
        assert_eq!(cfg.robot, RobotConfig::default());
        assert_eq!(cfg.resolve_environments().unwrap().len(), 1);
    }

    #[test]
    fn bad_accuracy_names_the_field() {
        let text = "environment = \"g2\"\n[[environments]]\nbase = \"standard_greenhouse\"\nname = \"g2\"\n[environments.detector_profile]\naccuracy = 1.5\n";
        match parse_config(text) {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "detector_profile.accuracy"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(matches!(parse_config("trails = 3\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(
            parse_config("[robot.mission]\nvolume = 3\n"),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_config("seed = 1\ntrials = \"ten\"\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn zero_trials_rejected() {
        match parse_config("trials = 0\n") {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "trials"),
            other => panic!("{other:?}"),
        }
    }
}
