//! Sweep configuration files and the prompt-config file.
//!
//! A sweep file is TOML. Relative paths inside it resolve against the
//! directory containing the file.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use parley_core::agent::PolicyError;
use parley_core::corpus::{DEFAULT_SAMPLE_SIZE, DEFAULT_SEED};
use parley_core::prompting::PromptError;
use parley_core::{AgentProfile, Personality, PolicyKind, PromptConfig, Role, ScriptedPolicy, DEFAULT_MAX_TURNS};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendConfig, BackendConfigError};
use crate::scenario_io::{LoadError, SchemaMap};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid TOML in {path}: {source}")]
    Toml {
        path: String,
        source: Box<toml::de::Error>,
    },
    #[error("at least one buyer and one seller profile are required")]
    NoProfiles,
    #[error("duplicate {role} profile name `{name}`")]
    DuplicateProfile { role: Role, name: String },
    #[error("profile name {0:?} must be non-empty and use only letters, digits, `.`, `-` and `_`")]
    BadName(String),
    #[error("profile `{profile}` names unknown backend `{backend}`")]
    UnknownBackend { profile: String, backend: String },
    #[error("pair ({buyer}, {seller}) names an unknown profile")]
    UnknownPair { buyer: String, seller: String },
    #[error("explicit pairing needs at least one pair")]
    NoPairs,
    #[error("backend `{name}`: {source}")]
    Backend {
        name: String,
        source: BackendConfigError,
    },
    #[error("backend `{name}`: {source}")]
    Policy { name: String, source: PolicyError },
    #[error("prompt config: {0}")]
    Prompt(#[from] PromptError),
    #[error("{field} must be at least 1")]
    Zero { field: &'static str },
    #[error("max_turns must be between 1 and {max}, got {value}")]
    MaxTurns { value: u32, max: u32 },
    #[error("scenario schema: {0}")]
    Schema(#[from] LoadError),
    #[error("scenario file {0} does not exist")]
    MissingScenarios(String),
    #[error("output directory {path} is not writable: {reason}")]
    Output { path: String, reason: String },
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|source| ConfigError::Toml {
        path: path.display().to_string(),
        source: Box::new(source),
    })
}

/// Loads a prompt-config TOML file. Missing keys take the default text.
pub fn load_prompt_config(path: &Path) -> Result<PromptConfig, ConfigError> {
    let config: PromptConfig = parse(path, &read(path)?)?;
    config.validate()?;
    Ok(config)
}

/// Either a named preset or an explicit field map.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemaSpec {
    Preset(SchemaPreset),
    Map(SchemaMap),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaPreset {
    Flat,
    Craigslist,
}

impl Default for SchemaSpec {
    fn default() -> Self {
        SchemaSpec::Preset(SchemaPreset::Flat)
    }
}

impl SchemaSpec {
    pub fn resolve(&self) -> SchemaMap {
        match self {
            SchemaSpec::Preset(SchemaPreset::Flat) => SchemaMap::default(),
            SchemaSpec::Preset(SchemaPreset::Craigslist) => SchemaMap::craigslist(),
            SchemaSpec::Map(map) => map.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSource {
    pub path: PathBuf,
    #[serde(default = "default_sample")]
    pub sample: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub schema: SchemaSpec,
}

fn default_sample() -> usize {
    DEFAULT_SAMPLE_SIZE
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_max_turns() -> u32 {
    DEFAULT_MAX_TURNS
}
fn default_parallel() -> usize {
    4
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Openai(BackendConfig),
    Scripted(ScriptedSpec),
}

/// A scripted backend. Unset fractions take the policy defaults.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedSpec {
    pub policy: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opening_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accept_threshold: Option<f64>,
}

impl ScriptedSpec {
    pub fn policy(&self) -> ScriptedPolicy {
        let d = ScriptedPolicy::with_defaults(self.policy);
        ScriptedPolicy {
            opening_fraction: self.opening_fraction.unwrap_or(d.opening_fraction),
            step_fraction: self.step_fraction.unwrap_or(d.step_fraction),
            accept_threshold: self.accept_threshold.unwrap_or(d.accept_threshold),
            ..d
        }
    }
}

impl From<ScriptedPolicy> for ScriptedSpec {
    fn from(p: ScriptedPolicy) -> Self {
        ScriptedSpec {
            policy: p.kind,
            opening_fraction: Some(p.opening_fraction),
            step_fraction: Some(p.step_fraction),
            accept_threshold: Some(p.accept_threshold),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub name: String,
    pub backend: String,
    #[serde(default)]
    pub personality: Personality,
    #[serde(default)]
    pub cot: bool,
}

impl ProfileSpec {
    pub fn profile(&self, role: Role) -> AgentProfile {
        AgentProfile {
            name: self.name.clone(),
            role,
            personality: self.personality,
            cot: self.cot,
            model_ref: self.backend.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Pairing {
    #[default]
    Cartesian,
    /// `[buyer name, seller name]` pairs.
    Explicit { pairs: Vec<(String, String)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub scenarios: ScenarioSource,
    /// Prompt-config file; the built-in texts when unset.
    #[serde(default)]
    pub prompts: Option<PathBuf>,
    #[serde(default = "default_max_turns")]
    pub max_turns: u32,
    #[serde(default = "default_parallel")]
    pub parallel: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub backends: BTreeMap<String, BackendSpec>,
    #[serde(default)]
    pub buyers: Vec<ProfileSpec>,
    #[serde(default)]
    pub sellers: Vec<ProfileSpec>,
    #[serde(default)]
    pub pairing: Pairing,
}

/// Command-line values that replace the file's.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub scenarios: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub parallel: Option<usize>,
}

/// A buyer/seller pairing in the sweep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Combination {
    pub buyer: AgentProfile,
    pub seller: AgentProfile,
}

impl Combination {
    pub fn id(&self) -> String {
        combination_id(&self.buyer.name, &self.seller.name)
    }
}

pub fn combination_id(buyer: &str, seller: &str) -> String {
    format!("{buyer}__{seller}")
}

fn absolutize(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        parse(Path::new("<inline>"), text)
    }

    /// Reads `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut config: SweepConfig = parse(path, &read(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.scenarios.path = absolutize(base, &config.scenarios.path);
        config.prompts = config.prompts.map(|p| absolutize(base, &p));
        config.output = absolutize(base, &config.output);
        Ok(config)
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.scenarios.seed = seed;
        }
        if let Some(path) = &overrides.scenarios {
            self.scenarios.path = path.clone();
        }
        if let Some(out) = &overrides.out {
            self.output = out.clone();
        }
        if let Some(parallel) = overrides.parallel {
            self.parallel = parallel;
        }
    }

    pub fn prompt_config(&self) -> Result<PromptConfig, ConfigError> {
        match &self.prompts {
            Some(path) => load_prompt_config(path),
            None => Ok(PromptConfig::default()),
        }
    }

    /// Checks everything that does not need the network or the output
    /// directory.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.buyers.is_empty() || self.sellers.is_empty() {
            return Err(ConfigError::NoProfiles);
        }
        if self.parallel == 0 {
            return Err(ConfigError::Zero { field: "parallel" });
        }
        if self.scenarios.sample == 0 {
            return Err(ConfigError::Zero { field: "scenarios.sample" });
        }
        if self.max_turns == 0 || self.max_turns > DEFAULT_MAX_TURNS {
            return Err(ConfigError::MaxTurns {
                value: self.max_turns,
                max: DEFAULT_MAX_TURNS,
            });
        }
        for (name, spec) in &self.backends {
            match spec {
                BackendSpec::Openai(c) => c.validate().map_err(|source| ConfigError::Backend {
                    name: name.clone(),
                    source,
                })?,
                BackendSpec::Scripted(p) => p.policy().validate().map_err(|source| ConfigError::Policy {
                    name: name.clone(),
                    source,
                })?,
            }
        }
        for (role, profiles) in [(Role::Buyer, &self.buyers), (Role::Seller, &self.sellers)] {
            let mut seen = HashSet::new();
            for p in profiles {
                let safe = |c: char| c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_');
                if p.name.is_empty() || p.name.starts_with('.') || !p.name.chars().all(safe) {
                    return Err(ConfigError::BadName(p.name.clone()));
                }
                if !seen.insert(p.name.as_str()) {
                    return Err(ConfigError::DuplicateProfile {
                        role,
                        name: p.name.clone(),
                    });
                }
                if !self.backends.contains_key(&p.backend) {
                    return Err(ConfigError::UnknownBackend {
                        profile: p.name.clone(),
                        backend: p.backend.clone(),
                    });
                }
            }
        }
        if let Pairing::Explicit { pairs } = &self.pairing {
            if pairs.is_empty() {
                return Err(ConfigError::NoPairs);
            }
            for (b, s) in pairs {
                if !self.buyers.iter().any(|p| &p.name == b) || !self.sellers.iter().any(|p| &p.name == s) {
                    return Err(ConfigError::UnknownPair {
                        buyer: b.clone(),
                        seller: s.clone(),
                    });
                }
            }
        }
        self.scenarios.schema.resolve().validate()?;
        if !self.scenarios.path.is_file() {
            return Err(ConfigError::MissingScenarios(self.scenarios.path.display().to_string()));
        }
        self.prompt_config()?;
        Ok(())
    }

    /// Creates the output directory and probes that it accepts files.
    pub fn check_output(&self) -> Result<(), ConfigError> {
        let fail = |reason: String| ConfigError::Output {
            path: self.output.display().to_string(),
            reason,
        };
        fs::create_dir_all(&self.output).map_err(|e| fail(e.to_string()))?;
        let probe = self.output.join(".parley-write-probe");
        fs::write(&probe, b"").map_err(|e| fail(e.to_string()))?;
        let _ = fs::remove_file(&probe);
        Ok(())
    }

    /// Combinations in sweep order: buyers outer, sellers inner for
    /// cartesian pairing, file order for explicit pairs.
    pub fn combinations(&self) -> Vec<Combination> {
        let find = |list: &[ProfileSpec], name: &str, role| {
            list.iter().find(|p| p.name == name).map(|p| p.profile(role))
        };
        match &self.pairing {
            Pairing::Cartesian => self
                .buyers
                .iter()
                .flat_map(|b| {
                    self.sellers.iter().map(move |s| Combination {
                        buyer: b.profile(Role::Buyer),
                        seller: s.profile(Role::Seller),
                    })
                })
                .collect(),
            Pairing::Explicit { pairs } => pairs
                .iter()
                .filter_map(|(b, s)| {
                    Some(Combination {
                        buyer: find(&self.buyers, b, Role::Buyer)?,
                        seller: find(&self.sellers, s, Role::Seller)?,
                    })
                })
                .collect(),
        }
    }
}
