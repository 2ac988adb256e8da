//! Typed run configuration, parsed from TOML.
//!
//! ```toml
//! seed = 42
//!
//! [environment]
//! kind = "markov"                      # constant | iid | markov
//! transition = [[0.9, 0.1], [0.1, 0.9]] # markov only; iid takes `probs`
//!
//! [[environment.states]]
//! name = "calm"
//! offspring = { kind = "categorical", support = [1, 3], probs = [0.5, 0.5] }
//! displacement = { kind = "gaussian", mean = 0.0, std = 1.0 }
//! immigration = { count = { kind = "poisson", rate = 1.0 }, position = { kind = "gaussian", mean = 0.0, std = 1.0 } }
//!
//! [simulation]
//! generations = 12
//!
//! [verify.decomposition]
//! runs = 20
//! ```
//!
//! Every table rejects unknown keys. Omitted sections take their defaults.
//! The configuration hash is the SHA-256 of the canonical JSON rendering of
//! the parsed value, so it ignores key order, formatting and comments.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::env_model::{EnvModel, EnvState, ModelError};
use crate::harness::{
    CltParams, DecompositionParams, FreeEnergyParams, LdpParams, LpRateParams, MartingaleParams, MdpParams,
};
use crate::numeric::linspace;
use crate::simulator::{SimConfig, SimMode};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("at `{path}`: {message}")]
    Invalid { path: String, message: String },
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKindSpec {
    Constant,
    Iid,
    Markov,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub kind: EnvKindSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Vec<Vec<f64>>>,
    pub states: Vec<EnvState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSpec {
    pub generations: usize,
    pub max_particles: usize,
    pub replicas: usize,
    pub mode: SimMode,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        let base = SimConfig::new(16, 0);
        SimulationSpec {
            generations: base.generations,
            max_particles: base.max_particles,
            replicas: base.replicas,
            mode: base.mode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridRange {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.min, self.max, self.points)
    }

    fn check(&self, path: &str) -> Result<(), ConfigError> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(ConfigError::at(path, "need finite min < max"));
        }
        if self.points < 2 {
            return Err(ConfigError::at(format!("{path}.points"), "need at least 2 points"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub t: GridRange,
    pub x: GridRange,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            t: GridRange { min: -4.0, max: 4.0, points: 81 },
            x: GridRange { min: -1.5, max: 1.5, points: 61 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySpec {
    pub clt: CltParams,
    pub mdp: MdpParams,
    pub free_energy: FreeEnergyParams,
    pub ldp: LdpParams,
    pub lp_rate: LpRateParams,
    pub martingale: MartingaleParams,
    pub decomposition: DecompositionParams,
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Output directory; not part of the hash.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 or absent: all cores); not part of the hash.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub grids: GridSpec,
    #[serde(default)]
    pub verify: VerifySpec,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::at("<document>", e.to_string()))?;
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::at(if path == "." { "<document>".into() } else { path }, e.into_inner().message())
        })?;
        config.check()?;
        Ok(config)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Structural and semantic validation, with key paths.
    pub fn check(&self) -> Result<(), ConfigError> {
        let model = self.model()?;
        let report = model.validate(&self.t_grid());
        if let Some(failure) = report.failures().next() {
            return Err(ConfigError::at("environment", format!("{failure}")));
        }
        let sim = &self.simulation;
        if sim.generations == 0 {
            return Err(ConfigError::at("simulation.generations", "must be >= 1"));
        }
        if sim.replicas == 0 {
            return Err(ConfigError::at("simulation.replicas", "must be >= 1"));
        }
        if sim.max_particles == 0 {
            return Err(ConfigError::at("simulation.max_particles", "must be >= 1"));
        }
        self.grids.t.check("grids.t")?;
        self.grids.x.check("grids.x")?;
        Ok(())
    }

    pub fn model(&self) -> Result<EnvModel, ConfigError> {
        let env = &self.environment;
        let states = env.states.clone();
        let map = |e: ModelError| {
            let path = match &e {
                ModelError::EmptySupport { state } | ModelError::InvalidParameter { state, .. } => {
                    format!("environment.states[{state}]")
                }
                ModelError::NotSimplex { .. } | ModelError::DimensionMismatch { .. } => match env.kind {
                    EnvKindSpec::Iid => "environment.probs".into(),
                    EnvKindSpec::Markov => "environment.transition".into(),
                    EnvKindSpec::Constant => "environment".into(),
                },
                _ => "environment".into(),
            };
            ConfigError::at(path, e.to_string())
        };
        let unexpected = |key: &str| {
            ConfigError::at(format!("environment.{key}"), format!("not allowed for kind {:?}", env.kind))
        };
        match env.kind {
            EnvKindSpec::Constant => {
                if env.probs.is_some() {
                    return Err(unexpected("probs"));
                }
                if env.transition.is_some() {
                    return Err(unexpected("transition"));
                }
                if states.len() != 1 {
                    return Err(ConfigError::at("environment.states", "a constant environment has exactly one state"));
                }
                EnvModel::constant(states.into_iter().next().expect("one state")).map_err(map)
            }
            EnvKindSpec::Iid => {
                if env.transition.is_some() {
                    return Err(unexpected("transition"));
                }
                let probs = env
                    .probs
                    .clone()
                    .ok_or_else(|| ConfigError::at("environment.probs", "required for kind iid"))?;
                EnvModel::iid(states, probs).map_err(map)
            }
            EnvKindSpec::Markov => {
                if env.probs.is_some() {
                    return Err(unexpected("probs"));
                }
                let transition = env
                    .transition
                    .clone()
                    .ok_or_else(|| ConfigError::at("environment.transition", "required for kind markov"))?;
                EnvModel::markov(states, transition).map_err(map)
            }
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig::new(self.simulation.generations, self.seed)
            .with_mode(self.simulation.mode)
            .with_replicas(self.simulation.replicas)
            .with_max_particles(self.simulation.max_particles)
    }

    pub fn t_grid(&self) -> Vec<f64> {
        self.grids.t.values()
    }

    pub fn x_grid(&self) -> Vec<f64> {
        self.grids.x.values()
    }

    /// Command-line overrides; `replicas` applies to every replicated procedure.
    pub fn apply_overrides(&mut self, seed: Option<u64>, replicas: Option<usize>) -> Result<(), ConfigError> {
        if let Some(seed) = seed {
            self.seed = seed;
        }
        if let Some(r) = replicas {
            if r == 0 {
                return Err(ConfigError::at("--replicas", "must be >= 1"));
            }
            self.simulation.replicas = r;
            self.verify.lp_rate.replicas = r;
            self.verify.martingale.replicas = r;
        }
        Ok(())
    }

    /// Canonical JSON of everything that affects results.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of [`RunConfig::canonical_json`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}
