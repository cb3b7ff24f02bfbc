//! Sweep configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::JobSizeDistribution;
use crate::sim::{Policy, DEFAULT_ARRIVALS, DEFAULT_BATCHES, DEFAULT_WARMUP_FRACTION};
use crate::wine::DEFAULT_TOL;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Naive,
    Mixex,
    Isq,
    IsqRecycling,
}

impl BoundKind {
    pub const ALL: [BoundKind; 4] = [Self::Naive, Self::Mixex, Self::Isq, Self::IsqRecycling];
}

pub fn default_rho_grid() -> Vec<f64> {
    (0..14).map(|i| (30 + 5 * i) as f64 / 100.0).collect()
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_bounds() -> Vec<BoundKind> {
    BoundKind::ALL.to_vec()
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Absolute WINE quadrature budget, in time units.
    #[serde(default = "Tolerances::default_wine")]
    pub wine: f64,
    /// Jump minimizer tolerance relative to `x^2`.
    #[serde(default = "Tolerances::default_jump")]
    pub jump: f64,
}

impl Tolerances {
    fn default_wine() -> f64 {
        DEFAULT_TOL
    }
    fn default_jump() -> f64 {
        crate::bounds::JumpOptions::default().tol
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            wine: Self::default_wine(),
            jump: Self::default_jump(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "SimConfig::default_policy")]
    pub policy: Policy,
    #[serde(default = "SimConfig::default_warmup")]
    pub warmup_fraction: f64,
    #[serde(default = "SimConfig::default_batches")]
    pub batches: usize,
}

impl SimConfig {
    fn default_policy() -> Policy {
        Policy::Srpt
    }
    fn default_warmup() -> f64 {
        DEFAULT_WARMUP_FRACTION
    }
    fn default_batches() -> usize {
        DEFAULT_BATCHES
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            policy: Self::default_policy(),
            warmup_fraction: Self::default_warmup(),
            batches: Self::default_batches(),
        }
    }
}

/// ```toml
/// dist = "exp(1)"
/// k = 2
/// rho_grid = [0.3, 0.5, 0.9]
/// n_arrivals = 5000000
/// seeds = [1, 2]
/// bounds = ["naive", "mixex", "isq", "isq_recycling"]
/// assume_jump_conjecture = false
/// output = "out"
///
/// [tolerances]
/// wine = 1e-6
///
/// [sim]
/// policy = "SRPT"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dist: JobSizeDistribution<f64>,
    pub k: usize,
    #[serde(default = "default_rho_grid")]
    pub rho_grid: Vec<f64>,
    #[serde(default = "ExperimentConfig::default_arrivals")]
    pub n_arrivals: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_bounds")]
    pub bounds: Vec<BoundKind>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub assume_jump_conjecture: bool,
    #[serde(default = "default_out")]
    pub output: PathBuf,
    #[serde(default)]
    pub sim: SimConfig,
}

impl ExperimentConfig {
    fn default_arrivals() -> u64 {
        DEFAULT_ARRIVALS
    }

    /// A config with defaults for everything but the law and `k`.
    pub fn new(dist: JobSizeDistribution<f64>, k: usize) -> Self {
        Self {
            dist,
            k,
            rho_grid: default_rho_grid(),
            n_arrivals: DEFAULT_ARRIVALS,
            seeds: default_seeds(),
            bounds: default_bounds(),
            tolerances: Tolerances::default(),
            assume_jump_conjecture: false,
            output: default_out(),
            sim: SimConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k == 0 {
            return Err(invalid("k", "need at least one server"));
        }
        if self.rho_grid.is_empty() {
            return Err(invalid("rho_grid", "empty load grid"));
        }
        if let Some(r) = self.rho_grid.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return Err(invalid("rho_grid", format!("load {r} is outside (0, 1)")));
        }
        if self.rho_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("rho_grid", "loads must be strictly increasing"));
        }
        if self.bounds.is_empty() {
            return Err(invalid("bounds", "select at least one bound"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "need at least one seed"));
        }
        if !(self.tolerances.wine > 0.0 && self.tolerances.wine.is_finite()) {
            return Err(invalid("tolerances.wine", "must be positive"));
        }
        if !(self.tolerances.jump > 0.0 && self.tolerances.jump.is_finite()) {
            return Err(invalid("tolerances.jump", "must be positive"));
        }
        if self.sim.enabled && self.n_arrivals < crate::sim::MIN_ARRIVALS {
            return Err(invalid(
                "n_arrivals",
                format!("need at least {} arrivals", crate::sim::MIN_ARRIVALS),
            ));
        }
        Ok(())
    }
}
