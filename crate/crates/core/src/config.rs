//! Experiment configuration: a single JSON document.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::landscape::{CountMode, DEFAULT_BUDGET};
use crate::mcts::SearchConfig;
use crate::prior::DEFAULT_PSEUDOCOUNT;
use crate::sequence::PROTEIN_SYMBOLS;
use crate::value::ValueConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config key `{key}`: {message}")]
    Key { key: String, message: String },
    #[error("config: {0}")]
    Invalid(String),
}

fn protein() -> String {
    PROTEIN_SYMBOLS.to_string()
}

fn default_pseudocount() -> f64 {
    DEFAULT_PSEUDOCOUNT
}

fn default_timeout() -> f64 {
    crate::sidecar::DEFAULT_TIMEOUT_SECS
}

fn default_homologs() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LandscapeConfig {
    Nk {
        #[serde(default = "protein")]
        alphabet: String,
        n: usize,
        k: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Additive landscape; weights are `[residue][position]`, or drawn
    /// uniformly from `[0, 1)` when `random_length` is given.
    Profile {
        #[serde(default = "protein")]
        alphabet: String,
        #[serde(default)]
        weights: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        random_length: Option<usize>,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        offset: f64,
    },
    Table {
        #[serde(default = "protein")]
        alphabet: String,
        path: PathBuf,
        /// Fitness for sequences absent from the table; absent means error.
        #[serde(default)]
        missing_penalty: Option<f64>,
    },
    External {
        #[serde(default = "protein")]
        alphabet: String,
        length: usize,
        command: String,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
    },
}

impl LandscapeConfig {
    pub fn alphabet(&self) -> &str {
        match self {
            Self::Nk { alphabet, .. }
            | Self::Profile { alphabet, .. }
            | Self::Table { alphabet, .. }
            | Self::External { alphabet, .. } => alphabet,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorConfig {
    Uniform,
    /// Profile trained on the first `train_size` records of a FASTA file.
    Profile {
        fasta: PathBuf,
        #[serde(default = "default_pseudocount")]
        pseudocount: f64,
        #[serde(default)]
        train_size: Option<usize>,
    },
    Artifact { path: PathBuf },
    /// Profile trained on `train_size` hill-climbed local optima of the
    /// landscape itself.
    HillClimb {
        #[serde(default = "default_homologs")]
        train_size: usize,
        #[serde(default = "default_pseudocount")]
        pseudocount: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    External {
        command: String,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodConfig {
    Mcts,
    Greedy,
    Beam {
        #[serde(default = "default_width")]
        width: usize,
    },
    Random,
}

fn default_width() -> usize {
    crate::baselines::DEFAULT_BEAM_WIDTH
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Mcts => "mcts",
            Self::Greedy => "greedy",
            Self::Beam { .. } => "beam",
            Self::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CondenseConfig {
    pub frozen: Vec<usize>,
    pub min_deletions: usize,
    pub top: usize,
}

impl Default for CondenseConfig {
    fn default() -> Self {
        Self {
            frozen: Vec::new(),
            min_deletions: 50,
            top: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub top_k: Vec<usize>,
    /// FASTA of the prior's training sequences, for repetition rates.
    pub training_fasta: Option<PathBuf>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            top_k: vec![1, 10, 100],
            training_fasta: None,
        }
    }
}

fn default_task() -> String {
    "run".into()
}

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

fn default_trials() -> usize {
    5
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

fn default_prior() -> PriorConfig {
    PriorConfig::Uniform
}

fn default_method() -> MethodConfig {
    MethodConfig::Mcts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_task")]
    pub task: String,
    pub landscape: LandscapeConfig,
    #[serde(default = "default_prior")]
    pub prior: PriorConfig,
    #[serde(default = "default_method")]
    pub method: MethodConfig,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub count_mode: CountMode,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub value_model: ValueConfig,
    /// Start sequence; the landscape's lowest-fitness sequence when absent.
    #[serde(default)]
    pub start: Option<String>,
    #[serde(default)]
    pub condense: Option<CondenseConfig>,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            ConfigError::Key {
                key: if key == "." { "<root>".into() } else { key },
                message: e.into_inner().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_json(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative input paths relative to the config file's directory.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.landscape {
            LandscapeConfig::Table { path, .. } => fix(path),
            _ => {}
        }
        match &mut self.prior {
            PriorConfig::Profile { fasta, .. } => fix(fasta),
            PriorConfig::Artifact { path } => fix(path),
            _ => {}
        }
        if let Some(p) = &mut self.metrics.training_fasta {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let key = |k: &str, m: String| ConfigError::Key { key: k.into(), message: m };
        if self.budget == 0 {
            return Err(key("budget", "must be >= 1".into()));
        }
        if self.trials == 0 {
            return Err(key("trials", "must be >= 1".into()));
        }
        self.search
            .validate()
            .map_err(|e| key("search", e.to_string()))?;
        if self.value_model.batch_size == 0 {
            return Err(key("value_model.batch_size", "must be >= 1".into()));
        }
        if let MethodConfig::Beam { width: 0 } = self.method {
            return Err(key("method.width", "must be >= 1".into()));
        }
        if let LandscapeConfig::Profile { weights, random_length, .. } = &self.landscape {
            if weights.is_some() == random_length.is_some() {
                return Err(key(
                    "landscape",
                    "profile landscape needs exactly one of `weights` or `random_length`".into(),
                ));
            }
        }
        if self.metrics.top_k.iter().any(|&k| k == 0) {
            return Err(key("metrics.top_k", "entries must be >= 1".into()));
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
