use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::dataset::{FilterConfig, SplitConfig};
use crate::recommenders::{Algorithm, AlsParams, BprParams, Hyperparameters, ItemKnnParams, PopParams, SlimParams};
use crate::synth::SyntheticSpec;

/// Where the interactions come from: two TSV files, or a synthetic spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub interactions: PathBuf,
    pub users: PathBuf,
    /// Keep this many items, drawn uniformly after filtering.
    pub sample_items: Option<usize>,
    pub sample_seed: u64,
    /// Generate the data instead of reading files.
    pub synthetic: Option<SyntheticSpec>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            interactions: PathBuf::from("interactions.tsv"),
            users: PathBuf::from("users.tsv"),
            sample_items: None,
            sample_seed: 0,
            synthetic: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HistoryMode {
    /// The user's whole filtered profile.
    #[default]
    Full,
    /// Only the items given to the model as input.
    Input,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Additive smoothing for binned distributions.
    pub epsilon: f64,
    pub history: HistoryMode,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { epsilon: 1e-10, history: HistoryMode::Full }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("results") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmsConfig {
    pub roster: Vec<Algorithm>,
    /// Base seed for model training; each (algorithm, fold) derives its own.
    pub seed: u64,
    /// A fold is invalid when more than this share of its users fail.
    pub max_failure_rate: f64,
}

impl Default for AlgorithmsConfig {
    fn default() -> Self {
        AlgorithmsConfig { roster: Algorithm::ALL.to_vec(), seed: 42, max_failure_rate: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub filter: FilterConfig,
    pub split: SplitConfig,
    pub metrics: MetricsConfig,
    pub output: OutputConfig,
    pub algorithms: AlgorithmsConfig,
    pub pop: PopParams,
    pub itemknn: ItemKnnParams,
    pub slim: SlimParams,
    pub als: AlsParams,
    pub bpr: BprParams,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig, HarnessError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<ExperimentConfig, HarnessError> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.data.interactions, &mut config.data.users, &mut config.output.dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.algorithms.roster.is_empty() {
            return Err(HarnessError::Config("algorithms.roster must not be empty".into()));
        }
        let mut seen = self.algorithms.roster.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.algorithms.roster.len() {
            return Err(HarnessError::Config("algorithms.roster lists an algorithm twice".into()));
        }
        if !(self.metrics.epsilon > 0.0 && self.metrics.epsilon.is_finite()) {
            return Err(HarnessError::Config("metrics.epsilon must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.algorithms.max_failure_rate) {
            return Err(HarnessError::Config("algorithms.max_failure_rate must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        Hyperparameters {
            pop: self.pop.clone(),
            itemknn: self.itemknn.clone(),
            slim: self.slim.clone(),
            als: self.als.clone(),
            bpr: self.bpr.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
