use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::eval::Horizon;
use crate::features::FeatureSpec;
use crate::gbt::search::SearchSpace;
use crate::gbt::GbtHyperParams;
use crate::lstm::TrainConfig;
use crate::schedule::{RandomInstances, Weights, WorkDay};
use crate::synth::SyntheticSpec;

pub const ENV_CONSUMPTION: &str = "HYDROTWIN_CONSUMPTION";
pub const ENV_METEO: &str = "HYDROTWIN_METEO";
pub const ENV_OUT: &str = "HYDROTWIN_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub consumption: PathBuf,
    pub meteo: PathBuf,
}

impl Default for DataPaths {
    fn default() -> Self {
        Self { consumption: "data/consumption.csv".into(), meteo: "data/meteo.csv".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Final days of the data held out for scoring.
    pub test_days: usize,
    /// Days before the test range used for early stopping and for fitting
    /// the stacking weights. Models are trained on the days before these.
    pub validation_days: usize,
    pub horizons: Vec<Horizon>,
    /// Models to run, in report order. See [`MODEL_NAMES`](super::MODEL_NAMES).
    pub models: Vec<String>,
    /// |R| above which a column is flagged by `correlate`.
    pub correlation_threshold: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            test_days: 548,
            validation_days: 120,
            horizons: Horizon::standard(),
            models: super::MODEL_NAMES.iter().map(|s| s.to_string()).collect(),
            correlation_threshold: 0.4,
        }
    }
}

/// Optional randomized search for the boosted models. `draws = 0` skips it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub draws: usize,
    pub folds: usize,
    pub space: SearchSpace,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { draws: 0, folds: 3, space: SearchSpace::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Instance used by `schedule` when none is given on the command line.
    pub instance: Option<PathBuf>,
    pub budget_secs: f64,
    /// Number of generated instances averaged by `compare`.
    pub runs: usize,
    /// Replace the instance's weights.
    pub weights: Option<Weights>,
    /// Replace the instance's work day.
    pub work_day: Option<WorkDay>,
    pub generator: RandomInstances,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            instance: None,
            budget_secs: 60.0,
            runs: 20,
            weights: None,
            work_day: None,
            generator: RandomInstances::default(),
        }
    }
}

/// The library's network defaults converge too slowly with plain gradient
/// descent for multi-year daily series; the tool trains harder.
fn lstm_defaults() -> TrainConfig {
    TrainConfig { learning_rate: 0.1, epochs: 150, ..TrainConfig::default() }
}

/// Everything the command-line tool needs, read from one TOML file.
///
/// The top-level `seed` drives every random component (data generation,
/// network initialisation, boosting subsamples, instance generation), so
/// seeds set inside the sections are overwritten by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    pub seed: u64,
    pub data: DataPaths,
    pub output_dir: PathBuf,
    pub synthetic: SyntheticSpec,
    pub features: FeatureSpec,
    pub evaluation: EvaluationConfig,
    pub lstm: TrainConfig,
    pub gbt_leaf_wise: GbtHyperParams,
    pub gbt_depth_wise: GbtHyperParams,
    pub search: SearchConfig,
    pub schedule: ScheduleConfig,
}

impl Default for ToolConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            data: DataPaths::default(),
            output_dir: "out".into(),
            synthetic: SyntheticSpec::default(),
            features: FeatureSpec::default(),
            evaluation: EvaluationConfig::default(),
            lstm: lstm_defaults(),
            gbt_leaf_wise: GbtHyperParams::default(),
            gbt_depth_wise: GbtHyperParams::depth_wise(),
            search: SearchConfig::default(),
            schedule: ScheduleConfig::default(),
        }
    }
}

impl ToolConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(cfg.with_seed_applied())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Copies the top-level seed into every section.
    pub fn with_seed_applied(mut self) -> Self {
        self.synthetic.seed = self.seed;
        self.lstm.seed = self.seed;
        self.gbt_leaf_wise.seed = self.seed;
        self.gbt_depth_wise.seed = self.seed;
        self.schedule.generator.seed = self.seed;
        self
    }

    /// Applies path overrides from `HYDROTWIN_CONSUMPTION`,
    /// `HYDROTWIN_METEO` and `HYDROTWIN_OUT`.
    pub fn apply_env(&mut self) {
        self.apply_overrides(|k| std::env::var_os(k).map(PathBuf::from));
    }

    /// Same as [`apply_env`](Self::apply_env) with a custom lookup.
    pub fn apply_overrides(&mut self, lookup: impl Fn(&str) -> Option<PathBuf>) {
        if let Some(p) = lookup(ENV_CONSUMPTION) {
            self.data.consumption = p;
        }
        if let Some(p) = lookup(ENV_METEO) {
            self.data.meteo = p;
        }
        if let Some(p) = lookup(ENV_OUT) {
            self.output_dir = p;
        }
    }
}
