//! Gradient-boosted regression trees.
//!
//! One engine serves both growth styles: leaf-wise (best-first, capped by a
//! leaf budget) and depth-wise (level by level, capped by depth). Splits are
//! exact over sorted feature values and scored with a regularized
//! squared-error gain. [`search`] tunes hyperparameters with expanding-window
//! cross-validation and [`stack`] blends several models.

mod boost;
pub mod search;
pub mod stack;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use boost::{boost, GbtModel, RoundLoss};
pub use tree::{grow_tree, Node, RegressionTree};

#[derive(Debug, Error, PartialEq)]
pub enum GbtError {
    #[error("no training rows")]
    Empty,
    #[error("early stopping needs a non-empty validation set")]
    NoValidation,
    #[error("feature columns {got:?} do not match the trained columns {expected:?}")]
    FeatureMismatch { expected: Vec<String>, got: Vec<String> },
    #[error("invalid hyperparameters: {0}")]
    BadParams(String),
    #[error("{rows} rows cannot be cut into {folds} expanding folds of at least {min} rows")]
    FoldTooSmall { rows: usize, folds: usize, min: usize },
    #[error("stacking: {0}")]
    Stack(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    /// Split the leaf with the largest gain first, up to `num_leaves`.
    LeafWise,
    /// Split every splittable leaf of a level before moving deeper, up to
    /// `max_depth`.
    DepthWise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtHyperParams {
    pub growth: Growth,
    pub learning_rate: f64,
    pub num_leaves: usize,
    pub max_depth: usize,
    /// Share of features offered to each tree.
    pub feature_fraction: f64,
    /// Share of rows used per tree when bagging is active.
    pub bagging_fraction: f64,
    /// Draw a new row subset every this many rounds; 0 disables bagging.
    pub bagging_freq: usize,
    pub num_boost_round: usize,
    pub min_samples_leaf: usize,
    /// Minimum gain a split must add (γ).
    pub min_split_gain: f64,
    /// L1 penalty on leaf sums (α).
    pub l1: f64,
    /// L2 penalty on leaf values (λ).
    pub l2: f64,
    pub early_stopping_rounds: Option<usize>,
    pub seed: u64,
}

impl Default for GbtHyperParams {
    fn default() -> Self {
        Self {
            growth: Growth::LeafWise,
            learning_rate: 0.05,
            num_leaves: 31,
            max_depth: 6,
            feature_fraction: 1.0,
            bagging_fraction: 1.0,
            bagging_freq: 1,
            num_boost_round: 300,
            min_samples_leaf: 5,
            min_split_gain: 0.0,
            l1: 0.0,
            l2: 1.0,
            early_stopping_rounds: Some(30),
            seed: 42,
        }
    }
}

impl GbtHyperParams {
    /// Depth-wise defaults.
    pub fn depth_wise() -> Self {
        Self { growth: Growth::DepthWise, max_depth: 5, num_leaves: 1 << 5, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), GbtError> {
        let bad = |m: &str| Err(GbtError::BadParams(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        let frac_ok = |f: f64| f > 0.0 && f <= 1.0;
        if !frac_ok(self.feature_fraction) || !frac_ok(self.bagging_fraction) {
            return bad("fractions must lie in (0, 1]");
        }
        if self.num_boost_round == 0 || self.num_leaves == 0 || self.min_samples_leaf == 0 {
            return bad("num_boost_round, num_leaves and min_samples_leaf must be positive");
        }
        if self.min_split_gain < 0.0 || self.l1 < 0.0 || self.l2 < 0.0 {
            return bad("regularization terms must be non-negative");
        }
        if self.early_stopping_rounds == Some(0) {
            return bad("early_stopping_rounds must be positive when set");
        }
        Ok(())
    }
}
