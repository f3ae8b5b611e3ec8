//! Randomized hyperparameter search with expanding-window cross-validation.

use std::ops::Range;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{boost, GbtError, GbtHyperParams};
use crate::eval;
use crate::features::FeatureMatrix;

/// Candidate values per tuned hyperparameter. Every other setting comes from
/// the base parameters handed to [`randomized_search`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub learning_rate: Vec<f64>,
    pub num_leaves: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub feature_fraction: Vec<f64>,
    pub bagging_fraction: Vec<f64>,
    pub l2: Vec<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            learning_rate: vec![0.01, 0.05, 0.1],
            num_leaves: vec![7, 15, 31],
            max_depth: vec![3, 5, 7],
            feature_fraction: vec![0.8, 1.0],
            bagging_fraction: vec![0.8, 1.0],
            l2: vec![0.0, 1.0, 5.0],
        }
    }
}

/// Training/validation row ranges for `k` expanding-window folds.
///
/// The rows are cut into `k + 1` equal chunks; fold `i` trains on chunks
/// `0..=i` and validates on chunk `i + 1` (the last fold also takes any
/// remainder rows).
pub fn time_series_folds(n: usize, k: usize, min_rows: usize) -> Result<Vec<(Range<usize>, Range<usize>)>, GbtError> {
    let chunk = n / (k + 1);
    if k < 2 || chunk < min_rows.max(1) {
        return Err(GbtError::FoldTooSmall { rows: n, folds: k, min: min_rows.max(1) });
    }
    Ok((0..k)
        .map(|i| {
            let cut = (i + 1) * chunk;
            let end = if i + 1 == k { n } else { cut + chunk };
            (0..cut, cut..end)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub draw: usize,
    pub params: GbtHyperParams,
    pub fold_mae: Vec<f64>,
    pub mean_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: GbtHyperParams,
    pub best_draw: usize,
    pub table: Vec<CvRow>,
}

impl SearchResult {
    /// One row per draw with the tuned values, fold MAEs and their mean.
    pub fn to_csv(&self) -> String {
        let k = self.table.first().map_or(0, |r| r.fold_mae.len());
        let mut s = String::from("draw,learning_rate,num_leaves,max_depth,feature_fraction,bagging_fraction,l2,mean_mae");
        for i in 1..=k {
            s.push_str(&format!(",fold{i}_mae"));
        }
        s.push('\n');
        for r in &self.table {
            let p = &r.params;
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{:.6}",
                r.draw, p.learning_rate, p.num_leaves, p.max_depth, p.feature_fraction, p.bagging_fraction, p.l2, r.mean_mae
            ));
            for m in &r.fold_mae {
                s.push_str(&format!(",{m:.6}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Draws `n_draws` configurations from `space`, scores each by mean MAE over
/// `k` expanding-window folds of `data`, and returns the best (ties go to
/// the earlier draw) together with the full table.
///
/// Draws are sampled up front from one seeded generator and then evaluated
/// in parallel; each draw gets its own derived seed, so the result does not
/// depend on scheduling.
pub fn randomized_search(
    data: &FeatureMatrix,
    space: &SearchSpace,
    base: &GbtHyperParams,
    k: usize,
    n_draws: usize,
    seed: u64,
) -> Result<SearchResult, GbtError> {
    if n_draws == 0 {
        return Err(GbtError::BadParams("at least one draw is required".into()));
    }
    let folds = time_series_folds(data.n_rows(), k, 2 * base.min_samples_leaf)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |v: &[f64], fallback: f64, rng: &mut ChaCha8Rng| v.choose(rng).copied().unwrap_or(fallback);
    let pick_n = |v: &[usize], fallback: usize, rng: &mut ChaCha8Rng| v.choose(rng).copied().unwrap_or(fallback);
    let draws: Vec<GbtHyperParams> = (0..n_draws)
        .map(|d| GbtHyperParams {
            learning_rate: pick(&space.learning_rate, base.learning_rate, &mut rng),
            num_leaves: pick_n(&space.num_leaves, base.num_leaves, &mut rng),
            max_depth: pick_n(&space.max_depth, base.max_depth, &mut rng),
            feature_fraction: pick(&space.feature_fraction, base.feature_fraction, &mut rng),
            bagging_fraction: pick(&space.bagging_fraction, base.bagging_fraction, &mut rng),
            l2: pick(&space.l2, base.l2, &mut rng),
            seed: base.seed.wrapping_add((d as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            ..base.clone()
        })
        .collect();

    let table: Vec<CvRow> = draws
        .into_par_iter()
        .enumerate()
        .map(|(draw, params)| {
            let fold_mae = folds
                .iter()
                .map(|(tr, va)| {
                    let (train, valid) = (data.slice_rows(tr.clone()), data.slice_rows(va.clone()));
                    let (model, _) = boost(&train, Some(&valid), &params)?;
                    let pred = model.predict(&valid)?;
                    Ok(eval::mae(valid.y(), &pred).expect("validation fold is non-empty"))
                })
                .collect::<Result<Vec<f64>, GbtError>>()?;
            let mean_mae = fold_mae.iter().sum::<f64>() / fold_mae.len() as f64;
            Ok(CvRow { draw, params, fold_mae, mean_mae })
        })
        .collect::<Result<_, GbtError>>()?;

    let best_row = table
        .iter()
        .min_by(|a, b| a.mean_mae.total_cmp(&b.mean_mae).then(a.draw.cmp(&b.draw)))
        .expect("at least one draw");
    Ok(SearchResult { best: best_row.params.clone(), best_draw: best_row.draw, table })
}
