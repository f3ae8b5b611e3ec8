use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{sample_features, Grower, Presorted, RegressionTree};
use super::{GbtError, GbtHyperParams};
use crate::features::FeatureMatrix;

/// Boosted ensemble: `base_score + learning_rate · Σ tree(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub feature_names: Vec<String>,
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
    pub params: GbtHyperParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLoss {
    pub round: usize,
    pub train_mse: f64,
    pub validation_mse: Option<f64>,
}

impl GbtModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>, GbtError> {
        if x.names() != self.feature_names.as_slice() {
            return Err(GbtError::FeatureMismatch { expected: self.feature_names.clone(), got: x.names().to_vec() });
        }
        Ok(x.rows().map(|r| self.predict_row(r)).collect())
    }

    /// Text dump of every tree.
    pub fn dump(&self) -> String {
        let mut s = format!("base_score = {:.6}\nlearning_rate = {}\n", self.base_score, self.learning_rate);
        for (i, t) in self.trees.iter().enumerate() {
            s.push_str(&format!("tree {i}\n"));
            s.push_str(&t.dump(&self.feature_names));
        }
        s
    }
}

fn mse(y: &[f64], pred: &[f64]) -> f64 {
    y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
}

/// Row order sorted by feature values, then target. Training on this order
/// makes the result independent of how the caller ordered the rows.
fn canonical_order(x: &FeatureMatrix) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.n_rows()).collect();
    idx.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b))
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.y()[a].total_cmp(&x.y()[b]))
    });
    idx
}

/// Squared-loss gradient boosting.
///
/// With `early_stopping_rounds` set, training stops once the validation MSE
/// has not improved for that many rounds and the ensemble is truncated to
/// its best round. Bagging draws a fresh row subset every `bagging_freq`
/// rounds; feature subsampling draws per tree. Both use a generator seeded
/// from `params.seed`, so results are reproducible.
pub fn boost(
    train: &FeatureMatrix,
    validation: Option<&FeatureMatrix>,
    params: &GbtHyperParams,
) -> Result<(GbtModel, Vec<RoundLoss>), GbtError> {
    params.validate()?;
    let n = train.n_rows();
    if n == 0 {
        return Err(GbtError::Empty);
    }
    let validation = validation.filter(|v| v.n_rows() > 0);
    if params.early_stopping_rounds.is_some() && validation.is_none() {
        return Err(GbtError::NoValidation);
    }
    if let Some(v) = validation {
        if v.names() != train.names() {
            return Err(GbtError::FeatureMismatch { expected: train.names().to_vec(), got: v.names().to_vec() });
        }
    }

    let order = canonical_order(train);
    let p = train.n_features();
    let columns: Vec<Vec<f64>> = (0..p).map(|j| order.iter().map(|&i| train.row(i)[j]).collect()).collect();
    let y: Vec<f64> = order.iter().map(|&i| train.y()[i]).collect();
    let presorted = Presorted::new(&columns);
    let grower = Grower { columns: &columns, presorted: &presorted, params };

    let base_score = y.iter().sum::<f64>() / n as f64;
    let mut model = GbtModel {
        feature_names: train.names().to_vec(),
        base_score,
        learning_rate: params.learning_rate,
        trees: Vec::new(),
        params: params.clone(),
    };
    let mut pred = vec![base_score; n];
    let mut val_pred = validation.map(|v| vec![base_score; v.n_rows()]);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let bagging = params.bagging_fraction < 1.0 && params.bagging_freq > 0;
    let mut in_bag = vec![true; n];
    let mut trace = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    let mut row = vec![0.0; p];

    for round in 0..params.num_boost_round {
        if bagging && round % params.bagging_freq == 0 {
            let m = ((n as f64 * params.bagging_fraction).round() as usize).clamp(1, n);
            in_bag.iter_mut().for_each(|b| *b = false);
            for i in index::sample(&mut rng, n, m) {
                in_bag[i] = true;
            }
        }
        let features = sample_features(p, params.feature_fraction, &mut rng);
        let residuals: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        let tree = grower.grow(&residuals, &in_bag, &features);

        for i in 0..n {
            for j in 0..p {
                row[j] = columns[j][i];
            }
            pred[i] += params.learning_rate * tree.predict(&row);
        }
        let validation_mse = match (validation, val_pred.as_mut()) {
            (Some(v), Some(vp)) => {
                for (i, r) in v.rows().enumerate() {
                    vp[i] += params.learning_rate * tree.predict(r);
                }
                Some(mse(v.y(), vp))
            }
            _ => None,
        };
        model.trees.push(tree);
        trace.push(RoundLoss { round: round + 1, train_mse: mse(&y, &pred), validation_mse });

        if let (Some(patience), Some(v)) = (params.early_stopping_rounds, validation_mse) {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((round, v));
            } else if round - best.expect("set on first round").0 >= patience {
                break;
            }
        }
    }
    if let Some((r, _)) = best {
        model.trees.truncate(r + 1);
    }
    Ok((model, trace))
}
