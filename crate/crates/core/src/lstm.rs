//! Single-layer LSTM regressor trained with backpropagation through time.
//!
//! A window of `L` consecutive feature rows is fed through the cell starting
//! from a zero state; a dense layer maps the final hidden state to the
//! forecast. Inputs and target are min-max scaled on the training rows.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::MinMaxScaler;
use crate::features::FeatureMatrix;

/// Version tag written into checkpoints.
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LstmError {
    #[error("need more than {window} rows to build a window, got {rows}")]
    TooFewRows { rows: usize, window: usize },
    #[error("dimension mismatch: expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("loss of an empty batch")]
    EmptyBatch,
    #[error("training diverged in epoch {epoch} (loss is not finite)")]
    Diverged { epoch: usize },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("feature columns {got:?} do not match the trained columns {expected:?}")]
    Columns { expected: Vec<String>, got: Vec<String> },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

fn sigmoid(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

/// Activations must stay in the open interval unless the pre-activation is
/// so large that the result rounds to the bound in double precision. NaN is
/// let through so divergence is reported by the training loop.
#[inline]
fn check_open(v: f64, lo: f64, pre: f64) {
    debug_assert!(
        v.is_nan() || (lo < v && v < 1.0) || pre.abs() > 18.0,
        "activation {v} escaped ({lo}, 1) at pre-activation {pre}"
    );
}

/// Weights and bias of one gate. `weights` is row-major,
/// `hidden × (hidden + input)`, acting on `[h_prev, x]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gate {
    fn zeros(hidden: usize, width: usize) -> Self {
        Self { weights: vec![0.0; hidden * width], bias: vec![0.0; hidden] }
    }

    fn pre_activation(&self, z: &[f64], out: &mut [f64]) {
        let width = z.len();
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.weights[k * width..(k + 1) * width];
            *o = self.bias[k] + row.iter().zip(z).map(|(w, v)| w * v).sum::<f64>();
        }
    }
}

/// All trainable parameters. The same shape doubles as a gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub hidden_size: usize,
    pub input_size: usize,
    pub forget: Gate,
    pub input: Gate,
    pub candidate: Gate,
    pub output: Gate,
    pub dense_weights: Vec<f64>,
    pub dense_bias: f64,
}

impl LstmParams {
    pub fn zeros(hidden_size: usize, input_size: usize) -> Self {
        let w = hidden_size + input_size;
        Self {
            hidden_size,
            input_size,
            forget: Gate::zeros(hidden_size, w),
            input: Gate::zeros(hidden_size, w),
            candidate: Gate::zeros(hidden_size, w),
            output: Gate::zeros(hidden_size, w),
            dense_weights: vec![0.0; hidden_size],
            dense_bias: 0.0,
        }
    }

    /// Uniform in `±1/sqrt(fan_in)`; gates see `hidden + input` inputs, the
    /// dense layer `hidden`.
    pub fn random(hidden_size: usize, input_size: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(hidden_size, input_size);
        let gate_bound = 1.0 / ((hidden_size + input_size) as f64).sqrt();
        let dense_bound = 1.0 / (hidden_size as f64).sqrt();
        for gate in p.gates_mut() {
            for v in gate.weights.iter_mut().chain(gate.bias.iter_mut()) {
                *v = rng.random_range(-gate_bound..gate_bound);
            }
        }
        for v in p.dense_weights.iter_mut() {
            *v = rng.random_range(-dense_bound..dense_bound);
        }
        p.dense_bias = rng.random_range(-dense_bound..dense_bound);
        p
    }

    fn gates_mut(&mut self) -> [&mut Gate; 4] {
        [&mut self.forget, &mut self.input, &mut self.candidate, &mut self.output]
    }

    /// Every scalar parameter, in a fixed order.
    pub fn values(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for g in [&self.forget, &self.input, &self.candidate, &self.output] {
            v.extend_from_slice(&g.weights);
            v.extend_from_slice(&g.bias);
        }
        v.extend_from_slice(&self.dense_weights);
        v.push(self.dense_bias);
        v
    }

    /// Mutable access to every scalar parameter, in the order of [`values`](Self::values).
    pub fn values_mut(&mut self) -> Vec<&mut f64> {
        let Self { forget, input, candidate, output, dense_weights, dense_bias, .. } = self;
        let mut v: Vec<&mut f64> = Vec::new();
        for g in [forget, input, candidate, output] {
            v.extend(g.weights.iter_mut());
            v.extend(g.bias.iter_mut());
        }
        v.extend(dense_weights.iter_mut());
        v.push(dense_bias);
        v
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &LstmParams, scale: f64) {
        for (a, b) in self.values_mut().into_iter().zip(other.values()) {
            *a += scale * b;
        }
    }
}

/// Cell and hidden state after one step.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub cell: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_size: usize) -> Self {
        Self { cell: vec![0.0; hidden_size], hidden: vec![0.0; hidden_size] }
    }
}

/// Everything a step needs to be differentiated.
#[derive(Debug, Clone)]
struct StepCache {
    z: Vec<f64>,
    forget: Vec<f64>,
    input: Vec<f64>,
    candidate: Vec<f64>,
    output: Vec<f64>,
    cell_prev: Vec<f64>,
    cell_tanh: Vec<f64>,
}

fn step(params: &LstmParams, prev: &LstmState, x: &[f64]) -> Result<(LstmState, StepCache), LstmError> {
    let h = params.hidden_size;
    if x.len() != params.input_size {
        return Err(LstmError::Dimension { expected: params.input_size, got: x.len() });
    }
    if prev.hidden.len() != h || prev.cell.len() != h {
        return Err(LstmError::Dimension { expected: h, got: prev.hidden.len().min(prev.cell.len()) });
    }
    let mut z = Vec::with_capacity(h + x.len());
    z.extend_from_slice(&prev.hidden);
    z.extend_from_slice(x);

    let mut pre = [vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]];
    params.forget.pre_activation(&z, &mut pre[0]);
    params.input.pre_activation(&z, &mut pre[1]);
    params.candidate.pre_activation(&z, &mut pre[2]);
    params.output.pre_activation(&z, &mut pre[3]);

    let gate = |a: &[f64]| -> Vec<f64> {
        a.iter()
            .map(|&v| {
                let s = sigmoid(v);
                check_open(s, 0.0, v);
                s
            })
            .collect()
    };
    let forget = gate(&pre[0]);
    let input = gate(&pre[1]);
    let output = gate(&pre[3]);
    let candidate: Vec<f64> = pre[2]
        .iter()
        .map(|&v| {
            let t = v.tanh();
            check_open(t, -1.0, v);
            t
        })
        .collect();

    let cell: Vec<f64> = (0..h).map(|k| forget[k] * prev.cell[k] + input[k] * candidate[k]).collect();
    let cell_tanh: Vec<f64> = cell.iter().map(|c| c.tanh()).collect();
    let hidden: Vec<f64> = (0..h).map(|k| output[k] * cell_tanh[k]).collect();
    Ok((
        LstmState { cell, hidden },
        StepCache { z, forget, input, candidate, output, cell_prev: prev.cell.clone(), cell_tanh },
    ))
}

/// One cell update from `prev` on input `x`.
pub fn cell_forward(params: &LstmParams, prev: &LstmState, x: &[f64]) -> Result<LstmState, LstmError> {
    step(params, prev, x).map(|(s, _)| s)
}

fn dense(params: &LstmParams, hidden: &[f64]) -> f64 {
    params.dense_bias + params.dense_weights.iter().zip(hidden).map(|(w, h)| w * h).sum::<f64>()
}

fn forward_cached(params: &LstmParams, seq: &[Vec<f64>]) -> Result<(f64, Vec<StepCache>, Vec<f64>), LstmError> {
    let mut state = LstmState::zeros(params.hidden_size);
    let mut caches = Vec::with_capacity(seq.len());
    for x in seq {
        let (next, cache) = step(params, &state, x)?;
        caches.push(cache);
        state = next;
    }
    Ok((dense(params, &state.hidden), caches, state.hidden))
}

/// Runs a whole window from the zero state and applies the dense layer.
pub fn forward_sequence(params: &LstmParams, seq: &[Vec<f64>]) -> Result<f64, LstmError> {
    forward_cached(params, seq).map(|(p, _, _)| p)
}

/// Mean squared error.
pub fn mse(predictions: &[f64], targets: &[f64]) -> Result<f64, LstmError> {
    if predictions.len() != targets.len() {
        return Err(LstmError::Dimension { expected: targets.len(), got: predictions.len() });
    }
    if targets.is_empty() {
        return Err(LstmError::EmptyBatch);
    }
    Ok(predictions.iter().zip(targets).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / targets.len() as f64)
}

/// A window of consecutive feature rows and the target that follows it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub steps: Vec<Vec<f64>>,
    pub target: f64,
    /// Matrix row whose target this window predicts.
    pub target_row: usize,
}

/// Slides a window of `len` rows over the matrix: rows `[t, t + len)` predict
/// the target of row `t + len`. Rows are assumed consecutive in time.
pub fn make_sequences(matrix: &FeatureMatrix, len: usize) -> Result<Vec<Sequence>, LstmError> {
    let n = matrix.n_rows();
    if len == 0 {
        return Err(LstmError::Config("sequence length must be positive".into()));
    }
    if n <= len {
        return Err(LstmError::TooFewRows { rows: n, window: len });
    }
    Ok((0..n - len)
        .map(|t| Sequence {
            steps: (t..t + len).map(|i| matrix.row(i).to_vec()).collect(),
            target: matrix.y()[t + len],
            target_row: t + len,
        })
        .collect())
}

/// Gradient of the mean squared error over `batch` with respect to every
/// parameter, together with the loss itself.
pub fn backward(params: &LstmParams, batch: &[Sequence]) -> Result<(LstmParams, f64), LstmError> {
    if batch.is_empty() {
        return Err(LstmError::EmptyBatch);
    }
    let h = params.hidden_size;
    let width = h + params.input_size;
    let mut grad = LstmParams::zeros(h, params.input_size);
    let mut loss = 0.0;
    let n = batch.len() as f64;

    for seq in batch {
        let (pred, caches, last_hidden) = forward_cached(params, &seq.steps)?;
        let residual = pred - seq.target;
        loss += residual * residual / n;
        let d_pred = 2.0 * residual / n;

        grad.dense_bias += d_pred;
        for k in 0..h {
            grad.dense_weights[k] += d_pred * last_hidden[k];
        }
        let mut d_hidden: Vec<f64> = params.dense_weights.iter().map(|w| w * d_pred).collect();
        let mut d_cell = vec![0.0; h];

        for c in caches.iter().rev() {
            let mut da = [vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]];
            for k in 0..h {
                let d_out = d_hidden[k] * c.cell_tanh[k];
                let dc = d_cell[k] + d_hidden[k] * c.output[k] * (1.0 - c.cell_tanh[k] * c.cell_tanh[k]);
                da[0][k] = dc * c.cell_prev[k] * c.forget[k] * (1.0 - c.forget[k]);
                da[1][k] = dc * c.candidate[k] * c.input[k] * (1.0 - c.input[k]);
                da[2][k] = dc * c.input[k] * (1.0 - c.candidate[k] * c.candidate[k]);
                da[3][k] = d_out * c.output[k] * (1.0 - c.output[k]);
                d_cell[k] = dc * c.forget[k];
            }
            let mut dz = vec![0.0; width];
            let gates = [&params.forget, &params.input, &params.candidate, &params.output];
            let grads = grad.gates_mut();
            for ((gate, g), d) in gates.iter().zip(grads).zip(&da) {
                for k in 0..h {
                    if d[k] == 0.0 {
                        continue;
                    }
                    g.bias[k] += d[k];
                    let row = k * width..(k + 1) * width;
                    for ((gw, w), (zj, dzj)) in g.weights[row.clone()]
                        .iter_mut()
                        .zip(&gate.weights[row])
                        .zip(c.z.iter().zip(dz.iter_mut()))
                    {
                        *gw += d[k] * zj;
                        *dzj += d[k] * w;
                    }
                }
            }
            d_hidden.copy_from_slice(&dz[..h]);
        }
    }
    Ok((grad, loss))
}

/// Training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden_size: usize,
    pub sequence_length: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Trailing share of the windows held out for the per-epoch validation loss.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_size: 16,
            sequence_length: 14,
            epochs: 40,
            learning_rate: 0.01,
            batch_size: 32,
            seed: 42,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LstmError> {
        let bad = |m: &str| Err(LstmError::Config(m.to_string()));
        if self.hidden_size == 0 || self.sequence_length == 0 || self.epochs == 0 || self.batch_size == 0 {
            return bad("hidden_size, sequence_length, epochs and batch_size must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be a finite non-negative number");
        }
        if !(0.0..=0.5).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 0.5]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub validation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    /// Training loss of the initial parameters.
    pub initial_train: f64,
    pub epochs: Vec<EpochLoss>,
}

/// A trained network plus the scaling needed to work in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmForecaster {
    pub format_version: u32,
    pub config: TrainConfig,
    pub feature_names: Vec<String>,
    pub params: LstmParams,
    pub feature_scalers: Vec<MinMaxScaler>,
    pub target_scaler: MinMaxScaler,
}

/// Min-max scaler that tolerates constant columns by giving them unit range.
fn fit_scaler(values: &[f64]) -> MinMaxScaler {
    MinMaxScaler::fit(values).unwrap_or_else(|_| {
        let v = values.first().copied().unwrap_or(0.0);
        MinMaxScaler { min: v, max: v + 1.0 }
    })
}

fn batch_loss(params: &LstmParams, seqs: &[Sequence]) -> Result<f64, LstmError> {
    let preds = seqs.iter().map(|s| forward_sequence(params, &s.steps)).collect::<Result<Vec<_>, _>>()?;
    let targets: Vec<f64> = seqs.iter().map(|s| s.target).collect();
    mse(&preds, &targets)
}

impl LstmForecaster {
    fn scale_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.feature_scalers).map(|(v, s)| s.transform(*v)).collect()
    }

    fn scaled_sequences(&self, matrix: &FeatureMatrix) -> Result<Vec<Sequence>, LstmError> {
        let rows = matrix.rows().map(|r| self.scale_row(r)).collect();
        let y = matrix.y().iter().map(|v| self.target_scaler.transform(*v)).collect();
        let scaled = FeatureMatrix::from_rows(matrix.names().to_vec(), matrix.dates().to_vec(), rows, y);
        make_sequences(&scaled, self.config.sequence_length)
    }

    /// Trains on every window of `matrix`. Scaling is fitted on all rows of
    /// `matrix`, so pass only training rows.
    pub fn train(matrix: &FeatureMatrix, config: &TrainConfig) -> Result<(Self, LossTrace), LstmError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut model = Self {
            format_version: CHECKPOINT_VERSION,
            config: config.clone(),
            feature_names: matrix.names().to_vec(),
            params: LstmParams::random(config.hidden_size, matrix.n_features(), &mut rng),
            feature_scalers: (0..matrix.n_features()).map(|j| fit_scaler(&matrix.column(j))).collect(),
            target_scaler: fit_scaler(matrix.y()),
        };
        let seqs = model.scaled_sequences(matrix)?;
        let n_val = (seqs.len() as f64 * config.validation_fraction).floor() as usize;
        let (train, val) = seqs.split_at(seqs.len() - n_val);
        if train.is_empty() {
            return Err(LstmError::TooFewRows { rows: matrix.n_rows(), window: config.sequence_length });
        }

        let initial_train = batch_loss(&model.params, train)?;
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut epochs = Vec::with_capacity(config.epochs);
        for epoch in 1..=config.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(config.batch_size) {
                let batch: Vec<Sequence> = chunk.iter().map(|&i| train[i].clone()).collect();
                let (grad, _) = backward(&model.params, &batch)?;
                model.params.add_scaled(&grad, -config.learning_rate);
            }
            let train_loss = batch_loss(&model.params, train)?;
            let val_loss = if val.is_empty() { None } else { Some(batch_loss(&model.params, val)?) };
            if !train_loss.is_finite() || val_loss.is_some_and(|v| !v.is_finite()) {
                return Err(LstmError::Diverged { epoch });
            }
            epochs.push(EpochLoss { epoch, train: train_loss, validation: val_loss });
        }
        Ok((model, LossTrace { initial_train, epochs }))
    }

    /// Forecast in original units from the `sequence_length` rows that
    /// precede the target day.
    pub fn predict(&self, window: &[Vec<f64>]) -> Result<f64, LstmError> {
        if window.len() != self.config.sequence_length {
            return Err(LstmError::Dimension { expected: self.config.sequence_length, got: window.len() });
        }
        let scaled = window
            .iter()
            .map(|r| {
                if r.len() != self.feature_names.len() {
                    Err(LstmError::Dimension { expected: self.feature_names.len(), got: r.len() })
                } else {
                    Ok(self.scale_row(r))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.target_scaler.inverse(forward_sequence(&self.params, &scaled)?))
    }

    /// One-step-ahead forecasts for rows `from..` of `matrix`, each made from
    /// the actual preceding rows.
    pub fn predict_rows(&self, matrix: &FeatureMatrix, from: usize) -> Result<Vec<f64>, LstmError> {
        if matrix.names() != self.feature_names.as_slice() {
            return Err(LstmError::Columns { expected: self.feature_names.clone(), got: matrix.names().to_vec() });
        }
        let len = self.config.sequence_length;
        if from < len {
            return Err(LstmError::TooFewRows { rows: from, window: len });
        }
        (from..matrix.n_rows())
            .map(|t| self.predict(&(t - len..t).map(|i| matrix.row(i).to_vec()).collect::<Vec<_>>()))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LstmError> {
        let m: Self = serde_json::from_str(text).map_err(|e| LstmError::Checkpoint(e.to_string()))?;
        if m.format_version != CHECKPOINT_VERSION {
            return Err(LstmError::Checkpoint(format!("unsupported format_version {}", m.format_version)));
        }
        Ok(m)
    }
}

/// Largest relative error between the analytic gradient and central finite
/// differences with step `eps`. Relative error is `|a - n| / max(|a|, |n|)`,
/// with pairs where both are below `1e-10` compared absolutely.
pub fn gradient_check(params: &LstmParams, batch: &[Sequence], eps: f64) -> Result<f64, LstmError> {
    let (grad, _) = backward(params, batch)?;
    let analytic = grad.values();
    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    for (i, a) in analytic.iter().enumerate() {
        let orig = params.values()[i];
        *probe.values_mut()[i] = orig + eps;
        let up = batch_loss(&probe, batch)?;
        *probe.values_mut()[i] = orig - eps;
        let down = batch_loss(&probe, batch)?;
        *probe.values_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let scale = a.abs().max(numeric.abs());
        let err = if scale < 1e-10 { (a - numeric).abs() } else { (a - numeric).abs() / scale };
        worst = worst.max(err);
    }
    Ok(worst)
}
