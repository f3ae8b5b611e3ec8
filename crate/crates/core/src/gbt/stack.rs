//! Convex blending of member forecasts.
//!
//! Weights minimise the squared error of `Σ w_m · member_m` on a held-out
//! window subject to `w ≥ 0` and `Σ w = 1`. With a handful of members the
//! exact optimum is found by solving the equality-constrained problem on
//! every support set and keeping the best feasible one. A tiny ridge term
//! breaks ties so identical members share weight equally.

use serde::{Deserialize, Serialize};

use super::GbtError;
use crate::linalg;

/// Largest member count handled by support enumeration.
pub const MAX_MEMBERS: usize = 12;

/// Non-negative weights summing to one that minimise the blend's squared
/// error against `actual`.
pub fn stack_weights(members: &[Vec<f64>], actual: &[f64]) -> Result<Vec<f64>, GbtError> {
    let m = members.len();
    if m < 2 {
        return Err(GbtError::Stack("at least two members are required".into()));
    }
    if m > MAX_MEMBERS {
        return Err(GbtError::Stack(format!("at most {MAX_MEMBERS} members are supported")));
    }
    if actual.is_empty() || members.iter().any(|p| p.len() != actual.len()) {
        return Err(GbtError::Stack("member forecasts must match the non-empty actual series".into()));
    }
    let n = actual.len();
    let scale = members.iter().map(|p| p.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / m as f64;
    let ridge = (1e-10 * scale).max(1e-300);
    let objective = |w: &[f64]| -> f64 {
        let sse: f64 = (0..n)
            .map(|i| (w.iter().zip(members).map(|(a, p)| a * p[i]).sum::<f64>() - actual[i]).powi(2))
            .sum();
        sse + ridge * w.iter().map(|v| v * v).sum::<f64>()
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << m) {
        let support: Vec<usize> = (0..m).filter(|a| mask & (1 << a) != 0).collect();
        let s = support.len();
        // w = uniform + Σ_i v_i (e_i - e_last): the sum-to-one constraint holds
        // by construction and the unknowns act on member differences.
        let last = &members[support[s - 1]];
        let diffs: Vec<Vec<f64>> = support[..s - 1]
            .iter()
            .map(|&a| members[a].iter().zip(last).map(|(p, q)| p - q).collect())
            .collect();
        let resid: Vec<f64> = (0..n)
            .map(|i| actual[i] - support.iter().map(|&a| members[a][i]).sum::<f64>() / s as f64)
            .collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let gram: Vec<Vec<f64>> = (0..s - 1)
            .map(|i| (0..s - 1).map(|j| dot(&diffs[i], &diffs[j]) + ridge * if i == j { 2.0 } else { 1.0 }).collect())
            .collect();
        let rhs: Vec<f64> = diffs.iter().map(|d| dot(d, &resid)).collect();
        let Ok(v) = linalg::solve_spd(&gram, &rhs, 0.0) else { continue };
        let mut w = vec![0.0; m];
        let base = 1.0 / s as f64;
        for (i, &a) in support[..s - 1].iter().enumerate() {
            w[a] = base + v[i];
        }
        w[support[s - 1]] = base - v.iter().sum::<f64>();
        if w.iter().any(|x| !(x.is_finite() && *x >= -1e-12)) {
            continue;
        }
        w.iter_mut().for_each(|x| *x = x.max(0.0));
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        let f = objective(&w);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, w));
        }
    }
    best.map(|(_, w)| w).ok_or_else(|| GbtError::Stack("no feasible blend".into()))
}

/// Named members with their blend weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedEnsemble {
    pub members: Vec<String>,
    pub weights: Vec<f64>,
}

impl StackedEnsemble {
    pub fn fit(names: &[String], member_predictions: &[Vec<f64>], actual: &[f64]) -> Result<Self, GbtError> {
        if names.len() != member_predictions.len() {
            return Err(GbtError::Stack("one name per member".into()));
        }
        Ok(Self { members: names.to_vec(), weights: stack_weights(member_predictions, actual)? })
    }

    /// Weighted sum of member forecasts given in member order.
    pub fn predict(&self, member_predictions: &[Vec<f64>]) -> Result<Vec<f64>, GbtError> {
        if member_predictions.len() != self.weights.len() {
            return Err(GbtError::Stack(format!("expected {} members, got {}", self.weights.len(), member_predictions.len())));
        }
        let n = member_predictions[0].len();
        if member_predictions.iter().any(|p| p.len() != n) {
            return Err(GbtError::Stack("member forecasts differ in length".into()));
        }
        Ok((0..n).map(|i| self.weights.iter().zip(member_predictions).map(|(w, p)| w * p[i]).sum()).collect())
    }
}
