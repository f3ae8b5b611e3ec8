use serde::{Deserialize, Serialize};

use super::{DataError, TimeSeriesFrame};

/// Pearson's correlation coefficient.
///
/// Evaluated in centred two-pass form, which is algebraically identical to
/// the raw-sums expression `(nΣxy − ΣxΣy) / sqrt((nΣx² − (Σx)²)(nΣy² − (Σy)²))`
/// but does not lose digits when the series carry a large offset. The result
/// is symmetric in its arguments bit-for-bit and clamped to `[-1, 1]`.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, DataError> {
    if x.len() != y.len() {
        return Err(DataError::UnequalLengths(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(DataError::TooShort { needed: 2, got: n });
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(DataError::Constant);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// [`pearson_r`] over the pairwise-complete subset: positions where either
/// side is missing are dropped first.
pub fn pearson_r_pairwise(x: &[Option<f64>], y: &[Option<f64>]) -> Result<f64, DataError> {
    if x.len() != y.len() {
        return Err(DataError::UnequalLengths(x.len(), y.len()));
    }
    let (a, b): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .unzip();
    pearson_r(&a, &b)
}

/// A pair whose coefficient could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFailure {
    pub left: String,
    pub right: String,
    pub reason: String,
}

/// Square matrix of pairwise Pearson coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    /// Row-major; `None` where the pair failed.
    pub values: Vec<Vec<Option<f64>>>,
    pub failures: Vec<PairFailure>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        self.values[i][j]
    }

    /// Columns whose |R| against `target` exceeds `threshold`, strongest first.
    pub fn flagged_against(&self, target: &str, threshold: f64) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .labels
            .iter()
            .filter(|l| l.as_str() != target)
            .filter_map(|l| self.get(target, l).map(|r| (l.clone(), r)))
            .filter(|(_, r)| r.abs() > threshold)
            .collect();
        out.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then_with(|| a.0.cmp(&b.0)));
        out
    }

    /// CSV with a leading label column; failed cells are empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("column");
        for l in &self.labels {
            s.push(',');
            s.push_str(l);
        }
        s.push('\n');
        for (label, row) in self.labels.iter().zip(&self.values) {
            s.push_str(label);
            for v in row {
                s.push(',');
                if let Some(v) = v {
                    s.push_str(&format!("{v:.3}"));
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Pairwise correlation matrix over `columns` of `frame`.
///
/// Failures on individual pairs (constant subset, too few complete pairs) do
/// not abort the matrix; the cell is left missing and the pair is listed in
/// [`CorrelationMatrix::failures`]. The diagonal is exactly 1.
pub fn correlation_matrix(
    frame: &TimeSeriesFrame,
    columns: &[&str],
) -> Result<CorrelationMatrix, DataError> {
    if columns.len() < 2 {
        return Err(DataError::TooShort { needed: 2, got: columns.len() });
    }
    let data: Vec<&[Option<f64>]> =
        columns.iter().map(|c| frame.require(c)).collect::<Result<_, _>>()?;
    let k = columns.len();
    let mut values = vec![vec![None; k]; k];
    let mut failures = Vec::new();
    for i in 0..k {
        values[i][i] = Some(1.0);
        for j in (i + 1)..k {
            match pearson_r_pairwise(data[i], data[j]) {
                Ok(r) => {
                    values[i][j] = Some(r);
                    values[j][i] = Some(r);
                }
                Err(e) => failures.push(PairFailure {
                    left: columns[i].to_string(),
                    right: columns[j].to_string(),
                    reason: e.to_string(),
                }),
            }
        }
    }
    Ok(CorrelationMatrix {
        labels: columns.iter().map(|c| c.to_string()).collect(),
        values,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::data::Frequency;

    /// Raw-sums textbook formula, kept independent of the implementation.
    fn oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|b| b * b).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
    }

    #[test]
    fn perfect_linear() {
        assert_eq!(pearson_r(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), 1.0);
    }

    #[test]
    fn perfect_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..30).map(|_| rng.random_range(-5.0..5.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_r(&x, &y).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_input_is_an_error() {
        assert!(matches!(pearson_r(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(DataError::Constant)));
    }

    #[test]
    fn pairwise_deletion() {
        let x = [Some(1.0), None, Some(2.0), Some(3.0)];
        let y = [Some(2.0), Some(100.0), Some(4.0), Some(6.0)];
        assert_eq!(pearson_r_pairwise(&x, &y).unwrap(), 1.0);
    }

    fn frame(cols: &[(&str, Vec<Option<f64>>)]) -> TimeSeriesFrame {
        let n = cols[0].1.len();
        let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        let mut f = TimeSeriesFrame::new(
            (0..n).map(|i| start + chrono::Duration::days(i as i64)).collect(),
            Frequency::Daily,
        )
        .unwrap();
        for (name, v) in cols {
            f.push_column(*name, v.clone()).unwrap();
        }
        f
    }

    #[test]
    fn identical_columns() {
        let v: Vec<Option<f64>> = (0..10).map(|i| Some((i * i) as f64)).collect();
        let f = frame(&[("a", v.clone()), ("b", v)]);
        let m = correlation_matrix(&f, &["a", "b"]).unwrap();
        assert_eq!(m.get("a", "b"), Some(1.0));
        assert_eq!(m.get("a", "a"), Some(1.0));
    }

    #[test]
    fn three_columns_match_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cols: Vec<Vec<f64>> =
            (0..3).map(|_| (0..40).map(|_| rng.random_range(0.0..10.0)).collect()).collect();
        let f = frame(&[
            ("a", cols[0].iter().map(|v| Some(*v)).collect()),
            ("b", cols[1].iter().map(|v| Some(*v)).collect()),
            ("c", cols[2].iter().map(|v| Some(*v)).collect()),
        ]);
        let m = correlation_matrix(&f, &["a", "b", "c"]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { oracle(&cols[i], &cols[j]) };
                assert!((m.values[i][j].unwrap() - expected).abs() < 1e-12);
                assert_eq!(m.values[i][j], m.values[j][i]);
            }
        }
    }

    #[test]
    fn failed_pair_is_reported_not_fatal() {
        let f = frame(&[
            ("a", vec![Some(1.0), Some(2.0), Some(3.0)]),
            ("flat", vec![Some(5.0); 3]),
            ("b", vec![Some(3.0), Some(1.0), Some(2.0)]),
        ]);
        let m = correlation_matrix(&f, &["a", "flat", "b"]).unwrap();
        assert_eq!(m.get("a", "flat"), None);
        assert_eq!(m.get("flat", "flat"), Some(1.0));
        assert_eq!(m.failures.len(), 2);
        assert!(m.get("a", "b").is_some());
    }

    #[test]
    fn flags_strong_columns() {
        let m = CorrelationMatrix {
            labels: vec!["y".into(), "tmax".into(), "dir".into()],
            values: vec![
                vec![Some(1.0), Some(0.683), Some(0.034)],
                vec![Some(0.683), Some(1.0), Some(-0.013)],
                vec![Some(0.034), Some(-0.013), Some(1.0)],
            ],
            failures: vec![],
        };
        assert_eq!(m.flagged_against("y", 0.4), vec![("tmax".to_string(), 0.683)]);
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(pairs in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..40)) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let (Ok(a), Ok(b)) = (pearson_r(&x, &y), pearson_r(&y, &x)) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
                prop_assert!(a.abs() <= 1.0);
            }
        }

        #[test]
        fn affine_invariance(
            pairs in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..40),
            alpha in 0.1f64..10.0, beta in -100.0f64..100.0,
            gamma in 0.1f64..10.0, delta in -100.0f64..100.0,
            flip in any::<bool>(),
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assume!(x.iter().any(|v| (v - x[0]).abs() > 1e-3));
            prop_assume!(y.iter().any(|v| (v - y[0]).abs() > 1e-3));
            let r = pearson_r(&x, &y).unwrap();
            let sign = if flip { -1.0 } else { 1.0 };
            let x2: Vec<f64> = x.iter().map(|v| sign * alpha * v + beta).collect();
            let y2: Vec<f64> = y.iter().map(|v| gamma * v + delta).collect();
            let r2 = pearson_r(&x2, &y2).unwrap();
            prop_assert!((r2 - sign * r).abs() < 1e-12, "{} vs {}", r2, sign * r);
        }
    }
}
