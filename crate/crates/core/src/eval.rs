//! Forecast accuracy metrics and the model comparison table.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("metric of an empty series")]
    Empty,
    #[error("series lengths differ ({0} vs {1})")]
    UnequalLengths(usize, usize),
    #[error("every actual value is zero; MAPE is undefined")]
    AllExcluded,
    #[error("horizon `{label}` needs {days} days but the test range only covers {available}")]
    HorizonTooLong { label: String, days: u32, available: i64 },
}

fn check(y: &[f64], yhat: &[f64]) -> Result<(), EvalError> {
    if y.len() != yhat.len() {
        return Err(EvalError::UnequalLengths(y.len(), yhat.len()));
    }
    if y.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64, EvalError> {
    check(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// Root mean squared error.
pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64, EvalError> {
    check(y, yhat)?;
    Ok((y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64).sqrt())
}

/// Actuals with `|y| <= MAPE_EPSILON` are left out of MAPE.
pub const MAPE_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mape {
    pub percent: f64,
    /// Rows skipped because the actual value was (numerically) zero.
    pub excluded: usize,
}

/// Mean absolute percentage error, in percent. Zero actuals are excluded and
/// counted rather than producing infinities.
pub fn mape(y: &[f64], yhat: &[f64]) -> Result<Mape, EvalError> {
    check(y, yhat)?;
    let (sum, used) = y
        .iter()
        .zip(yhat)
        .filter(|(a, _)| a.abs() > MAPE_EPSILON)
        .fold((0.0, 0usize), |(s, n), (a, b)| (s + ((a - b) / a).abs(), n + 1));
    if used == 0 {
        return Err(EvalError::AllExcluded);
    }
    Ok(Mape { percent: 100.0 * sum / used as f64, excluded: y.len() - used })
}

/// Seasonal naive forecast: `ŷ[t] = y[t - season]`. The first `season`
/// entries have no forecast.
pub fn seasonal_naive(y: &[f64], season: usize) -> Vec<Option<f64>> {
    (0..y.len()).map(|t| t.checked_sub(season).map(|i| y[i])).collect()
}

/// A named evaluation window: the final `days` calendar days of the test
/// range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub label: String,
    pub days: u32,
}

impl Horizon {
    pub fn new(label: &str, days: u32) -> Self {
        Self { label: label.to_string(), days }
    }

    /// The 6- and 18-month windows (183 and 548 days).
    pub fn standard() -> Vec<Horizon> {
        vec![Horizon::new("6 Months", 183), Horizon::new("18 Months", 548)]
    }
}

/// One model's predictions over the test range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSeries {
    pub model: String,
    pub dates: Vec<NaiveDate>,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
}

impl ForecastSeries {
    /// `date,actual,predicted` rows for external plotting.
    pub fn plot_csv(&self) -> String {
        let mut s = String::from("date,actual,predicted\n");
        for ((d, a), p) in self.dates.iter().zip(&self.actual).zip(&self.predicted) {
            s.push_str(&format!("{d},{a:.6},{p:.6}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub horizon: String,
    pub mae: f64,
    pub rmse: f64,
    pub mape_pct: f64,
    pub mape_excluded: usize,
    pub n: usize,
}

impl MetricReport {
    pub fn compute(model: &str, horizon: &str, y: &[f64], yhat: &[f64]) -> Result<Self, EvalError> {
        let m = mape(y, yhat)?;
        Ok(Self {
            model: model.to_string(),
            horizon: horizon.to_string(),
            mae: mae(y, yhat)?,
            rmse: rmse(y, yhat)?,
            mape_pct: m.percent,
            mape_excluded: m.excluded,
            n: y.len(),
        })
    }
}

/// Metrics for every model × horizon, in model-then-horizon order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub horizons: Vec<Horizon>,
    pub models: Vec<String>,
    pub rows: Vec<MetricReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mae,
    Rmse,
    Mape,
}

impl Metric {
    fn of(self, r: &MetricReport) -> f64 {
        match self {
            Metric::Mae => r.mae,
            Metric::Rmse => r.rmse,
            Metric::Mape => r.mape_pct,
        }
    }
}

impl ComparisonTable {
    pub fn get(&self, model: &str, horizon: &str) -> Option<&MetricReport> {
        self.rows.iter().find(|r| r.model == model && r.horizon == horizon)
    }

    /// Model with the lowest value of `metric` for `horizon` (first wins ties).
    pub fn best(&self, horizon: &str, metric: Metric) -> Option<&str> {
        self.rows
            .iter()
            .filter(|r| r.horizon == horizon)
            .min_by(|a, b| metric.of(a).total_cmp(&metric.of(b)))
            .map(|r| r.model.as_str())
    }

    /// `model,horizon,mae,rmse,mape_pct,n`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("model,horizon,mae,rmse,mape_pct,n\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:.4},{:.4},{:.4},{}\n",
                csv_field(&r.model),
                csv_field(&r.horizon),
                r.mae,
                r.rmse,
                r.mape_pct,
                r.n
            ));
        }
        s
    }

    /// Aligned text table: one row per model, an MAE/RMSE/MAPE group per
    /// horizon. The best value in each column carries a `*`.
    pub fn to_text(&self) -> String {
        let name_w = self.models.iter().map(String::len).max().unwrap_or(5).max(5);
        const CELL: usize = 10;
        let mut out = String::new();
        out.push_str(&format!("{:name_w$}", ""));
        for h in &self.horizons {
            out.push_str(&format!(" | {:^w$}", h.label, w = 3 * CELL + 2));
        }
        out.push('\n');
        out.push_str(&format!("{:name_w$}", "Model"));
        for _ in &self.horizons {
            out.push_str(&format!(" | {:>CELL$} {:>CELL$} {:>CELL$}", "MAE", "RMSE", "MAPE"));
        }
        out.push('\n');
        out.push_str(&"-".repeat(name_w + self.horizons.len() * (3 * CELL + 5)));
        out.push('\n');
        for model in &self.models {
            out.push_str(&format!("{model:name_w$}"));
            for h in &self.horizons {
                out.push_str(" | ");
                let Some(r) = self.get(model, &h.label) else {
                    out.push_str(&format!("{:>w$}", "n/a", w = 3 * CELL + 2));
                    continue;
                };
                let cells = [
                    (Metric::Mae, format!("{:.2}", r.mae)),
                    (Metric::Rmse, format!("{:.2}", r.rmse)),
                    (Metric::Mape, format!("{:.2}%", r.mape_pct)),
                ];
                let parts: Vec<String> = cells
                    .into_iter()
                    .map(|(m, text)| {
                        let star = if self.best(&h.label, m) == Some(model.as_str()) { "*" } else { "" };
                        format!("{:>CELL$}", format!("{star}{text}"))
                    })
                    .collect();
                out.push_str(&parts.join(" "));
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Scores every forecast on every horizon window.
///
/// All series are expected to cover the same test range; each window is the
/// suffix of that range spanning `days` calendar days, so a longer horizon
/// contains the shorter ones.
pub fn compare(series: &[ForecastSeries], horizons: &[Horizon]) -> Result<ComparisonTable, EvalError> {
    let mut rows = Vec::new();
    for s in series {
        check(&s.actual, &s.predicted)?;
        let (first, last) = (s.dates[0], *s.dates.last().expect("non-empty"));
        let available = (last - first).num_days() + 1;
        for h in horizons {
            if h.days as i64 > available {
                return Err(EvalError::HorizonTooLong {
                    label: h.label.clone(),
                    days: h.days,
                    available,
                });
            }
            let from = last - chrono::Duration::days(h.days as i64 - 1);
            let start = s.dates.partition_point(|d| *d < from);
            rows.push(MetricReport::compute(
                &s.model,
                &h.label,
                &s.actual[start..],
                &s.predicted[start..],
            )?);
        }
    }
    Ok(ComparisonTable {
        horizons: horizons.to_vec(),
        models: series.iter().map(|s| s.model.clone()).collect(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn identical_series_score_zero() {
        let y = [3.0, 4.0, 5.0];
        assert_eq!(mae(&y, &y).unwrap(), 0.0);
        assert_eq!(rmse(&y, &y).unwrap(), 0.0);
        assert_eq!(mape(&y, &y).unwrap().percent, 0.0);
    }

    #[test]
    fn hand_values() {
        assert_eq!(mae(&[10.0, 20.0], &[12.0, 18.0]).unwrap(), 2.0);
        assert_eq!(rmse(&[0.0], &[3.0]).unwrap(), 3.0);
        assert!((mape(&[100.0], &[90.0]).unwrap().percent - 10.0).abs() < 1e-12);
        // |1-2|,|2-4|,|4-1| -> squares 1,4,9 -> sqrt(14/3)
        assert!((rmse(&[1.0, 2.0, 4.0], &[2.0, 4.0, 1.0]).unwrap() - (14.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mae_is_symmetric() {
        let (a, b) = ([1.0, 5.0, -2.0], [0.5, 7.0, 3.0]);
        assert_eq!(mae(&a, &b).unwrap(), mae(&b, &a).unwrap());
    }

    #[test]
    fn zero_actuals_excluded_and_counted() {
        let m = mape(&[0.0, 50.0], &[3.0, 55.0]).unwrap();
        assert_eq!(m.excluded, 1);
        assert!((m.percent - 10.0).abs() < 1e-12);
        assert_eq!(mape(&[0.0], &[1.0]), Err(EvalError::AllExcluded));
    }

    #[test]
    fn empty_inputs_error() {
        assert_eq!(mae(&[], &[]), Err(EvalError::Empty));
        assert_eq!(rmse(&[], &[]), Err(EvalError::Empty));
        assert_eq!(mae(&[1.0], &[]), Err(EvalError::UnequalLengths(1, 0)));
    }

    fn series(model: &str, n: usize, err: f64) -> ForecastSeries {
        let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        let actual: Vec<f64> = (0..n).map(|i| 50.0 + (i % 7) as f64).collect();
        ForecastSeries {
            model: model.into(),
            dates: (0..n).map(|i| start + chrono::Duration::days(i as i64)).collect(),
            predicted: actual.iter().enumerate().map(|(i, a)| a + if i % 2 == 0 { err } else { -err }).collect(),
            actual,
        }
    }

    #[test]
    fn perfect_model_row_is_zero() {
        let t = compare(&[series("perfect", 30, 0.0)], &[Horizon::new("h", 10)]).unwrap();
        let r = t.get("perfect", "h").unwrap();
        assert_eq!((r.mae, r.rmse, r.mape_pct, r.n), (0.0, 0.0, 0.0, 10));
    }

    #[test]
    fn ranking_by_mae() {
        let t = compare(
            &[series("worse", 40, 3.0), series("better", 40, 1.0)],
            &[Horizon::new("short", 7), Horizon::new("long", 40)],
        )
        .unwrap();
        assert_eq!(t.best("short", Metric::Mae), Some("better"));
        assert_eq!(t.get("worse", "long").unwrap().mae, 3.0);
        assert_eq!(t.get("better", "short").unwrap().n, 7);
        let text = t.to_text();
        assert!(text.contains("*1.00"));
        assert_eq!(t.to_csv().lines().count(), 5);
        assert_eq!(t.to_csv().lines().next(), Some("model,horizon,mae,rmse,mape_pct,n"));
    }

    #[test]
    fn horizon_longer_than_test_range() {
        assert!(matches!(
            compare(&[series("m", 10, 1.0)], &[Horizon::new("long", 11)]),
            Err(EvalError::HorizonTooLong { .. })
        ));
    }

    #[test]
    fn table_layout_fixture_formats() {
        // Layout check only: values copied verbatim, not recomputed.
        let t = ComparisonTable {
            horizons: Horizon::standard(),
            models: vec!["Prophet Adv. Engineering".into()],
            rows: vec![
                MetricReport { model: "Prophet Adv. Engineering".into(), horizon: "6 Months".into(), mae: 5.76, rmse: 8.31, mape_pct: 18.61, mape_excluded: 0, n: 183 },
                MetricReport { model: "Prophet Adv. Engineering".into(), horizon: "18 Months".into(), mae: 10.07, rmse: 15.02, mape_pct: 20.12, mape_excluded: 0, n: 548 },
            ],
        };
        let text = t.to_text();
        let row = text.lines().find(|l| l.starts_with("Prophet Adv.")).unwrap();
        for cell in ["*5.76", "*8.31", "*18.61%", "*10.07", "*15.02", "*20.12%"] {
            assert!(row.contains(cell), "{row}");
        }
        assert!(text.lines().next().unwrap().contains("6 Months"));
        assert!(t.to_csv().contains("Prophet Adv. Engineering,6 Months,5.7600,8.3100,18.6100,183"));
    }

    #[test]
    fn seasonal_naive_shifts() {
        assert_eq!(seasonal_naive(&[1.0, 2.0, 3.0], 2), vec![None, None, Some(1.0)]);
    }

    proptest! {
        #[test]
        fn mae_never_exceeds_rmse(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..60)) {
            let (y, yhat): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assert!(mae(&y, &yhat).unwrap() <= rmse(&y, &yhat).unwrap() * (1.0 + 1e-12));
        }

        #[test]
        fn offsets_are_detected(y in prop::collection::vec(1.0f64..1e3, 1..30), c in prop_oneof![-50.0f64..-1e-3, 1e-3f64..50.0]) {
            let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
            prop_assert!(mae(&y, &shifted).unwrap() > 0.0);
            prop_assert!(rmse(&y, &shifted).unwrap() > 0.0);
            prop_assert!(mape(&y, &shifted).unwrap().percent > 0.0);
        }
    }
}
