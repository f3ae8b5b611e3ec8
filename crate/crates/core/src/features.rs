//! Lag, rolling-mean and calendar predictors.
//!
//! Rolling means are trailing windows that include the current observation:
//! `mean(x[t-w+1..=t])`. Applied to the target this means the feature at row
//! `t` already contains `y[t]`; callers forecasting `y[t]` from that row should
//! be aware of it (see the forecasting chapter of the guide).

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Frequency, StandardScaler, TimeSeriesFrame};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("lag and window sizes must be at least 1")]
    ZeroWindow,
    #[error("feature assembly requires a daily frame")]
    NotDaily,
    #[error("no complete rows remain after feature construction")]
    Empty,
    #[error("unknown feature column `{0}`")]
    UnknownFeature(String),
}

/// `output[t] = input[t - k]`; the first `k` entries are missing.
pub fn lag(series: &[Option<f64>], k: usize) -> Result<Vec<Option<f64>>, FeatureError> {
    if k == 0 {
        return Err(FeatureError::ZeroWindow);
    }
    Ok((0..series.len()).map(|t| if t >= k { series[t - k] } else { None }).collect())
}

/// Trailing mean over `w` points ending at (and including) `t`. Entries whose
/// window is incomplete or touches a missing value are missing.
pub fn rolling_mean(series: &[Option<f64>], w: usize) -> Result<Vec<Option<f64>>, FeatureError> {
    if w == 0 {
        return Err(FeatureError::ZeroWindow);
    }
    Ok((0..series.len())
        .map(|t| {
            if t + 1 < w {
                return None;
            }
            let window = &series[t + 1 - w..=t];
            let sum: Option<f64> = window.iter().copied().sum();
            sum.map(|s| s / w as f64)
        })
        .collect())
}

/// Day of week with Monday = 0 … Sunday = 6.
pub fn day_of_week(date: NaiveDate) -> u32 {
    date.weekday().num_days_from_monday()
}

/// `(day_of_week, is_weekend)` per date; weekend means day-of-week ≥ 5.
pub fn temporal_indicators(dates: &[NaiveDate]) -> (Vec<u32>, Vec<u8>) {
    dates.iter().map(|d| (day_of_week(*d), u8::from(day_of_week(*d) >= 5))).unzip()
}

fn default_target() -> String {
    crate::data::CONSUMPTION_COLUMN.to_string()
}
fn default_lags() -> Vec<usize> {
    vec![1, 7]
}
fn default_window() -> Option<usize> {
    Some(7)
}
fn yes() -> bool {
    true
}
fn default_regressors() -> Vec<String> {
    vec!["tmax".into()]
}

/// Which engineered predictors to build.
///
/// Lags and rolling means are produced for the target and for every
/// regressor column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    #[serde(default = "default_target")]
    pub target: String,
    #[serde(default = "default_lags")]
    pub lags: Vec<usize>,
    #[serde(default = "default_window")]
    pub rolling_window: Option<usize>,
    #[serde(default = "yes")]
    pub day_of_week: bool,
    #[serde(default = "yes")]
    pub is_weekend: bool,
    #[serde(default = "default_regressors")]
    pub regressors: Vec<String>,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            target: default_target(),
            lags: default_lags(),
            rolling_window: default_window(),
            day_of_week: true,
            is_weekend: true,
            regressors: default_regressors(),
        }
    }
}

impl FeatureSpec {
    /// A spec with no engineered features, only the raw regressors.
    pub fn regressors_only(target: &str, regressors: &[&str]) -> Self {
        Self {
            target: target.to_string(),
            lags: vec![],
            rolling_window: None,
            day_of_week: false,
            is_weekend: false,
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Number of leading calendar days without a complete feature row.
    pub fn warm_up(&self) -> usize {
        let max_lag = self.lags.iter().copied().max().unwrap_or(0);
        let window = self.rolling_window.map_or(0, |w| w.saturating_sub(1));
        max_lag.max(window)
    }
}

/// Row-major predictor matrix with its target vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    names: Vec<String>,
    dates: Vec<NaiveDate>,
    data: Vec<f64>,
    y: Vec<f64>,
}

impl FeatureMatrix {
    /// Builds a matrix from rows. Every row must have `names.len()` entries.
    pub fn from_rows(
        names: Vec<String>,
        dates: Vec<NaiveDate>,
        rows: Vec<Vec<f64>>,
        y: Vec<f64>,
    ) -> Self {
        assert_eq!(dates.len(), rows.len(), "one date per row");
        assert_eq!(y.len(), rows.len(), "one target per row");
        let mut data = Vec::with_capacity(rows.len() * names.len());
        for r in &rows {
            assert_eq!(r.len(), names.len(), "row width must match the column names");
            data.extend_from_slice(r);
        }
        Self { names, dates, data, y }
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.n_features();
        &self.data[i * k..(i + 1) * k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows()).map(|i| self.row(i))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Self {
        let k = self.n_features();
        Self {
            names: self.names.clone(),
            dates: self.dates[range.clone()].to_vec(),
            data: self.data[range.start * k..range.end * k].to_vec(),
            y: self.y[range].to_vec(),
        }
    }

    /// Rows before `date` and rows on/after it.
    pub fn split_at_date(&self, date: NaiveDate) -> (Self, Self) {
        let n = self.dates.partition_point(|d| *d < date);
        (self.slice_rows(0..n), self.slice_rows(n..self.n_rows()))
    }

    /// Keeps the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self, FeatureError> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.column_index(n).ok_or_else(|| FeatureError::UnknownFeature(n.to_string())))
            .collect::<Result<_, _>>()?;
        let rows = self.rows().map(|r| idx.iter().map(|&j| r[j]).collect()).collect();
        Ok(Self::from_rows(
            names.iter().map(|s| s.to_string()).collect(),
            self.dates.clone(),
            rows,
            self.y.clone(),
        ))
    }

    /// Fits one z-score scaler per column. Constant columns get a unit scaler
    /// (centred only) so they pass through harmlessly.
    pub fn fit_standardizer(&self) -> Vec<StandardScaler> {
        (0..self.n_features())
            .map(|j| {
                let col = self.column(j);
                StandardScaler::fit(&col).unwrap_or(StandardScaler {
                    mean: col.first().copied().unwrap_or(0.0),
                    std: 1.0,
                })
            })
            .collect()
    }

    pub fn standardized(&self, scalers: &[StandardScaler]) -> Self {
        assert_eq!(scalers.len(), self.n_features());
        let rows = self
            .rows()
            .map(|r| r.iter().zip(scalers).map(|(v, s)| s.transform(*v)).collect())
            .collect();
        Self::from_rows(self.names.clone(), self.dates.clone(), rows, self.y.clone())
    }
}

/// Reindexes a daily frame onto a gap-free calendar so that row offsets equal
/// day offsets. Returns the calendar and, per calendar day, the source row.
fn calendar(frame: &TimeSeriesFrame) -> (Vec<NaiveDate>, Vec<Option<usize>>) {
    let dates = frame.dates();
    let (Some(first), Some(last)) = (dates.first(), dates.last()) else {
        return (vec![], vec![]);
    };
    let days = (*last - *first).num_days() as usize + 1;
    let cal: Vec<NaiveDate> = (0..days).map(|i| *first + chrono::Duration::days(i as i64)).collect();
    let src = cal.iter().map(|d| dates.binary_search(d).ok()).collect();
    (cal, src)
}

/// Materialises every feature of `spec` and keeps the complete rows.
///
/// Column order is deterministic: lags (target first, then regressors, each
/// over `spec.lags` in order), rolling means (same series order), day of
/// week, weekend flag, raw regressors. Lags and windows are measured in
/// calendar days, so a gap in the input invalidates the rows that would
/// reach across it.
pub fn assemble(frame: &TimeSeriesFrame, spec: &FeatureSpec) -> Result<FeatureMatrix, FeatureError> {
    if frame.frequency() != Frequency::Daily {
        return Err(FeatureError::NotDaily);
    }
    if spec.lags.contains(&0) || spec.rolling_window == Some(0) {
        return Err(FeatureError::ZeroWindow);
    }
    let (cal, src) = calendar(frame);
    let on_calendar = |name: &str| -> Result<Vec<Option<f64>>, FeatureError> {
        let col = frame.require(name)?;
        Ok(src.iter().map(|s| s.and_then(|i| col[i])).collect())
    };

    let target = on_calendar(&spec.target)?;
    let mut series = vec![(spec.target.clone(), target.clone())];
    for r in &spec.regressors {
        series.push((r.clone(), on_calendar(r)?));
    }

    let mut names = Vec::new();
    let mut cols: Vec<Vec<Option<f64>>> = Vec::new();
    for (name, s) in &series {
        for &k in &spec.lags {
            names.push(format!("{name}_lag{k}"));
            cols.push(lag(s, k)?);
        }
    }
    if let Some(w) = spec.rolling_window {
        for (name, s) in &series {
            names.push(format!("{name}_roll{w}"));
            cols.push(rolling_mean(s, w)?);
        }
    }
    let (dow, weekend) = temporal_indicators(&cal);
    if spec.day_of_week {
        names.push("day_of_week".into());
        cols.push(dow.iter().map(|d| Some(*d as f64)).collect());
    }
    if spec.is_weekend {
        names.push("is_weekend".into());
        cols.push(weekend.iter().map(|w| Some(*w as f64)).collect());
    }
    for (name, s) in series.iter().skip(1) {
        names.push(name.clone());
        cols.push(s.clone());
    }

    let mut dates = Vec::new();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for t in 0..cal.len() {
        if src[t].is_none() {
            continue;
        }
        let Some(target_t) = target[t] else { continue };
        let row: Option<Vec<f64>> = cols.iter().map(|c| c[t]).collect();
        if let Some(row) = row {
            dates.push(cal[t]);
            rows.push(row);
            y.push(target_t);
        }
    }
    if rows.is_empty() {
        return Err(FeatureError::Empty);
    }
    Ok(FeatureMatrix::from_rows(names, dates, rows, y))
}
