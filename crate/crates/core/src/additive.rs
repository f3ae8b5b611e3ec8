//! Additive trend + seasonality + holiday + regressor model.
//!
//! The forecast is a linear function of a fixed design row per date:
//!
//! ```text
//! [1, t, max(0, t - c_1) .. max(0, t - c_K), sin/cos Fourier terms, holiday indicators, regressors]
//! ```
//!
//! with `t` in days since the first training date. Coefficients are the
//! least-squares fit of that design, which is the maximum-likelihood estimate
//! under Gaussian noise.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error, PartialEq)]
pub enum AdditiveError {
    #[error("regressor `{name}` has no value on {date}")]
    MissingRegressor { name: String, date: NaiveDate },
    #[error("expected {expected} regressor series, got {got}")]
    RegressorCount { expected: usize, got: usize },
    #[error("series lengths differ: {0} dates vs {1} values")]
    Length(usize, usize),
    #[error("only {rows} usable rows for {columns} design columns")]
    TooFewRows { rows: usize, columns: usize },
    #[error("design columns are collinear: `{column}` is explained by {explained_by:?}")]
    Collinear { column: String, explained_by: Vec<String> },
    #[error("invalid model settings: {0}")]
    Spec(String),
}

/// A Fourier seasonal block: `order` sin/cos pairs with the given period in days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seasonality {
    pub name: String,
    pub period: f64,
    pub order: usize,
}

impl Seasonality {
    pub fn new(name: &str, period: f64, order: usize) -> Self {
        Self { name: name.to_string(), period, order }
    }
    pub fn weekly(order: usize) -> Self {
        Self::new("weekly", 7.0, order)
    }
    pub fn yearly(order: usize) -> Self {
        Self::new("yearly", 365.25, order)
    }
    pub fn monthly(order: usize) -> Self {
        Self::new("monthly", 30.44, order)
    }
}

/// A named holiday whose indicator is 1 exactly on `dates`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Holiday {
    pub name: String,
    pub dates: BTreeSet<NaiveDate>,
}

/// National fixed-date public holidays of Spain for each year in `years`.
pub fn spanish_fixed_holidays(years: std::ops::RangeInclusive<i32>) -> Vec<Holiday> {
    const FIXED: [(&str, u32, u32); 9] = [
        ("new_year", 1, 1),
        ("epiphany", 1, 6),
        ("labour_day", 5, 1),
        ("assumption", 8, 15),
        ("national_day", 10, 12),
        ("all_saints", 11, 1),
        ("constitution_day", 12, 6),
        ("immaculate_conception", 12, 8),
        ("christmas", 12, 25),
    ];
    FIXED
        .iter()
        .map(|(name, m, d)| Holiday {
            name: name.to_string(),
            dates: years.clone().filter_map(|y| NaiveDate::from_ymd_opt(y, *m, *d)).collect(),
        })
        .collect()
}

fn default_changepoints() -> usize {
    10
}
fn default_changepoint_range() -> f64 {
    0.8
}
fn default_changepoint_prior_scale() -> Option<f64> {
    Some(0.05)
}

/// Model structure. Serializable so it can live in the tool configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveSpec {
    /// Number of trend changepoints, evenly spaced over the leading
    /// `changepoint_range` share of the training span.
    #[serde(default = "default_changepoints")]
    pub changepoints: usize,
    #[serde(default = "default_changepoint_range")]
    pub changepoint_range: f64,
    /// Prior standard deviation of each changepoint's slope change, with the
    /// target scaled by its largest magnitude and time by the training span.
    /// Smaller values keep the trend closer to a straight line. `None` fits
    /// the changepoints by plain least squares.
    #[serde(default = "default_changepoint_prior_scale")]
    pub changepoint_prior_scale: Option<f64>,
    #[serde(default)]
    pub seasonalities: Vec<Seasonality>,
    #[serde(default)]
    pub holidays: Vec<Holiday>,
    /// Names of external regressor columns, in design order.
    #[serde(default)]
    pub regressors: Vec<String>,
    /// Seasonal terms scale with the trend: `g(t) * (1 + s(t))`.
    #[serde(default)]
    pub multiplicative_seasonality: bool,
}

impl AdditiveSpec {
    /// Linear trend with changepoints and nothing else.
    pub fn trend_only(changepoints: usize) -> Self {
        Self {
            changepoints,
            changepoint_range: default_changepoint_range(),
            changepoint_prior_scale: default_changepoint_prior_scale(),
            seasonalities: vec![],
            holidays: vec![],
            regressors: vec![],
            multiplicative_seasonality: false,
        }
    }

    /// Yearly and weekly seasonality with `tmax` as regressor.
    pub fn basic() -> Self {
        Self {
            seasonalities: vec![Seasonality::yearly(10), Seasonality::weekly(3)],
            regressors: vec!["tmax".into()],
            ..Self::trend_only(default_changepoints())
        }
    }

    /// [`basic`](Self::basic) plus a monthly cycle.
    pub fn with_seasonality() -> Self {
        let mut s = Self::basic();
        s.seasonalities.push(Seasonality::monthly(5));
        s
    }

    /// [`with_seasonality`](Self::with_seasonality) plus national holidays
    /// for `years`.
    pub fn advanced(years: std::ops::RangeInclusive<i32>) -> Self {
        let mut s = Self::with_seasonality();
        s.holidays = spanish_fixed_holidays(years);
        s
    }

    /// [`advanced`](Self::advanced) plus lagged and smoothed target columns
    /// as regressors.
    pub fn advanced_features(years: std::ops::RangeInclusive<i32>, target: &str) -> Self {
        let mut s = Self::advanced(years);
        for suffix in ["lag1", "lag7", "roll7"] {
            s.regressors.push(format!("{target}_{suffix}"));
        }
        s
    }

    /// The four canned variants, from simplest to richest. Each adds columns
    /// to the previous one.
    pub fn variants(years: std::ops::RangeInclusive<i32>, target: &str) -> Vec<(&'static str, AdditiveSpec)> {
        vec![
            ("additive_basic", Self::basic()),
            ("additive_seasonal", Self::with_seasonality()),
            ("additive_advanced", Self::advanced(years.clone())),
            ("additive_advanced_fe", Self::advanced_features(years, target)),
        ]
    }

    fn validate(&self) -> Result<(), AdditiveError> {
        if self.seasonalities.iter().any(|s| s.order == 0 || !(s.period > 0.0)) {
            return Err(AdditiveError::Spec("Fourier orders and periods must be positive".into()));
        }
        if self.changepoint_prior_scale.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
            return Err(AdditiveError::Spec("changepoint_prior_scale must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.changepoint_range) {
            return Err(AdditiveError::Spec("changepoint_range must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Training-range facts every design row depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub origin: NaiveDate,
    /// Changepoint locations in days since `origin`.
    pub changepoints: Vec<f64>,
    /// Days from the first to the last training date.
    pub span: f64,
}

impl Layout {
    pub fn for_training(dates: &[NaiveDate], spec: &AdditiveSpec) -> Self {
        let origin = dates[0];
        let span = (*dates.last().expect("non-empty") - origin).num_days() as f64;
        let k = spec.changepoints;
        let changepoints = (1..=k).map(|i| spec.changepoint_range * span * i as f64 / k as f64).collect();
        Self { origin, changepoints, span }
    }

    fn t(&self, date: NaiveDate) -> f64 {
        (date - self.origin).num_days() as f64
    }
}

/// Design rows and their column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Coefficients of the stage that supplies the trend scaling seasonal terms
/// in multiplicative mode (intercept, slope, hinges).
type TrendScale<'a> = Option<&'a [f64]>;

fn trend_value(coefs: &[f64], t: f64, changepoints: &[f64]) -> f64 {
    coefs[0] + coefs[1] * t + changepoints.iter().zip(&coefs[2..]).map(|(c, b)| b * (t - c).max(0.0)).sum::<f64>()
}

/// Builds the design matrix for `dates`. `regressors` holds one series per
/// `spec.regressors` entry, aligned with `dates`; every value must be present.
pub fn design_matrix(
    dates: &[NaiveDate],
    spec: &AdditiveSpec,
    layout: &Layout,
    regressors: &[&[Option<f64>]],
) -> Result<Design, AdditiveError> {
    design_with_scale(dates, spec, layout, regressors, None)
}

fn design_with_scale(
    dates: &[NaiveDate],
    spec: &AdditiveSpec,
    layout: &Layout,
    regressors: &[&[Option<f64>]],
    trend_scale: TrendScale,
) -> Result<Design, AdditiveError> {
    spec.validate()?;
    if regressors.len() != spec.regressors.len() {
        return Err(AdditiveError::RegressorCount { expected: spec.regressors.len(), got: regressors.len() });
    }
    if let Some(r) = regressors.iter().find(|r| r.len() != dates.len()) {
        return Err(AdditiveError::Length(dates.len(), r.len()));
    }

    let mut names = vec!["intercept".to_string(), "trend".to_string()];
    names.extend((0..layout.changepoints.len()).map(|k| format!("changepoint{}", k + 1)));
    // In multiplicative mode the seasonal block needs a trend to scale it; the
    // trend-estimation stage runs without it.
    let include_seasonal = trend_scale.is_some() || !spec.multiplicative_seasonality;
    if include_seasonal {
        for s in &spec.seasonalities {
            for n in 1..=s.order {
                names.push(format!("{}_sin{n}", s.name));
                names.push(format!("{}_cos{n}", s.name));
            }
        }
    }
    names.extend(spec.holidays.iter().map(|h| format!("holiday_{}", h.name)));
    names.extend(spec.regressors.iter().cloned());

    let mut rows = Vec::with_capacity(dates.len());
    for (i, &date) in dates.iter().enumerate() {
        let t = layout.t(date);
        let mut row = Vec::with_capacity(names.len());
        row.push(1.0);
        row.push(t);
        row.extend(layout.changepoints.iter().map(|c| (t - c).max(0.0)));
        if include_seasonal {
            let scale = trend_scale.map_or(1.0, |c| trend_value(c, t, &layout.changepoints));
            for s in &spec.seasonalities {
                for n in 1..=s.order {
                    let angle = 2.0 * PI * n as f64 * t / s.period;
                    row.push(scale * angle.sin());
                    row.push(scale * angle.cos());
                }
            }
        }
        row.extend(spec.holidays.iter().map(|h| if h.dates.contains(&date) { 1.0 } else { 0.0 }));
        for (name, series) in spec.regressors.iter().zip(regressors) {
            row.push(series[i].ok_or_else(|| AdditiveError::MissingRegressor { name: name.clone(), date })?);
        }
        rows.push(row);
    }
    Ok(Design { names, rows })
}

/// Ridge added to the scaled normal equations to keep the factorization
/// stable; the solution is then refined back to the plain least-squares fit.
pub const RIDGE: f64 = 1e-8;
/// Pivots of the scaled Gram matrix at or below this mean the column is
/// (numerically) a combination of earlier ones.
pub const MIN_PIVOT: f64 = 1e-7;

/// Least squares with unit-norm column scaling, plus `penalty[j] · coef_j²`
/// per column. Zero columns get a zero coefficient.
fn least_squares(design: &Design, y: &[f64], penalty: &[f64]) -> Result<Vec<f64>, AdditiveError> {
    let p = design.names.len();
    let norms: Vec<f64> = (0..p).map(|j| design.rows.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt()).collect();
    let active: Vec<usize> = (0..p).filter(|&j| norms[j] > 0.0).collect();
    let m = active.len();
    if design.rows.len() < m {
        return Err(AdditiveError::TooFewRows { rows: design.rows.len(), columns: m });
    }
    let mut gram = vec![vec![0.0; m]; m];
    let mut rhs = vec![0.0; m];
    for (row, yi) in design.rows.iter().zip(y) {
        let scaled: Vec<f64> = active.iter().map(|&j| row[j] / norms[j]).collect();
        for a in 0..m {
            rhs[a] += scaled[a] * yi;
            for b in 0..=a {
                gram[a][b] += scaled[a] * scaled[b];
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            gram[b][a] = gram[a][b];
        }
    }
    for (a, &j) in active.iter().enumerate() {
        gram[a][a] += penalty.get(j).copied().unwrap_or(0.0) / (norms[j] * norms[j]);
    }
    let mut damped = gram.clone();
    for (a, &j) in active.iter().enumerate() {
        if j != 0 {
            damped[a][a] += RIDGE;
        }
    }
    let mut factor = damped.clone();
    if let Err(bad) = linalg::cholesky(&mut factor, MIN_PIVOT) {
        return Err(collinearity(design, &active, &gram, bad));
    }
    let mut theta = linalg::cholesky_solve(&factor, &rhs);
    for _ in 0..3 {
        let resid: Vec<f64> = (0..m).map(|a| rhs[a] - (0..m).map(|b| gram[a][b] * theta[b]).sum::<f64>()).collect();
        let step = linalg::cholesky_solve(&factor, &resid);
        for (t, s) in theta.iter_mut().zip(step) {
            *t += s;
        }
    }
    let mut coef = vec![0.0; p];
    for (a, &j) in active.iter().enumerate() {
        coef[j] = theta[a] / norms[j];
    }
    Ok(coef)
}

/// Least squares with the changepoint prior. The prior's weight depends on
/// the noise level, which is taken from an unpenalized first pass:
/// `λ = s² · span² / (max|y|² · τ²)` per changepoint coefficient.
fn penalized_fit(design: &Design, y: &[f64], layout: &Layout, spec: &AdditiveSpec) -> Result<Vec<f64>, AdditiveError> {
    let plain = least_squares(design, y, &[])?;
    let (Some(tau), false) = (spec.changepoint_prior_scale, layout.changepoints.is_empty()) else {
        return Ok(plain);
    };
    let s2 = design.rows.iter().zip(y).map(|(r, yi)| (yi - dot(r, &plain)).powi(2)).sum::<f64>() / y.len() as f64;
    let y_max = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if s2 == 0.0 || y_max == 0.0 {
        return Ok(plain);
    }
    let span = layout.span.max(1.0);
    let lambda = s2 * span * span / (y_max * y_max * tau * tau);
    let mut penalty = vec![0.0; design.names.len()];
    for p in &mut penalty[2..2 + layout.changepoints.len()] {
        *p = lambda;
    }
    least_squares(design, y, &penalty)
}

/// Names the columns that explain column `bad` by regressing it on the
/// columns before it.
fn collinearity(design: &Design, active: &[usize], gram: &[Vec<f64>], bad: usize) -> AdditiveError {
    let column = design.names[active[bad]].clone();
    let mut sub: Vec<Vec<f64>> = (0..bad).map(|a| gram[a][..bad].to_vec()).collect();
    for (a, row) in sub.iter_mut().enumerate() {
        row[a] += 1e-12;
    }
    let explained_by = linalg::solve_spd(&sub, &gram[bad][..bad], 0.0)
        .map(|w| {
            w.iter()
                .enumerate()
                .filter(|(_, v)| v.abs() > 1e-6)
                .map(|(a, _)| design.names[active[a]].clone())
                .collect()
        })
        .unwrap_or_default();
    AdditiveError::Collinear { column, explained_by }
}

/// A fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveFit {
    pub spec: AdditiveSpec,
    pub layout: Layout,
    pub columns: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Mean squared training residual.
    pub residual_variance: f64,
    /// Trend coefficients scaling the seasonal terms (multiplicative mode only).
    pub seasonal_scale: Option<Vec<f64>>,
}

impl AdditiveFit {
    /// Fits on `dates`/`y`; rows with a missing target are skipped.
    /// `regressors` follow `spec.regressors`.
    pub fn fit(
        dates: &[NaiveDate],
        y: &[Option<f64>],
        regressors: &[&[Option<f64>]],
        spec: &AdditiveSpec,
    ) -> Result<Self, AdditiveError> {
        if dates.len() != y.len() {
            return Err(AdditiveError::Length(dates.len(), y.len()));
        }
        let keep: Vec<usize> = (0..y.len()).filter(|&i| y[i].is_some()).collect();
        if keep.is_empty() {
            return Err(AdditiveError::TooFewRows { rows: 0, columns: 1 });
        }
        let kd: Vec<NaiveDate> = keep.iter().map(|&i| dates[i]).collect();
        let ky: Vec<f64> = keep.iter().map(|&i| y[i].expect("kept")).collect();
        let kr: Vec<Vec<Option<f64>>> = regressors.iter().map(|r| keep.iter().map(|&i| r[i]).collect()).collect();
        let kr_refs: Vec<&[Option<f64>]> = kr.iter().map(Vec::as_slice).collect();
        let layout = Layout::for_training(&kd, spec);

        let seasonal_scale = if spec.multiplicative_seasonality && !spec.seasonalities.is_empty() {
            // Stage one: everything but the seasonal block, to estimate the trend.
            let first = design_with_scale(&kd, spec, &layout, &kr_refs, None)?;
            let coef = penalized_fit(&first, &ky, &layout, spec)?;
            Some(coef[..2 + layout.changepoints.len()].to_vec())
        } else {
            None
        };
        let design = design_with_scale(&kd, spec, &layout, &kr_refs, seasonal_scale.as_deref())?;
        let coefficients = penalized_fit(&design, &ky, &layout, spec)?;
        let residual_variance = design
            .rows
            .iter()
            .zip(&ky)
            .map(|(r, yi)| (yi - dot(r, &coefficients)).powi(2))
            .sum::<f64>()
            / ky.len() as f64;
        Ok(Self { spec: spec.clone(), layout, columns: design.names, coefficients, residual_variance, seasonal_scale })
    }

    /// Design rows for `dates` under this fit's layout.
    pub fn design(&self, dates: &[NaiveDate], regressors: &[&[Option<f64>]]) -> Result<Design, AdditiveError> {
        design_with_scale(dates, &self.spec, &self.layout, regressors, self.seasonal_scale.as_deref())
    }

    /// `design(dates) · coefficients`.
    pub fn predict(&self, dates: &[NaiveDate], regressors: &[&[Option<f64>]]) -> Result<Vec<f64>, AdditiveError> {
        Ok(self.design(dates, regressors)?.rows.iter().map(|r| dot(r, &self.coefficients)).collect())
    }

    /// `column,coefficient` rows.
    pub fn coefficients_csv(&self) -> String {
        let mut s = String::from("column,coefficient\n");
        for (n, c) in self.columns.iter().zip(&self.coefficients) {
            s.push_str(&format!("{n},{c:.10e}\n"));
        }
        s
    }

    pub fn coefficient(&self, column: &str) -> Option<f64> {
        self.columns.iter().position(|c| c == column).map(|i| self.coefficients[i])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Holiday years covered by a date range.
pub fn years_of(dates: &[NaiveDate]) -> std::ops::RangeInclusive<i32> {
    let first = dates.first().map_or(2000, |d| d.year());
    let last = dates.last().map_or(2000, |d| d.year());
    first..=last + 2
}
