//! Trains the configured forecasters on one split and predicts the
//! validation and target dates.
//!
//! Every model is trained on the dates up to `fit_end`, predicts the
//! validation dates that follow (used for early stopping and for the
//! stacking weights) and then the target dates. Models that read lagged
//! consumption forecast one step ahead from observed history.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};

use super::{PipelineError, ToolConfig};
use crate::additive::{years_of, AdditiveFit, AdditiveSpec};
use crate::data::TimeSeriesFrame;
use crate::features::{assemble, day_of_week, FeatureMatrix};
use crate::gbt::search::randomized_search;
use crate::gbt::stack::StackedEnsemble;
use crate::gbt::{boost, GbtHyperParams};
use crate::lstm::LstmForecaster;

pub const SEASONAL_NAIVE: &str = "seasonal_naive";
pub const LSTM: &str = "lstm";
pub const GBT_LEAF_WISE: &str = "gbt_leaf_wise";
pub const GBT_DEPTH_WISE: &str = "gbt_depth_wise";
pub const STACKING: &str = "stacking";

/// Every model the pipeline knows, in report order.
pub const MODEL_NAMES: [&str; 9] = [
    SEASONAL_NAIVE,
    LSTM,
    "additive_basic",
    "additive_seasonal",
    "additive_advanced",
    "additive_advanced_fe",
    GBT_LEAF_WISE,
    GBT_DEPTH_WISE,
    STACKING,
];

/// Season length of the naive benchmark.
pub const NAIVE_SEASON: i64 = 7;

/// Dates a run trains on, validates on and predicts.
#[derive(Debug, Clone, PartialEq)]
pub struct Windows {
    /// Last training date (inclusive).
    pub fit_end: NaiveDate,
    pub validation: Vec<NaiveDate>,
    pub target: Vec<NaiveDate>,
}

/// Predictions of one model plus files worth keeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRun {
    pub name: String,
    pub validation: Vec<f64>,
    pub target: Vec<f64>,
    /// `(relative path, contents)` pairs.
    pub artifacts: Vec<(String, String)>,
}

/// Date-indexed view of the working frame.
pub(crate) struct Data<'a> {
    pub frame: &'a TimeSeriesFrame,
    pub target: &'a str,
}

impl Data<'_> {
    fn idx(&self, d: NaiveDate) -> Option<usize> {
        self.frame.dates().binary_search(&d).ok()
    }

    pub fn value(&self, column: &str, d: NaiveDate) -> Option<f64> {
        let col = self.frame.column(column)?;
        self.idx(d).and_then(|i| col[i])
    }

    pub fn actual(&self, d: NaiveDate) -> Option<f64> {
        self.value(self.target, d)
    }

    /// Value of `name` on `d`, where `name` is a frame column or one of the
    /// derived `{target}_lag{k}` / `{target}_roll{w}` columns.
    fn regressor(&self, name: &str, d: NaiveDate) -> Option<f64> {
        if let Some(rest) = name.strip_prefix(self.target).and_then(|r| r.strip_prefix('_')) {
            if let Some(k) = rest.strip_prefix("lag").and_then(|k| k.parse::<i64>().ok()) {
                return self.actual(d - Duration::days(k));
            }
            if let Some(w) = rest.strip_prefix("roll").and_then(|w| w.parse::<i64>().ok()) {
                let vals: Option<Vec<f64>> = (0..w).map(|i| self.actual(d - Duration::days(i))).collect();
                return vals.map(|v| v.iter().sum::<f64>() / w as f64);
            }
        }
        self.value(name, d)
    }
}

fn missing(model: &str, what: &str, d: NaiveDate) -> PipelineError {
    PipelineError::Input(format!("{model}: no {what} on {d}"))
}

/// Runs `models` (a subset of [`MODEL_NAMES`]) in the given order.
pub(crate) fn run_models(
    data: &Data,
    cfg: &ToolConfig,
    win: &Windows,
    models: &[String],
) -> Result<Vec<ModelRun>, PipelineError> {
    let years = years_of(data.frame.dates());
    let additive: BTreeMap<&str, AdditiveSpec> = AdditiveSpec::variants(years, data.target).into_iter().collect();
    let mut runs: Vec<ModelRun> = Vec::new();
    for name in models {
        let run = match name.as_str() {
            SEASONAL_NAIVE => seasonal_naive(data, win)?,
            LSTM => lstm(data, cfg, win)?,
            GBT_LEAF_WISE => gbt(data, cfg, win, name, &cfg.gbt_leaf_wise)?,
            GBT_DEPTH_WISE => gbt(data, cfg, win, name, &cfg.gbt_depth_wise)?,
            STACKING => stacking(data, win, &runs)?,
            other => match additive.get(other) {
                Some(spec) => additive_model(data, win, other, spec)?,
                None => return Err(PipelineError::UnknownModel(other.to_string())),
            },
        };
        runs.push(run);
    }
    Ok(runs)
}

fn seasonal_naive(data: &Data, win: &Windows) -> Result<ModelRun, PipelineError> {
    // Observed values a season back where known, earlier forecasts otherwise.
    let mut own: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    let mut predict = |d: NaiveDate| -> Result<f64, PipelineError> {
        let back = d - Duration::days(NAIVE_SEASON);
        let v = data
            .actual(back)
            .or_else(|| own.get(&back).copied())
            .ok_or_else(|| missing(SEASONAL_NAIVE, "consumption a week earlier", d))?;
        own.insert(d, v);
        Ok(v)
    };
    let validation = win.validation.iter().map(|&d| predict(d)).collect::<Result<_, _>>()?;
    let target = win.target.iter().map(|&d| predict(d)).collect::<Result<_, _>>()?;
    Ok(ModelRun { name: SEASONAL_NAIVE.into(), validation, target, artifacts: vec![] })
}

fn additive_model(data: &Data, win: &Windows, name: &str, spec: &AdditiveSpec) -> Result<ModelRun, PipelineError> {
    let row = |d: NaiveDate| -> Option<Vec<Option<f64>>> {
        spec.regressors.iter().map(|r| data.regressor(r, d).map(Some)).collect()
    };
    let mut dates = Vec::new();
    let mut y = Vec::new();
    let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::new(); spec.regressors.len()];
    for &d in data.frame.dates().iter().take_while(|d| **d <= win.fit_end) {
        if let (Some(v), Some(r)) = (data.actual(d), row(d)) {
            dates.push(d);
            y.push(Some(v));
            for (c, x) in cols.iter_mut().zip(r) {
                c.push(x);
            }
        }
    }
    let refs: Vec<&[Option<f64>]> = cols.iter().map(Vec::as_slice).collect();
    let fit = AdditiveFit::fit(&dates, &y, &refs, spec)?;
    let predict = |ds: &[NaiveDate]| -> Result<Vec<f64>, PipelineError> {
        let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(ds.len()); spec.regressors.len()];
        for &d in ds {
            for (c, r) in cols.iter_mut().zip(&spec.regressors) {
                c.push(Some(data.regressor(r, d).ok_or_else(|| missing(name, r, d))?));
            }
        }
        let refs: Vec<&[Option<f64>]> = cols.iter().map(Vec::as_slice).collect();
        Ok(fit.predict(ds, &refs)?)
    };
    Ok(ModelRun {
        name: name.into(),
        validation: predict(&win.validation)?,
        target: predict(&win.target)?,
        artifacts: vec![(format!("models/{name}_coefficients.csv"), fit.coefficients_csv())],
    })
}

/// Input row of the recurrent model for day `d`: consumption on `d` and the
/// covariates of the following day (the day being predicted). The last
/// day of the data reuses its own covariates.
fn lstm_row(data: &Data, regressors: &[String], d: NaiveDate) -> Option<Vec<f64>> {
    let next = d + Duration::days(1);
    let lead = if data.idx(next).is_some() { next } else { d };
    let mut row = vec![data.actual(d)?];
    for r in regressors {
        row.push(data.value(r, lead)?);
    }
    row.push(if day_of_week(next) >= 5 { 1.0 } else { 0.0 });
    Some(row)
}

fn lstm(data: &Data, cfg: &ToolConfig, win: &Windows) -> Result<ModelRun, PipelineError> {
    let regs = &cfg.features.regressors;
    let mut names = vec![data.target.to_string()];
    names.extend(regs.iter().map(|r| format!("{r}_next")));
    names.push("is_weekend_next".into());

    let mut dates = Vec::new();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for &d in data.frame.dates().iter().take_while(|d| **d <= win.fit_end) {
        if let Some(r) = lstm_row(data, regs, d) {
            dates.push(d);
            y.push(r[0]);
            rows.push(r);
        }
    }
    let train = FeatureMatrix::from_rows(names, dates, rows, y);
    let (model, trace) = LstmForecaster::train(&train, &cfg.lstm)?;
    let len = cfg.lstm.sequence_length as i64;
    let predict = |d: NaiveDate| -> Result<f64, PipelineError> {
        let window = (1..=len)
            .rev()
            .map(|k| lstm_row(data, regs, d - Duration::days(k)))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| missing(LSTM, "complete input window", d))?;
        Ok(model.predict(&window)?)
    };
    let mut loss = String::from("epoch,train_mse,validation_mse\n");
    loss.push_str(&format!("0,{:.8},\n", trace.initial_train));
    for e in &trace.epochs {
        let v = e.validation.map_or(String::new(), |v| format!("{v:.8}"));
        loss.push_str(&format!("{},{:.8},{v}\n", e.epoch, e.train));
    }
    Ok(ModelRun {
        name: LSTM.into(),
        validation: win.validation.iter().map(|&d| predict(d)).collect::<Result<_, _>>()?,
        target: win.target.iter().map(|&d| predict(d)).collect::<Result<_, _>>()?,
        artifacts: vec![("models/lstm.json".into(), model.to_json()), ("lstm_loss.csv".into(), loss)],
    })
}

fn rows_for(m: &FeatureMatrix, dates: &[NaiveDate], model: &str) -> Result<Vec<usize>, PipelineError> {
    dates
        .iter()
        .map(|d| m.dates().binary_search(d).map_err(|_| missing(model, "complete feature row", *d)))
        .collect()
}

fn gbt(data: &Data, cfg: &ToolConfig, win: &Windows, name: &str, base: &GbtHyperParams) -> Result<ModelRun, PipelineError> {
    let m = assemble(data.frame, &cfg.features)?;
    let fit_rows = m.dates().partition_point(|d| *d <= win.fit_end);
    let train = m.slice_rows(0..fit_rows);
    let val_idx = rows_for(&m, &win.validation, name)?;
    let val = match (val_idx.first(), val_idx.last()) {
        (Some(&a), Some(&b)) if b + 1 - a == val_idx.len() => Some(m.slice_rows(a..b + 1)),
        (None, _) => None,
        _ => return Err(PipelineError::Input(format!("{name}: validation rows are not contiguous"))),
    };
    let mut artifacts = Vec::new();
    let params = if cfg.search.draws > 0 {
        let s = randomized_search(&train, &cfg.search.space, base, cfg.search.folds, cfg.search.draws, base.seed)?;
        artifacts.push((format!("{name}_cv.csv"), s.to_csv()));
        s.best
    } else {
        base.clone()
    };
    let (model, trace) = boost(&train, val.as_ref(), &params)?;
    let predict = |idx: &[usize]| idx.iter().map(|&i| model.predict_row(m.row(i))).collect::<Vec<f64>>();
    let mut loss = String::from("round,train_mse,validation_mse\n");
    for r in &trace {
        let v = r.validation_mse.map_or(String::new(), |v| format!("{v:.8}"));
        loss.push_str(&format!("{},{:.8},{v}\n", r.round, r.train_mse));
    }
    artifacts.push((format!("models/{name}.txt"), model.dump()));
    artifacts.push((format!("{name}_loss.csv"), loss));
    Ok(ModelRun {
        name: name.into(),
        validation: predict(&val_idx),
        target: predict(&rows_for(&m, &win.target, name)?),
        artifacts,
    })
}

fn stacking(data: &Data, win: &Windows, earlier: &[ModelRun]) -> Result<ModelRun, PipelineError> {
    let members: Vec<&ModelRun> = earlier.iter().filter(|r| r.name != SEASONAL_NAIVE && r.name != STACKING).collect();
    if members.len() < 2 {
        return Err(PipelineError::Input("stacking needs at least two other models listed before it".into()));
    }
    let actual: Vec<f64> = win
        .validation
        .iter()
        .map(|&d| data.actual(d).ok_or_else(|| missing(STACKING, "observed consumption", d)))
        .collect::<Result<_, _>>()?;
    let names: Vec<String> = members.iter().map(|r| r.name.clone()).collect();
    let val: Vec<Vec<f64>> = members.iter().map(|r| r.validation.clone()).collect();
    let ens = StackedEnsemble::fit(&names, &val, &actual)?;
    let target: Vec<Vec<f64>> = members.iter().map(|r| r.target.clone()).collect();
    let mut weights = String::from("member,weight\n");
    for (n, w) in ens.members.iter().zip(&ens.weights) {
        weights.push_str(&format!("{n},{w:.10}\n"));
    }
    Ok(ModelRun {
        name: STACKING.into(),
        validation: ens.predict(&val)?,
        target: ens.predict(&target)?,
        artifacts: vec![("models/stacking_weights.csv".into(), weights)],
    })
}
