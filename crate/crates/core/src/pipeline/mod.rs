//! The commands behind the `hydrotwin` binary.
//!
//! Each command reads a [`ToolConfig`], writes its reports under
//! `output_dir` and returns the in-memory result. Nothing here reads the
//! clock or an unseeded generator, so two runs with the same configuration
//! write byte-identical files.

mod config;
mod models;

use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::NaiveDate;
use serde::Serialize;
use thiserror::Error;

pub use config::{DataPaths, EvaluationConfig, ScheduleConfig, SearchConfig, ToolConfig, ENV_CONSUMPTION, ENV_METEO, ENV_OUT};
pub use models::{ModelRun, Windows, MODEL_NAMES, NAIVE_SEASON};

use crate::additive::AdditiveError;
use crate::data::{self, CorrelationMatrix, DataError, TimeSeriesFrame};
use crate::eval::{self, ComparisonTable, EvalError, ForecastSeries};
use crate::features::FeatureError;
use crate::gbt::GbtError;
use crate::lstm::LstmError;
use crate::schedule::{
    self, ComparisonReport, Instance, RandomInstances, RunRecord, ScheduleError, Solution, SolutionReport, SolveOptions,
};
use crate::synth::SynthError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("lstm: {0}")]
    Lstm(#[from] LstmError),
    #[error("additive model: {0}")]
    Additive(#[from] AdditiveError),
    #[error("boosting: {0}")]
    Gbt(#[from] GbtError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("unknown model `{0}` (known: {known})", known = MODEL_NAMES.join(", "))]
    UnknownModel(String),
    #[error("{0}")]
    Input(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// No feasible schedule exists or none was found in the budget.
    Infeasible,
    /// Bad files, configuration or arguments.
    Input,
    /// Anything else.
    Runtime,
}

impl PipelineError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn kind(&self) -> ErrorKind {
        use ScheduleError as S;
        match self {
            Self::Schedule(S::Infeasible(_) | S::BudgetExhausted) => ErrorKind::Infeasible,
            Self::Schedule(S::Io(_) | S::Parse(_) | S::Invalid(_) | S::Cycle(_) | S::UnknownVehicle { .. })
            | Self::Schedule(S::MissingTravel(..) | S::UnknownTask(_) | S::TooLarge { .. })
            | Self::Io { .. }
            | Self::Config(_)
            | Self::Data(_)
            | Self::Synth(_)
            | Self::UnknownModel(_)
            | Self::Input(_)
            | Self::Eval(EvalError::HorizonTooLong { .. }) => ErrorKind::Input,
            _ => ErrorKind::Runtime,
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| PipelineError::io(path, e))
}

fn write_out(cfg: &ToolConfig, relative: &str, contents: &str) -> Result<PathBuf, PipelineError> {
    let path = cfg.output_dir.join(relative);
    write(&path, contents)?;
    Ok(path)
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Writes the synthetic consumption and weather files to the configured
/// data paths and returns those paths.
pub fn gen_data(cfg: &ToolConfig) -> Result<(PathBuf, PathBuf), PipelineError> {
    let data = cfg.synthetic.generate()?;
    write(&cfg.data.consumption, &data.consumption_csv())?;
    write(&cfg.data.meteo, &data.meteo_csv())?;
    Ok((cfg.data.consumption.clone(), cfg.data.meteo.clone()))
}

/// Consumption joined with the weather columns on date. Weather days after
/// the last consumption row are kept (with missing consumption) so models
/// can forecast them.
pub fn load_frame(cfg: &ToolConfig) -> Result<TimeSeriesFrame, PipelineError> {
    let consumption = data::parse_consumption_csv(&cfg.data.consumption)?;
    let meteo = data::parse_meteo_csv(&cfg.data.meteo)?;
    let last = consumption.dates().last().copied();
    let future: Vec<NaiveDate> = meteo.dates().iter().copied().filter(|d| last.is_none_or(|l| *d > l)).collect();
    if future.is_empty() {
        return Ok(consumption.left_join(&meteo)?);
    }
    let index: Vec<NaiveDate> = consumption.dates().iter().copied().chain(future.iter().copied()).collect();
    let mut extended = TimeSeriesFrame::new(index, consumption.frequency())?;
    for col in consumption.columns() {
        let values = col.values.iter().copied().chain(future.iter().map(|_| None)).collect();
        extended.push_column(col.name.clone(), values)?;
    }
    Ok(extended.left_join(&meteo)?)
}

fn last_observed(frame: &TimeSeriesFrame, target: &str) -> Result<NaiveDate, PipelineError> {
    let values = frame.require(target)?;
    frame
        .dates()
        .iter()
        .zip(values)
        .rev()
        .find(|(_, v)| v.is_some())
        .map(|(d, _)| *d)
        .ok_or_else(|| PipelineError::Input("no observed consumption".into()))
}

/// Pearson matrix over the target and every numeric column with at least
/// three values. Writes `correlation.csv` and `correlation_report.txt`.
pub fn correlate(cfg: &ToolConfig) -> Result<CorrelationMatrix, PipelineError> {
    let frame = load_frame(cfg)?;
    let target = cfg.features.target.as_str();
    frame.require(target)?;
    let mut columns = vec![target];
    columns.extend(
        frame
            .column_names()
            .filter(|c| *c != target)
            .filter(|c| frame.column(c).is_some_and(|v| v.iter().flatten().count() >= 3)),
    );
    let matrix = data::correlation_matrix(&frame, &columns)?;
    let threshold = cfg.evaluation.correlation_threshold;
    let mut report = format!("Pearson correlation against {target} ({} days)\n\n", frame.len());
    for c in &columns[1..] {
        let r = matrix.get(target, c).map_or("n/a".to_string(), |r| format!("{r:+.4}"));
        report.push_str(&format!("{c:<10} {r}\n"));
    }
    let flagged = matrix.flagged_against(target, threshold);
    report.push_str(&format!("\n|R| > {threshold}: "));
    if flagged.is_empty() {
        report.push_str("none\n");
    } else {
        let names: Vec<String> = flagged.iter().map(|(c, r)| format!("{c} ({r:+.4})")).collect();
        report.push_str(&format!("{}\n", names.join(", ")));
    }
    for f in &matrix.failures {
        report.push_str(&format!("skipped {} / {}: {}\n", f.left, f.right, f.reason));
    }
    write_out(cfg, "correlation.csv", &matrix.to_csv())?;
    write_out(cfg, "correlation_report.txt", &report)?;
    Ok(matrix)
}

fn check_models(names: &[String]) -> Result<(), PipelineError> {
    match names.iter().find(|n| !MODEL_NAMES.contains(&n.as_str())) {
        Some(n) => Err(PipelineError::UnknownModel(n.clone())),
        None if names.is_empty() => Err(PipelineError::Config("no models selected".into())),
        None => Ok(()),
    }
}

/// Dates with observed consumption in `(after, until]`.
fn observed_between(frame: &TimeSeriesFrame, target: &str, after: NaiveDate, until: NaiveDate) -> Vec<NaiveDate> {
    let values = frame.column(target).unwrap_or_default();
    frame
        .dates()
        .iter()
        .zip(values)
        .filter(|(d, v)| **d > after && **d <= until && v.is_some())
        .map(|(d, _)| *d)
        .collect()
}

fn write_artifacts(cfg: &ToolConfig, runs: &[ModelRun]) -> Result<(), PipelineError> {
    for run in runs {
        for (rel, contents) in &run.artifacts {
            write_out(cfg, rel, contents)?;
        }
    }
    Ok(())
}

/// Trains every configured model on the days before the validation window,
/// forecasts the last `test_days` and scores each configured horizon.
///
/// Writes `metrics.csv`, `metrics.txt`, `forecasts/<model>.csv` and the
/// model files under `models/`.
pub fn evaluate(cfg: &ToolConfig) -> Result<ComparisonTable, PipelineError> {
    let ev = &cfg.evaluation;
    check_models(&ev.models)?;
    if ev.test_days == 0 {
        return Err(PipelineError::Config("test_days must be positive".into()));
    }
    let frame = load_frame(cfg)?;
    let target = cfg.features.target.as_str();
    let last = last_observed(&frame, target)?;
    let test_start = last - chrono::Duration::days(ev.test_days as i64 - 1);
    let fit_end = test_start - chrono::Duration::days(ev.validation_days as i64 + 1);
    if frame.dates()[0] > fit_end {
        return Err(PipelineError::Input(format!(
            "{} test days and {} validation days leave nothing to train on",
            ev.test_days, ev.validation_days
        )));
    }
    let win = Windows {
        fit_end,
        validation: observed_between(&frame, target, fit_end, test_start - chrono::Duration::days(1)),
        target: observed_between(&frame, target, test_start - chrono::Duration::days(1), last),
    };
    if win.target.is_empty() {
        return Err(PipelineError::Input("no observed consumption in the test range".into()));
    }
    let data = models::Data { frame: &frame, target };
    let runs = models::run_models(&data, cfg, &win, &ev.models)?;
    let actual: Vec<f64> = win.target.iter().map(|&d| data.actual(d).expect("observed")).collect();
    let series: Vec<ForecastSeries> = runs
        .iter()
        .map(|r| ForecastSeries { model: r.name.clone(), dates: win.target.clone(), actual: actual.clone(), predicted: r.target.clone() })
        .collect();
    let table = eval::compare(&series, &ev.horizons)?;

    write_artifacts(cfg, &runs)?;
    for s in &series {
        write_out(cfg, &format!("forecasts/{}.csv", s.model), &s.plot_csv())?;
    }
    write_out(cfg, "metrics.csv", &table.to_csv())?;
    write_out(cfg, "metrics.txt", &table.to_text())?;
    Ok(table)
}

/// Result of [`forecast`].
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub model: String,
    pub dates: Vec<NaiveDate>,
    pub actual: Vec<Option<f64>>,
    pub predicted: Vec<f64>,
}

impl Forecast {
    /// `date,predicted`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("date,predicted\n");
        for (d, p) in self.dates.iter().zip(&self.predicted) {
            s.push_str(&format!("{d},{p:.6}\n"));
        }
        s
    }

    /// `date,actual,predicted` with an empty actual where it is unknown.
    pub fn plot_csv(&self) -> String {
        let mut s = String::from("date,actual,predicted\n");
        for ((d, a), p) in self.dates.iter().zip(&self.actual).zip(&self.predicted) {
            let a = a.map_or(String::new(), |v| format!("{v:.6}"));
            s.push_str(&format!("{d},{a},{p:.6}\n"));
        }
        s
    }
}

/// Trains `model` on the data up to `train_until` (default: the last day
/// with observed consumption) and forecasts the following `horizon` days.
///
/// The forecast days must exist in the data files because the models read
/// that day's weather. Models fed with lagged consumption also need the
/// previous day's observation. Writes `forecast_<model>.csv`,
/// `forecast_<model>_plot.csv` and the model files.
pub fn forecast(cfg: &ToolConfig, model: &str, horizon: usize, train_until: Option<NaiveDate>) -> Result<Forecast, PipelineError> {
    if !MODEL_NAMES.contains(&model) {
        return Err(PipelineError::UnknownModel(model.to_string()));
    }
    let frame = load_frame(cfg)?;
    let target = cfg.features.target.as_str();
    let until = train_until.unwrap_or(last_observed(&frame, target)?);
    let mut out = Forecast { model: model.to_string(), dates: vec![], actual: vec![], predicted: vec![] };
    let data = models::Data { frame: &frame, target };
    if horizon > 0 {
        let fit_end = until - chrono::Duration::days(cfg.evaluation.validation_days as i64);
        if frame.dates()[0] > fit_end {
            return Err(PipelineError::Input(format!("nothing to train on before {until}")));
        }
        let dates: Vec<NaiveDate> = (1..=horizon as i64).map(|k| until + chrono::Duration::days(k)).collect();
        if let Some(d) = dates.iter().find(|d| frame.dates().binary_search(d).is_err()) {
            return Err(PipelineError::Input(format!("{d} is beyond the data files; extend the weather data to forecast it")));
        }
        let win = Windows { fit_end, validation: observed_between(&frame, target, fit_end, until), target: dates };
        let names: Vec<String> = if model == models::STACKING {
            cfg.evaluation
                .models
                .iter()
                .filter(|m| m.as_str() != models::SEASONAL_NAIVE && m.as_str() != models::STACKING)
                .cloned()
                .chain([models::STACKING.to_string()])
                .collect()
        } else {
            vec![model.to_string()]
        };
        check_models(&names)?;
        let runs = models::run_models(&data, cfg, &win, &names)?;
        write_artifacts(cfg, &runs)?;
        out.predicted = runs.last().expect("at least one model").target.clone();
        out.actual = win.target.iter().map(|&d| data.actual(d)).collect();
        out.dates = win.target;
    }
    write_out(cfg, &format!("forecast_{model}.csv"), &out.to_csv())?;
    write_out(cfg, &format!("forecast_{model}_plot.csv"), &out.plot_csv())?;
    Ok(out)
}

/// Which solvers `schedule` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    Exact,
    Baseline,
    /// Both solvers plus the improvement table.
    Compare,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleOutcome {
    pub instance: Instance,
    pub solutions: Vec<Solution>,
    pub reports: Vec<SolutionReport>,
    /// Present in [`SolverMode::Compare`].
    pub comparison: Option<ComparisonReport>,
}

/// Loads `instance`, applies the configured weight and work-day overrides.
pub fn load_instance(cfg: &ToolConfig, path: &Path) -> Result<Instance, PipelineError> {
    let inst = Instance::load(path)?;
    let sc = &cfg.schedule;
    if sc.weights.is_none() && sc.work_day.is_none() {
        return Ok(inst);
    }
    let mut file = inst.to_file();
    if let Some(w) = sc.weights {
        file.weights = w;
    }
    if let Some(d) = sc.work_day {
        file.work_day = d;
    }
    Ok(Instance::from_file(file)?)
}

fn solve_options(cfg: &ToolConfig, budget_secs: Option<f64>) -> Result<SolveOptions, PipelineError> {
    let secs = budget_secs.unwrap_or(cfg.schedule.budget_secs);
    let budget = Duration::try_from_secs_f64(secs).map_err(|_| PipelineError::Config(format!("invalid budget {secs}")))?;
    Ok(SolveOptions { budget, ..SolveOptions::default() })
}

/// Solves one instance file. Writes `schedule_<solver>.json` and
/// `gantt_<solver>.csv` per solver, and `schedule_compare.txt` /
/// `schedule_compare.csv` in compare mode.
///
/// Every schedule is checked against the constraint validator before it is
/// written; a violation is reported as an error.
pub fn schedule(
    cfg: &ToolConfig,
    instance: Option<&Path>,
    mode: SolverMode,
    budget_secs: Option<f64>,
) -> Result<ScheduleOutcome, PipelineError> {
    let path = instance
        .map(Path::to_path_buf)
        .or_else(|| cfg.schedule.instance.clone())
        .ok_or_else(|| PipelineError::Config("no instance file given".into()))?;
    let inst = load_instance(cfg, &path)?;
    let opts = solve_options(cfg, budget_secs)?;
    let mut solutions = Vec::new();
    if matches!(mode, SolverMode::Baseline | SolverMode::Compare) {
        solutions.push(schedule::solve_baseline(&inst)?);
    }
    if matches!(mode, SolverMode::Exact | SolverMode::Compare) {
        solutions.push(schedule::solve_exact(&inst, &opts)?);
    }
    let mut reports = Vec::new();
    for sol in &solutions {
        let violations = schedule::validate(&inst, sol);
        if let Some(v) = violations.first() {
            return Err(PipelineError::Schedule(ScheduleError::Incomplete(format!("{}: {}", v.constraint, v.detail))));
        }
        let report = sol.report(&inst)?;
        write_out(cfg, &format!("schedule_{}.json", sol.solver), &json(&report))?;
        write_out(cfg, &format!("gantt_{}.csv", sol.solver), &sol.gantt_csv(&inst))?;
        reports.push(report);
    }
    let comparison = if mode == SolverMode::Compare {
        let run = RunRecord::new(0, &inst, &solutions[0], &solutions[1])?;
        let report = ComparisonReport::from_runs(vec![run], 0);
        write_out(cfg, "schedule_compare.txt", &report.to_text())?;
        write_out(cfg, "schedule_compare.csv", &report.to_csv())?;
        Some(report)
    } else {
        None
    };
    Ok(ScheduleOutcome { instance: inst, solutions, reports, comparison })
}

/// Averages baseline and exact results over `runs` generated instances
/// (default from the configuration). Writes `compare.txt`, `compare.csv`
/// and `compare_runs.json`.
pub fn compare(cfg: &ToolConfig, runs: Option<usize>, budget_secs: Option<f64>) -> Result<ComparisonReport, PipelineError> {
    let n = runs.unwrap_or(cfg.schedule.runs);
    if n == 0 {
        return Err(PipelineError::Config("at least one run is required".into()));
    }
    let mut generator: RandomInstances = cfg.schedule.generator.clone();
    if let Some(w) = cfg.schedule.weights {
        generator.weights = w;
    }
    let report = schedule::compare_runs(&mut generator, n, &solve_options(cfg, budget_secs)?)?;
    write_out(cfg, "compare.txt", &report.to_text())?;
    write_out(cfg, "compare.csv", &report.to_csv())?;
    write_out(cfg, "compare_runs.json", &json(&report.runs))?;
    Ok(report)
}
