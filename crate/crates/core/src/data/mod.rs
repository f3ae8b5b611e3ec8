//! Time-series ingestion, cleaning, aggregation and correlation screening.

mod aggregate;
mod correlation;
mod frame;
mod ingest;
mod scale;
mod split;

pub use aggregate::{aggregate, AggregationPolicy, Reducer};
pub use correlation::{correlation_matrix, pearson_r, pearson_r_pairwise, CorrelationMatrix, PairFailure};
pub use frame::{forward_fill, Column, Frequency, TextColumn, TimeSeriesFrame};
pub use ingest::{
    parse_aemet_json, parse_aemet_json_str, parse_consumption_csv, parse_consumption_str,
    parse_meteo_csv, parse_meteo_str, CONSUMPTION_COLUMN, METEO_NUMERIC_COLUMNS, METEO_TEXT_COLUMNS,
};
pub use scale::{minmax_scale, zscore_scale, MinMaxScaler, StandardScaler};
pub use split::{train_test_split, SplitMode};

use chrono::NaiveDate;
use thiserror::Error;

/// A malformed input row, reported with its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

impl std::fmt::Display for RowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("missing mandatory column `{0}`")]
    MissingColumn(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("{} malformed row(s): {}", .0.len(), join_rows(.0))]
    MalformedRows(Vec<RowError>),
    #[error("duplicate dates: {}", join_dates(.0))]
    DuplicateDates(Vec<NaiveDate>),
    #[error("dates must be strictly increasing (offending date {0})")]
    Unordered(NaiveDate),
    #[error("column `{name}` has {got} values but the index has {expected}")]
    LengthMismatch { name: String, expected: usize, got: usize },
    #[error("date {date} does not fit {frequency:?} frequency")]
    FrequencyMismatch { date: NaiveDate, frequency: Frequency },
    #[error("cannot aggregate {from:?} data to {to:?}")]
    BadAggregation { from: Frequency, to: Frequency },
    #[error("series is constant; scaling/correlation is undefined")]
    Constant,
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("series lengths differ ({0} vs {1})")]
    UnequalLengths(usize, usize),
    #[error("split leaves the {0} partition empty")]
    EmptyPartition(&'static str),
    #[error("invalid split fraction {0}")]
    BadFraction(f64),
}

fn join_rows(rows: &[RowError]) -> String {
    rows.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

fn join_dates(dates: &[NaiveDate]) -> String {
    dates.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}
