//! CSV and AEMET-JSON readers.
//!
//! Consumption files carry `date,consumption_m3`. Meteorological files follow
//! the AEMET daily-observation schema; headers are matched case-insensitively,
//! cells may use a decimal comma, and the file may be `;`-delimited (as AEMET
//! exports with decimal commas usually are). Lines starting with `#` are
//! comments.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde_json::Value;

use super::{DataError, Frequency, RowError, TimeSeriesFrame};

pub const CONSUMPTION_COLUMN: &str = "consumption_m3";

/// Numeric AEMET fields, in schema order.
pub const METEO_NUMERIC_COLUMNS: [&str; 10] =
    ["tmed", "prec", "tmin", "tmax", "dir", "velmedia", "racha", "sol", "presMax", "presMin"];

/// hh:mm fields, kept as text metadata.
pub const METEO_TEXT_COLUMNS: [&str; 5] =
    ["horatmin", "horatmax", "horaracha", "horaPresMax", "horaPresMin"];

const DATE_ALIASES: [&str; 2] = ["fecha", "date"];

fn read(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path)
        .map_err(|source| DataError::Io { path: path.display().to_string(), source })
}

fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| format!("bad date `{s}`: {e}"))
}

/// Parses a numeric cell. Empty means missing; AEMET's `Ip` (trace
/// precipitation) reads as 0.
fn parse_number(s: &str) -> Result<Option<f64>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    if s.eq_ignore_ascii_case("ip") {
        return Ok(Some(0.0));
    }
    let normalized = s.replace(',', ".");
    match normalized.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(format!("bad number `{s}`")),
    }
}

fn sniff_delimiter(text: &str) -> u8 {
    let header = text.lines().find(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty());
    match header {
        Some(h) if h.contains(';') => b';',
        _ => b',',
    }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .delimiter(sniff_delimiter(text))
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn find_header(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers.iter().position(|h| names.iter().any(|n| h.eq_ignore_ascii_case(n)))
}

/// Sorts rows by date and rejects duplicates.
fn sorted_unique<T>(mut rows: Vec<(NaiveDate, T)>) -> Result<Vec<(NaiveDate, T)>, DataError> {
    rows.sort_by_key(|(d, _)| *d);
    let mut dups: Vec<NaiveDate> =
        rows.windows(2).filter(|w| w[0].0 == w[1].0).map(|w| w[0].0).collect();
    dups.dedup();
    if dups.is_empty() {
        Ok(rows)
    } else {
        Err(DataError::DuplicateDates(dups))
    }
}

pub fn parse_consumption_csv(path: impl AsRef<Path>) -> Result<TimeSeriesFrame, DataError> {
    parse_consumption_str(&read(path.as_ref())?)
}

/// Reads a `date,consumption_m3` table into a sorted daily frame.
///
/// An empty consumption cell is kept as missing; a negative value or an
/// unparsable cell rejects the row, and all rejected rows are reported
/// together.
pub fn parse_consumption_str(text: &str) -> Result<TimeSeriesFrame, DataError> {
    let mut rdr = reader(text);
    let headers = rdr.headers()?.clone();
    let date_col =
        find_header(&headers, &DATE_ALIASES).ok_or(DataError::MissingColumn("date".into()))?;
    let value_col = find_header(&headers, &[CONSUMPTION_COLUMN])
        .ok_or(DataError::MissingColumn(CONSUMPTION_COLUMN.into()))?;

    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let date = parse_date(record.get(date_col).unwrap_or(""));
        let value = parse_number(record.get(value_col).unwrap_or(""));
        match (date, value) {
            (Ok(_), Ok(Some(v))) if v < 0.0 => {
                errors.push(RowError { line, message: format!("negative consumption {v}") })
            }
            (Ok(d), Ok(v)) => rows.push((d, v)),
            (Err(m), _) | (_, Err(m)) => errors.push(RowError { line, message: m }),
        }
    }
    if !errors.is_empty() {
        return Err(DataError::MalformedRows(errors));
    }
    let rows = sorted_unique(rows)?;
    let (dates, values): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    TimeSeriesFrame::new(dates, Frequency::Daily)?.with_column(CONSUMPTION_COLUMN, values)
}

struct MeteoRow {
    numeric: [Option<f64>; METEO_NUMERIC_COLUMNS.len()],
    text: [Option<String>; METEO_TEXT_COLUMNS.len()],
}

fn check_meteo(row: &MeteoRow) -> Result<(), String> {
    let get = |name: &str| {
        let i = METEO_NUMERIC_COLUMNS.iter().position(|c| *c == name).unwrap();
        row.numeric[i]
    };
    if let (Some(lo), Some(mid), Some(hi)) = (get("tmin"), get("tmed"), get("tmax")) {
        if !(lo <= mid && mid <= hi) {
            return Err(format!("temperatures out of order: tmin {lo}, tmed {mid}, tmax {hi}"));
        }
    }
    for name in ["prec", "sol"] {
        if let Some(v) = get(name) {
            if v < 0.0 {
                return Err(format!("negative {name} {v}"));
            }
        }
    }
    Ok(())
}

fn meteo_frame(rows: Vec<(NaiveDate, MeteoRow)>) -> Result<TimeSeriesFrame, DataError> {
    let rows = sorted_unique(rows)?;
    let dates = rows.iter().map(|(d, _)| *d).collect();
    let mut frame = TimeSeriesFrame::new(dates, Frequency::Daily)?;
    for (i, name) in METEO_NUMERIC_COLUMNS.iter().enumerate() {
        frame.push_column(*name, rows.iter().map(|(_, r)| r.numeric[i]).collect())?;
    }
    for (i, name) in METEO_TEXT_COLUMNS.iter().enumerate() {
        frame.push_text_column(*name, rows.iter().map(|(_, r)| r.text[i].clone()).collect())?;
    }
    Ok(frame)
}

pub fn parse_meteo_csv(path: impl AsRef<Path>) -> Result<TimeSeriesFrame, DataError> {
    parse_meteo_str(&read(path.as_ref())?)
}

/// Reads an AEMET-schema table. `fecha` (or `date`) and `tmax` are
/// mandatory; other schema columns are optional and read as missing when
/// absent. Unknown extra columns (station id, name, …) are ignored.
pub fn parse_meteo_str(text: &str) -> Result<TimeSeriesFrame, DataError> {
    let mut rdr = reader(text);
    let headers = rdr.headers()?.clone();
    let date_col =
        find_header(&headers, &DATE_ALIASES).ok_or(DataError::MissingColumn("fecha".into()))?;
    if find_header(&headers, &["tmax"]).is_none() {
        return Err(DataError::MissingColumn("tmax".into()));
    }
    let numeric_cols: Vec<Option<usize>> =
        METEO_NUMERIC_COLUMNS.iter().map(|n| find_header(&headers, &[n])).collect();
    let text_cols: Vec<Option<usize>> =
        METEO_TEXT_COLUMNS.iter().map(|n| find_header(&headers, &[n])).collect();

    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let parsed = (|| {
            let date = parse_date(record.get(date_col).unwrap_or(""))?;
            let mut row = MeteoRow { numeric: Default::default(), text: Default::default() };
            for (slot, col) in row.numeric.iter_mut().zip(&numeric_cols) {
                if let Some(c) = col {
                    *slot = parse_number(record.get(*c).unwrap_or(""))?;
                }
            }
            for (slot, col) in row.text.iter_mut().zip(&text_cols) {
                *slot = col
                    .and_then(|c| record.get(c))
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from);
            }
            check_meteo(&row)?;
            Ok::<_, String>((date, row))
        })();
        match parsed {
            Ok(r) => rows.push(r),
            Err(message) => errors.push(RowError { line, message }),
        }
    }
    if !errors.is_empty() {
        return Err(DataError::MalformedRows(errors));
    }
    meteo_frame(rows)
}

pub fn parse_aemet_json(path: impl AsRef<Path>) -> Result<TimeSeriesFrame, DataError> {
    parse_aemet_json_str(&read(path.as_ref())?)
}

/// Parses an AEMET OpenData daily-climatology response body: a JSON array of
/// objects whose values are strings with decimal commas (numbers are also
/// accepted). Row numbers in diagnostics are 1-based array positions.
pub fn parse_aemet_json_str(text: &str) -> Result<TimeSeriesFrame, DataError> {
    let records: Vec<BTreeMap<String, Value>> = serde_json::from_str(text)?;
    let lookup = |rec: &BTreeMap<String, Value>, name: &str| -> Option<String> {
        rec.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).and_then(|(_, v)| match v {
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        })
    };
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        let parsed = (|| {
            let date = DATE_ALIASES
                .iter()
                .find_map(|n| lookup(rec, n))
                .ok_or_else(|| "missing fecha".to_string())?;
            let date = parse_date(&date)?;
            let mut row = MeteoRow { numeric: Default::default(), text: Default::default() };
            for (slot, name) in row.numeric.iter_mut().zip(METEO_NUMERIC_COLUMNS) {
                if let Some(s) = lookup(rec, name) {
                    *slot = parse_number(&s)?;
                }
            }
            for (slot, name) in row.text.iter_mut().zip(METEO_TEXT_COLUMNS) {
                *slot = lookup(rec, name).filter(|s| !s.trim().is_empty());
            }
            check_meteo(&row)?;
            Ok::<_, String>((date, row))
        })();
        match parsed {
            Ok(r) => rows.push(r),
            Err(message) => errors.push(RowError { line: i as u64 + 1, message }),
        }
    }
    if !errors.is_empty() {
        return Err(DataError::MalformedRows(errors));
    }
    meteo_frame(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_valid_rows() {
        let f = parse_consumption_str(
            "date,consumption_m3\n2024-01-01,10\n2024-01-02,11.5\n2024-01-03,9\n",
        )
        .unwrap();
        assert_eq!(f.len(), 3);
        assert_eq!(f.frequency(), Frequency::Daily);
        assert_eq!(f.column(CONSUMPTION_COLUMN).unwrap()[1], Some(11.5));
    }

    #[test]
    fn out_of_order_rows_are_sorted() {
        let f = parse_consumption_str(
            "date,consumption_m3\n2024-01-03,3\n2024-01-01,1\n2024-01-02,2\n",
        )
        .unwrap();
        let hand_sorted: Vec<NaiveDate> = ["2024-01-01", "2024-01-02", "2024-01-03"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(f.dates(), hand_sorted.as_slice());
        assert_eq!(f.column(CONSUMPTION_COLUMN).unwrap(), &[Some(1.0), Some(2.0), Some(3.0)]);
    }

    #[test]
    fn duplicate_dates_are_listed() {
        let err = parse_consumption_str(
            "date,consumption_m3\n2024-01-02,1\n2024-01-01,1\n2024-01-02,2\n",
        )
        .unwrap_err();
        match err {
            DataError::DuplicateDates(d) => assert_eq!(d, vec!["2024-01-02".parse().unwrap()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_rows_carry_line_numbers() {
        let err = parse_consumption_str(
            "date,consumption_m3\n2024-01-01,1\n2024-13-01,2\n2024-01-03,-4\n",
        )
        .unwrap_err();
        match err {
            DataError::MalformedRows(rows) => {
                assert_eq!(rows.iter().map(|r| r.line).collect::<Vec<_>>(), vec![3, 4]);
                assert!(rows[1].message.contains("negative"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_consumption_is_missing() {
        let f = parse_consumption_str("date,consumption_m3\n2024-01-01,\n").unwrap();
        assert_eq!(f.column(CONSUMPTION_COLUMN).unwrap(), &[None]);
    }

    const METEO: &str = "fecha,tmed,prec,tmin,horatmin,tmax,horatmax,dir,velmedia,racha,horaracha,sol,presMax,horaPresMax,presMin,horaPresMin
2024-07-01,20.1,0.0,15.0,05:40,25.3,15:10,27,2.5,8.1,14:00,11.2,1015.2,10,1010.1,18
2024-07-02,19.0,,14.0,06:00,24.0,16:00,30,1.9,6.4,13:20,10.0,1014.0,09,1011.0,17
";

    #[test]
    fn meteo_numeric_cells() {
        let f = parse_meteo_str(METEO).unwrap();
        assert_eq!(f.column("tmax").unwrap()[0], Some(25.3));
        assert_eq!(f.column("prec").unwrap()[0], Some(0.0));
        assert_eq!(f.text_column("horatmax").unwrap()[0].as_deref(), Some("15:10"));
    }

    #[test]
    fn empty_prec_is_missing_not_zero() {
        let f = parse_meteo_str(METEO).unwrap();
        assert_eq!(f.column("prec").unwrap()[1], None);
    }

    #[test]
    fn decimal_comma_semicolon_file() {
        let text = "FECHA;TMAX;TMIN;TMED;PREC\n2024-01-01;12,5;3,5;8,0;Ip\n";
        let f = parse_meteo_str(text).unwrap();
        assert_eq!(f.column("tmax").unwrap()[0], Some(12.5));
        assert_eq!(f.column("prec").unwrap()[0], Some(0.0));
        // Schema columns absent from the file read as missing.
        assert_eq!(f.column("sol").unwrap()[0], None);
    }

    #[test]
    fn quoted_decimal_comma_in_comma_file() {
        let f = parse_meteo_str("fecha,tmax\n2024-01-01,\"12,5\"\n").unwrap();
        assert_eq!(f.column("tmax").unwrap()[0], Some(12.5));
    }

    #[test]
    fn mandatory_meteo_columns() {
        assert!(matches!(
            parse_meteo_str("fecha,tmin\n2024-01-01,3\n"),
            Err(DataError::MissingColumn(c)) if c == "tmax"
        ));
        assert!(matches!(
            parse_meteo_str("tmax\n3\n"),
            Err(DataError::MissingColumn(c)) if c == "fecha"
        ));
    }

    #[test]
    fn inconsistent_temperatures_rejected() {
        let err = parse_meteo_str("fecha,tmin,tmed,tmax\n2024-01-01,10,5,20\n").unwrap_err();
        assert!(matches!(err, DataError::MalformedRows(r) if r[0].line == 2));
    }

    #[test]
    fn aemet_json_body() {
        let body = r#"[
          {"fecha":"2024-01-02","indicativo":"3195","tmax":"12,5","tmin":"3,1","tmed":"7,8","prec":"Ip","horatmax":"14:30"},
          {"fecha":"2024-01-01","indicativo":"3195","tmax":"11,0","tmin":"2,0","tmed":"6,5","prec":"0,4"}
        ]"#;
        let f = parse_aemet_json_str(body).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f.dates()[0], "2024-01-01".parse::<NaiveDate>().unwrap());
        assert_eq!(f.column("tmax").unwrap(), &[Some(11.0), Some(12.5)]);
        assert_eq!(f.column("prec").unwrap(), &[Some(0.4), Some(0.0)]);
        assert_eq!(f.text_column("horatmax").unwrap()[1].as_deref(), Some("14:30"));
    }
}
