use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{DataError, TimeSeriesFrame};

/// Chronological split rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Leading fraction of rows goes to training (rounded to the nearest row).
    Fraction(f64),
    /// Rows dated strictly before the date train; the rest test.
    Date(NaiveDate),
}

impl SplitMode {
    /// Number of leading rows that belong to the training partition.
    pub fn train_len(&self, dates: &[NaiveDate]) -> Result<usize, DataError> {
        let n = match *self {
            SplitMode::Fraction(f) => {
                if !(f > 0.0 && f < 1.0) {
                    return Err(DataError::BadFraction(f));
                }
                (dates.len() as f64 * f).round() as usize
            }
            SplitMode::Date(d) => dates.partition_point(|x| *x < d),
        };
        if n == 0 {
            Err(DataError::EmptyPartition("train"))
        } else if n >= dates.len() {
            Err(DataError::EmptyPartition("test"))
        } else {
            Ok(n)
        }
    }
}

/// Splits without shuffling: every training date precedes every test date.
pub fn train_test_split(
    frame: &TimeSeriesFrame,
    mode: SplitMode,
) -> Result<(TimeSeriesFrame, TimeSeriesFrame), DataError> {
    let n = mode.train_len(frame.dates())?;
    Ok((frame.slice(0..n), frame.slice(n..frame.len())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Frequency;

    fn frame(n: usize) -> TimeSeriesFrame {
        let start = NaiveDate::from_ymd_opt(2023, 12, 1).unwrap();
        TimeSeriesFrame::new(
            (0..n).map(|i| start + chrono::Duration::days(i as i64)).collect(),
            Frequency::Daily,
        )
        .unwrap()
        .with_column("x", (0..n).map(|i| Some(i as f64)).collect())
        .unwrap()
    }

    #[test]
    fn eighty_twenty() {
        let (tr, te) = train_test_split(&frame(10), SplitMode::Fraction(0.8)).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
    }

    #[test]
    fn split_on_first_date_leaves_train_empty() {
        let f = frame(10);
        let first = f.dates()[0];
        assert!(matches!(
            train_test_split(&f, SplitMode::Date(first)),
            Err(DataError::EmptyPartition("train"))
        ));
    }

    #[test]
    fn date_boundary_membership() {
        let f = frame(100);
        let split = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        let (tr, te) = train_test_split(&f, SplitMode::Date(split)).unwrap();
        assert_eq!(tr.len() + te.len(), 100);
        assert!(tr.dates().iter().all(|d| *d < split));
        assert!(te.dates().iter().all(|d| *d >= split));
        assert_eq!(te.dates()[0], split);
        assert!(tr.dates().last().unwrap() < te.dates().first().unwrap());
        // 2023-12-01 .. 2023-12-31 is 31 rows.
        assert_eq!(tr.len(), 31);
    }
}
