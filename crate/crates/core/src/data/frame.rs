use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use super::DataError;

/// Sampling frequency of a [`TimeSeriesFrame`].
///
/// Weekly rows are labelled by their Monday, monthly rows by the first day of
/// the month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Daily,
    Weekly,
    Monthly,
}

impl Frequency {
    /// The label date of the period containing `date`.
    pub fn period_start(self, date: NaiveDate) -> NaiveDate {
        match self {
            Frequency::Daily => date,
            Frequency::Weekly => {
                date - chrono::Duration::days(date.weekday().num_days_from_monday() as i64)
            }
            Frequency::Monthly => date.with_day(1).expect("day 1 exists"),
        }
    }

    fn accepts(self, date: NaiveDate) -> bool {
        match self {
            Frequency::Daily => true,
            Frequency::Weekly => date.weekday() == Weekday::Mon,
            Frequency::Monthly => date.day() == 1,
        }
    }
}

/// A named numeric column. `None` marks a missing observation, which is never
/// conflated with zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<Option<f64>>,
}

/// A named text column, used for the hh:mm time-of-extreme fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextColumn {
    pub name: String,
    pub values: Vec<Option<String>>,
}

/// Date-indexed table of numeric series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesFrame {
    index: Vec<NaiveDate>,
    columns: Vec<Column>,
    text: Vec<TextColumn>,
    frequency: Frequency,
}

impl TimeSeriesFrame {
    /// Builds an empty-column frame. Dates must be strictly increasing and
    /// aligned to `frequency`.
    pub fn new(index: Vec<NaiveDate>, frequency: Frequency) -> Result<Self, DataError> {
        for pair in index.windows(2) {
            if pair[1] <= pair[0] {
                return Err(if pair[1] == pair[0] {
                    DataError::DuplicateDates(vec![pair[0]])
                } else {
                    DataError::Unordered(pair[1])
                });
            }
        }
        if let Some(&date) = index.iter().find(|d| !frequency.accepts(**d)) {
            return Err(DataError::FrequencyMismatch { date, frequency });
        }
        Ok(Self { index, columns: Vec::new(), text: Vec::new(), frequency })
    }

    pub fn with_column(
        mut self,
        name: impl Into<String>,
        values: Vec<Option<f64>>,
    ) -> Result<Self, DataError> {
        self.push_column(name, values)?;
        Ok(self)
    }

    /// Adds (or replaces) a numeric column.
    pub fn push_column(
        &mut self,
        name: impl Into<String>,
        values: Vec<Option<f64>>,
    ) -> Result<(), DataError> {
        let name = name.into();
        if values.len() != self.index.len() {
            return Err(DataError::LengthMismatch {
                name,
                expected: self.index.len(),
                got: values.len(),
            });
        }
        match self.columns.iter_mut().find(|c| c.name == name) {
            Some(col) => col.values = values,
            None => self.columns.push(Column { name, values }),
        }
        Ok(())
    }

    pub fn push_text_column(
        &mut self,
        name: impl Into<String>,
        values: Vec<Option<String>>,
    ) -> Result<(), DataError> {
        let name = name.into();
        if values.len() != self.index.len() {
            return Err(DataError::LengthMismatch {
                name,
                expected: self.index.len(),
                got: values.len(),
            });
        }
        match self.text.iter_mut().find(|c| c.name == name) {
            Some(col) => col.values = values,
            None => self.text.push(TextColumn { name, values }),
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.index
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn text_columns(&self) -> &[TextColumn] {
        &self.text
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.columns.iter().find(|c| c.name == name).map(|c| c.values.as_slice())
    }

    /// Like [`column`](Self::column) but fails with [`DataError::UnknownColumn`].
    pub fn require(&self, name: &str) -> Result<&[Option<f64>], DataError> {
        self.column(name).ok_or_else(|| DataError::UnknownColumn(name.to_string()))
    }

    pub fn text_column(&self, name: &str) -> Option<&[Option<String>]> {
        self.text.iter().find(|c| c.name == name).map(|c| c.values.as_slice())
    }

    /// Keeps the rows whose mask entry is `true`.
    pub fn filter_rows(&self, keep: &[bool]) -> Self {
        assert_eq!(keep.len(), self.len(), "mask length must match the frame");
        let pick = |i: usize| keep[i];
        Self {
            index: (0..self.len()).filter(|&i| pick(i)).map(|i| self.index[i]).collect(),
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    values: (0..self.len()).filter(|&i| pick(i)).map(|i| c.values[i]).collect(),
                })
                .collect(),
            text: self
                .text
                .iter()
                .map(|c| TextColumn {
                    name: c.name.clone(),
                    values: (0..self.len())
                        .filter(|&i| pick(i))
                        .map(|i| c.values[i].clone())
                        .collect(),
                })
                .collect(),
            frequency: self.frequency,
        }
    }

    /// Contiguous row slice.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        let keep: Vec<bool> = (0..self.len()).map(|i| range.contains(&i)).collect();
        self.filter_rows(&keep)
    }

    /// Drops rows where `column` is missing.
    pub fn drop_missing(&self, column: &str) -> Result<Self, DataError> {
        let keep: Vec<bool> = self.require(column)?.iter().map(Option::is_some).collect();
        Ok(self.filter_rows(&keep))
    }

    /// Left join on dates: every row of `self` is kept, columns of `other`
    /// are attached with `None` where `other` has no matching date.
    pub fn left_join(&self, other: &TimeSeriesFrame) -> Result<Self, DataError> {
        let mut out = self.clone();
        let positions: Vec<Option<usize>> =
            self.index.iter().map(|d| other.index.binary_search(d).ok()).collect();
        for col in &other.columns {
            let values = positions.iter().map(|p| p.and_then(|j| col.values[j])).collect();
            out.push_column(col.name.clone(), values)?;
        }
        for col in &other.text {
            let values = positions.iter().map(|p| p.and_then(|j| col.values[j].clone())).collect();
            out.push_text_column(col.name.clone(), values)?;
        }
        Ok(out)
    }
}

/// Replaces each missing value of `column` with the most recent earlier
/// observation. Leading gaps stay missing.
pub fn forward_fill(frame: &TimeSeriesFrame, column: &str) -> Result<TimeSeriesFrame, DataError> {
    let mut last = None;
    let filled = frame
        .require(column)?
        .iter()
        .map(|v| {
            if v.is_some() {
                last = *v;
            }
            last
        })
        .collect();
    let mut out = frame.clone();
    out.push_column(column, filled)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 1, d).unwrap()
    }

    fn frame_of(values: Vec<Option<f64>>) -> TimeSeriesFrame {
        let dates = (1..=values.len() as u32).map(day).collect();
        TimeSeriesFrame::new(dates, Frequency::Daily).unwrap().with_column("x", values).unwrap()
    }

    #[test]
    fn forward_fill_fills_interior_gaps() {
        let f = frame_of(vec![Some(5.0), None, None, Some(7.0)]);
        let out = forward_fill(&f, "x").unwrap();
        assert_eq!(out.column("x").unwrap(), &[Some(5.0), Some(5.0), Some(5.0), Some(7.0)]);
    }

    #[test]
    fn forward_fill_keeps_leading_gap() {
        let f = frame_of(vec![None, Some(3.0)]);
        let out = forward_fill(&f, "x").unwrap();
        assert_eq!(out.column("x").unwrap(), &[None, Some(3.0)]);
    }

    #[test]
    fn forward_fill_unknown_column() {
        let f = frame_of(vec![Some(1.0)]);
        assert!(matches!(forward_fill(&f, "y"), Err(DataError::UnknownColumn(_))));
    }

    #[test]
    fn rejects_duplicate_and_unordered_dates() {
        assert!(matches!(
            TimeSeriesFrame::new(vec![day(1), day(1)], Frequency::Daily),
            Err(DataError::DuplicateDates(_))
        ));
        assert!(matches!(
            TimeSeriesFrame::new(vec![day(2), day(1)], Frequency::Daily),
            Err(DataError::Unordered(_))
        ));
    }

    #[test]
    fn weekly_frames_must_be_labelled_by_monday() {
        // 2024-01-01 is a Monday.
        assert!(TimeSeriesFrame::new(vec![day(1), day(8)], Frequency::Weekly).is_ok());
        assert!(TimeSeriesFrame::new(vec![day(2)], Frequency::Weekly).is_err());
    }

    #[test]
    fn column_length_checked() {
        let f = TimeSeriesFrame::new(vec![day(1), day(2)], Frequency::Daily).unwrap();
        assert!(matches!(
            f.with_column("x", vec![Some(1.0)]),
            Err(DataError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn left_join_marks_absent_dates_missing() {
        let a = frame_of(vec![Some(1.0), Some(2.0), Some(3.0)]);
        let b = TimeSeriesFrame::new(vec![day(2)], Frequency::Daily)
            .unwrap()
            .with_column("y", vec![Some(9.0)])
            .unwrap();
        let j = a.left_join(&b).unwrap();
        assert_eq!(j.column("y").unwrap(), &[None, Some(9.0), None]);
    }
}
