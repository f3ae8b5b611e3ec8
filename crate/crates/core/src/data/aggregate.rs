use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DataError, Frequency, TimeSeriesFrame};

/// How a column is reduced when several rows fall into one period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reducer {
    Sum,
    Mean,
    Max,
    Min,
}

impl Reducer {
    /// Missing cells are skipped; a period with no observations stays missing.
    fn reduce(self, values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
        let present: Vec<f64> = values.flatten().collect();
        if present.is_empty() {
            return None;
        }
        Some(match self {
            Reducer::Sum => present.iter().sum(),
            Reducer::Mean => present.iter().sum::<f64>() / present.len() as f64,
            Reducer::Max => present.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Reducer::Min => present.iter().copied().fold(f64::INFINITY, f64::min),
        })
    }
}

/// Column-name → reducer map.
///
/// Columns without an explicit rule are summed when their name contains
/// `consumption` and averaged otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationPolicy {
    #[serde(default)]
    pub rules: BTreeMap<String, Reducer>,
}

impl Default for AggregationPolicy {
    fn default() -> Self {
        let rules = [("tmax", Reducer::Max), ("tmin", Reducer::Min)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        Self { rules }
    }
}

impl AggregationPolicy {
    pub fn reducer_for(&self, column: &str) -> Reducer {
        if let Some(r) = self.rules.get(column) {
            *r
        } else if column.contains("consumption") {
            Reducer::Sum
        } else {
            Reducer::Mean
        }
    }
}

/// Aggregates a frame to a coarser (or equal) frequency.
///
/// Only nested conversions are accepted: daily to anything, or identity.
/// Weekly periods straddle month boundaries, so weekly → monthly is refused.
/// Text columns are dropped by aggregation.
pub fn aggregate(
    frame: &TimeSeriesFrame,
    freq: Frequency,
    policy: &AggregationPolicy,
) -> Result<TimeSeriesFrame, DataError> {
    let from = frame.frequency();
    if from == freq {
        return Ok(frame.clone());
    }
    if from != Frequency::Daily {
        return Err(DataError::BadAggregation { from, to: freq });
    }

    // Period label → member row indices; dates are sorted so groups are too.
    let mut groups: Vec<(chrono::NaiveDate, Vec<usize>)> = Vec::new();
    for (i, d) in frame.dates().iter().enumerate() {
        let label = freq.period_start(*d);
        match groups.last_mut() {
            Some((l, members)) if *l == label => members.push(i),
            _ => groups.push((label, vec![i])),
        }
    }

    let mut out = TimeSeriesFrame::new(groups.iter().map(|(l, _)| *l).collect(), freq)?;
    for col in frame.columns() {
        let reducer = policy.reducer_for(&col.name);
        let values = groups
            .iter()
            .map(|(_, members)| reducer.reduce(members.iter().map(|&i| col.values[i])))
            .collect();
        out.push_column(col.name.clone(), values)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use chrono::{Datelike, NaiveDate};

    use super::*;

    fn daily(start: NaiveDate, n: usize) -> TimeSeriesFrame {
        let dates = (0..n).map(|i| start + chrono::Duration::days(i as i64)).collect();
        TimeSeriesFrame::new(dates, Frequency::Daily).unwrap()
    }

    #[test]
    fn weekly_sum_of_consumption() {
        // 2024-01-01 is a Monday, so 7 days form one ISO week.
        let f = daily(NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(), 7)
            .with_column("consumption_m3", vec![Some(10.0); 7])
            .unwrap();
        let w = aggregate(&f, Frequency::Weekly, &AggregationPolicy::default()).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w.column("consumption_m3").unwrap(), &[Some(70.0)]);
    }

    #[test]
    fn tmax_takes_the_max() {
        let f = daily(NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(), 2)
            .with_column("tmax", vec![Some(20.0), Some(30.0)])
            .unwrap();
        let w = aggregate(&f, Frequency::Weekly, &AggregationPolicy::default()).unwrap();
        assert_eq!(w.column("tmax").unwrap(), &[Some(30.0)]);
    }

    #[test]
    fn mixed_policy_months_match_independent_grouping() {
        let start = NaiveDate::from_ymd_opt(2024, 1, 20).unwrap();
        let n = 45;
        let cons: Vec<Option<f64>> =
            (0..n).map(|i| if i % 11 == 3 { None } else { Some(i as f64 * 1.5) }).collect();
        let tmax: Vec<Option<f64>> = (0..n).map(|i| Some(10.0 + ((i * 7) % 13) as f64)).collect();
        let tmin: Vec<Option<f64>> = (0..n).map(|i| Some(((i * 5) % 9) as f64 - 2.0)).collect();
        let prec: Vec<Option<f64>> = (0..n).map(|i| Some((i % 4) as f64)).collect();
        let f = daily(start, n)
            .with_column("consumption_m3", cons.clone())
            .unwrap()
            .with_column("tmax", tmax.clone())
            .unwrap()
            .with_column("tmin", tmin.clone())
            .unwrap()
            .with_column("prec", prec.clone())
            .unwrap();
        let m = aggregate(&f, Frequency::Monthly, &AggregationPolicy::default()).unwrap();

        // Independent oracle: bucket by (year, month) with plain loops.
        let mut buckets: BTreeMap<(i32, u32), [Vec<f64>; 4]> = BTreeMap::new();
        for i in 0..n {
            let d = start + chrono::Duration::days(i as i64);
            let b = buckets.entry((d.year(), d.month())).or_default();
            for (slot, v) in [cons[i], tmax[i], tmin[i], prec[i]].into_iter().enumerate() {
                if let Some(v) = v {
                    b[slot].push(v);
                }
            }
        }
        assert_eq!(m.len(), buckets.len());
        for (row, (_, b)) in buckets.iter().enumerate() {
            let sum: f64 = b[0].iter().sum();
            let max = b[1].iter().cloned().fold(f64::MIN, f64::max);
            let min = b[2].iter().cloned().fold(f64::MAX, f64::min);
            let mean = b[3].iter().sum::<f64>() / b[3].len() as f64;
            assert!((m.column("consumption_m3").unwrap()[row].unwrap() - sum).abs() < 1e-9);
            assert_eq!(m.column("tmax").unwrap()[row], Some(max));
            assert_eq!(m.column("tmin").unwrap()[row], Some(min));
            assert!((m.column("prec").unwrap()[row].unwrap() - mean).abs() < 1e-12);
        }
        assert_eq!(m.dates()[0], NaiveDate::from_ymd_opt(2024, 1, 1).unwrap());
    }

    #[test]
    fn weekly_conserves_consumption_total() {
        let start = NaiveDate::from_ymd_opt(2023, 3, 3).unwrap();
        let vals: Vec<Option<f64>> = (0..100).map(|i| Some((i * 37 % 17) as f64)).collect();
        let total: f64 = vals.iter().flatten().sum();
        let f = daily(start, 100).with_column("consumption_m3", vals).unwrap();
        let w = aggregate(&f, Frequency::Weekly, &AggregationPolicy::default()).unwrap();
        let agg: f64 = w.column("consumption_m3").unwrap().iter().flatten().sum();
        assert!((agg - total).abs() < 1e-9);
    }

    #[test]
    fn coarse_to_fine_refused() {
        let f = TimeSeriesFrame::new(
            vec![NaiveDate::from_ymd_opt(2024, 1, 1).unwrap()],
            Frequency::Monthly,
        )
        .unwrap();
        assert!(matches!(
            aggregate(&f, Frequency::Daily, &AggregationPolicy::default()),
            Err(DataError::BadAggregation { .. })
        ));
    }

    #[test]
    fn explicit_rule_overrides_default() {
        let mut policy = AggregationPolicy::default();
        policy.rules.insert("prec".into(), Reducer::Sum);
        assert_eq!(policy.reducer_for("prec"), Reducer::Sum);
        assert_eq!(policy.reducer_for("velmedia"), Reducer::Mean);
        assert_eq!(policy.reducer_for("consumption_m3"), Reducer::Sum);
    }
}
