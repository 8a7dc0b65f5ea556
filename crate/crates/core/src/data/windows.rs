use chrono::NaiveDate;

use super::{DailyRecord, DateSpan, FeatureMask, GroupKey};
use crate::error::{Error, Result};

/// `L` consecutive days of inputs followed by the `K` target days.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureWindow {
    /// `L` rows of `F` features each.
    pub inputs: Vec<Vec<f64>>,
    /// Counts of the `K` days right after the inputs.
    pub target: Vec<f64>,
    /// Date of the first target day.
    pub anchor_date: NaiveDate,
}

impl FeatureWindow {
    pub fn target_dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.anchor_date.iter_days().take(self.target.len())
    }
}

/// Every stride-1 window over `records`: `n − L − K + 1` of them.
pub fn make_windows(
    records: &[DailyRecord],
    lookback: usize,
    horizon: usize,
    mask: FeatureMask,
    group: GroupKey,
) -> Result<Vec<FeatureWindow>> {
    mask.validate()?;
    if lookback == 0 || horizon == 0 {
        return Err(Error::Config("lookback and horizon must be at least 1".into()));
    }
    if records.len() < lookback + horizon {
        return Err(Error::Data(format!(
            "{} days cannot hold a {lookback}-day lookback plus {horizon}-day horizon",
            records.len()
        )));
    }
    let features = mask.features();
    let rows: Vec<Vec<f64>> = records
        .iter()
        .map(|r| features.iter().map(|f| f.value(r)).collect())
        .collect();
    let n = records.len() - lookback - horizon + 1;
    Ok((0..n)
        .map(|start| {
            let split = start + lookback;
            FeatureWindow {
                inputs: rows[start..split].to_vec(),
                target: records[split..split + horizon]
                    .iter()
                    .map(|r| f64::from(r.ead.get(group)))
                    .collect(),
                anchor_date: records[split].date,
            }
        })
        .collect())
}

/// The records inside `span`.
pub fn records_in_span<'a>(records: &'a [DailyRecord], span: &DateSpan) -> &'a [DailyRecord] {
    let start = records.partition_point(|r| r.date < span.start);
    let end = records.partition_point(|r| r.date <= span.end);
    &records[start..end.max(start)]
}

/// Windows whose target days all fall inside `span`; inputs may reach back
/// up to `L` days before it.
pub fn make_target_windows(
    records: &[DailyRecord],
    span: &DateSpan,
    lookback: usize,
    horizon: usize,
    mask: FeatureMask,
    group: GroupKey,
) -> Result<Vec<FeatureWindow>> {
    let first = records.partition_point(|r| r.date < span.start);
    let end = records.partition_point(|r| r.date <= span.end);
    if end <= first {
        return Err(Error::Data(format!("no records inside {span}")));
    }
    let start = first.saturating_sub(lookback);
    make_windows(&records[start..end], lookback, horizon, mask, group)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Feature, GroupCounts};
    use proptest::prelude::*;

    fn records(n: usize) -> Vec<DailyRecord> {
        let start = NaiveDate::from_ymd_opt(2019, 3, 1).unwrap();
        (0..n)
            .map(|i| DailyRecord {
                date: start + chrono::Duration::days(i as i64),
                tmax: 10.0 + i as f64 * 0.1,
                humidity: 50.0 + i as f64,
                mobility: 100.0 - i as f64,
                day_label: (i % 2) as u8,
                ead: GroupCounts {
                    all: 300 + i as u32,
                    children: 20,
                    adult: 100,
                    elderly: 180 + i as u32,
                    outdoor: 50,
                    indoor: 250 + i as u32,
                },
            })
            .collect()
    }

    #[test]
    fn window_counts() {
        let r = records(10);
        assert_eq!(
            make_windows(&r, 7, 1, FeatureMask::all(), GroupKey::All).unwrap().len(),
            3
        );
        assert_eq!(
            make_windows(&r, 7, 3, FeatureMask::all(), GroupKey::All).unwrap().len(),
            1
        );
        assert!(make_windows(&r, 8, 3, FeatureMask::all(), GroupKey::All).is_err());
    }

    #[test]
    fn mask_projects_columns_and_targets_follow_inputs() {
        let r = records(10);
        let mask = FeatureMask::all().without(Feature::Mobility);
        let w = make_windows(&r, 7, 2, mask, GroupKey::Elderly).unwrap();
        assert!(w[0].inputs.iter().all(|row| row.len() == 3));
        assert_eq!(
            w[1].inputs[0],
            vec![r[1].tmax, r[1].humidity, f64::from(r[1].day_label)]
        );
        assert_eq!(w[1].anchor_date, r[8].date);
        assert_eq!(
            w[1].target,
            vec![f64::from(r[8].ead.elderly), f64::from(r[9].ead.elderly)]
        );
    }

    #[test]
    fn target_windows_reach_back() {
        let r = records(30);
        let span = DateSpan::new(r[20].date, r[29].date).unwrap();
        let w = make_target_windows(&r, &span, 7, 1, FeatureMask::all(), GroupKey::All).unwrap();
        assert_eq!(w.len(), 10);
        assert_eq!(w[0].anchor_date, r[20].date);
        assert_eq!(records_in_span(&r, &span).len(), 10);
    }

    proptest! {
        #[test]
        fn count_formula(span in 2usize..40, l in 1usize..20, k in 1usize..20) {
            prop_assume!(span >= l + k);
            let r = records(span);
            let w = make_windows(&r, l, k, FeatureMask::all(), GroupKey::All).unwrap();
            prop_assert_eq!(w.len(), span - l - k + 1);
        }
    }
}
