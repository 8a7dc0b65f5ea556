use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::io::MergedDay;
use super::DailyRecord;
use crate::error::{Error, Result};

/// How missing mobility values are completed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobilityFill {
    /// `(year, month)` whose unobserved days are set to `baseline_value`.
    /// When set, days before the first observation also take the baseline.
    pub baseline_month: Option<(i32, u32)>,
    pub baseline_value: f64,
}

impl Default for MobilityFill {
    fn default() -> Self {
        MobilityFill {
            baseline_month: Some((2020, 1)),
            baseline_value: 100.0,
        }
    }
}

impl MobilityFill {
    fn in_baseline(&self, d: NaiveDate) -> bool {
        self.baseline_month == Some((d.year(), d.month()))
    }
}

/// Completes a daily series: baseline-month gaps take the baseline, interior
/// gaps are linearly interpolated between the nearest known neighbours and
/// trailing gaps hold the last known value.
pub fn fill_series(dates: &[NaiveDate], values: &[Option<f64>], fill: &MobilityFill) -> Result<Vec<f64>> {
    if dates.len() != values.len() {
        return Err(Error::Dimension {
            context: "fill_series",
            expected: dates.len(),
            actual: values.len(),
        });
    }
    if let Some(w) = dates.windows(2).find(|w| w[0].succ_opt() != Some(w[1])) {
        return Err(Error::Data(format!(
            "mobility fill needs consecutive days, found {} then {}",
            w[0], w[1]
        )));
    }
    let known: Vec<Option<f64>> = dates
        .iter()
        .zip(values)
        .map(|(d, v)| match v {
            None if fill.in_baseline(*d) => Some(fill.baseline_value),
            other => *other,
        })
        .collect();
    let anchors: Vec<usize> = (0..known.len()).filter(|&i| known[i].is_some()).collect();
    let Some(&first) = anchors.first() else {
        return if fill.baseline_month.is_some() {
            Ok(vec![fill.baseline_value; dates.len()])
        } else {
            Err(Error::Data(
                "no mobility observations and no baseline configured".into(),
            ))
        };
    };
    let last = *anchors.last().unwrap();
    let mut out = vec![0.0; known.len()];
    let lead = if fill.baseline_month.is_some() {
        fill.baseline_value
    } else {
        known[first].unwrap()
    };
    out[..first].fill(lead);
    for pair in anchors.windows(2) {
        let (i, j) = (pair[0], pair[1]);
        let (vi, vj) = (known[i].unwrap(), known[j].unwrap());
        out[i] = vi;
        for (k, slot) in out.iter_mut().enumerate().take(j).skip(i + 1) {
            *slot = vi + (vj - vi) * (k - i) as f64 / (j - i) as f64;
        }
    }
    out[last..].fill(known[last].unwrap());
    Ok(out)
}

/// Produces complete records from merged days and their calendar labels.
pub fn fill_mobility(days: &[MergedDay], labels: &[u8], fill: &MobilityFill) -> Result<Vec<DailyRecord>> {
    if labels.len() != days.len() {
        return Err(Error::Dimension {
            context: "fill_mobility labels",
            expected: days.len(),
            actual: labels.len(),
        });
    }
    let dates: Vec<NaiveDate> = days.iter().map(|d| d.date).collect();
    let values: Vec<Option<f64>> = days.iter().map(|d| d.mobility).collect();
    let filled = fill_series(&dates, &values, fill)?;
    Ok(days
        .iter()
        .zip(labels)
        .zip(filled)
        .map(|((d, &day_label), mobility)| DailyRecord {
            date: d.date,
            tmax: d.tmax,
            humidity: d.humidity,
            mobility,
            day_label,
            ead: d.ead,
        })
        .collect())
}
