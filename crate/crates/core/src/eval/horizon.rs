use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spread of every forecast that covers one date.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonPoint {
    pub date: NaiveDate,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonSeries {
    pub horizon: usize,
    pub points: Vec<HorizonPoint>,
}

impl HorizonSeries {
    pub fn dates(&self) -> Vec<NaiveDate> {
        self.points.iter().map(|p| p.date).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean).collect()
    }
}

/// Collapses overlapping `K`-day forecasts. Each forecast is
/// `(anchor, values)` where `values[j]` targets `anchor + j` days.
pub fn horizon_aggregate(forecasts: &[(NaiveDate, Vec<f64>)]) -> Result<HorizonSeries> {
    let Some((first, v0)) = forecasts.first() else {
        return Err(Error::InvalidInput("no forecasts to aggregate".into()));
    };
    let k = v0.len();
    if k == 0 {
        return Err(Error::InvalidInput("zero-length forecast".into()));
    }
    let mut expected = *first;
    let mut cover: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for (anchor, values) in forecasts {
        if values.len() != k {
            return Err(Error::Dimension {
                context: "horizon_aggregate",
                expected: k,
                actual: values.len(),
            });
        }
        if *anchor != expected {
            return Err(Error::InvalidInput(format!(
                "anchors not consecutive: expected {expected}, got {anchor}"
            )));
        }
        expected = anchor.succ_opt().expect("date in range");
        for (d, &v) in anchor.iter_days().zip(values) {
            cover.entry(d).or_default().push(v);
        }
    }
    let points = cover
        .into_iter()
        .map(|(date, vs)| HorizonPoint {
            date,
            mean: vs.iter().sum::<f64>() / vs.len() as f64,
            min: vs.iter().copied().fold(f64::INFINITY, f64::min),
            max: vs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            count: vs.len(),
        })
        .collect();
    Ok(HorizonSeries { horizon: k, points })
}
