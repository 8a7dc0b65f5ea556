use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Descriptive statistics in the column order of the evaluation report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub mean: f64,
    pub std_error: f64,
    pub median: f64,
    pub mode: f64,
    pub stdev: f64,
    /// Bias-corrected excess kurtosis; `None` below four points or for a constant series.
    pub kurtosis: Option<f64>,
    /// Bias-corrected sample skewness; `None` below four points or for a constant series.
    pub skewness: Option<f64>,
    pub range: f64,
    pub min: f64,
    pub max: f64,
    pub sum: f64,
    pub count: usize,
}

/// Sample statistics. `stdev` uses `n − 1`; skewness is
/// `n / ((n−1)(n−2)) Σ z³` and kurtosis
/// `n(n+1) / ((n−1)(n−2)(n−3)) Σ z⁴ − 3(n−1)² / ((n−2)(n−3))` with
/// `z = (x − mean) / stdev`. The mode is taken over values rounded to the
/// nearest integer, ties going to the smallest.
pub fn descriptive_stats(series: &[f64]) -> Result<StatsRow> {
    if series.is_empty() {
        return Err(Error::InvalidInput("statistics of an empty series".into()));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("statistics of a non-finite series".into()));
    }
    let n = series.len();
    let nf = n as f64;
    let sum: f64 = series.iter().sum();
    let mean = sum / nf;
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[n - 1]);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };

    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for v in series {
        *counts.entry(v.round() as i64).or_default() += 1;
    }
    let best = counts.values().copied().max().unwrap_or(0);
    let mode = counts
        .iter()
        .find(|(_, c)| **c == best)
        .map(|(v, _)| *v as f64)
        .unwrap_or(mean);

    let ss: f64 = series.iter().map(|x| (x - mean).powi(2)).sum();
    let stdev = if n > 1 { (ss / (nf - 1.0)).sqrt() } else { 0.0 };
    let (skewness, kurtosis) = if n >= 4 && stdev > 0.0 {
        let (mut s3, mut s4) = (0.0, 0.0);
        for x in series {
            let z = (x - mean) / stdev;
            s3 += z.powi(3);
            s4 += z.powi(4);
        }
        let skew = nf / ((nf - 1.0) * (nf - 2.0)) * s3;
        let kurt = nf * (nf + 1.0) / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0)) * s4
            - 3.0 * (nf - 1.0).powi(2) / ((nf - 2.0) * (nf - 3.0));
        (Some(skew), Some(kurt))
    } else {
        (None, None)
    };
    Ok(StatsRow {
        mean,
        std_error: stdev / nf.sqrt(),
        median,
        mode,
        stdev,
        kurtosis,
        skewness,
        range: max - min,
        min,
        max,
        sum,
        count: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_series() {
        let s = descriptive_stats(&[5.0; 4]).unwrap();
        assert_eq!((s.mean, s.stdev, s.range, s.mode), (5.0, 0.0, 0.0, 5.0));
        assert_eq!(s.kurtosis, None);
    }

    #[test]
    fn hand_computed_series() {
        let s = descriptive_stats(&[1.0, 2.0, 2.0, 5.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.0);
        assert_eq!(s.mode, 2.0);
        assert_eq!(s.sum, 10.0);
        assert!((s.stdev - 3f64.sqrt()).abs() < 1e-12);
        // Σz³ = (−1.5³ − 0.5³ − 0.5³ + 2.5³)/3^1.5, skew = 4/6 · that
        let z3 = (-3.375 - 0.125 - 0.125 + 15.625) / 3f64.powf(1.5);
        assert!((s.skewness.unwrap() - 4.0 / 6.0 * z3).abs() < 1e-12);
    }

    #[test]
    fn symmetric_series_has_no_skew() {
        let s = descriptive_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!(s.skewness.unwrap().abs() < 1e-15);
        // excess kurtosis of 1..5 under the bias-corrected formula
        assert!((s.kurtosis.unwrap() + 1.2).abs() < 1e-12);
    }

    #[test]
    fn short_series_skip_higher_moments() {
        let s = descriptive_stats(&[1.0, 4.0, 9.0]).unwrap();
        assert!(s.kurtosis.is_none() && s.skewness.is_none());
        assert_eq!(s.median, 4.0);
        assert!(descriptive_stats(&[]).is_err());
    }

    #[test]
    fn mode_ties_go_to_smallest() {
        let s = descriptive_stats(&[3.2, 2.9, 7.0, 7.4, 1.0]).unwrap();
        assert_eq!(s.mode, 3.0);
    }

    proptest! {
        #[test]
        fn internal_consistency(v in prop::collection::vec(-1e3f64..1e3, 4..60)) {
            let s = descriptive_stats(&v).unwrap();
            prop_assert_eq!(s.range, s.max - s.min);
            prop_assert!((s.std_error * (v.len() as f64).sqrt() - s.stdev).abs() <= 1e-9 * s.stdev.max(1.0));
            prop_assert!(s.min <= s.median && s.median <= s.max);
        }
    }
}
