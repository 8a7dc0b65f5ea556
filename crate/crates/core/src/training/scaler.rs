use serde::{Deserialize, Serialize};

use crate::data::FeatureWindow;
use crate::error::{Error, Result};

/// Observed range of one column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Option<Self> {
        values.fold(None, |acc, v| match acc {
            None => Some(Range { min: v, max: v }),
            Some(r) => Some(Range {
                min: r.min.min(v),
                max: r.max.max(v),
            }),
        })
    }

    pub fn is_constant(&self) -> bool {
        self.max == self.min
    }

    /// `(x − min) / (max − min)`, unclipped; constant columns map to 0.5.
    pub fn apply(&self, x: f64) -> f64 {
        if self.is_constant() {
            0.5
        } else {
            (x - self.min) / (self.max - self.min)
        }
    }

    pub fn invert(&self, z: f64) -> f64 {
        if self.is_constant() {
            self.min
        } else {
            self.min + z * (self.max - self.min)
        }
    }
}

/// Per-feature and target ranges learned from the training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub features: Vec<Range>,
    pub target: Range,
}

/// Fits ranges over every input row and target value of `windows`.
pub fn fit_scaler(windows: &[FeatureWindow]) -> Result<MinMaxScaler> {
    let first = windows
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot fit a scaler on an empty training set".into()))?;
    let width = first.inputs.first().map_or(0, Vec::len);
    let mut features = Vec::with_capacity(width);
    for j in 0..width {
        let r =
            Range::of(windows.iter().flat_map(|w| w.inputs.iter().map(move |row| row[j]))).expect("non-empty windows");
        if r.is_constant() {
            log::warn!(
                "feature column {j} is constant ({}) on the training split; mapped to 0.5",
                r.min
            );
        }
        features.push(r);
    }
    let target = Range::of(windows.iter().flat_map(|w| w.target.iter().copied())).expect("non-empty targets");
    if target.is_constant() {
        log::warn!("training targets are constant ({})", target.min);
    }
    Ok(MinMaxScaler { features, target })
}

impl MinMaxScaler {
    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.features).map(|(x, r)| r.apply(*x)).collect()
    }

    pub fn apply_window(&self, w: &FeatureWindow) -> Result<FeatureWindow> {
        if let Some(row) = w.inputs.iter().find(|r| r.len() != self.features.len()) {
            return Err(Error::Dimension {
                context: "scaler input width",
                expected: self.features.len(),
                actual: row.len(),
            });
        }
        Ok(FeatureWindow {
            inputs: w.inputs.iter().map(|r| self.apply_row(r)).collect(),
            target: w.target.iter().map(|&y| self.target.apply(y)).collect(),
            anchor_date: w.anchor_date,
        })
    }

    pub fn apply_windows(&self, ws: &[FeatureWindow]) -> Result<Vec<FeatureWindow>> {
        ws.iter().map(|w| self.apply_window(w)).collect()
    }

    pub fn invert_target(&self, z: f64) -> f64 {
        self.target.invert(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn window(rows: Vec<Vec<f64>>, target: Vec<f64>) -> FeatureWindow {
        FeatureWindow {
            inputs: rows,
            target,
            anchor_date: NaiveDate::from_ymd_opt(2019, 1, 1).unwrap(),
        }
    }

    #[test]
    fn midpoint_round_trip_and_extrapolation() {
        let r = Range { min: 10.0, max: 30.0 };
        assert_eq!(r.apply(20.0), 0.5);
        assert!((r.invert(r.apply(17.3)) - 17.3).abs() < 1e-12);
        assert_eq!(r.apply(35.0), 1.25);
    }

    #[test]
    fn fit_uses_all_rows_and_flags_constants() {
        let ws = vec![
            window(vec![vec![10.0, 1.0], vec![20.0, 1.0]], vec![300.0]),
            window(vec![vec![30.0, 1.0]], vec![100.0]),
        ];
        let s = fit_scaler(&ws).unwrap();
        assert_eq!(s.features[0], Range { min: 10.0, max: 30.0 });
        assert!(s.features[1].is_constant());
        let out = s.apply_window(&ws[0]).unwrap();
        assert_eq!(out.inputs[0], vec![0.0, 0.5]);
        assert_eq!(out.target, vec![1.0]);
        assert!(fit_scaler(&[]).is_err());
        assert!(s.apply_window(&window(vec![vec![1.0]], vec![1.0])).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(lo in -1e3f64..1e3, width in 1e-3f64..1e3, t in 0.0f64..=1.0) {
            let r = Range { min: lo, max: lo + width };
            let x = lo + t * width;
            prop_assert!((r.invert(r.apply(x)) - x).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}
