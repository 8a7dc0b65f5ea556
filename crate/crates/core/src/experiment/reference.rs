use crate::error::{Error, Result};

/// Published real-data results, shipped for side-by-side display only.
pub const PUBLISHED_REFERENCE_CSV: &str = include_str!("../../data/published_reference.csv");

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceRow {
    pub experiment: String,
    pub group: String,
    pub variant: String,
    pub cc: Option<f64>,
    pub mae: f64,
}

pub fn published_reference() -> Result<Vec<ReferenceRow>> {
    let mut rows = Vec::new();
    for (i, line) in PUBLISHED_REFERENCE_CSV.lines().enumerate().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let bad = || Error::Data(format!("published reference line {}: `{line}`", i + 1));
        if cells.len() != 5 {
            return Err(bad());
        }
        let cc = match cells[3] {
            "" => None,
            s => Some(s.parse().map_err(|_| bad())?),
        };
        rows.push(ReferenceRow {
            experiment: cells[0].to_string(),
            group: cells[1].to_string(),
            variant: cells[2].to_string(),
            cc,
            mae: cells[4].parse().map_err(|_| bad())?,
        });
    }
    Ok(rows)
}

/// The published MAE of one `(experiment, group, variant)` cell, if any.
pub fn reference_mae(experiment: &str, group: &str, variant: &str) -> Option<f64> {
    published_reference()
        .ok()?
        .into_iter()
        .find_map(|r| (r.experiment == experiment && r.group == group && r.variant == variant).then_some(r.mae))
}
