use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{corr_coeff, mae};
use super::stats::{descriptive_stats, StatsRow};
use crate::data::GroupKey;
use crate::error::Result;

/// Statistic columns of `report.csv`, after the `Scenario,Group,Series` keys.
pub const REPORT_COLUMNS: [&str; 13] = [
    "Mean",
    "Std. Error",
    "Median",
    "Mode",
    "StDev",
    "Kurtosis",
    "Skewness",
    "Range",
    "Min",
    "Max",
    "Sum",
    "CC",
    "MAE",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario: String,
    pub group: GroupKey,
    pub cc: f64,
    /// Relative error as a fraction (0.047 is 4.7 %).
    pub mae: f64,
    pub mae_skipped: usize,
    pub stats_real: StatsRow,
    pub stats_est: StatsRow,
}

/// Metrics on the count scale for one series pair.
pub fn evaluate_series(scenario: &str, group: GroupKey, actual: &[f64], estimated: &[f64]) -> Result<EvalReport> {
    let m = mae(actual, estimated)?;
    if m.skipped > 0 {
        log::warn!("{scenario}/{group}: skipped {} zero actuals in MAE", m.skipped);
    }
    Ok(EvalReport {
        scenario: scenario.to_string(),
        group,
        cc: corr_coeff(actual, estimated)?,
        mae: m.value,
        mae_skipped: m.skipped,
        stats_real: descriptive_stats(actual)?,
        stats_est: descriptive_stats(estimated)?,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "--".to_string(), |x| format!("{x:.4}"))
}

fn stats_cells(s: &StatsRow) -> String {
    format!(
        "{:.4},{:.4},{:.4},{},{:.4},{},{},{:.4},{:.4},{:.4},{:.4}",
        s.mean,
        s.std_error,
        s.median,
        s.mode,
        s.stdev,
        opt(s.kurtosis),
        opt(s.skewness),
        s.range,
        s.min,
        s.max,
        s.sum
    )
}

/// Two rows per report: `Real` without metrics, `Est.` with CC and MAE.
pub fn report_csv(reports: &[EvalReport]) -> String {
    let mut out = format!("Scenario,Group,Series,{}\n", REPORT_COLUMNS.join(","));
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},Real,{},--,--",
            r.scenario,
            r.group,
            stats_cells(&r.stats_real)
        );
        let _ = writeln!(
            out,
            "{},{},Est.,{},{:.6},{:.6}",
            r.scenario,
            r.group,
            stats_cells(&r.stats_est),
            r.cc,
            r.mae
        );
    }
    out
}
