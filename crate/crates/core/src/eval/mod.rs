//! Forecast metrics, descriptive statistics, horizon aggregation and plots.

mod horizon;
mod metrics;
mod polyfit;
mod report;
mod stats;
pub mod svg;

pub use horizon::{horizon_aggregate, HorizonPoint, HorizonSeries};
pub use metrics::{corr_coeff, mae, Mae};
pub use polyfit::{polyfit3, polyval3};
pub use report::{evaluate_series, report_csv, EvalReport, REPORT_COLUMNS};
pub use stats::{descriptive_stats, StatsRow};
