//! Daily emergency ambulance dispatch forecasting with a stacked LSTM built
//! from first principles.
//!
//! * [`numerics`]: dense kernels and the finite-difference oracle
//! * [`rnn`]: the LSTM cell, stacked network and backpropagation through time
//! * [`training`]: losses, Adam, min-max scaling, the mini-batch loop
//! * [`data`]: CSV ingestion, calendar labels, mobility gap filling,
//!   windowing and the synthetic generator
//! * [`eval`]: correlation, relative MAE, descriptive statistics, horizon
//!   aggregation, cubic fits, report and chart output
//! * [`experiment`]: run configuration, checkpoints and the commands behind
//!   the `eadcast` binary

pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod numerics;
pub mod rnn;
pub mod training;

pub use data::{DailyRecord, FeatureMask, FeatureWindow, GroupKey};
pub use error::{Error, Result};
pub use eval::{EvalReport, HorizonSeries, StatsRow};
pub use rnn::{Architecture, ForecastModel, InitScheme};
pub use training::{LossKind, MinMaxScaler, TrainConfig};
