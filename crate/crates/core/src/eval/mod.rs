//! Held-out metrics, significance tests, latency and report files.

mod metrics;
mod output;
mod report;
mod timing;
mod ttest;

pub use metrics::{rmse, smape, smape_terms, squared_errors};
pub use output::{forecast_svg, loss_svg, svg_lines, write_forecast_csv, write_losses_csv, write_metrics_csv};
pub use report::{evaluate, forecast, metrics, persistence_forecast, Forecasts, MetricsReport};
pub use timing::{time_inference, LatencyStats};
pub use ttest::{paired_t_test, student_t_two_sided, MetricBasis, PairedTest};

use thiserror::Error;

use crate::models::ModelError;
use crate::train::TrainError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no samples")]
    Empty,
    #[error("all paired differences are identical")]
    ZeroVariance,
    #[error("scaler does not match the model")]
    ScalerMismatch,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
