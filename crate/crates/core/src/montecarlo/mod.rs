//! Simulation study: heteroskedastic panels with good-leverage
//! contamination, and the size, bias, RMSE and size-adjusted power of each
//! covariance estimator.

pub mod config;
pub mod dgp;
pub mod experiment;

pub use config::{default_power_grid, Contamination, McConfig};
pub use dgp::{generate_panel, moments_of_w, sample_w_iid_normal, SimulatedPanel, WMoments};
pub use experiment::{
    empirical_percentile, power_curves, replicate, run_power_experiment, run_replications,
    run_size_experiment, size_metrics, EstimatorMetrics, McMetrics, McRun, PowerCurve, PowerPoint,
};
