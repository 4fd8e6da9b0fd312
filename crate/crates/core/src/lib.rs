//! One-way fixed-effects panel regression with leverage-aware
//! cluster-robust covariance estimators (PHC0, PHC3, PHC6, PHCjk), the tests
//! built on them, and a Monte Carlo harness for their finite-sample size and
//! power.
//!
//! ```no_run
//! use panelhc::{fit_within, leverage, load_csv, within_transform, ColumnSpec, vcov};
//!
//! let data = load_csv("panel.csv", &ColumnSpec::new("y", ["x1", "x2"]))?;
//! let demeaned = within_transform(&data);
//! let fit = fit_within(&demeaned)?;
//! let lev = leverage(&fit, &demeaned)?;
//! let v = vcov::vcov_phc3(&fit, &demeaned, &lev)?;
//! println!("{}", v.std_errors());
//! # Ok::<(), panelhc::Error>(())
//! ```

pub mod error;
pub mod fe;
pub mod inference;
pub mod linalg;
pub mod montecarlo;
pub mod panel;
pub mod vcov;

pub use error::{Error, Result};
pub use fe::{fit_within, leave_one_out, leverage, loo_mean, FeFit, LeverageSet, LooMean};
pub use inference::{
    conf_interval, t_test, wald_test, Distribution, LinearRestriction, TestResult, WaldTest,
};
pub use montecarlo::{McConfig, McMetrics};
pub use panel::{
    load_csv, read_csv, within_transform, ColumnSpec, DemeanedPanel, Label, PanelDataset,
};
pub use vcov::{Phc6Mode, Phc6Options, VcovEstimate, VcovKind};

pub use nalgebra::{DMatrix, DVector};
