use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vcov::{Phc6Options, VcovKind};

/// Good-leverage contamination of the first regressor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Contamination {
    pub enabled: bool,
    /// Share of `x1` cells replaced; the count is `floor(fraction * N * T)`.
    pub fraction: f64,
    pub mean: f64,
    pub sd: f64,
}

impl Default for Contamination {
    fn default() -> Self {
        Contamination {
            enabled: false,
            fraction: 0.10,
            mean: 5.0,
            sd: 25.0,
        }
    }
}

/// One Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    #[serde(rename = "N")]
    pub n_units: usize,
    #[serde(rename = "T")]
    pub n_periods: usize,
    /// Degree of heteroskedasticity; must be a non-negative even integer.
    pub gamma: f64,
    /// `(beta0, beta1, ..., beta5)`.
    pub betas: Vec<f64>,
    /// MA(1) coefficient of the error.
    pub theta: f64,
    pub contamination: Contamination,
    pub replications: usize,
    pub seed: u64,
    pub alpha: f64,
    pub estimators: Vec<VcovKind>,
    /// Alternative values of `beta1` for the size-adjusted power curve.
    pub power_grid: Vec<f64>,
    pub phc6: Phc6Options,
}

/// `0.50, 0.55, ..., 1.50`.
pub fn default_power_grid() -> Vec<f64> {
    (0..=20).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_units: 25,
            n_periods: 5,
            gamma: 0.0,
            betas: vec![1.0, 1.0, 1.0, 1.0, 1.0, 0.0],
            theta: 0.0,
            contamination: Contamination::default(),
            replications: 10_000,
            seed: 1,
            alpha: 0.05,
            estimators: VcovKind::ROBUST.to_vec(),
            power_grid: default_power_grid(),
            phc6: Phc6Options::default(),
        }
    }
}

/// Number of simulated regressors.
pub const N_REGRESSORS: usize = 5;

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_units < 2 {
            return fail(format!("N = {} (need at least 2 units)", self.n_units));
        }
        if self.n_periods < 2 {
            return fail(format!("T = {} (need at least 2 periods)", self.n_periods));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0 && self.gamma % 2.0 == 0.0) {
            return fail(format!(
                "gamma = {} is unsupported: odd or fractional powers can make the error variance negative",
                self.gamma
            ));
        }
        if self.betas.len() != N_REGRESSORS + 1 || self.betas.iter().any(|b| !b.is_finite()) {
            return fail(format!(
                "betas must hold {} finite values (intercept and five slopes)",
                N_REGRESSORS + 1
            ));
        }
        if !self.theta.is_finite() {
            return fail("theta must be finite".into());
        }
        let c = &self.contamination;
        if !(c.fraction >= 0.0 && c.fraction < 1.0) {
            return fail(format!(
                "contamination fraction {} not in [0, 1)",
                c.fraction
            ));
        }
        if !(c.mean.is_finite() && c.sd.is_finite() && c.sd >= 0.0) {
            return fail("contamination mean and sd must be finite, sd >= 0".into());
        }
        if self.replications < 1 {
            return fail("replications must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha = {} not in (0, 1)", self.alpha));
        }
        if self.estimators.is_empty() {
            return fail("no estimators requested".into());
        }
        if self.power_grid.iter().any(|b| !b.is_finite()) {
            return fail("power grid values must be finite".into());
        }
        Ok(())
    }

    /// Number of contaminated `x1` cells per draw.
    pub fn contaminated_cells(&self) -> usize {
        if !self.contamination.enabled {
            return 0;
        }
        let cells = (self.n_units * self.n_periods) as f64;
        // Nudge so that e.g. 0.1 * 250 is not floored to 24 by representation error.
        (self.contamination.fraction * cells + 1e-9).floor() as usize
    }
}
