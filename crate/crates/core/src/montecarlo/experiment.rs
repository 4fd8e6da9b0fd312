//! Replication driver and the size, bias, RMSE and power summaries.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::McConfig;
use super::dgp::generate_panel;
use crate::error::{Error, Result};
use crate::fe::{fit_within, leverage};
use crate::inference::{residual_df, wald_statistic, Distribution, LinearRestriction};
use crate::panel::within_transform;
use crate::vcov::{estimate, VcovKind};

/// Coefficient index of `beta1` (the contaminated regressor).
const B1: usize = 0;
const B2: usize = 1;
/// The joint null restricts `beta1..beta4`.
const JOINT: usize = 4;

/// What one estimator produced in one replication.
#[derive(Debug, Clone)]
pub struct EstimatorDraw {
    pub se_b1: f64,
    pub se_b2: f64,
    /// `(b1 - 1) / se_b1`.
    pub t_null: f64,
    /// Wald statistic of `beta1 = ... = beta4 = 1`.
    pub wald_null: f64,
    /// `(R V R')^{-1}` of the joint restriction, reused for alternatives.
    pub joint_precision: DMatrix<f64>,
    pub df: f64,
}

#[derive(Debug, Clone)]
pub struct ReplicationDraw {
    pub beta: DVector<f64>,
    /// Same order as [`McConfig::estimators`].
    pub estimators: Vec<EstimatorDraw>,
}

/// Raw output of a batch of replications.
#[derive(Debug, Clone)]
pub struct McRun {
    pub config: McConfig,
    /// Successful replications in replication order.
    pub draws: Vec<ReplicationDraw>,
    /// `(replication index, reason)` for dropped replications.
    pub failures: Vec<(u64, String)>,
}

impl McRun {
    pub fn failure_rate(&self) -> f64 {
        self.failures.len() as f64 / self.config.replications as f64
    }
}

fn true_value(cfg: &McConfig, j: usize) -> f64 {
    cfg.betas[j + 1]
}

fn joint_wald(beta: &DVector<f64>, precision: &DMatrix<f64>, target: &[f64]) -> f64 {
    let diff = DVector::from_fn(JOINT, |j, _| beta[j] - target[j]);
    diff.dot(&(precision * &diff))
}

/// Simulate, fit and test a single replication.
pub fn replicate(cfg: &McConfig, rep: u64) -> Result<ReplicationDraw> {
    let sim = generate_panel(cfg, rep)?;
    let panel = within_transform(&sim.panel);
    let fit = fit_within(&panel)?;
    let needs_leverage = cfg
        .estimators
        .iter()
        .any(|k| matches!(k, VcovKind::Phc3 | VcovKind::Phc6 | VcovKind::Phcjk));
    let lev = if needs_leverage {
        Some(leverage(&fit, &panel)?)
    } else {
        None
    };

    let truth: Vec<f64> = (0..JOINT).map(|j| true_value(cfg, j)).collect();
    let targets: Vec<(usize, f64)> = truth.iter().copied().enumerate().collect();
    let joint = LinearRestriction::select(fit.k, &targets)?;

    let mut estimators = Vec::with_capacity(cfg.estimators.len());
    for &kind in &cfg.estimators {
        let v = estimate(kind, &fit, &panel, lev.as_ref(), cfg.phc6)?;
        let se_b1 = v.matrix[(B1, B1)].max(0.0).sqrt();
        let se_b2 = v.matrix[(B2, B2)].max(0.0).sqrt();
        if se_b1 == 0.0 {
            return Err(Error::InfiniteStatistic);
        }
        let t_null = (fit.beta[B1] - true_value(cfg, B1)) / se_b1;
        // Validates R V R' before the precision matrix is formed.
        wald_statistic(&fit.beta, &v.matrix, &joint)?;
        let middle = joint.matrix() * &v.matrix * joint.matrix().transpose();
        let joint_precision = middle.try_inverse().ok_or(Error::CollinearRestriction)?;
        // Same arithmetic as the alternatives in `power_curves`, so the curve
        // at the true value reproduces the null sample exactly.
        let wald_null = joint_wald(&fit.beta, &joint_precision, &truth);
        estimators.push(EstimatorDraw {
            se_b1,
            se_b2,
            t_null,
            wald_null,
            joint_precision,
            df: residual_df(&fit, kind),
        });
    }
    Ok(ReplicationDraw {
        beta: fit.beta,
        estimators,
    })
}

/// Run every replication of `cfg`. Replications are independent and may run
/// on `threads` workers; the result does not depend on the worker count.
pub fn run_replications(cfg: &McConfig, threads: Option<usize>) -> Result<McRun> {
    cfg.validate()?;
    let work = || -> Vec<Result<ReplicationDraw>> {
        (0..cfg.replications as u64)
            .into_par_iter()
            .map(|rep| replicate(cfg, rep))
            .collect()
    };
    let outcomes = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let mut draws = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (rep, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(d) => draws.push(d),
            // Configuration problems are not replication failures.
            Err(e @ Error::Config(_)) => return Err(e),
            Err(e) => failures.push((rep as u64, e.to_string())),
        }
    }
    Ok(McRun {
        config: cfg.clone(),
        draws,
        failures,
    })
}

/// Size and accuracy summary of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorMetrics {
    pub kind: VcovKind,
    /// `1 - mean(se) / sd(beta_hat)` for beta1 and beta2.
    pub pb_b1: f64,
    pub pb_b2: f64,
    /// Rejection rate of the true `beta1 = 1`.
    pub rp_single: f64,
    /// Rejection rate of the true joint null on `beta1..beta4`.
    pub rp_joint: f64,
    /// `R^{-1} sum_r sqrt((se_r - sd)^2)` for beta1.
    pub rmse: f64,
    pub sd_beta: f64,
    pub mean_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McMetrics {
    #[serde(rename = "N")]
    pub n_units: usize,
    #[serde(rename = "T")]
    pub n_periods: usize,
    pub gamma: f64,
    pub replications: usize,
    pub failures: usize,
    pub estimators: Vec<EstimatorMetrics>,
    /// Set when more than 1% of replications were dropped.
    pub warning: Option<String>,
}

impl McMetrics {
    pub fn get(&self, kind: VcovKind) -> Option<&EstimatorMetrics> {
        self.estimators.iter().find(|m| m.kind == kind)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation with the `R - 1` denominator.
fn sample_sd(v: &[f64]) -> f64 {
    let m = mean(v);
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (v.len() as f64 - 1.0)).sqrt()
}

/// Proportional bias `1 - mean(se) / sd`.
pub fn proportional_bias(se: &[f64], sd: f64) -> f64 {
    1.0 - mean(se) / sd
}

/// Mean absolute deviation of the standard errors from the Monte Carlo SD.
pub fn rmse(se: &[f64], sd: f64) -> f64 {
    se.iter().map(|s| ((s - sd) * (s - sd)).sqrt()).sum::<f64>() / se.len() as f64
}

pub fn size_metrics(run: &McRun) -> Result<McMetrics> {
    let cfg = &run.config;
    let r = run.draws.len();
    if r < 2 {
        return Err(Error::InsufficientDof(format!(
            "{r} successful replications; at least 2 are needed for a standard deviation"
        )));
    }
    let b1: Vec<f64> = run.draws.iter().map(|d| d.beta[B1]).collect();
    let b2: Vec<f64> = run.draws.iter().map(|d| d.beta[B2]).collect();
    let sd1 = sample_sd(&b1);
    let sd2 = sample_sd(&b2);
    let chi_crit = Distribution::ChiSquare { df: JOINT as f64 }.quantile(1.0 - cfg.alpha)?;

    let mut estimators = Vec::with_capacity(cfg.estimators.len());
    for (e, &kind) in cfg.estimators.iter().enumerate() {
        let se1: Vec<f64> = run.draws.iter().map(|d| d.estimators[e].se_b1).collect();
        let se2: Vec<f64> = run.draws.iter().map(|d| d.estimators[e].se_b2).collect();
        let df = run.draws[0].estimators[e].df;
        let t_crit = Distribution::StudentT { df }.quantile(1.0 - cfg.alpha / 2.0)?;
        let single = run
            .draws
            .iter()
            .filter(|d| d.estimators[e].t_null.abs() > t_crit)
            .count();
        let joint = run
            .draws
            .iter()
            .filter(|d| d.estimators[e].wald_null > chi_crit)
            .count();
        estimators.push(EstimatorMetrics {
            kind,
            pb_b1: proportional_bias(&se1, sd1),
            pb_b2: proportional_bias(&se2, sd2),
            rp_single: single as f64 / r as f64,
            rp_joint: joint as f64 / r as f64,
            rmse: rmse(&se1, sd1),
            sd_beta: sd1,
            mean_se: mean(&se1),
        });
    }

    let warning = (run.failure_rate() > 0.01).then(|| {
        format!(
            "{} of {} replications failed and were dropped (first: {})",
            run.failures.len(),
            cfg.replications,
            run.failures[0].1
        )
    });
    Ok(McMetrics {
        n_units: cfg.n_units,
        n_periods: cfg.n_periods,
        gamma: cfg.gamma,
        replications: r,
        failures: run.failures.len(),
        estimators,
        warning,
    })
}

/// Order statistic at 1-based index `ceil(p R)` of the sorted sample.
pub fn empirical_percentile(sample: &[f64], p: f64) -> f64 {
    assert!(!sample.is_empty(), "empty sample");
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let r = sorted.len();
    // Guard against p * R landing a hair above an integer.
    let idx = ((p * r as f64) - 1e-9).ceil().clamp(1.0, r as f64) as usize;
    sorted[idx - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub beta1_alt: f64,
    /// Size-adjusted rejection rate of `beta1 = beta1_alt`.
    pub rejection_rate: f64,
    /// Size-adjusted rejection rate of `(beta1..beta4) = (beta1_alt, b2, b3, b4)`.
    pub joint_rejection_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub kind: VcovKind,
    /// Empirical `alpha/2` and `1 - alpha/2` percentiles of the null t statistics.
    pub critical_lo: f64,
    pub critical_hi: f64,
    /// Empirical `1 - alpha` percentile of the null F statistics.
    pub critical_f: f64,
    pub points: Vec<PowerPoint>,
}

pub fn power_curves(run: &McRun, grid: &[f64]) -> Result<Vec<PowerCurve>> {
    if run.draws.is_empty() {
        return Err(Error::MissingNullSample);
    }
    let cfg = &run.config;
    let alpha = cfg.alpha;
    let q = JOINT as f64;
    let r = run.draws.len() as f64;
    let truth: Vec<f64> = (0..JOINT).map(|j| true_value(cfg, j)).collect();

    let mut curves = Vec::with_capacity(cfg.estimators.len());
    for (e, &kind) in cfg.estimators.iter().enumerate() {
        let t0: Vec<f64> = run.draws.iter().map(|d| d.estimators[e].t_null).collect();
        let f0: Vec<f64> = run
            .draws
            .iter()
            .map(|d| d.estimators[e].wald_null / q)
            .collect();
        let lo = empirical_percentile(&t0, alpha / 2.0);
        let hi = empirical_percentile(&t0, 1.0 - alpha / 2.0);
        let f_crit = empirical_percentile(&f0, 1.0 - alpha);

        let mut alt = truth.clone();
        let points = grid
            .iter()
            .map(|&b1| {
                let mut single = 0usize;
                let mut joint = 0usize;
                for d in &run.draws {
                    let est = &d.estimators[e];
                    let t1 = (d.beta[B1] - b1) / est.se_b1;
                    if t1 < lo || t1 > hi {
                        single += 1;
                    }
                    alt[B1] = b1;
                    let w1 = joint_wald(&d.beta, &est.joint_precision, &alt);
                    if w1 / q > f_crit {
                        joint += 1;
                    }
                }
                PowerPoint {
                    beta1_alt: b1,
                    rejection_rate: single as f64 / r,
                    joint_rejection_rate: joint as f64 / r,
                }
            })
            .collect();
        curves.push(PowerCurve {
            kind,
            critical_lo: lo,
            critical_hi: hi,
            critical_f: f_crit,
            points,
        });
    }
    Ok(curves)
}

pub fn run_size_experiment(cfg: &McConfig, threads: Option<usize>) -> Result<McMetrics> {
    size_metrics(&run_replications(cfg, threads)?)
}

pub fn run_power_experiment(cfg: &McConfig, threads: Option<usize>) -> Result<Vec<PowerCurve>> {
    let run = run_replications(cfg, threads)?;
    power_curves(&run, &cfg.power_grid)
}
