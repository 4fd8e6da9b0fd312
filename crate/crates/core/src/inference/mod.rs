//! Single-coefficient t tests, joint Wald/F tests and confidence intervals.
//!
//! Degrees of freedom follow the clustering of the covariance estimate:
//! `N - 1` for the cluster-robust kinds and `n - N - k` for the
//! conventional estimator.

pub mod dist;
pub mod special;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use dist::Distribution;

use crate::error::{Error, Result};
use crate::fe::FeFit;
use crate::linalg::PivotedQr;
use crate::vcov::{VcovEstimate, VcovKind};

/// Nominal levels at which every test records a reject/accept decision.
pub const REPORT_LEVELS: [f64; 3] = [0.01, 0.05, 0.10];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "snake_case")]
pub enum Dof {
    StudentT { df: f64 },
    ChiSquare { df: f64 },
    F { df1: f64, df2: f64 },
}

impl Dof {
    pub fn distribution(self) -> Distribution {
        match self {
            Dof::StudentT { df } => Distribution::StudentT { df },
            Dof::ChiSquare { df } => Distribution::ChiSquare { df },
            Dof::F { df1, df2 } => Distribution::F { df1, df2 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub dof: Dof,
    pub p_value: f64,
    /// `(alpha, p_value < alpha)` for each of [`REPORT_LEVELS`].
    pub reject_at: Vec<(f64, bool)>,
    pub vce_kind: VcovKind,
}

impl TestResult {
    fn new(statistic: f64, dof: Dof, p_value: f64, vce_kind: VcovKind) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestResult {
            statistic,
            dof,
            p_value,
            reject_at: REPORT_LEVELS.iter().map(|&a| (a, p_value < a)).collect(),
            vce_kind,
        }
    }

    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Degrees of freedom of t and F reference distributions for a fit.
pub fn residual_df(fit: &FeFit, kind: VcovKind) -> f64 {
    if kind.is_clustered() {
        fit.n_units as f64 - 1.0
    } else {
        fit.residual_dof() as f64
    }
}

/// Linear hypothesis `R beta = r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRestriction {
    r_mat: DMatrix<f64>,
    r: DVector<f64>,
}

impl LinearRestriction {
    pub fn new(r_mat: DMatrix<f64>, r: DVector<f64>) -> Result<Self> {
        let q = r_mat.nrows();
        if q == 0 || q > r_mat.ncols() || r.len() != q {
            return Err(Error::Config(format!(
                "restriction has {q} rows, {} columns and {} targets",
                r_mat.ncols(),
                r.len()
            )));
        }
        if PivotedQr::new(&r_mat.transpose(), 1e-12).rank() < q {
            return Err(Error::Config(
                "restriction rows are linearly dependent".into(),
            ));
        }
        Ok(LinearRestriction { r_mat, r })
    }

    /// `beta[j] = value` for each `(j, value)` pair.
    pub fn select(k: usize, targets: &[(usize, f64)]) -> Result<Self> {
        let mut r_mat = DMatrix::zeros(targets.len(), k);
        let mut r = DVector::zeros(targets.len());
        for (row, &(j, value)) in targets.iter().enumerate() {
            if j >= k {
                return Err(Error::Config(format!("coefficient index {j} out of range")));
            }
            r_mat[(row, j)] = 1.0;
            r[row] = value;
        }
        Self::new(r_mat, r)
    }

    pub fn q(&self) -> usize {
        self.r_mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.r_mat
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.r
    }
}

fn two_sided(dist: Distribution, stat: f64) -> Result<f64> {
    let (lo, hi) = dist.tails(stat)?;
    Ok((2.0 * lo.min(hi)).min(1.0))
}

/// Two-sided test of `beta[j] = beta0`.
pub fn t_test(fit: &FeFit, vcov: &VcovEstimate, j: usize, beta0: f64) -> Result<TestResult> {
    let diff = fit.beta[j] - beta0;
    let var = vcov.matrix[(j, j)];
    let statistic = if diff == 0.0 {
        0.0
    } else if var > 0.0 {
        diff / var.sqrt()
    } else {
        return Err(Error::InfiniteStatistic);
    };
    let df = residual_df(fit, vcov.kind);
    let dof = Dof::StudentT { df };
    let p = two_sided(dof.distribution(), statistic)?;
    Ok(TestResult::new(statistic, dof, p, vcov.kind))
}

/// Joint test reported both as `W ~ chi2(q)` and `W / q ~ F(q, df)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldTest {
    pub chi2: TestResult,
    pub f: TestResult,
}

/// Wald quadratic form `(R b - r)' (R V R')^{-1} (R b - r)`.
pub fn wald_statistic(
    beta: &DVector<f64>,
    vcov: &DMatrix<f64>,
    restr: &LinearRestriction,
) -> Result<f64> {
    let diff = restr.matrix() * beta - restr.target();
    if diff.iter().all(|&d| d == 0.0) {
        return Ok(0.0);
    }
    let middle = restr.matrix() * vcov * restr.matrix().transpose();
    let chol = nalgebra::Cholesky::new(middle).ok_or(Error::CollinearRestriction)?;
    let w = diff.dot(&chol.solve(&diff));
    if !w.is_finite() {
        return Err(Error::CollinearRestriction);
    }
    Ok(w)
}

pub fn wald_test(fit: &FeFit, vcov: &VcovEstimate, restr: &LinearRestriction) -> Result<WaldTest> {
    if restr.matrix().ncols() != fit.k {
        return Err(Error::Config(format!(
            "restriction has {} columns, model has {} coefficients",
            restr.matrix().ncols(),
            fit.k
        )));
    }
    let w = wald_statistic(&fit.beta, &vcov.matrix, restr)?;
    let q = restr.q() as f64;
    let chi_dof = Dof::ChiSquare { df: q };
    let f_dof = Dof::F {
        df1: q,
        df2: residual_df(fit, vcov.kind),
    };
    let chi_p = chi_dof.distribution().sf(w)?;
    let f_p = f_dof.distribution().sf(w / q)?;
    Ok(WaldTest {
        chi2: TestResult::new(w, chi_dof, chi_p, vcov.kind),
        f: TestResult::new(w / q, f_dof, f_p, vcov.kind),
    })
}

/// `beta[j] +/- t_{df, (1 + level)/2} se_j`.
pub fn conf_interval(fit: &FeFit, vcov: &VcovEstimate, j: usize, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level {level}")));
    }
    let se = vcov.matrix[(j, j)].max(0.0).sqrt();
    let b = fit.beta[j];
    if se == 0.0 {
        return Ok((b, b));
    }
    let df = residual_df(fit, vcov.kind);
    let crit = Distribution::StudentT { df }.quantile(0.5 * (1.0 + level))?;
    Ok((b - crit * se, b + crit * se))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restriction_validation() {
        assert!(LinearRestriction::select(3, &[(0, 1.0), (2, 0.0)]).is_ok());
        assert!(LinearRestriction::select(3, &[(3, 1.0)]).is_err());
        let dup = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        assert!(LinearRestriction::new(dup, DVector::zeros(2)).is_err());
    }
}
