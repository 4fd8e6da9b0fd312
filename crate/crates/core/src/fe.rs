//! Within-group OLS, per-unit leverage and leave-one-unit-out estimates.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, PivotedQr};
use crate::panel::DemeanedPanel;

/// Relative pivot tolerance used to declare the pooled design rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Smallest admissible eigenvalue of `I - H_i`.
pub const PERFECT_LEVERAGE_TOLERANCE: f64 = 1e-10;

/// Residual norms below this fraction of the response norm are rounding
/// noise of an exact fit and are set to zero.
pub const EXACT_FIT_TOLERANCE: f64 = 1e-13;

/// Within-group OLS fit.
#[derive(Debug, Clone)]
pub struct FeFit {
    pub beta: DVector<f64>,
    /// Per-unit residuals `u_i = y_i - X_i beta`.
    pub residuals: Vec<DVector<f64>>,
    /// Un-normalized cross product `X'X` of the demeaned design.
    pub sxx: DMatrix<f64>,
    pub sxx_inv: DMatrix<f64>,
    pub n_obs: usize,
    pub n_units: usize,
    pub k: usize,
    pub periods: Vec<usize>,
    pub rss: f64,
    /// Lower Cholesky factor of `sxx`, used to reduce per-unit spectra to k x k.
    sxx_chol: DMatrix<f64>,
}

impl FeFit {
    /// Residual degrees of freedom `n - N - k` of the conventional estimator.
    pub fn residual_dof(&self) -> i64 {
        self.n_obs as i64 - self.n_units as i64 - self.k as i64
    }

    /// Smallest eigenvalue of `I - H_i` for a unit with demeaned block `x`.
    ///
    /// The nonzero spectrum of `H_i = X_i (X'X)^{-1} X_i'` equals that of
    /// `L^{-1} X_i'X_i L^{-T}` with `X'X = L L'`, so a k x k problem suffices.
    pub fn min_eig_i_minus_h(&self, x: &DMatrix<f64>) -> f64 {
        if x.nrows() == 0 {
            return 1.0;
        }
        let g = x.tr_mul(x);
        let l = &self.sxx_chol;
        let w = l
            .solve_lower_triangular(&g)
            .expect("Cholesky factor has a nonzero diagonal");
        let mut c = l
            .solve_lower_triangular(&w.transpose())
            .expect("Cholesky factor has a nonzero diagonal");
        symmetrize(&mut c);
        let eig = SymmetricEigen::new(c);
        let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        1.0 - max
    }

    /// Per-unit hat block `H_i = X_i (X'X)^{-1} X_i'`.
    pub fn hat_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut h = x * &self.sxx_inv * x.transpose();
        symmetrize(&mut h);
        h
    }
}

/// Least squares on the stacked demeaned design via pivoted QR.
pub fn fit_within(panel: &DemeanedPanel) -> Result<FeFit> {
    let k = panel.k();
    let (x, y) = panel.stacked();
    if x.nrows() < k {
        return Err(Error::SingularDesign {
            columns: panel.column_names().to_vec(),
        });
    }
    let qr = PivotedQr::new(&x, RANK_TOLERANCE);
    if !qr.is_full_rank() {
        let columns = qr
            .deficient_columns()
            .into_iter()
            .map(|c| panel.column_names()[c].clone())
            .collect();
        return Err(Error::SingularDesign { columns });
    }
    let beta = qr.solve(&y);
    let sxx_inv = qr.gram_inverse();

    let mut sxx = DMatrix::zeros(k, k);
    for u in panel.units() {
        sxx += u.x.tr_mul(&u.x);
    }
    symmetrize(&mut sxx);
    let sxx_chol = Cholesky::new(sxx.clone())
        .ok_or_else(|| Error::SingularDesign {
            columns: panel.column_names().to_vec(),
        })?
        .unpack();

    let mut residuals: Vec<DVector<f64>> =
        panel.units().iter().map(|u| &u.y - &u.x * &beta).collect();
    let mut rss: f64 = residuals.iter().map(|r| r.norm_squared()).sum();
    if rss.sqrt() <= EXACT_FIT_TOLERANCE * y.norm() {
        residuals.iter_mut().for_each(|r| r.fill(0.0));
        rss = 0.0;
    }

    Ok(FeFit {
        beta,
        residuals,
        sxx,
        sxx_inv,
        n_obs: panel.n_obs(),
        n_units: panel.n_units(),
        k,
        periods: panel.units().iter().map(|u| u.len()).collect(),
        rss,
        sxx_chol,
    })
}

/// Hat blocks and the derived leverage summaries.
#[derive(Debug, Clone)]
pub struct LeverageSet {
    pub hat: Vec<DMatrix<f64>>,
    /// Diagonal leverages `h_itt` per unit.
    pub diag: Vec<DVector<f64>>,
    /// Average leverage at each time position over the non-singleton units
    /// observed there; `None` where no such unit exists.
    pub h_bar: Vec<Option<f64>>,
    /// Maximal relative leverage `max_t h_itt / h_bar_tt`; zero for singletons.
    pub h_star: Vec<f64>,
}

impl LeverageSet {
    pub fn total(&self) -> f64 {
        self.diag.iter().map(|d| d.sum()).sum()
    }

    /// Indices of units with `h_star >= threshold`.
    pub fn flagged(&self, threshold: f64) -> Vec<usize> {
        self.h_star
            .iter()
            .enumerate()
            .filter(|(_, &h)| h >= threshold)
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn leverage(fit: &FeFit, panel: &DemeanedPanel) -> Result<LeverageSet> {
    let hat: Vec<DMatrix<f64>> = panel.units().iter().map(|u| fit.hat_block(&u.x)).collect();
    let diag: Vec<DVector<f64>> = hat.iter().map(|h| h.diagonal()).collect();

    let p = panel.n_positions();
    let mut sums = vec![0.0; p];
    let mut counts = vec![0usize; p];
    for (u, d) in panel.units().iter().zip(&diag) {
        if u.len() < 2 {
            continue;
        }
        for (&pos, &h) in u.time_pos.iter().zip(d.iter()) {
            sums[pos] += h;
            counts[pos] += 1;
        }
    }
    let mut h_bar = Vec::with_capacity(p);
    for pos in 0..p {
        if counts[pos] == 0 {
            h_bar.push(None);
        } else {
            let mean = sums[pos] / counts[pos] as f64;
            if mean <= 0.0 {
                return Err(Error::DegenerateLeverage { position: pos });
            }
            h_bar.push(Some(mean));
        }
    }

    let h_star = panel
        .units()
        .iter()
        .zip(&diag)
        .map(|(u, d)| {
            if u.len() < 2 {
                return 0.0;
            }
            u.time_pos
                .iter()
                .zip(d.iter())
                .filter_map(|(&pos, &h)| h_bar[pos].map(|hb| h / hb))
                .fold(0.0, f64::max)
        })
        .collect();

    Ok(LeverageSet {
        hat,
        diag,
        h_bar,
        h_star,
    })
}

/// Transformed residual `v_i = (I - H_i)^{-1} u_i` given the unit's hat block.
pub fn transformed_residual(
    fit: &FeFit,
    x: &DMatrix<f64>,
    hat: &DMatrix<f64>,
    unit: usize,
) -> Result<DVector<f64>> {
    let min_eig = fit.min_eig_i_minus_h(x);
    if min_eig < PERFECT_LEVERAGE_TOLERANCE {
        return Err(Error::PerfectLeverage {
            unit,
            min_eigenvalue: min_eig,
        });
    }
    let t = hat.nrows();
    let m = DMatrix::<f64>::identity(t, t) - hat;
    let u = &fit.residuals[unit];
    match Cholesky::<f64, Dyn>::new(m.clone()) {
        Some(chol) => Ok(chol.solve(u)),
        None => m.lu().solve(u).ok_or(Error::PerfectLeverage {
            unit,
            min_eigenvalue: min_eig,
        }),
    }
}

fn loo_from_hat(
    fit: &FeFit,
    panel: &DemeanedPanel,
    hat: &DMatrix<f64>,
    unit: usize,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let x = &panel.units()[unit].x;
    let v = transformed_residual(fit, x, hat, unit)?;
    let score = x.tr_mul(&v);
    let beta = &fit.beta - &fit.sxx_inv * &score;
    Ok((beta, score))
}

/// Coefficients re-estimated without unit `unit`, via the Woodbury update
/// `beta - (X'X)^{-1} X_i' (I - H_i)^{-1} u_i`.
pub fn leave_one_out(fit: &FeFit, panel: &DemeanedPanel, unit: usize) -> Result<DVector<f64>> {
    if fit.n_units < 2 {
        return Err(Error::InsufficientDof(
            "leave-one-unit-out needs at least two units".into(),
        ));
    }
    let hat = fit.hat_block(&panel.units()[unit].x);
    loo_from_hat(fit, panel, &hat, unit).map(|(b, _)| b)
}

/// All leave-one-out estimates together with the scores `X_i' v_i`.
#[derive(Debug, Clone)]
pub struct LooSet {
    pub betas: Vec<DVector<f64>>,
    pub scores: Vec<DVector<f64>>,
}

/// Leave-one-out estimates for every unit, reusing hat blocks when given.
pub fn leave_one_out_all(
    fit: &FeFit,
    panel: &DemeanedPanel,
    lev: Option<&LeverageSet>,
) -> Result<LooSet> {
    if fit.n_units < 2 {
        return Err(Error::InsufficientDof(
            "leave-one-unit-out needs at least two units".into(),
        ));
    }
    let mut betas = Vec::with_capacity(fit.n_units);
    let mut scores = Vec::with_capacity(fit.n_units);
    for (i, u) in panel.units().iter().enumerate() {
        let (b, s) = match lev {
            Some(l) => loo_from_hat(fit, panel, &l.hat[i], i)?,
            None => loo_from_hat(fit, panel, &fit.hat_block(&u.x), i)?,
        };
        betas.push(b);
        scores.push(s);
    }
    Ok(LooSet { betas, scores })
}

/// Mean of the leave-one-out estimates and the average score `mu*`.
#[derive(Debug, Clone)]
pub struct LooMean {
    pub beta_bar: DVector<f64>,
    /// `N^{-1} sum_i X_i' (I - H_i)^{-1} u_i`, so that
    /// `beta_bar = beta - (X'X)^{-1} mu*`.
    pub mu_star: DVector<f64>,
}

pub fn loo_mean(fit: &FeFit, panel: &DemeanedPanel) -> Result<LooMean> {
    let set = leave_one_out_all(fit, panel, None)?;
    Ok(mean_of(&set, fit.k))
}

pub(crate) fn mean_of(set: &LooSet, k: usize) -> LooMean {
    let n = set.betas.len() as f64;
    let mut beta_bar = DVector::zeros(k);
    let mut mu_star = DVector::zeros(k);
    for (b, s) in set.betas.iter().zip(&set.scores) {
        beta_bar += b;
        mu_star += s;
    }
    LooMean {
        beta_bar: beta_bar / n,
        mu_star: mu_star / n,
    }
}
