//! Covariance estimators for the within-group coefficient vector.
//!
//! Every estimate is returned on the finite-sample scale `Var(beta_hat)`,
//! i.e. as a sandwich `(X'X)^{-1} B (X'X)^{-1}` built from un-normalized
//! cross products and unit sums. The asymptotic-scale matrix used in
//! `sqrt(N)`-normalized statements is `N` times this.
//!
//! | kind         | middle matrix `B`                                 | factor                         |
//! |--------------|---------------------------------------------------|--------------------------------|
//! | conventional | `sigma^2 X'X`                                     | `sigma^2 = rss / (n - N - k)`  |
//! | PHC0         | `sum_i X_i' u_i u_i' X_i`                         | `(n-1)/(n-k) * N/(N-1)`        |
//! | PHC3         | `sum_i X_i' v_i v_i' X_i`, `v_i = (I-H_i)^{-1}u_i` | `(N-1)/N`                      |
//! | PHC6         | PHC3 terms for high-leverage units, PHC0 otherwise | per unit                       |
//! | PHCjk        | spread of leave-one-unit-out estimates            | `(N-1)/N`                      |

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe::{leave_one_out_all, mean_of, transformed_residual, FeFit, LeverageSet};
use crate::linalg::symmetrize;
use crate::panel::DemeanedPanel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VcovKind {
    Conventional,
    Phc0,
    Phc3,
    Phc6,
    Phcjk,
}

impl VcovKind {
    pub const ALL: [VcovKind; 5] = [
        VcovKind::Conventional,
        VcovKind::Phc0,
        VcovKind::Phc3,
        VcovKind::Phc6,
        VcovKind::Phcjk,
    ];

    /// The four cluster-robust estimators.
    pub const ROBUST: [VcovKind; 4] = [
        VcovKind::Phc0,
        VcovKind::Phc3,
        VcovKind::Phc6,
        VcovKind::Phcjk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VcovKind::Conventional => "conventional",
            VcovKind::Phc0 => "phc0",
            VcovKind::Phc3 => "phc3",
            VcovKind::Phc6 => "phc6",
            VcovKind::Phcjk => "phcjk",
        }
    }

    pub fn is_clustered(self) -> bool {
        self != VcovKind::Conventional
    }
}

impl fmt::Display for VcovKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VcovKind {
    type Err = Error;

    /// Accepts the canonical names plus the command-line aliases
    /// `robust` (PHC0) and `jackknife`/`jack` (PHCjk).
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "conventional" => Ok(VcovKind::Conventional),
            "phc0" | "robust" | "r" => Ok(VcovKind::Phc0),
            "phc3" => Ok(VcovKind::Phc3),
            "phc6" => Ok(VcovKind::Phc6),
            "phcjk" | "jackknife" | "jack" => Ok(VcovKind::Phcjk),
            other => Err(Error::Config(format!("unknown vce type `{other}`"))),
        }
    }
}

/// How the per-unit correction of PHC6 is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phc6Mode {
    /// Each unit's term carries the factor of its own branch.
    #[default]
    PerUnit,
    /// One factor for the whole sum: `c3` if any unit is flagged, else `c0`.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phc6Options {
    /// Units with maximal relative leverage at or above this are penalized.
    pub threshold: f64,
    pub mode: Phc6Mode,
}

impl Default for Phc6Options {
    fn default() -> Self {
        Phc6Options {
            threshold: 2.0,
            mode: Phc6Mode::PerUnit,
        }
    }
}

/// Finite-sample factors applied by an estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Correction {
    ResidualVariance {
        sigma2: f64,
        dof: f64,
    },
    Factor {
        factor: f64,
    },
    Hybrid {
        c0: f64,
        c3: f64,
        threshold: f64,
        mode: Phc6Mode,
    },
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Correction::ResidualVariance { sigma2, dof } => {
                write!(f, "sigma2 = {sigma2} on {dof} dof")
            }
            Correction::Factor { factor } => write!(f, "c = {factor}"),
            Correction::Hybrid {
                c0, c3, threshold, ..
            } => {
                write!(f, "c0 = {c0} for h* < {threshold}, c3 = {c3} otherwise")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VcovEstimate {
    #[serde(with = "matrix_rows")]
    pub matrix: DMatrix<f64>,
    pub kind: VcovKind,
    pub correction: Correction,
    /// Units penalized by PHC6 (`h*_i >= threshold`); empty for other kinds.
    pub flagged_units: Vec<usize>,
}

impl VcovEstimate {
    pub fn std_errors(&self) -> DVector<f64> {
        self.matrix.diagonal().map(|v| v.max(0.0).sqrt())
    }

    /// Write the matrix as CSV with the coefficient names as header and a
    /// leading row-name column.
    pub fn write_csv<W: Write>(&self, names: &[String], mut w: W) -> std::io::Result<()> {
        write!(w, "name")?;
        for n in names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for (i, n) in names.iter().enumerate() {
            write!(w, "{n}")?;
            for j in 0..self.matrix.ncols() {
                write!(w, ",{:e}", self.matrix[(i, j)])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("estimate serializes")
    }
}

mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let n = rows.len();
        let k = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != k) {
            return Err(serde::de::Error::custom("ragged matrix"));
        }
        Ok(DMatrix::from_fn(n, k, |i, j| rows[i][j]))
    }
}

/// `c0 = (n-1)/(n-k) * N/(N-1)`.
pub fn c0(n_obs: usize, n_units: usize, k: usize) -> f64 {
    let n = n_obs as f64;
    let big_n = n_units as f64;
    (n - 1.0) / (n - k as f64) * big_n / (big_n - 1.0)
}

/// `c3 = (N-1)/N`.
pub fn c3(n_units: usize) -> f64 {
    let big_n = n_units as f64;
    (big_n - 1.0) / big_n
}

fn require_clusters(fit: &FeFit) -> Result<()> {
    if fit.n_units < 2 {
        return Err(Error::InsufficientDof(
            "cluster-robust corrections need at least two units".into(),
        ));
    }
    if fit.n_obs <= fit.k {
        return Err(Error::InsufficientDof(format!(
            "n = {} does not exceed k = {}",
            fit.n_obs, fit.k
        )));
    }
    Ok(())
}

fn sandwich(fit: &FeFit, meat: &DMatrix<f64>) -> DMatrix<f64> {
    let mut v = &fit.sxx_inv * meat * &fit.sxx_inv;
    symmetrize(&mut v);
    v
}

fn add_outer(acc: &mut DMatrix<f64>, s: &DVector<f64>) {
    acc.ger(1.0, s, s, 1.0);
}

pub fn vcov_conventional(fit: &FeFit) -> Result<VcovEstimate> {
    let dof = fit.residual_dof();
    if dof <= 0 {
        return Err(Error::InsufficientDof(format!(
            "n - N - k = {dof} leaves no residual degrees of freedom"
        )));
    }
    let sigma2 = fit.rss / dof as f64;
    let mut matrix = &fit.sxx_inv * sigma2;
    symmetrize(&mut matrix);
    Ok(VcovEstimate {
        matrix,
        kind: VcovKind::Conventional,
        correction: Correction::ResidualVariance {
            sigma2,
            dof: dof as f64,
        },
        flagged_units: Vec::new(),
    })
}

pub fn vcov_phc0(fit: &FeFit, panel: &DemeanedPanel) -> Result<VcovEstimate> {
    require_clusters(fit)?;
    let k = fit.k;
    let mut meat = DMatrix::zeros(k, k);
    for (u, r) in panel.units().iter().zip(&fit.residuals) {
        add_outer(&mut meat, &u.x.tr_mul(r));
    }
    let c = c0(fit.n_obs, fit.n_units, k);
    meat *= c;
    Ok(VcovEstimate {
        matrix: sandwich(fit, &meat),
        kind: VcovKind::Phc0,
        correction: Correction::Factor { factor: c },
        flagged_units: Vec::new(),
    })
}

pub fn vcov_phc3(fit: &FeFit, panel: &DemeanedPanel, lev: &LeverageSet) -> Result<VcovEstimate> {
    require_clusters(fit)?;
    let k = fit.k;
    let mut meat = DMatrix::zeros(k, k);
    for (i, u) in panel.units().iter().enumerate() {
        let v = transformed_residual(fit, &u.x, &lev.hat[i], i)?;
        add_outer(&mut meat, &u.x.tr_mul(&v));
    }
    let c = c3(fit.n_units);
    meat *= c;
    Ok(VcovEstimate {
        matrix: sandwich(fit, &meat),
        kind: VcovKind::Phc3,
        correction: Correction::Factor { factor: c },
        flagged_units: Vec::new(),
    })
}

pub fn vcov_phc6(
    fit: &FeFit,
    panel: &DemeanedPanel,
    lev: &LeverageSet,
    opts: Phc6Options,
) -> Result<VcovEstimate> {
    require_clusters(fit)?;
    let k = fit.k;
    let flagged = lev.flagged(opts.threshold);
    let mut is_flagged = vec![false; fit.n_units];
    for &i in &flagged {
        is_flagged[i] = true;
    }

    // Unflagged units accumulate exactly as in PHC0 and flagged units exactly
    // as in PHC3, so the boundary cases reproduce those estimators bit for bit.
    let mut plain = DMatrix::zeros(k, k);
    let mut penalized = DMatrix::zeros(k, k);
    for (i, u) in panel.units().iter().enumerate() {
        if is_flagged[i] {
            let v = transformed_residual(fit, &u.x, &lev.hat[i], i)?;
            add_outer(&mut penalized, &u.x.tr_mul(&v));
        } else {
            add_outer(&mut plain, &u.x.tr_mul(&fit.residuals[i]));
        }
    }

    let c_plain = c0(fit.n_obs, fit.n_units, k);
    let c_pen = c3(fit.n_units);
    let meat = match opts.mode {
        Phc6Mode::PerUnit => {
            if flagged.is_empty() {
                plain * c_plain
            } else if flagged.len() == fit.n_units {
                penalized * c_pen
            } else {
                plain * c_plain + penalized * c_pen
            }
        }
        Phc6Mode::Global => {
            if flagged.is_empty() {
                plain * c_plain
            } else if flagged.len() == fit.n_units {
                penalized * c_pen
            } else {
                (plain + penalized) * c_pen
            }
        }
    };

    Ok(VcovEstimate {
        matrix: sandwich(fit, &meat),
        kind: VcovKind::Phc6,
        correction: Correction::Hybrid {
            c0: c_plain,
            c3: c_pen,
            threshold: opts.threshold,
            mode: opts.mode,
        },
        flagged_units: flagged,
    })
}

/// Jackknife covariance from leave-one-unit-out refits:
/// `(N-1)/N * sum_i (b_(i) - b_bar)(b_(i) - b_bar)'`.
pub fn vcov_phcjk(fit: &FeFit, panel: &DemeanedPanel, lev: &LeverageSet) -> Result<VcovEstimate> {
    require_clusters(fit)?;
    let k = fit.k;
    let set = leave_one_out_all(fit, panel, Some(lev))?;
    let mean = mean_of(&set, k);
    let mut spread = DMatrix::zeros(k, k);
    for b in &set.betas {
        add_outer(&mut spread, &(b - &mean.beta_bar));
    }
    let c = c3(fit.n_units);
    let mut matrix = spread * c;
    symmetrize(&mut matrix);
    Ok(VcovEstimate {
        matrix,
        kind: VcovKind::Phcjk,
        correction: Correction::Factor { factor: c },
        flagged_units: Vec::new(),
    })
}

/// Closed-form jackknife: `(N-1)/N (X'X)^{-1} { sum_i g_i g_i' - N mu* mu*' } (X'X)^{-1}`
/// with `g_i = X_i' (I - H_i)^{-1} u_i` and `mu* = N^{-1} sum_i g_i`.
///
/// Algebraically identical to [`vcov_phcjk`]; kept as an independent route
/// for cross-checking.
pub fn vcov_phcjk_closed_form(
    fit: &FeFit,
    panel: &DemeanedPanel,
    lev: &LeverageSet,
) -> Result<DMatrix<f64>> {
    require_clusters(fit)?;
    let k = fit.k;
    let big_n = fit.n_units as f64;
    let mut gram = DMatrix::zeros(k, k);
    let mut total = DVector::zeros(k);
    for (i, u) in panel.units().iter().enumerate() {
        let v = transformed_residual(fit, &u.x, &lev.hat[i], i)?;
        let g = u.x.tr_mul(&v);
        add_outer(&mut gram, &g);
        total += g;
    }
    let mu = total / big_n;
    let meat = (gram - &mu * mu.transpose() * big_n) * c3(fit.n_units);
    Ok(sandwich(fit, &meat))
}

/// Compute an estimator by kind, deriving leverage only when needed.
pub fn estimate(
    kind: VcovKind,
    fit: &FeFit,
    panel: &DemeanedPanel,
    lev: Option<&LeverageSet>,
    opts: Phc6Options,
) -> Result<VcovEstimate> {
    let owned;
    let lev = match (kind, lev) {
        (VcovKind::Conventional | VcovKind::Phc0, _) => None,
        (_, Some(l)) => Some(l),
        (_, None) => {
            owned = crate::fe::leverage(fit, panel)?;
            Some(&owned)
        }
    };
    match kind {
        VcovKind::Conventional => vcov_conventional(fit),
        VcovKind::Phc0 => vcov_phc0(fit, panel),
        VcovKind::Phc3 => vcov_phc3(fit, panel, lev.expect("leverage")),
        VcovKind::Phc6 => vcov_phc6(fit, panel, lev.expect("leverage"), opts),
        VcovKind::Phcjk => vcov_phcjk(fit, panel, lev.expect("leverage")),
    }
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone());
    let min = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let max = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::{fit_within, leverage};

    fn toy() -> DemeanedPanel {
        use crate::panel::{within_transform, Label, Observation, PanelDataset};
        let rows = [
            (1, 1, 0.0, 0.0),
            (1, 2, 1.0, 1.0),
            (2, 1, 0.0, 0.0),
            (2, 2, 2.0, 2.0),
        ];
        let obs = rows
            .iter()
            .map(|&(u, t, y, x)| Observation {
                unit: Label::Int(u),
                time: Label::Int(t),
                y,
                x: vec![x],
            })
            .collect();
        within_transform(&PanelDataset::from_observations(obs, vec!["x".into()]).unwrap())
    }

    #[test]
    fn correction_factors() {
        assert!((c0(125, 25, 5) - (124.0 / 120.0) * (25.0 / 24.0)).abs() < 1e-15);
        assert!((c0(125, 25, 5) - 1.076389).abs() < 1e-6);
        assert!((c3(25) - 0.96).abs() < 1e-15);
    }

    #[test]
    fn perfect_fit_gives_zero_matrices() {
        let d = toy();
        let fit = fit_within(&d).unwrap();
        let lev = leverage(&fit, &d).unwrap();
        // n - N - k = 4 - 2 - 1 = 1
        let conv = vcov_conventional(&fit).unwrap();
        assert!(conv.matrix[(0, 0)].abs() < 1e-28);
        for kind in VcovKind::ROBUST {
            let v = estimate(kind, &fit, &d, Some(&lev), Phc6Options::default()).unwrap();
            assert!(v.matrix[(0, 0)].abs() < 1e-28, "{kind}");
        }
        let phc6 = vcov_phc6(&fit, &d, &lev, Phc6Options::default()).unwrap();
        assert!(phc6.flagged_units.is_empty());
    }

    #[test]
    fn conventional_needs_residual_dof() {
        let mut fit = fit_within(&toy()).unwrap();
        fit.n_obs = 3;
        assert!(matches!(
            vcov_conventional(&fit).unwrap_err(),
            Error::InsufficientDof(_)
        ));
    }

    #[test]
    fn conventional_sigma2_arithmetic() {
        let mut fit = fit_within(&toy()).unwrap();
        fit.rss = 10.0;
        fit.n_obs = 125;
        fit.n_units = 25;
        fit.k = 5;
        let v = vcov_conventional(&fit).unwrap();
        match v.correction {
            Correction::ResidualVariance { sigma2, dof } => {
                assert_eq!(dof, 95.0);
                assert!((sigma2 - 10.0 / 95.0).abs() < 1e-16);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in VcovKind::ALL {
            assert_eq!(kind.name().parse::<VcovKind>().unwrap(), kind);
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.name()));
        }
        assert_eq!("robust".parse::<VcovKind>().unwrap(), VcovKind::Phc0);
        assert_eq!("jackknife".parse::<VcovKind>().unwrap(), VcovKind::Phcjk);
        assert!("hc4".parse::<VcovKind>().is_err());
    }

    #[test]
    fn json_and_csv_layout() {
        let est = VcovEstimate {
            matrix: DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]),
            kind: VcovKind::Phc6,
            correction: Correction::Factor { factor: 0.96 },
            flagged_units: vec![3],
        };
        let json: serde_json::Value = serde_json::from_str(&est.to_json()).unwrap();
        assert_eq!(json["kind"], "phc6");
        assert_eq!(json["matrix"][0][1], 0.5);
        assert_eq!(json["flagged_units"][0], 3);
        let back: VcovEstimate = serde_json::from_str(&est.to_json()).unwrap();
        assert_eq!(back, est);

        let mut buf = Vec::new();
        est.write_csv(&["a".into(), "b".into()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "name,a,b");
        assert!(lines[1].starts_with("a,1e0,5e-1"));
    }
}
