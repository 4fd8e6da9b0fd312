//! Data generating process of the simulation study.
//!
//! ```text
//! y_it = b0 + sum_j b_j x_it,j + alpha_i + u_it
//! x1, x2 ~ N(0, 1)       (x1 optionally contaminated with N(5, 25^2) cells)
//! x3 = x1^2, x4 = x2^2, x5 = x1 x2
//! alpha_i ~ U(0, 1)
//! u_it = sigma_it e_it + theta e_i,t-1,   e_it ~ N(0, 1)
//! sigma_it^2 = z W_it^gamma,  W_it = b0 + sum_j b_j x_it,j,  z = 1 / mean(W^gamma)
//! ```
//!
//! Each replication draws from its own ChaCha20 stream (`seed`, stream =
//! replication index), so any replication can be regenerated in isolation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::{McConfig, N_REGRESSORS};
use crate::error::{Error, Result};
use crate::panel::PanelDataset;

pub fn regressor_names() -> Vec<String> {
    (1..=N_REGRESSORS).map(|j| format!("x{j}")).collect()
}

/// Independent generator for replication `rep`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// A generated panel with the quantities the tests need to check it.
#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    pub panel: PanelDataset,
    /// Error variance of each cell in unit-major order.
    pub sigma2: Vec<f64>,
    /// Normalizing factor `z(gamma)` of this draw.
    pub z: f64,
    /// Sorted cell indices (unit-major) whose `x1` was replaced.
    pub contaminated: Vec<usize>,
    pub fixed_effects: Vec<f64>,
}

pub fn generate_panel(cfg: &McConfig, rep: u64) -> Result<SimulatedPanel> {
    cfg.validate()?;
    let n = cfg.n_units;
    let t = cfg.n_periods;
    let cells = n * t;
    let mut rng = replication_rng(cfg.seed, rep);
    let normal = |rng: &mut ChaCha20Rng| -> f64 { StandardNormal.sample(rng) };

    let mut x1 = Vec::with_capacity(cells);
    let mut x2 = Vec::with_capacity(cells);
    for _ in 0..cells {
        x1.push(normal(&mut rng));
        x2.push(normal(&mut rng));
    }

    let mut contaminated = Vec::new();
    let m = cfg.contaminated_cells();
    if m > 0 {
        contaminated = rand::seq::index::sample(&mut rng, cells, m).into_vec();
        contaminated.sort_unstable();
        let c = &cfg.contamination;
        for &cell in &contaminated {
            x1[cell] = c.mean + c.sd * normal(&mut rng);
        }
    }

    let alpha: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();

    let b = &cfg.betas;
    let regressors = |cell: usize| -> [f64; N_REGRESSORS] {
        let (a, c) = (x1[cell], x2[cell]);
        [a, c, a * a, c * c, a * c]
    };
    let w: Vec<f64> = (0..cells)
        .map(|cell| {
            let x = regressors(cell);
            b[0] + x.iter().zip(&b[1..]).map(|(xj, bj)| xj * bj).sum::<f64>()
        })
        .collect();
    let power = cfg.gamma as i32;
    let w_pow: Vec<f64> = w.iter().map(|v| v.powi(power)).collect();
    let mean_pow = w_pow.iter().sum::<f64>() / cells as f64;
    if !(mean_pow > 0.0 && mean_pow.is_finite()) {
        return Err(Error::Config(format!(
            "mean of W^gamma is {mean_pow}; the variance normalization is undefined"
        )));
    }
    let z = 1.0 / mean_pow;
    let sigma2: Vec<f64> = w_pow.iter().map(|v| z * v).collect();

    // The MA term starts from a zero pre-sample innovation.
    let mut blocks = Vec::with_capacity(n);
    for (i, a_i) in alpha.iter().enumerate() {
        let mut y = DVector::zeros(t);
        let mut x = DMatrix::zeros(t, N_REGRESSORS);
        let mut prev_eps = 0.0;
        for s in 0..t {
            let cell = i * t + s;
            let eps = normal(&mut rng);
            let u = sigma2[cell].sqrt() * eps + cfg.theta * prev_eps;
            prev_eps = eps;
            let xs = regressors(cell);
            for (j, v) in xs.iter().enumerate() {
                x[(s, j)] = *v;
            }
            y[s] = w[cell] + a_i + u;
        }
        blocks.push((y, x));
    }

    Ok(SimulatedPanel {
        panel: PanelDataset::from_balanced_blocks(blocks, regressor_names())?,
        sigma2,
        z,
        contaminated,
        fixed_effects: alpha,
    })
}

/// Analytic moments of `W = b0 + sum_j b_j x_j` for independent normal
/// regressors `x_j ~ N(mu_j, sd_j^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WMoments {
    pub mean_w: f64,
    pub var_w: f64,
    pub mean_w2: f64,
    pub var_w2: f64,
}

pub fn moments_of_w(beta0: f64, slopes: &[f64], mu: &[f64], sd: &[f64]) -> WMoments {
    assert!(slopes.len() == mu.len() && mu.len() == sd.len());
    let mean_w = beta0 + slopes.iter().zip(mu).map(|(b, m)| b * m).sum::<f64>();
    let var_w: f64 = slopes.iter().zip(sd).map(|(b, s)| b * b * s * s).sum();

    // E W^2 expanded term by term; cross products over unordered pairs.
    let mut mean_w2 = beta0 * beta0;
    for j in 0..slopes.len() {
        mean_w2 += slopes[j] * slopes[j] * (sd[j] * sd[j] + mu[j] * mu[j]);
        mean_w2 += 2.0 * beta0 * slopes[j] * mu[j];
        for k in (j + 1)..slopes.len() {
            mean_w2 += 2.0 * slopes[j] * slopes[k] * mu[j] * mu[k];
        }
    }

    // W is normal, so Var(W^2) = 2 s^4 + 4 m^2 s^2.
    let var_w2 = 2.0 * var_w * var_w + 4.0 * mean_w * mean_w * var_w;

    WMoments {
        mean_w,
        var_w,
        mean_w2,
        var_w2,
    }
}

/// Draw `count` values of `W` with every slope's regressor iid `N(0, 1)`.
pub fn sample_w_iid_normal(betas: &[f64], count: usize, seed: u64) -> Vec<f64> {
    let mut rng = replication_rng(seed, u64::MAX);
    (0..count)
        .map(|_| {
            betas[0]
                + betas[1..]
                    .iter()
                    .map(|b| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        b * e
                    })
                    .sum::<f64>()
        })
        .collect()
}
