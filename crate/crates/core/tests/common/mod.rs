#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use panelhc::panel::Observation;
use panelhc::{Label, PanelDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Unbalanced panel with `2..=max_t` observations per unit drawn from a
/// common set of `max_t + 2` periods, heteroskedastic errors and a few
/// high-leverage cells.
pub fn random_panel(seed: u64, n_units: usize, max_t: usize, k: usize) -> PanelDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = Vec::new();
    let beta: Vec<f64> = (0..k).map(|j| 0.5 + j as f64).collect();
    for i in 0..n_units {
        let t_i = rng.random_range(2..=max_t);
        let mut periods: Vec<i64> = (0..(max_t as i64 + 2)).collect();
        for s in 0..t_i {
            let pick = rng.random_range(s..periods.len());
            periods.swap(s, pick);
        }
        let alpha: f64 = rng.random::<f64>() * 3.0;
        for &t in &periods[..t_i] {
            let mut x: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
            if rng.random::<f64>() < 0.05 {
                x[0] *= 6.0;
            }
            let e: f64 = StandardNormal.sample(&mut rng);
            let scale = 0.5 + x[0].abs();
            let y = alpha + x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + scale * e;
            obs.push(Observation {
                unit: Label::Int(i as i64),
                time: Label::Int(2000 + t),
                y,
                x,
            });
        }
    }
    let names = (1..=k).map(|j| format!("x{j}")).collect();
    PanelDataset::from_observations(obs, names).unwrap()
}

/// Demeaned blocks computed with plain loops, independent of the library.
pub fn naive_demean(data: &PanelDataset, skip: Option<usize>) -> (DMatrix<f64>, DVector<f64>) {
    let k = data.k();
    let mut rows_x: Vec<Vec<f64>> = Vec::new();
    let mut rows_y: Vec<f64> = Vec::new();
    for (i, u) in data.units().iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        let t = u.y.len();
        let ybar: f64 = u.y.iter().sum::<f64>() / t as f64;
        let xbar: Vec<f64> = (0..k)
            .map(|j| (0..t).map(|r| u.x[(r, j)]).sum::<f64>() / t as f64)
            .collect();
        for r in 0..t {
            rows_y.push(u.y[r] - ybar);
            rows_x.push((0..k).map(|j| u.x[(r, j)] - xbar[j]).collect());
        }
    }
    let n = rows_y.len();
    (
        DMatrix::from_fn(n, k, |r, c| rows_x[r][c]),
        DVector::from_vec(rows_y),
    )
}

/// OLS by LU on the normal equations.
pub fn normal_equations(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    (x.transpose() * x)
        .lu()
        .solve(&(x.transpose() * y))
        .unwrap()
}

/// Refit excluding one unit (or none) from scratch.
pub fn brute_refit(data: &PanelDataset, skip: Option<usize>) -> DVector<f64> {
    let (x, y) = naive_demean(data, skip);
    normal_equations(&x, &y)
}

pub fn max_abs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
