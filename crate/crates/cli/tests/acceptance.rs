//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use panelhc::montecarlo::{
    generate_panel, power_curves, run_replications, sample_w_iid_normal, size_metrics,
    Contamination, McConfig, McRun,
};
use panelhc::panel::Observation;
use panelhc::vcov::{vcov_phc0, vcov_phc3, vcov_phc6, vcov_phcjk, vcov_phcjk_closed_form};
use panelhc::{
    fit_within, leave_one_out, leverage, within_transform, DMatrix, DVector, Distribution, Label,
    PanelDataset, Phc6Options, VcovKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_panel(seed: u64) -> PanelDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(6..=40);
    let max_t = rng.random_range(2..=6);
    let k = rng.random_range(1..=4);
    let mut obs = Vec::new();
    for i in 0..n {
        let t_i = rng.random_range(2..=max_t);
        let start = rng.random_range(0..=(6 - t_i));
        let alpha: f64 = rng.random::<f64>() * 4.0;
        for t in start..start + t_i {
            let mut x: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
            if rng.random::<f64>() < 0.05 {
                let z: f64 = StandardNormal.sample(&mut rng);
                x[0] = 5.0 + 25.0 * z;
            }
            let e: f64 = StandardNormal.sample(&mut rng);
            let y = alpha + x.iter().sum::<f64>() + (1.0 + x[0].abs()) * e;
            obs.push(Observation {
                unit: Label::Int(i as i64),
                time: Label::Int(t as i64),
                y,
                x,
            });
        }
    }
    let names = (1..=k).map(|j| format!("x{j}")).collect();
    PanelDataset::from_observations(obs, names).unwrap()
}

/// Refit by explicit demeaning and LU on the normal equations, skipping one unit.
fn brute_refit(data: &PanelDataset, skip: usize) -> DVector<f64> {
    let k = data.k();
    let mut xtx = DMatrix::<f64>::zeros(k, k);
    let mut xty = DVector::<f64>::zeros(k);
    for (i, u) in data.units().iter().enumerate() {
        if i == skip {
            continue;
        }
        let t = u.y.len() as f64;
        let ybar = u.y.sum() / t;
        let xbar: Vec<f64> = (0..k).map(|j| u.x.column(j).sum() / t).collect();
        for r in 0..u.y.len() {
            let xr: Vec<f64> = (0..k).map(|j| u.x[(r, j)] - xbar[j]).collect();
            for a in 0..k {
                xty[a] += xr[a] * (u.y[r] - ybar);
                for b in 0..k {
                    xtx[(a, b)] += xr[a] * xr[b];
                }
            }
        }
    }
    xtx.lu().solve(&xty).unwrap()
}

fn panels() -> Vec<PanelDataset> {
    (0..50).map(|s| random_panel(1000 + s)).collect()
}

fn woodbury(panels: &[PanelDataset]) -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for data in panels {
        let d = within_transform(data);
        let fit = fit_within(&d).unwrap();
        for i in 0..d.n_units() {
            let fast = leave_one_out(&fit, &d, i).unwrap();
            worst = worst.max((fast - brute_refit(data, i)).abs().max());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && secs < 10.0,
        format!("max |diff| = {worst:.2e} over 50 panels, {secs:.2} s"),
    )
}

fn jackknife_forms(panels: &[PanelDataset]) -> Outcome {
    let mut worst = 0.0f64;
    for data in panels {
        let d = within_transform(data);
        let fit = fit_within(&d).unwrap();
        let lev = leverage(&fit, &d).unwrap();
        let def = vcov_phcjk(&fit, &d, &lev).unwrap().matrix;
        let closed = vcov_phcjk_closed_form(&fit, &d, &lev).unwrap();
        worst = worst.max((&closed - &def).norm() / def.norm());
    }
    outcome(
        worst <= 1e-9,
        format!("max relative Frobenius gap = {worst:.2e}"),
    )
}

fn from_blocks(rows: Vec<(i64, i64, f64, f64)>) -> PanelDataset {
    let obs = rows
        .into_iter()
        .map(|(u, t, y, x)| Observation {
            unit: Label::Int(u),
            time: Label::Int(t),
            y,
            x: vec![x],
        })
        .collect();
    PanelDataset::from_observations(obs, vec!["x".into()]).unwrap()
}

fn phc6_boundaries() -> Outcome {
    let wiggle = [0.3, -0.1, 0.7, -0.4, 0.2, 0.5, -0.6, 0.1];
    // Each unit spikes in its own period: every leverage ratio is 3.
    let spiked = from_blocks(
        (0..4)
            .flat_map(|i| (0..4).map(move |t| (i, t)))
            .map(|(i, t)| {
                let x = if t == i { 10.0 } else { 0.0 };
                (i, t, 0.5 * x + wiggle[((i * 3 + t) % 8) as usize], x)
            })
            .collect(),
    );
    // Every unit shares the regressor path: every leverage ratio is 1.
    let shared = from_blocks(
        (0..6)
            .flat_map(|i| (0..4).map(move |t| (i, t)))
            .map(|(i, t)| {
                let x = [0.2, -1.0, 0.4, 1.3][t as usize];
                (i, t, x + wiggle[((i * 5 + t) % 8) as usize], x)
            })
            .collect(),
    );
    let opts = Phc6Options::default();

    let d = within_transform(&spiked);
    let fit = fit_within(&d).unwrap();
    let lev = leverage(&fit, &d).unwrap();
    let p6 = vcov_phc6(&fit, &d, &lev, opts).unwrap();
    let all = p6.flagged_units.len() == d.n_units();
    let gap3 = (&p6.matrix - vcov_phc3(&fit, &d, &lev).unwrap().matrix)
        .abs()
        .max();

    let d = within_transform(&shared);
    let fit = fit_within(&d).unwrap();
    let lev = leverage(&fit, &d).unwrap();
    let p6 = vcov_phc6(&fit, &d, &lev, opts).unwrap();
    let none = p6.flagged_units.is_empty();
    let gap0 = (&p6.matrix - vcov_phc0(&fit, &d).unwrap().matrix)
        .abs()
        .max();

    outcome(
        all && none && gap3 <= 1e-14 && gap0 <= 1e-14,
        format!(
            "all flagged: {all}, |PHC6-PHC3| = {gap3:.1e}; none flagged: {none}, |PHC6-PHC0| = {gap0:.1e}"
        ),
    )
}

fn hat_trace(panels: &[PanelDataset]) -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut check = |data: &PanelDataset| {
        let d = within_transform(data);
        let fit = fit_within(&d).unwrap();
        let lev = leverage(&fit, &d).unwrap();
        worst = worst.max((lev.total() - fit.k as f64).abs());
        count += 1;
    };
    panels.iter().for_each(&mut check);
    let mut cfg = McConfig {
        gamma: 2.0,
        ..McConfig::default()
    };
    cfg.contamination.enabled = true;
    for rep in 0..50 {
        check(&generate_panel(&cfg, rep).unwrap().panel);
    }
    outcome(
        worst <= 1e-8,
        format!("max |sum tr(H_i) - k| = {worst:.2e} over {count} panels"),
    )
}

fn homoskedastic_size(run: &McRun, secs: f64) -> Outcome {
    let m = size_metrics(run).unwrap();
    let rates: Vec<String> = m
        .estimators
        .iter()
        .map(|e| format!("{}={:.4}", e.kind, e.rp_single))
        .collect();
    let pass = m
        .estimators
        .iter()
        .all(|e| (0.035..=0.065).contains(&e.rp_single));
    outcome(
        pass && m.estimators.len() == 4,
        format!("RP {} (R={}, {secs:.1} s)", rates.join(" "), m.replications),
    )
}

fn contaminated_ordering() -> Outcome {
    let cfg = McConfig {
        n_units: 50,
        n_periods: 5,
        gamma: 2.0,
        replications: 2000,
        contamination: Contamination {
            enabled: true,
            ..Contamination::default()
        },
        ..McConfig::default()
    };
    let start = Instant::now();
    let m = size_metrics(&run_replications(&cfg, None).unwrap()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let p0 = m.get(VcovKind::Phc0).unwrap();
    let p3 = m.get(VcovKind::Phc3).unwrap();
    let pass = p0.rp_single > p3.rp_single
        && p0.rp_single >= 0.07
        && p0.pb_b1 > 0.0
        && p0.rmse > p3.rmse
        && secs < 120.0;
    outcome(
        pass,
        format!(
            "RP0={:.4} RP3={:.4} PB0={:.4} RMSE0={:.4} RMSE3={:.4} failures={} ({secs:.1} s)",
            p0.rp_single, p3.rp_single, p0.pb_b1, p0.rmse, p3.rmse, m.failures
        ),
    )
}

fn asymptotic_equivalence() -> Outcome {
    let mut medians = Vec::new();
    for n in [25, 100, 400] {
        let cfg = McConfig {
            n_units: n,
            n_periods: 5,
            ..McConfig::default()
        };
        let mut ratios: Vec<f64> = (0..200)
            .map(|rep| {
                let sim = generate_panel(&cfg, rep).unwrap();
                let d = within_transform(&sim.panel);
                let fit = fit_within(&d).unwrap();
                let lev = leverage(&fit, &d).unwrap();
                let p0 = vcov_phc0(&fit, &d).unwrap().matrix;
                let p3 = vcov_phc3(&fit, &d, &lev).unwrap().matrix;
                let jk = vcov_phcjk(&fit, &d, &lev).unwrap().matrix;
                (p3 - jk).norm() / p0.norm()
            })
            .collect();
        ratios.sort_by(f64::total_cmp);
        medians.push((ratios[99] + ratios[100]) / 2.0);
    }
    outcome(
        medians[0] > medians[1] && medians[1] > medians[2],
        format!(
            "median ratio N=25: {:.3e}, N=100: {:.3e}, N=400: {:.3e}",
            medians[0], medians[1], medians[2]
        ),
    )
}

fn power_anchoring(run: &McRun) -> Outcome {
    let cfg = &run.config;
    let r = run.draws.len() as f64;
    let curves = power_curves(run, &cfg.power_grid).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for c in &curves {
        let at = |b: f64| {
            c.points
                .iter()
                .find(|p| (p.beta1_alt - b).abs() < 1e-12)
                .unwrap()
                .rejection_rate
        };
        let anchor = at(1.0);
        let far = at(0.5).min(at(1.5));
        pass &= (anchor - cfg.alpha).abs() <= 2.0 / r && far >= 0.99;
        parts.push(format!("{}: at 1 {anchor:.4}, at 1+-0.5 {far:.4}", c.kind));
    }
    outcome(pass, parts.join("; "))
}

fn normalization() -> Outcome {
    let mut worst = 0.0f64;
    let mut draws = 0;
    for gamma in [0.0, 2.0, 4.0] {
        for enabled in [false, true] {
            let cfg = McConfig {
                n_units: 50,
                n_periods: 5,
                gamma,
                contamination: Contamination {
                    enabled,
                    ..Contamination::default()
                },
                ..McConfig::default()
            };
            for rep in 0..100 {
                let s = generate_panel(&cfg, rep).unwrap().sigma2;
                let mean = s.iter().sum::<f64>() / s.len() as f64;
                worst = worst.max((mean - 1.0).abs());
                draws += 1;
            }
        }
    }
    let w = sample_w_iid_normal(&McConfig::default().betas, 1_000_000, 2024);
    let mean_w2 = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
    let rel = (mean_w2 / 5.0 - 1.0).abs();
    outcome(
        worst <= 1e-12 && rel <= 0.01,
        format!(
            "max |mean sigma^2 - 1| = {worst:.1e} over {draws} draws; E W^2 estimate {mean_w2:.4} ({:.2}% from 5)",
            100.0 * rel
        ),
    )
}

fn distributions() -> Outcome {
    let dists = [
        Distribution::Normal,
        Distribution::StudentT { df: 1.0 },
        Distribution::StudentT { df: 10.0 },
        Distribution::StudentT { df: 1e6 },
        Distribution::ChiSquare { df: 1.0 },
        Distribution::ChiSquare { df: 4.0 },
        Distribution::ChiSquare { df: 500.0 },
        Distribution::F {
            df1: 1.0,
            df2: 10.0,
        },
        Distribution::F {
            df1: 4.0,
            df2: 24.0,
        },
        Distribution::F {
            df1: 50.0,
            df2: 3.0,
        },
    ];
    let mut worst = 0.0f64;
    for d in dists {
        for i in 1..=999 {
            let p = i as f64 / 1000.0;
            let x = d.quantile(p).unwrap();
            worst = worst.max((d.cdf(x).unwrap() - p).abs());
        }
    }
    let t = Distribution::StudentT { df: 10.0 }.quantile(0.975).unwrap();
    outcome(
        worst <= 1e-7 && (t - 2.228139).abs() <= 1e-5,
        format!("max round-trip error {worst:.1e}; t(10) 0.975 quantile = {t:.6}"),
    )
}

fn mc_outputs(dir: &Path, threads: &str) -> Vec<(String, Vec<u8>)> {
    let status = Command::new(env!("CARGO_BIN_EXE_panelhc"))
        .env("PANEL_HC_THREADS", threads)
        .args(["mc", "--N", "25,50", "--T", "2,5", "--gamma", "0,2"])
        .args(["--reps", "200", "--seed", "7", "--contaminate", "--power"])
        .arg("--out-dir")
        .arg(dir)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.push(("stdout".into(), status.stdout));
    files.sort();
    files
}

fn determinism() -> Outcome {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let a = mc_outputs(dirs[0].path(), "1");
    let b = mc_outputs(dirs[1].path(), "1");
    let c = mc_outputs(dirs[2].path(), "4");
    outcome(
        a == b && a == c && a.len() == 10,
        format!(
            "{} outputs; rerun identical: {}, 1 vs 4 threads identical: {}",
            a.len(),
            a == b,
            a == c
        ),
    )
}

fn main() {
    let panels = panels();
    let mut results: Vec<(&str, Outcome)> = vec![
        (
            "1 leave-one-unit-out matches brute-force refits",
            woodbury(&panels),
        ),
        (
            "2 jackknife definitional and closed forms agree",
            jackknife_forms(&panels),
        ),
        ("3 PHC6 boundary identities", phc6_boundaries()),
        ("4 hat trace equals k", hat_trace(&panels)),
    ];

    let null_cfg = McConfig {
        n_units: 500,
        n_periods: 20,
        replications: 2000,
        seed: 5,
        ..McConfig::default()
    };
    let start = Instant::now();
    let null_run = run_replications(&null_cfg, None).unwrap();
    let secs = start.elapsed().as_secs_f64();
    results.push((
        "5 homoskedastic size of the robust estimators",
        homoskedastic_size(&null_run, secs),
    ));
    results.push((
        "6 PHC0 over-sized under contaminated heteroskedasticity",
        contaminated_ordering(),
    ));
    results.push((
        "7 PHC3 and PHCjk converge as N grows",
        asymptotic_equivalence(),
    ));
    results.push((
        "8 size-adjusted power anchoring",
        power_anchoring(&null_run),
    ));
    results.push(("9 error variance normalization", normalization()));
    results.push(("10 distribution functions", distributions()));
    results.push(("11 Monte Carlo output determinism", determinism()));

    let mut failed = 0;
    for (name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{name}] {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
