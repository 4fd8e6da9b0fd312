//! Distribution functions against reference values computed once in 40-digit
//! arithmetic (regularized incomplete beta/gamma, bisection for quantiles)
//! and frozen here.

#![allow(clippy::excessive_precision)]

use panelhc::Distribution;
use panelhc::Distribution::{ChiSquare, Normal, StudentT, F};

fn t(df: f64) -> Distribution {
    StudentT { df }
}
fn chi2(df: f64) -> Distribution {
    ChiSquare { df }
}
fn f(df1: f64, df2: f64) -> Distribution {
    F { df1, df2 }
}

const CDF: &[(Distribution, f64, f64)] = &[
    (StudentT { df: 10.0 }, 2.228139, 0.97500000627355872),
    (StudentT { df: 3.0 }, -1.5, 0.11529193262241153),
    (StudentT { df: 1.0 }, 0.3, 0.59277357907774234),
    (StudentT { df: 2.5 }, 4.0, 0.98049351207934088),
    (StudentT { df: 1e6 }, 1.96, 0.9750019662073651),
    (StudentT { df: 30.0 }, -2.5, 0.0090578245340333471),
    (StudentT { df: 5.0 }, 12.0, 0.99996455253741419),
    (
        ChiSquare { df: 1.0 },
        3.841458820694124,
        0.94999999999999994,
    ),
    (ChiSquare { df: 4.0 }, 0.5, 0.026499021160743915),
    (
        ChiSquare { df: 4.0 },
        9.487729036781154,
        0.94999999999999994,
    ),
    (ChiSquare { df: 20.0 }, 30.0, 0.93014633930059023),
    (ChiSquare { df: 0.5 }, 1e-3, 0.16495975076841284),
    (ChiSquare { df: 1000.0 }, 1100.0, 0.98538559187370481),
    (
        F {
            df1: 4.0,
            df2: 24.0,
        },
        2.0,
        0.87329459190368652,
    ),
    (F { df1: 1.0, df2: 1.0 }, 1.0, 0.5),
    (
        F {
            df1: 5.0,
            df2: 100.0,
        },
        3.5,
        0.99412204570902147,
    ),
    (
        F {
            df1: 10.0,
            df2: 3.0,
        },
        0.2,
        0.022613922751096278,
    ),
    (Normal, -3.0, 0.0013498980316300945),
    (Normal, -1.0, 0.15865525393145705),
    (Normal, 0.25, 0.59870632568292372),
    (Normal, 2.0, 0.97724986805182079),
    (Normal, 6.0, 0.99999999901341235),
];

const QUANTILE: &[(Distribution, f64, f64)] = &[
    (StudentT { df: 10.0 }, 0.975, 2.2281388519862742),
    (StudentT { df: 24.0 }, 0.975, 2.0638985616280254),
    (StudentT { df: 2.0 }, 0.995, 9.9248432009182886),
    (StudentT { df: 1.0 }, 0.05, -6.3137515146750427),
    (StudentT { df: 1e6 }, 0.975, 1.9599663568141067),
    (StudentT { df: 7.5 }, 0.9, 1.4052118464159531),
    (ChiSquare { df: 1.0 }, 0.95, 3.8414588206941245),
    (ChiSquare { df: 4.0 }, 0.95, 9.4877290367811546),
    (ChiSquare { df: 3.0 }, 0.01, 0.11483180189911704),
    (ChiSquare { df: 50.0 }, 0.999, 86.660815190403135),
    (
        F {
            df1: 4.0,
            df2: 24.0,
        },
        0.95,
        2.776289289251477,
    ),
    (
        F {
            df1: 3.0,
            df2: 10.0,
        },
        0.99,
        6.5523125575152095,
    ),
    (F { df1: 2.0, df2: 2.0 }, 0.5, 1.0),
    (Normal, 0.975, 1.9599639845400539),
    (Normal, 0.001, -3.0902323061678135),
    (Normal, 0.5, 0.0),
    (Normal, 0.9999, 3.7190164854557084),
];

#[test]
fn cdf_matches_reference_values() {
    for &(d, x, want) in CDF {
        let got = d.cdf(x).unwrap();
        assert!(
            (got - want).abs() <= 1e-10,
            "{d:?} cdf({x}) = {got}, want {want}"
        );
        let sf = d.sf(x).unwrap();
        assert!((sf - (1.0 - want)).abs() <= 1e-10, "{d:?} sf({x}) = {sf}");
    }
}

#[test]
fn quantile_matches_reference_values() {
    for &(d, p, want) in QUANTILE {
        let got = d.quantile(p).unwrap();
        assert!(
            (got - want).abs() <= 1e-8,
            "{d:?} quantile({p}) = {got}, want {want}"
        );
    }
}

#[test]
fn student_t_table_value() {
    assert!((t(10.0).quantile(0.975).unwrap() - 2.228139).abs() < 1e-5);
}

#[test]
fn round_trip_across_families() {
    let dists = [
        Normal,
        t(1.0),
        t(3.0),
        t(24.0),
        t(1e6),
        chi2(1.0),
        chi2(4.0),
        chi2(250.0),
        f(1.0, 5.0),
        f(4.0, 24.0),
        f(30.0, 1000.0),
    ];
    let mut ps = vec![0.001, 0.005, 0.01, 0.025, 0.05, 0.1, 0.25, 0.5];
    ps.extend(ps.clone().iter().rev().map(|p| 1.0 - p));
    for d in dists {
        for &p in &ps {
            let x = d.quantile(p).unwrap();
            let back = d.cdf(x).unwrap();
            assert!((back - p).abs() < 1e-7, "{d:?} p={p} x={x} cdf={back}");
        }
    }
}

#[test]
fn student_t_approaches_normal() {
    for x in [-2.0, -0.5, 0.7, 1.96] {
        let gap = (t(1e7).cdf(x).unwrap() - Normal.cdf(x).unwrap()).abs();
        assert!(gap < 1e-7, "x={x} gap={gap}");
    }
}

#[test]
fn f_with_one_numerator_df_is_squared_t() {
    for x in [0.1_f64, 1.0, 4.0, 9.0] {
        let via_t = 2.0 * t(12.0).cdf(x.sqrt()).unwrap() - 1.0;
        assert!((f(1.0, 12.0).cdf(x).unwrap() - via_t).abs() < 1e-12);
    }
}

#[test]
fn domain_errors() {
    assert!(t(0.0).cdf(1.0).is_err());
    assert!(chi2(-1.0).cdf(1.0).is_err());
    assert!(Normal.quantile(0.0).is_err());
    assert!(Normal.quantile(1.0).is_err());
    assert!(f(2.0, 3.0).quantile(1.5).is_err());
    assert!(Normal.cdf(f64::NAN).is_err());
}
