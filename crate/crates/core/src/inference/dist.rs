//! Reference distributions for the test statistics.

use serde::{Deserialize, Serialize};

use super::special::{beta_pq, gamma_pq};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Distribution {
    Normal,
    StudentT { df: f64 },
    ChiSquare { df: f64 },
    F { df1: f64, df2: f64 },
}

impl Distribution {
    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        let valid = match *self {
            Distribution::Normal => true,
            Distribution::StudentT { df } | Distribution::ChiSquare { df } => ok(df),
            Distribution::F { df1, df2 } => ok(df1) && ok(df2),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::Domain(format!("parameters of {self:?}")))
        }
    }

    /// Lower and upper tail probabilities at `x`, each computed directly.
    pub fn tails(&self, x: f64) -> Result<(f64, f64)> {
        self.validate()?;
        if x.is_nan() {
            return Err(Error::Domain("NaN".into()));
        }
        Ok(match *self {
            Distribution::Normal => normal_tails(x),
            Distribution::StudentT { df } => {
                if x == 0.0 {
                    (0.5, 0.5)
                } else if x.is_infinite() {
                    if x > 0.0 {
                        (1.0, 0.0)
                    } else {
                        (0.0, 1.0)
                    }
                } else {
                    let t2 = x * x;
                    let denom = df + t2;
                    let (ib, _) = beta_pq(0.5 * df, 0.5, df / denom, t2 / denom);
                    let tail = 0.5 * ib;
                    if x > 0.0 {
                        (1.0 - tail, tail)
                    } else {
                        (tail, 1.0 - tail)
                    }
                }
            }
            Distribution::ChiSquare { df } => {
                if x <= 0.0 {
                    (0.0, 1.0)
                } else {
                    gamma_pq(0.5 * df, 0.5 * x)
                }
            }
            Distribution::F { df1, df2 } => {
                if x <= 0.0 {
                    (0.0, 1.0)
                } else if x.is_infinite() {
                    (1.0, 0.0)
                } else {
                    let denom = df1 * x + df2;
                    beta_pq(0.5 * df1, 0.5 * df2, df1 * x / denom, df2 / denom)
                }
            }
        })
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.tails(x).map(|t| t.0)
    }

    /// Upper tail `1 - cdf(x)`.
    pub fn sf(&self, x: f64) -> Result<f64> {
        self.tails(x).map(|t| t.1)
    }

    /// Inverse cdf by bracketed root finding.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.validate()?;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("probability {p}")));
        }
        let f = |x: f64| -> f64 {
            let (lo, hi) = self.tails(x).expect("validated");
            // Work in the smaller tail for resolution near 0 and 1.
            if p < 0.5 {
                lo - p
            } else {
                (1.0 - p) - hi
            }
        };
        let symmetric = matches!(self, Distribution::Normal | Distribution::StudentT { .. });
        let guess = normal_quantile_guess(p);
        let (mut lo, mut hi) = if symmetric {
            (guess - 1.0, guess + 1.0)
        } else {
            (0.0, 1.0)
        };
        let mut step = 1.0;
        while f(lo) > 0.0 {
            step *= 2.0;
            lo -= step;
            if !symmetric && lo <= 0.0 {
                lo = 0.0;
                break;
            }
        }
        step = 1.0;
        while f(hi) < 0.0 {
            step *= 2.0;
            hi += step;
            if hi > 1e300 {
                return Err(Error::Domain(format!(
                    "quantile {p} could not be bracketed"
                )));
            }
        }
        Ok(brent(f, lo, hi))
    }
}

fn normal_tails(x: f64) -> (f64, f64) {
    if x.is_infinite() {
        return if x > 0.0 { (1.0, 0.0) } else { (0.0, 1.0) };
    }
    // Phi(x) = 1/2 erfc(-x / sqrt 2), with erfc(z) = Q(1/2, z^2) for z >= 0.
    let (p, q) = gamma_pq(0.5, 0.5 * x * x);
    let small = 0.5 * q;
    let large = 0.5 + 0.5 * p;
    if x < 0.0 {
        (small, large)
    } else {
        (large, small)
    }
}

/// Rational approximation of the standard normal quantile (relative error
/// about 1e-9); only used to seed the bracket.
fn normal_quantile_guess(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let low = 0.02425;
    if p < low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Brent's root finder on a sign-changing bracket `[a, b]`.
fn brent(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..500 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 1e-300;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    b
}
