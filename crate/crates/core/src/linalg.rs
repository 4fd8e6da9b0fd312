//! Small dense kernels that the estimators need and nalgebra does not expose
//! in the form we want: a rank-revealing Householder QR with an explicit
//! pivot order, and a few symmetric helpers.

use nalgebra::{DMatrix, DVector};

/// Householder QR with column pivoting (Businger–Golub).
///
/// Factorizes `A P = Q R` for a tall `n x k` matrix. Householder reflectors
/// are kept in compact form below the diagonal of `qr`.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    qr: DMatrix<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    /// Factorize `a`, declaring rank deficiency once a pivot falls below
    /// `rel_tol * |R[0,0]|`.
    pub fn new(a: &DMatrix<f64>, rel_tol: f64) -> Self {
        let (n, k) = a.shape();
        let mut qr = a.clone();
        let mut tau = vec![0.0; k.min(n)];
        let mut perm: Vec<usize> = (0..k).collect();
        let steps = k.min(n);
        let mut rank = steps;
        let mut r00 = 0.0;

        for j in 0..steps {
            // Recompute trailing column norms exactly; k is small.
            let mut best = j;
            let mut best_norm = -1.0;
            for c in j..k {
                let norm = qr.view((j, c), (n - j, 1)).norm_squared();
                if norm > best_norm {
                    best_norm = norm;
                    best = c;
                }
            }
            if best != j {
                qr.swap_columns(j, best);
                perm.swap(j, best);
            }

            let alpha = qr.view((j, j), (n - j, 1)).norm();
            if j == 0 {
                r00 = alpha;
            }
            if alpha <= rel_tol * r00 || alpha == 0.0 {
                rank = j;
                break;
            }

            // Reflector v = x - beta e1, scaled so v[0] = 1.
            let x0 = qr[(j, j)];
            let beta = if x0 >= 0.0 { -alpha } else { alpha };
            let v0 = x0 - beta;
            for r in (j + 1)..n {
                qr[(r, j)] /= v0;
            }
            tau[j] = (beta - x0) / beta;
            qr[(j, j)] = beta;

            for c in (j + 1)..k {
                let mut dot = qr[(j, c)];
                for r in (j + 1)..n {
                    dot += qr[(r, j)] * qr[(r, c)];
                }
                let s = tau[j] * dot;
                qr[(j, c)] -= s;
                for r in (j + 1)..n {
                    let vr = qr[(r, j)];
                    qr[(r, c)] -= s * vr;
                }
            }
        }

        PivotedQr {
            qr,
            tau,
            perm,
            rank,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.qr.ncols()
    }

    /// Original column indices pivoted past the numerical rank.
    pub fn deficient_columns(&self) -> Vec<usize> {
        let mut cols = self.perm[self.rank..].to_vec();
        cols.sort_unstable();
        cols
    }

    /// Least-squares solution of `A x = b`. Requires full column rank.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let (n, k) = self.qr.shape();
        debug_assert!(self.is_full_rank());
        let mut qtb = b.clone();
        for j in 0..k {
            let mut dot = qtb[j];
            for r in (j + 1)..n {
                dot += self.qr[(r, j)] * qtb[r];
            }
            let s = self.tau[j] * dot;
            qtb[j] -= s;
            for r in (j + 1)..n {
                qtb[r] -= s * self.qr[(r, j)];
            }
        }
        let z = self.solve_upper(&qtb.rows(0, k).into_owned());
        let mut x = DVector::zeros(k);
        for (pos, &col) in self.perm.iter().enumerate() {
            x[col] = z[pos];
        }
        x
    }

    /// `(A'A)^{-1}` assembled from `R^{-1} R^{-T}` and un-permuted.
    pub fn gram_inverse(&self) -> DMatrix<f64> {
        let k = self.qr.ncols();
        let mut rinv = DMatrix::zeros(k, k);
        for c in 0..k {
            let mut e = DVector::zeros(k);
            e[c] = 1.0;
            rinv.set_column(c, &self.solve_upper(&e));
        }
        let permuted = &rinv * rinv.transpose();
        let mut out = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                out[(self.perm[a], self.perm[b])] = permuted[(a, b)];
            }
        }
        symmetrize(&mut out);
        out
    }

    fn solve_upper(&self, b: &DVector<f64>) -> DVector<f64> {
        let k = b.len();
        let mut x = b.clone();
        for i in (0..k).rev() {
            let mut s = x[i];
            for c in (i + 1)..k {
                s -= self.qr[(i, c)] * x[c];
            }
            x[i] = s / self.qr[(i, i)];
        }
        x
    }
}

/// Replace `m` by `(m + m') / 2` in place.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// `a' b` for column-major blocks with the same number of rows.
pub fn cross(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    a.tr_mul(b)
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
