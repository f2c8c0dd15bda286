//! Direct solver for cyclic pentadiagonal systems.
//!
//! Row `i` couples unknowns `i-2 ..= i+2` (indices modulo `n`). The last two
//! unknowns are split off as a border: the leading `(n-2) x (n-2)` block is
//! an ordinary pentadiagonal band, factored once without pivoting, and the
//! periodic coupling is folded into a 2x2 Schur complement.
//!
//! Banded elimination without pivoting is safe for the matrices produced by
//! the semi-implicit stepper (`I + diag(m) K` with `K` symmetric positive
//! semi-definite and `m >= 0` is diagonally similar to an SPD matrix). Any
//! zero pivot or oversized residual falls back to dense partial pivoting for
//! `n <= DENSE_FALLBACK_MAX`.

use crate::error::{Error, Result};

pub const DENSE_FALLBACK_MAX: usize = 512;

/// Five diagonals of a cyclic pentadiagonal matrix, each of length `n`:
/// row `i` is `lower2[i] x_{i-2} + lower1[i] x_{i-1} + diag[i] x_i + upper1[i] x_{i+1} + upper2[i] x_{i+2}`.
#[derive(Debug, Clone)]
pub struct CyclicPentadiagonal {
    pub lower2: Vec<f64>,
    pub lower1: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper1: Vec<f64>,
    pub upper2: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    /// Max-norm residual `|A x - b|_inf`.
    pub residual: f64,
    pub used_dense_fallback: bool,
}

impl CyclicPentadiagonal {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// Column offsets `-2..=2` for row `i`, as (column, coefficient).
    fn row(&self, i: usize) -> [(usize, f64); 5] {
        let n = self.n();
        let col = |k: isize| (i as isize + k).rem_euclid(n as isize) as usize;
        [
            (col(-2), self.lower2[i]),
            (col(-1), self.lower1[i]),
            (i, self.diag[i]),
            (col(1), self.upper1[i]),
            (col(2), self.upper2[i]),
        ]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| self.row(i).iter().map(|&(j, a)| a * x[j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut a = vec![vec![0.0; n]; n];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, c) in self.row(i) {
                row[j] += c;
            }
        }
        a
    }

    /// Solves `A x = b`. The residual is checked against `tol * max(|b|_inf, scale)`.
    pub fn solve(&self, b: &[f64], tol: f64, scale: f64) -> Result<Solution> {
        let n = self.n();
        if n < 5 || b.len() != n {
            return Err(Error::InvalidArgument(format!(
                "cyclic pentadiagonal solve needs n >= 5 and matching rhs (n = {n}, rhs = {})",
                b.len()
            )));
        }
        let budget = tol * max_abs(b).max(scale);
        if let Some(x) = self.solve_bordered(b) {
            let residual = self.residual(&x, b);
            if residual.is_finite() && residual <= budget {
                return Ok(Solution {
                    x,
                    residual,
                    used_dense_fallback: false,
                });
            }
        }
        if n <= DENSE_FALLBACK_MAX {
            if let Some(x) = dense_solve(self.to_dense(), b.to_vec()) {
                let residual = self.residual(&x, b);
                if residual.is_finite() && residual <= budget {
                    return Ok(Solution {
                        x,
                        residual,
                        used_dense_fallback: true,
                    });
                }
                return Err(Error::SingularSystem { residual });
            }
        }
        Err(Error::SingularSystem {
            residual: f64::INFINITY,
        })
    }

    fn residual(&self, x: &[f64], b: &[f64]) -> f64 {
        self.apply(x)
            .iter()
            .zip(b)
            .map(|(ax, bi)| (ax - bi).abs())
            .fold(0.0, f64::max)
    }

    fn solve_bordered(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.n();
        let m = n - 2;
        let band = BandLu::factor(
            &self.lower2[..m],
            &self.lower1[..m],
            &self.diag[..m],
            &self.upper1[..m],
            &self.upper2[..m],
        )?;

        // Border columns C (m x 2): coupling of the leading rows to x_{n-2}, x_{n-1}.
        let mut c0 = vec![0.0; m];
        let mut c1 = vec![0.0; m];
        for (i, ci) in (0..m).map(|i| (i, self.row(i))) {
            for (j, a) in ci {
                if j == n - 2 {
                    c0[i] += a;
                } else if j == n - 1 {
                    c1[i] += a;
                }
            }
        }
        let y0 = band.solve(&b[..m]);
        let y_c0 = band.solve(&c0);
        let y_c1 = band.solve(&c1);

        // Schur complement S = E - D Y on the last two rows.
        let mut s = [[0.0; 2]; 2];
        let mut rhs = [b[n - 2], b[n - 1]];
        for (r, i) in [n - 2, n - 1].into_iter().enumerate() {
            for (j, a) in self.row(i) {
                if j == n - 2 {
                    s[r][0] += a;
                } else if j == n - 1 {
                    s[r][1] += a;
                } else {
                    s[r][0] -= a * y_c0[j];
                    s[r][1] -= a * y_c1[j];
                    rhs[r] -= a * y0[j];
                }
            }
        }
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        let norm = s.iter().flatten().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if !(det.is_finite() && det.abs() > f64::EPSILON * norm * norm) {
            return None;
        }
        let z0 = (rhs[0] * s[1][1] - s[0][1] * rhs[1]) / det;
        let z1 = (s[0][0] * rhs[1] - rhs[0] * s[1][0]) / det;

        let mut x = Vec::with_capacity(n);
        x.extend((0..m).map(|i| y0[i] - y_c0[i] * z0 - y_c1[i] * z1));
        x.push(z0);
        x.push(z1);
        Some(x)
    }
}

/// LU factors of a non-cyclic pentadiagonal band (no pivoting).
struct BandLu {
    // L has unit diagonal and two sub-diagonals; U has diagonal and two super-diagonals.
    l1: Vec<f64>,
    l2: Vec<f64>,
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
}

impl BandLu {
    fn factor(e: &[f64], c: &[f64], d: &[f64], a: &[f64], b: &[f64]) -> Option<Self> {
        let m = d.len();
        let mut l1 = vec![0.0; m];
        let mut l2 = vec![0.0; m];
        let mut u0 = vec![0.0; m];
        let mut u1 = vec![0.0; m];
        let mut u2 = vec![0.0; m];
        let scale = d
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        for i in 0..m {
            // row i of A: e[i] x_{i-2} + c[i] x_{i-1} + d[i] x_i + a[i] x_{i+1} + b[i] x_{i+2}
            if i >= 2 {
                l2[i] = e[i] / u0[i - 2];
            }
            if i >= 1 {
                let mut v = c[i];
                if i >= 2 {
                    v -= l2[i] * u1[i - 2];
                }
                l1[i] = v / u0[i - 1];
            }
            let mut piv = d[i];
            if i >= 1 {
                piv -= l1[i] * u1[i - 1];
            }
            if i >= 2 {
                piv -= l2[i] * u2[i - 2];
            }
            if !(piv.is_finite() && piv.abs() > 1e3 * f64::EPSILON * scale) {
                return None;
            }
            u0[i] = piv;
            if i + 1 < m {
                let mut v = a[i];
                if i >= 1 {
                    v -= l1[i] * u2[i - 1];
                }
                u1[i] = v;
            }
            if i + 2 < m {
                u2[i] = b[i];
            }
        }
        Some(Self { l1, l2, u0, u1, u2 })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = self.u0.len();
        let mut y = rhs.to_vec();
        for i in 0..m {
            if i >= 1 {
                y[i] -= self.l1[i] * y[i - 1];
            }
            if i >= 2 {
                y[i] -= self.l2[i] * y[i - 2];
            }
        }
        for i in (0..m).rev() {
            let mut v = y[i];
            if i + 1 < m {
                v -= self.u1[i] * y[i + 1];
            }
            if i + 2 < m {
                v -= self.u2[i] * y[i + 2];
            }
            y[i] = v / self.u0[i];
        }
        y
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k] == 0.0 || !a[p][k].is_finite() {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f == 0.0 {
                continue;
            }
            let (top, rest) = a.split_at_mut(i);
            for (x, y) in rest[0][k..].iter_mut().zip(&top[k][k..]) {
                *x -= f * y;
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}
