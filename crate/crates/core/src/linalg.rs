//! Thin QR factorisation with a rank check, plus the handful of dense
//! helpers the samplers need.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance on the diagonal of `R` below which a column is treated
/// as linearly dependent on its predecessors.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ThinQr {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl ThinQr {
    /// Factorises an `n x m` matrix with `m <= n`. Fails when any diagonal
    /// entry of `R` falls below `RANK_TOLERANCE * max |r_jj|`.
    pub fn new(x: &DMatrix<f64>) -> Result<Self> {
        let (n, m) = x.shape();
        if m > n {
            return Err(Error::RankDeficient {
                columns: m,
                rank: n,
            });
        }
        let qr = x.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let diag_max = (0..m).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        let rank = (0..m)
            .filter(|&i| r[(i, i)].abs() > RANK_TOLERANCE * diag_max)
            .count();
        if rank < m || (m > 0 && !(diag_max > 0.0)) {
            return Err(Error::RankDeficient { columns: m, rank });
        }
        Ok(Self { q, r })
    }

    pub fn ncols(&self) -> usize {
        self.r.ncols()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn qt_mul(&self, y: &[f64]) -> DVector<f64> {
        self.q.tr_mul(&DVector::from_column_slice(y))
    }

    /// Solves `R b = rhs` by back substitution.
    pub fn solve_r(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let m = self.ncols();
        let mut b = rhs.clone();
        for i in (0..m).rev() {
            let mut acc = b[i];
            for j in i + 1..m {
                acc -= self.r[(i, j)] * b[j];
            }
            b[i] = acc / self.r[(i, i)];
        }
        b
    }

    pub fn least_squares(&self, y: &[f64]) -> DVector<f64> {
        self.solve_r(&self.qt_mul(y))
    }

    /// `sum_i log |r_ii|`, i.e. `log det(X'X) / 2`.
    pub fn log_abs_det_r(&self) -> f64 {
        (0..self.ncols()).map(|i| self.r[(i, i)].abs().ln()).sum()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.q * &self.r
    }
}

/// Ratio of extreme singular values; infinite for a singular matrix.
pub fn condition_number(x: &DMatrix<f64>) -> f64 {
    let sv = x.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}
