//! Log prior densities: g-prior on coefficients, right-truncated Poisson
//! weight on the number of knots, uniform knot locations.
//!
//! All values are on the log scale; `f64::NEG_INFINITY` means zero density.

use rand::Rng;

use crate::basis::{IntervalPartition, KnotState};
use crate::error::{Error, Result};
use crate::linalg::ThinQr;

/// Hyperparameters shared by every model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorConfig {
    /// g-prior scale `c`.
    pub c: f64,
    /// Poisson rate for the number of knots.
    pub lambda: f64,
    /// Maximum number of active knots `L`.
    pub max_knots: usize,
}

impl PriorConfig {
    /// `c = n` for large samples (`n >= 100`), `c = 200` otherwise.
    pub fn default_c(n: usize) -> f64 {
        if n >= 100 {
            n as f64
        } else {
            200.0
        }
    }

    /// Curve-fitting defaults: `lambda = 3`, `L = 10`.
    pub fn curve_fitting(n: usize) -> Self {
        Self {
            c: Self::default_c(n),
            lambda: 3.0,
            max_knots: 10,
        }
    }

    pub fn validate(&self, intervals: usize) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::validation(format!(
                "prior.c must be positive, got {}",
                self.c
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::validation(format!(
                "prior.lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.max_knots < 1 || self.max_knots > intervals {
            return Err(Error::validation(format!(
                "prior.max_knots must lie in 1..={intervals}, got {}",
                self.max_knots
            )));
        }
        Ok(())
    }
}

pub fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// Unnormalised `log(lambda^s / s!)` for `s <= L`, `-inf` beyond.
pub fn log_trunc_poisson(size: usize, config: &PriorConfig) -> f64 {
    if size > config.max_knots {
        f64::NEG_INFINITY
    } else {
        size as f64 * config.lambda.ln() - ln_factorial(size)
    }
}

/// Product of uniform densities on the intervals.
pub fn log_gamma_prior(state: &KnotState, partition: &IntervalPartition) -> f64 {
    let mut acc = 0.0;
    for (k, iv) in partition.intervals().iter().enumerate() {
        if !iv.contains(state.gamma[k]) {
            return f64::NEG_INFINITY;
        }
        acc -= iv.width().ln();
    }
    acc
}

/// `log N(beta; 0, sigma2 * c * (X'X)^{-1})` evaluated through the thin QR
/// of `X`: `(X'X) = R'R`, so `beta' X'X beta = |R beta|^2` and
/// `log det(X'X)^{1/2} = sum log |r_ii|`.
pub fn log_gprior(beta: &[f64], sigma2: f64, factor: &ThinQr, c: f64) -> Result<f64> {
    let m = factor.ncols();
    if beta.len() != m {
        return Err(Error::validation(format!(
            "coefficient vector has length {} but the design has {m} columns",
            beta.len()
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::validation("sigma2 must be positive"));
    }
    let r = factor.r();
    let mut quad = 0.0;
    for i in 0..m {
        let v: f64 = (i..m).map(|j| r[(i, j)] * beta[j]).sum();
        quad += v * v;
    }
    let scale = sigma2 * c;
    Ok(
        -0.5 * m as f64 * (2.0 * std::f64::consts::PI * scale).ln() + factor.log_abs_det_r()
            - 0.5 * quad / scale,
    )
}

/// Draws `(z, gamma)` from the prior. The number of knots `s` is drawn with
/// probability proportional to `C(K, s) lambda^s / s!` for `s <= L` (the
/// per-configuration weight summed over configurations of that size), then a
/// uniformly random subset of that size is activated.
pub fn sample_knot_state<R: Rng + ?Sized>(
    partition: &IntervalPartition,
    config: &PriorConfig,
    rng: &mut R,
) -> KnotState {
    let kmax = partition.len();
    let upper = config.max_knots.min(kmax);
    let log_w: Vec<f64> = (0..=upper)
        .map(|s| ln_choose(kmax, s) + log_trunc_poisson(s, config))
        .collect();
    let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut size = upper;
    for (s, wi) in w.iter().enumerate() {
        if u < *wi {
            size = s;
            break;
        }
        u -= wi;
    }
    let mut idx: Vec<usize> = (0..kmax).collect();
    for i in 0..size {
        let j = rng.random_range(i..kmax);
        idx.swap(i, j);
    }
    let mut z = vec![false; kmax];
    for &k in &idx[..size] {
        z[k] = true;
    }
    let gamma = (0..kmax).map(|k| partition.sample(k, rng)).collect();
    KnotState { z, gamma }
}

fn ln_choose(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}
