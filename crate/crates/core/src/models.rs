//! Observation models for the non-Gaussian sampler, plus model-specific
//! post-processing: GPD return levels and change-point coefficient
//! back-transforms.

use std::f64::consts::PI;

use crate::basis::{changepoint_design, periodic_linear_design, KnotState};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::priors::ln_factorial;

/// Below this `|xi|` the GPD log-density switches to its exponential limit.
pub const XI_ZERO: f64 = 1e-6;

/// Days in the seasonal cycle used by the rainfall model.
pub const DAYS_PER_PERIOD: f64 = 366.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gaussian,
    PoissonLog,
    GpdSeasonal,
    ChangepointLoglinear,
}

/// Whether proposal centres maximise the likelihood or the posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Mle,
    Map,
}

/// First and second derivatives of one observation's log-density with
/// respect to its linear predictors (at most two per observation).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ObsDerivatives {
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

/// Per-observation likelihood driven by `blocks()` linear predictors that
/// share one design matrix.
pub trait LikelihoodModel: Send + Sync {
    fn kind(&self) -> ModelKind;

    /// Number of coefficient blocks (curves) sharing the knot state.
    fn blocks(&self) -> usize {
        1
    }

    fn n(&self) -> usize;

    /// Log-density of observation `i` given its linear predictors; `-inf`
    /// outside the support.
    fn log_density(&self, i: usize, eta: &[f64]) -> f64;

    /// Derivatives of `log_density` in `eta`. Defaults to central finite
    /// differences.
    fn derivatives(&self, i: usize, eta: &[f64]) -> ObsDerivatives {
        finite_difference_derivatives(|e| self.log_density(i, e), eta)
    }

    /// Variance factor multiplying `c (X'X)^{-1}` in the coefficient prior.
    fn prior_variance(&self) -> f64 {
        1.0
    }

    /// Feasible starting coefficients for a design with `m` columns per
    /// block whose first column is the intercept.
    fn start_point(&self, m: usize) -> Vec<f64> {
        vec![0.0; m * self.blocks()]
    }

    /// Curve reported for a linear predictor (response scale).
    fn mean_response(&self, eta: &[f64]) -> f64 {
        eta[0]
    }

    fn default_mode_kind(&self) -> ModeKind {
        ModeKind::Mle
    }
}

fn finite_difference_derivatives(f: impl Fn(&[f64]) -> f64, eta: &[f64]) -> ObsDerivatives {
    let p = eta.len();
    let mut out = ObsDerivatives::default();
    let mut e = [0.0; 2];
    e[..p].copy_from_slice(eta);
    let f0 = f(&e[..p]);
    let h: Vec<f64> = eta.iter().map(|v| 1e-4 * (1.0 + v.abs())).collect();
    for a in 0..p {
        let mut ep = e;
        let mut em = e;
        ep[a] += h[a];
        em[a] -= h[a];
        let (fp, fm) = (f(&ep[..p]), f(&em[..p]));
        out.grad[a] = (fp - fm) / (2.0 * h[a]);
        out.hess[a][a] = (fp - 2.0 * f0 + fm) / (h[a] * h[a]);
        for b in 0..a {
            let mut pp = e;
            let mut pm = e;
            let mut mp = e;
            let mut mm = e;
            pp[a] += h[a];
            pp[b] += h[b];
            pm[a] += h[a];
            pm[b] -= h[b];
            mp[a] -= h[a];
            mp[b] += h[b];
            mm[a] -= h[a];
            mm[b] -= h[b];
            let v = (f(&pp[..p]) - f(&pm[..p]) - f(&mp[..p]) + f(&mm[..p])) / (4.0 * h[a] * h[b]);
            out.hess[a][b] = v;
            out.hess[b][a] = v;
        }
    }
    out
}

/// Gaussian errors with known standard deviation.
#[derive(Debug, Clone)]
pub struct GaussianLikelihood {
    y: Vec<f64>,
    sigma: f64,
}

impl GaussianLikelihood {
    pub fn new(data: &Dataset, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::validation("Gaussian noise sd must be positive"));
        }
        Ok(Self {
            y: data.y().to_vec(),
            sigma,
        })
    }
}

impl LikelihoodModel for GaussianLikelihood {
    fn kind(&self) -> ModelKind {
        ModelKind::Gaussian
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    fn log_density(&self, i: usize, eta: &[f64]) -> f64 {
        let r = self.y[i] - eta[0];
        let s2 = self.sigma * self.sigma;
        -0.5 * (2.0 * PI * s2).ln() - 0.5 * r * r / s2
    }

    fn derivatives(&self, i: usize, eta: &[f64]) -> ObsDerivatives {
        let s2 = self.sigma * self.sigma;
        ObsDerivatives {
            grad: [(self.y[i] - eta[0]) / s2, 0.0],
            hess: [[-1.0 / s2, 0.0], [0.0, 0.0]],
        }
    }

    fn prior_variance(&self) -> f64 {
        self.sigma * self.sigma
    }
}

/// `y log-pmf` of a Poisson count with log-link predictor `f`.
pub fn poisson_loglik(y: u64, f: f64) -> f64 {
    y as f64 * f - f.exp() - ln_factorial(y as usize)
}

/// Poisson counts with a log link.
#[derive(Debug, Clone)]
pub struct PoissonLikelihood {
    y: Vec<f64>,
    log_fact: Vec<f64>,
}

impl PoissonLikelihood {
    pub fn new(data: &Dataset) -> Result<Self> {
        if let Some(i) = data.y().iter().position(|&v| v < 0.0 || v.fract() != 0.0) {
            return Err(Error::validation(format!(
                "Poisson response y[{i}] = {} is not a non-negative integer",
                data.y()[i]
            )));
        }
        let log_fact = data.y().iter().map(|&v| ln_factorial(v as usize)).collect();
        Ok(Self {
            y: data.y().to_vec(),
            log_fact,
        })
    }
}

impl LikelihoodModel for PoissonLikelihood {
    fn kind(&self) -> ModelKind {
        ModelKind::PoissonLog
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    fn log_density(&self, i: usize, eta: &[f64]) -> f64 {
        self.y[i] * eta[0] - eta[0].exp() - self.log_fact[i]
    }

    fn derivatives(&self, i: usize, eta: &[f64]) -> ObsDerivatives {
        let mu = eta[0].exp();
        ObsDerivatives {
            grad: [self.y[i] - mu, 0.0],
            hess: [[-mu, 0.0], [0.0, 0.0]],
        }
    }

    fn mean_response(&self, eta: &[f64]) -> f64 {
        eta[0].exp()
    }
}

/// Generalised Pareto log-density of an exceedance `y > 0`:
/// `-log sigma - (1 + 1/xi) log(1 + xi y / sigma)` on its support, with the
/// exponential limit `-log sigma - u` (with `u = y / sigma`) plus its
/// first-order correction `-xi (u - u^2/2)` for `|xi| < XI_ZERO`.
pub fn gpd_loglik(y: f64, sigma: f64, xi: f64) -> f64 {
    if !(sigma > 0.0) || !(y > 0.0) {
        return f64::NEG_INFINITY;
    }
    if xi.abs() < XI_ZERO {
        let u = y / sigma;
        return -sigma.ln() - u - xi * (u - 0.5 * u * u);
    }
    let w = 1.0 + xi * y / sigma;
    if !(w > 0.0) {
        return f64::NEG_INFINITY;
    }
    -sigma.ln() - (1.0 + 1.0 / xi) * (xi * y / sigma).ln_1p()
}

/// Coefficients `c_k` of `(1 + 1/xi) log(1 + xi u) = sum_k c_k xi^k`.
fn gpd_series(u: f64) -> [f64; 40] {
    let mut c = [0.0; 40];
    c[0] = u;
    let mut uk = u; // u^k
    for k in 1..40 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let next = uk * u;
        c[k] = sign * next / (k as f64 + 1.0) - sign * uk / k as f64;
        uk = next;
    }
    c
}

/// Analytic derivatives of the GPD log-density in `(sigma, xi)`. The
/// `xi`-derivatives use a power series in `xi` while `|xi y / sigma| < 0.1`,
/// where the closed forms cancel catastrophically.
pub fn gpd_derivatives(y: f64, sigma: f64, xi: f64) -> ObsDerivatives {
    let (s, a) = (sigma, xi);
    let d = s + a * y;
    let l_s = -1.0 / s + (a + 1.0) * y / (s * d);
    let l_ss = 1.0 / (s * s) - (a + 1.0) * y * (2.0 * s + a * y) / (s * s * d * d);
    let l_sa = y * (s - y) / (s * d * d);
    let u = y / s;
    let (l_a, l_aa) = if (a * u).abs() < 0.1 {
        let c = gpd_series(u);
        let (mut da, mut daa) = (0.0, 0.0);
        for k in (1..40).rev() {
            da = da * a - k as f64 * c[k];
            if k >= 2 {
                daa = daa * a - (k * (k - 1)) as f64 * c[k];
            }
        }
        (da, daa)
    } else {
        let w = 1.0 + a * u;
        let lw = w.ln();
        let l_a = lw / (a * a) - (a + 1.0) * y / (a * d);
        let l_aa = y / (a * a * d) - 2.0 * lw / (a * a * a)
            + y * (a * a * y + s + 2.0 * a * y) / (a * a * d * d);
        (l_a, l_aa)
    };
    ObsDerivatives {
        grad: [l_s, l_a],
        hess: [[l_ss, l_sa], [l_sa, l_aa]],
    }
}

/// Exceedances over a threshold, indexed by day of year; scale and shape
/// are two curves on the same periodic knot state.
#[derive(Debug, Clone)]
pub struct GpdLikelihood {
    y: Vec<f64>,
    mean_y: f64,
}

impl GpdLikelihood {
    pub fn new(data: &Dataset) -> Result<Self> {
        if let Some(i) = data.y().iter().position(|&v| !(v > 0.0)) {
            return Err(Error::validation(format!(
                "exceedance y[{i}] = {} must be positive",
                data.y()[i]
            )));
        }
        if let Some(i) = data
            .x()
            .iter()
            .position(|&t| !(1.0..=DAYS_PER_PERIOD).contains(&t))
        {
            return Err(Error::validation(format!(
                "day[{i}] = {} outside 1..=366",
                data.x()[i]
            )));
        }
        let mean_y = data.y().iter().sum::<f64>() / data.n() as f64;
        Ok(Self {
            y: data.y().to_vec(),
            mean_y,
        })
    }
}

impl LikelihoodModel for GpdLikelihood {
    fn kind(&self) -> ModelKind {
        ModelKind::GpdSeasonal
    }

    fn blocks(&self) -> usize {
        2
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    fn log_density(&self, i: usize, eta: &[f64]) -> f64 {
        gpd_loglik(self.y[i], eta[0], eta[1])
    }

    fn derivatives(&self, i: usize, eta: &[f64]) -> ObsDerivatives {
        gpd_derivatives(self.y[i], eta[0], eta[1])
    }

    /// Exponential fit: constant scale equal to the mean exceedance, zero
    /// shape.
    fn start_point(&self, m: usize) -> Vec<f64> {
        let mut b = vec![0.0; 2 * m];
        b[0] = self.mean_y;
        b
    }

    fn default_mode_kind(&self) -> ModeKind {
        ModeKind::Map
    }
}

/// GPD log-likelihood of one exceedance on day `t`, with scale and shape
/// given by periodic curves sharing `state`.
pub fn gpd_seasonal_loglik(
    t: f64,
    y: f64,
    beta_sigma: &[f64],
    beta_xi: &[f64],
    state: &KnotState,
    period: f64,
) -> f64 {
    let design = periodic_linear_design(&[t], state, period);
    let sigma = design.apply(beta_sigma)[0];
    let xi = design.apply(beta_xi)[0];
    gpd_loglik(y, sigma, xi)
}

/// Threshold model settings for return levels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GpdConfig {
    /// Threshold `u`, in response units.
    pub threshold: f64,
    /// `P(X > u)` for a single observation.
    pub zeta_u: f64,
    /// Observations per year.
    pub n_y: f64,
    pub period: f64,
}

impl Default for GpdConfig {
    fn default() -> Self {
        Self {
            threshold: 0.0,
            zeta_u: 0.05,
            n_y: 365.25,
            period: DAYS_PER_PERIOD,
        }
    }
}

impl GpdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta_u > 0.0 && self.zeta_u < 1.0) {
            return Err(Error::validation(format!(
                "gpd.zeta_u must lie in (0, 1), got {}",
                self.zeta_u
            )));
        }
        if !self.threshold.is_finite() {
            return Err(Error::validation("gpd.threshold must be finite"));
        }
        if !(self.n_y > 0.0) {
            return Err(Error::validation("gpd.n_y must be positive"));
        }
        Ok(())
    }
}

/// Exceedance above the threshold reached on average once every `years`:
/// the solution `z` of `zeta_u (1 + xi z / sigma)^{-1/xi} = 1 / (years n_y)`.
pub fn return_level(sigma: f64, xi: f64, config: &GpdConfig, years: f64) -> Result<f64> {
    let m = years * config.n_y * config.zeta_u;
    if !(m > 1.0) {
        return Err(Error::BelowThreshold(m));
    }
    if xi.abs() < XI_ZERO {
        Ok(sigma * m.ln())
    } else {
        Ok(sigma / xi * (m.powf(xi) - 1.0))
    }
}

/// Gaussian log-density of `log r` about the change-point curve at
/// `x = log(d + delta)`.
pub fn changepoint_loglik(
    x: &[f64],
    log_r: &[f64],
    beta: &[f64],
    state: &KnotState,
    sigma2: f64,
) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::validation("sigma2 must be positive"));
    }
    let fitted = changepoint_design(x, state)?.apply(beta);
    Ok(log_r
        .iter()
        .zip(fitted)
        .map(|(r, f)| -0.5 * (2.0 * PI * sigma2).ln() - 0.5 * (r - f).powi(2) / sigma2)
        .sum())
}

/// Log-linear segment `log r = log_a + b x` between consecutive change points.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Segment {
    pub log_a: f64,
    pub b: f64,
}

/// Segment coefficients implied by
/// `f(x) = alpha_0 + alpha_1 x + sum_k eta_k (-1 + x/gamma_k)_+`:
/// `log a_j = alpha_0 - sum_{k<j} eta_k`, `b_j = alpha_1 + sum_{k<j} eta_k/gamma_k`.
pub fn tombs_coefficients(alpha0: f64, alpha1: f64, eta: &[f64], gamma: &[f64]) -> Vec<Segment> {
    let mut out = Vec::with_capacity(eta.len() + 1);
    let (mut log_a, mut b) = (alpha0, alpha1);
    out.push(Segment { log_a, b });
    for (e, g) in eta.iter().zip(gamma) {
        log_a -= e;
        b += e / g;
        out.push(Segment { log_a, b });
    }
    out
}

/// Evaluates the piecewise log-linear curve at `x` given sorted change points.
pub fn segment_value(segments: &[Segment], gamma: &[f64], x: f64) -> f64 {
    let j = gamma.iter().filter(|&&g| x >= g).count();
    segments[j].log_a + segments[j].b * x
}
