//! Synthetic data generators with their exact true functions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{tombs_coefficients, DAYS_PER_PERIOD};
use crate::rng::{stream, SIMULATION_STREAM};

/// Offset in `x = log(d + TOMBS_DELTA)`.
pub const TOMBS_DELTA: f64 = 0.54;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Example {
    /// Two Gaussian bumps on `[0, 1]`, uniform design.
    Sk1,
    /// `sin(2x) + 2 exp(-16 x^2)` on `[-2, 2]` rescaled to `[0, 1]`, uniform design.
    Dms2,
    /// `sin(x) + 2 exp(-30 x^2)` on `[-2, 2]` rescaled to `[0, 1]`, regular grid.
    Dgk3,
    /// Counts with rate `exp(2x + cos(4 pi x))`, uniform design.
    Poisson,
}

impl Example {
    pub const ALL: [Example; 4] = [Example::Sk1, Example::Dms2, Example::Dgk3, Example::Poisson];

    pub fn name(self) -> &'static str {
        match self {
            Example::Sk1 => "sk1",
            Example::Dms2 => "dms2",
            Example::Dgk3 => "dgk3",
            Example::Poisson => "poisson",
        }
    }

    /// Noise standard deviation used in the original studies (none for
    /// counts).
    pub fn default_sigma(self) -> Option<f64> {
        match self {
            Example::Sk1 => Some(0.25),
            Example::Dms2 | Example::Dgk3 => Some(0.3),
            Example::Poisson => None,
        }
    }

    /// True regression function on `[0, 1]`; for counts this is the rate.
    pub fn truth(self, x: f64) -> f64 {
        match self {
            Example::Sk1 => normal_pdf(x, 0.15, 0.05) / 4.0 + normal_pdf(x, 0.6, 0.2) / 4.0,
            Example::Dms2 => {
                let u = 4.0 * x - 2.0;
                (2.0 * u).sin() + 2.0 * (-16.0 * u * u).exp()
            }
            Example::Dgk3 => {
                let u = 4.0 * x - 2.0;
                u.sin() + 2.0 * (-30.0 * u * u).exp()
            }
            Example::Poisson => (2.0 * x + (4.0 * PI * x).cos()).exp(),
        }
    }

    pub fn is_count(self) -> bool {
        self == Example::Poisson
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Example::ALL
            .iter()
            .copied()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                Error::validation(format!(
                    "unknown example '{s}' (expected sk1, dms2, dgk3 or poisson)"
                ))
            })
    }
}

fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

/// A simulated dataset and the function it was drawn around.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub example: Example,
    pub data: Dataset,
    pub sigma: Option<f64>,
}

impl Simulated {
    /// True function at the observed design points.
    pub fn truth_at_data(&self) -> Vec<f64> {
        self.data
            .x()
            .iter()
            .map(|&x| self.example.truth(x))
            .collect()
    }
}

/// Draws `n` observations of `example` (sorted by `x`) from the simulation
/// stream of `seed`. `sigma` overrides the default noise level.
pub fn simulate_example(
    example: Example,
    n: usize,
    sigma: Option<f64>,
    seed: u64,
) -> Result<Simulated> {
    if n < 2 {
        return Err(Error::validation(format!("n must be at least 2, got {n}")));
    }
    let sigma = match (example.default_sigma(), sigma) {
        (None, _) => None,
        (Some(d), None) => Some(d),
        (Some(_), Some(s)) if s > 0.0 && s.is_finite() => Some(s),
        (Some(_), Some(s)) => {
            return Err(Error::validation(format!(
                "noise sd must be positive, got {s}"
            )))
        }
    };
    let mut rng = stream(seed, SIMULATION_STREAM);
    let mut x: Vec<f64> = match example {
        Example::Dgk3 => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
        _ => (0..n).map(|_| rng.random::<f64>()).collect(),
    };
    x.sort_by(f64::total_cmp);
    let y = match sigma {
        Some(s) => {
            let noise = Normal::new(0.0, s).expect("valid sd");
            x.iter()
                .map(|&v| example.truth(v) + noise.sample(&mut rng))
                .collect()
        }
        None => x
            .iter()
            .map(|&v| {
                Poisson::new(example.truth(v))
                    .expect("positive rate")
                    .sample(&mut rng)
            })
            .collect(),
    };
    Ok(Simulated {
        example,
        data: Dataset::new(x, y)?,
        sigma,
    })
}

/// Parameters of a planted seasonal GPD: constant scale and a shape that
/// rises linearly from `xi_low` to `xi_high` at `peak_day` and back,
/// staying at `xi_low` more than `half_width` days away.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSeasonGpd {
    pub sigma: f64,
    pub xi_low: f64,
    pub xi_high: f64,
    pub peak_day: f64,
    pub half_width: f64,
}

impl Default for TwoSeasonGpd {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            xi_low: 0.0,
            xi_high: 0.4,
            peak_day: 183.0,
            half_width: 90.0,
        }
    }
}

impl TwoSeasonGpd {
    pub fn xi(&self, day: f64) -> f64 {
        let d = (day - self.peak_day).abs();
        let d = d.min(DAYS_PER_PERIOD - d);
        self.xi_low + (self.xi_high - self.xi_low) * (1.0 - d / self.half_width).max(0.0)
    }

    /// Draws `n` exceedances on uniformly chosen days `1..=366`, returned
    /// sorted by day.
    pub fn simulate(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n < 2 {
            return Err(Error::validation(format!("n must be at least 2, got {n}")));
        }
        let mut rng = stream(seed, SIMULATION_STREAM);
        let mut days: Vec<f64> = (0..n).map(|_| rng.random_range(1..=366) as f64).collect();
        days.sort_by(f64::total_cmp);
        let y = days
            .iter()
            .map(|&d| {
                let xi = self.xi(d);
                let u: f64 = rng.random();
                let tail = 1.0 - u;
                if xi.abs() < 1e-12 {
                    -self.sigma * tail.ln()
                } else {
                    self.sigma / xi * (tail.powf(-xi) - 1.0)
                }
            })
            .collect();
        Dataset::new(days, y)
    }
}

/// Planted single change-point model for the tombs example, on
/// `x = log(d + 0.54)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TombsTruth {
    pub alpha0: f64,
    pub alpha1: f64,
    pub eta: f64,
    pub gamma: f64,
    pub noise_sd: f64,
}

impl Default for TombsTruth {
    fn default() -> Self {
        Self {
            alpha0: -0.15,
            alpha1: 0.96,
            eta: -0.52,
            gamma: 1.29,
            noise_sd: 0.005,
        }
    }
}

impl TombsTruth {
    /// `log r` as a function of `x`.
    pub fn log_radius(&self, x: f64) -> f64 {
        self.alpha0 + self.alpha1 * x + self.eta * (x / self.gamma - 1.0).max(0.0)
    }

    /// `(log a_1, log a_2, b_1, b_2)`.
    pub fn coefficients(&self) -> [f64; 4] {
        let s = tombs_coefficients(self.alpha0, self.alpha1, &[self.eta], &[self.gamma]);
        [s[0].log_a, s[1].log_a, s[0].b, s[1].b]
    }

    /// `n` depth/radius pairs with `x` equally spaced on `[x_min, x_max]`
    /// and Gaussian noise on `log r`.
    pub fn simulate(&self, n: usize, x_min: f64, x_max: f64, seed: u64) -> Result<Dataset> {
        if n < 2 {
            return Err(Error::validation(format!("n must be at least 2, got {n}")));
        }
        let mut rng = stream(seed, SIMULATION_STREAM);
        let noise =
            Normal::new(0.0, self.noise_sd).map_err(|e| Error::validation(e.to_string()))?;
        let mut d = Vec::with_capacity(n);
        let mut r = Vec::with_capacity(n);
        for i in 0..n {
            let x = x_min + (x_max - x_min) * i as f64 / (n - 1) as f64;
            d.push(x.exp() - TOMBS_DELTA);
            r.push((self.log_radius(x) + noise.sample(&mut rng)).exp());
        }
        Dataset::new(d, r)
    }
}

/// Seed and design used for the bundled tombs dataset.
pub const TOMBS_SEED: u64 = 1541;
pub const TOMBS_N: usize = 15;
pub const TOMBS_X_RANGE: (f64, f64) = (0.1, 2.1);

/// Maps depth/radius pairs to `(log(d + 0.54), log r)`.
pub fn tombs_transform(raw: &Dataset) -> Result<Dataset> {
    if let Some(i) = raw.x().iter().position(|&d| !(d + TOMBS_DELTA > 0.0)) {
        return Err(Error::validation(format!(
            "d[{i}] = {} must exceed -{TOMBS_DELTA}",
            raw.x()[i]
        )));
    }
    if let Some(i) = raw.y().iter().position(|&r| !(r > 0.0)) {
        return Err(Error::validation(format!(
            "r[{i}] = {} must be positive",
            raw.y()[i]
        )));
    }
    Dataset::new(
        raw.x().iter().map(|d| (d + TOMBS_DELTA).ln()).collect(),
        raw.y().iter().map(|r| r.ln()).collect(),
    )
}
