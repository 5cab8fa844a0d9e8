//! Run configuration loaded from TOML.
//!
//! ```toml
//! seed = 7
//!
//! [model]
//! kind = "gaussian"
//! degree = 3
//!
//! [intervals]
//! strategy = "every_nx"
//! n_x = 4
//!
//! [prior]
//! lambda = 3.0
//!
//! [sampler]
//! iterations = 1000
//! burnin = 500
//! ```
//!
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::basis::{default_intervals, Interval, IntervalPartition, IntervalStrategy};
use crate::conjugate::{BasisChoice, SamplerConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glm::ProposalScales;
use crate::models::{GpdConfig, ModeKind, DAYS_PER_PERIOD};
use crate::priors::PriorConfig;
use crate::simulate::Example;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Gaussian,
    Changepoint,
    Poisson,
    Gpd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisName {
    TruncatedPower,
    Bspline,
    Auto,
}

impl From<BasisName> for BasisChoice {
    fn from(b: BasisName) -> Self {
        match b {
            BasisName::TruncatedPower => BasisChoice::TruncatedPower,
            BasisName::Bspline => BasisChoice::BSpline,
            BasisName::Auto => BasisChoice::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Map,
    Bma,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelChoice,
    pub degree: usize,
    pub basis: BasisName,
    /// Proposal centre for non-Gaussian models; the likelihood's default
    /// when unset.
    pub mode: Option<ModeKind>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: ModelChoice::Gaussian,
            degree: 3,
            basis: BasisName::TruncatedPower,
            mode: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    EveryNx,
    EqualCount,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntervalSection {
    pub strategy: StrategyName,
    pub n_x: usize,
    pub count: usize,
    pub bounds: Vec<f64>,
}

impl Default for IntervalSection {
    fn default() -> Self {
        Self {
            strategy: StrategyName::EveryNx,
            n_x: 4,
            count: 10,
            bounds: Vec::new(),
        }
    }
}

impl IntervalSection {
    pub fn strategy(&self) -> IntervalStrategy {
        match self.strategy {
            StrategyName::EveryNx => IntervalStrategy::EveryNx(self.n_x),
            StrategyName::EqualCount => IntervalStrategy::EqualCount(self.count),
            StrategyName::Explicit => IntervalStrategy::Explicit(self.bounds.clone()),
        }
    }
}

/// Prior settings; unset fields take model-dependent defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    pub c: Option<f64>,
    pub lambda: Option<f64>,
    pub max_knots: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub iterations: usize,
    pub burnin: usize,
    pub z_steps_per_sweep: usize,
    pub gamma_steps_per_sweep: usize,
    pub kappa: usize,
    pub delta_z: f64,
    pub delta_beta: f64,
    pub move_split: f64,
    pub update_gamma: bool,
    pub refresh_always: bool,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let s = SamplerConfig::default();
        let p = ProposalScales::default();
        Self {
            iterations: s.iterations,
            burnin: s.burnin,
            z_steps_per_sweep: s.z_steps_per_sweep,
            gamma_steps_per_sweep: s.gamma_steps_per_sweep,
            kappa: p.kappa,
            delta_z: p.delta_z,
            delta_beta: p.delta_beta,
            move_split: s.move_split,
            update_gamma: s.update_gamma,
            refresh_always: p.refresh_always,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub estimator: Estimator,
    pub grid_size: usize,
    pub band_level: f64,
    /// Use posterior-mean rather than least-squares coefficients in the
    /// model average.
    pub shrunken: bool,
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            estimator: Estimator::Both,
            grid_size: 200,
            band_level: 0.95,
            shrunken: false,
            dir: PathBuf::from("auxspline-out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpdSection {
    pub threshold: f64,
    pub zeta_u: f64,
    pub n_y: f64,
    pub return_period: f64,
}

impl Default for GpdSection {
    fn default() -> Self {
        let g = GpdConfig::default();
        Self {
            threshold: g.threshold,
            zeta_u: g.zeta_u,
            n_y: g.n_y,
            return_period: 50.0,
        }
    }
}

impl GpdSection {
    pub fn gpd_config(&self) -> GpdConfig {
        GpdConfig {
            threshold: self.threshold,
            zeta_u: self.zeta_u,
            n_y: self.n_y,
            period: DAYS_PER_PERIOD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelSection,
    pub intervals: IntervalSection,
    pub prior: PriorSection,
    pub sampler: SamplerSection,
    pub output: OutputSection,
    pub gpd: GpdSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            model: ModelSection::default(),
            intervals: IntervalSection::default(),
            prior: PriorSection::default(),
            sampler: SamplerSection::default(),
            output: OutputSection::default(),
            gpd: GpdSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::validation(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Settings of the Gaussian curve-fitting studies: cubic truncated
    /// powers with `n_x` of 4, 10 and 4 for the three examples, or B-splines
    /// with `n_x = 2` when `n < 100`; 500 + 1000 iterations with 20
    /// indicator steps per location sweep.
    pub fn curve_study(example: Example, n: usize) -> Self {
        let mut c = Self::default();
        let small = n < 100;
        c.model.basis = if small {
            BasisName::Bspline
        } else {
            BasisName::TruncatedPower
        };
        c.intervals.n_x = match example {
            _ if small => 2,
            Example::Dms2 => 10,
            _ => 4,
        };
        c
    }

    /// Study settings for any simulated example.
    pub fn for_example(example: Example, n: usize, degree: usize) -> Self {
        match example {
            Example::Poisson => Self::poisson_example(degree),
            _ => {
                let mut c = Self::curve_study(example, n);
                c.model.degree = degree;
                c
            }
        }
    }

    /// Settings of the Poisson simulation study: `c = 500`, `lambda = 1`,
    /// `L = 10`, ten fixed intervals, 1000 + 5000 iterations with 10 joint
    /// steps, `kappa = 10` and `delta_z = delta_beta = 1/50`.
    pub fn poisson_example(degree: usize) -> Self {
        let mut c = Self::default();
        c.model = ModelSection {
            kind: ModelChoice::Poisson,
            degree,
            basis: BasisName::TruncatedPower,
            mode: None,
        };
        c.intervals = IntervalSection {
            strategy: StrategyName::Explicit,
            bounds: vec![0.02, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.98],
            ..IntervalSection::default()
        };
        c.prior = PriorSection {
            c: Some(500.0),
            lambda: Some(1.0),
            max_knots: Some(10),
        };
        c.sampler.iterations = 5000;
        c.sampler.burnin = 1000;
        c.sampler.z_steps_per_sweep = 10;
        c.sampler.kappa = 10;
        c.sampler.delta_z = 1.0 / 50.0;
        c.sampler.delta_beta = 1.0 / 50.0;
        c
    }

    /// Change-point settings for the tombs data: `c = 500`, `lambda = 1`,
    /// `L = 3`, intervals bounded by 0.15, 0.8, 1.2, 1.6, and 1000 + 5000
    /// iterations with 20 indicator steps.
    pub fn tombs() -> Self {
        let mut c = Self::default();
        c.model = ModelSection {
            kind: ModelChoice::Changepoint,
            degree: 1,
            basis: BasisName::TruncatedPower,
            mode: None,
        };
        c.intervals = IntervalSection {
            strategy: StrategyName::Explicit,
            bounds: vec![0.15, 0.8, 1.2, 1.6],
            ..IntervalSection::default()
        };
        c.prior = PriorSection {
            c: Some(500.0),
            lambda: Some(1.0),
            max_knots: Some(3),
        };
        c.sampler.iterations = 5000;
        c.sampler.burnin = 1000;
        c.sampler.z_steps_per_sweep = 20;
        c
    }

    /// Seasonal GPD settings: `c = n`, `lambda = 1`, `L = 10`, ten equal
    /// intervals over the year, 1000 + 5000 iterations with 10 joint steps
    /// and 10 location sweeps, `kappa = 10`, `delta_z = 1`,
    /// `delta_beta = 1/10`.
    pub fn gpd() -> Self {
        let mut c = Self::default();
        c.model = ModelSection {
            kind: ModelChoice::Gpd,
            degree: 1,
            basis: BasisName::TruncatedPower,
            mode: None,
        };
        c.intervals = IntervalSection {
            strategy: StrategyName::Explicit,
            bounds: gpd_bounds(10),
            ..IntervalSection::default()
        };
        c.prior = PriorSection {
            c: None,
            lambda: Some(1.0),
            max_knots: Some(10),
        };
        c.sampler.iterations = 5000;
        c.sampler.burnin = 1000;
        c.sampler.z_steps_per_sweep = 10;
        c.sampler.gamma_steps_per_sweep = 10;
        c.sampler.kappa = 10;
        c.sampler.delta_z = 1.0;
        c.sampler.delta_beta = 0.1;
        c.output.grid_size = 366;
        c
    }

    /// Priors with model-dependent defaults filled in.
    pub fn priors(&self, n: usize, intervals: usize) -> Result<PriorConfig> {
        let lambda_default = match self.model.kind {
            ModelChoice::Gaussian | ModelChoice::Poisson => 3.0,
            ModelChoice::Changepoint | ModelChoice::Gpd => 1.0,
        };
        let c_default = match self.model.kind {
            ModelChoice::Gaussian => PriorConfig::default_c(n),
            _ => n as f64,
        };
        let p = PriorConfig {
            c: self.prior.c.unwrap_or(c_default),
            lambda: self.prior.lambda.unwrap_or(lambda_default),
            max_knots: self.prior.max_knots.unwrap_or(10.min(intervals)),
        };
        p.validate(intervals)?;
        Ok(p)
    }

    pub fn partition(&self, data: &Dataset) -> Result<IntervalPartition> {
        default_intervals(data, &self.intervals.strategy())
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            iterations: self.sampler.iterations,
            burnin: self.sampler.burnin,
            z_steps_per_sweep: self.sampler.z_steps_per_sweep,
            gamma_steps_per_sweep: self.sampler.gamma_steps_per_sweep,
            move_split: self.sampler.move_split,
            seed: self.seed,
            update_gamma: self.sampler.update_gamma,
            initial_state: None,
        }
    }

    pub fn scales(&self) -> ProposalScales {
        ProposalScales {
            delta_z: self.sampler.delta_z,
            delta_beta: self.sampler.delta_beta,
            kappa: self.sampler.kappa,
            refresh_always: self.sampler.refresh_always,
        }
    }

    /// Checks every field that does not depend on the data.
    pub fn validate(&self) -> Result<()> {
        self.sampler_config().validate()?;
        self.scales().validate()?;
        if self.model.degree < 1 {
            return Err(Error::validation("model.degree must be at least 1"));
        }
        if self.model.kind == ModelChoice::Changepoint && self.model.degree != 1 {
            return Err(Error::validation(
                "model.degree must be 1 for the changepoint model",
            ));
        }
        if self.output.grid_size < 2 {
            return Err(Error::validation("output.grid_size must be at least 2"));
        }
        if !(self.output.band_level > 0.0 && self.output.band_level <= 1.0) {
            return Err(Error::validation(format!(
                "output.band_level must lie in (0, 1], got {}",
                self.output.band_level
            )));
        }
        match self.intervals.strategy {
            StrategyName::EveryNx if self.intervals.n_x < 1 => {
                return Err(Error::validation("intervals.n_x must be at least 1"))
            }
            StrategyName::EqualCount if self.intervals.count < 1 => {
                return Err(Error::validation("intervals.count must be at least 1"))
            }
            StrategyName::Explicit if self.intervals.bounds.len() < 2 => {
                return Err(Error::validation(
                    "intervals.bounds needs at least two values",
                ))
            }
            _ => {}
        }
        if self.model.kind == ModelChoice::Gpd {
            self.gpd.gpd_config().validate()?;
            if !(self.gpd.return_period > 0.0) {
                return Err(Error::validation("gpd.return_period must be positive"));
            }
        }
        Ok(())
    }
}

/// Bounds of `k` equal intervals covering days `[1, 367)`.
pub fn gpd_bounds(k: usize) -> Vec<f64> {
    let w = DAYS_PER_PERIOD / k as f64;
    (0..=k).map(|i| 1.0 + w * i as f64).collect()
}

/// Equal intervals over the seasonal cycle.
pub fn gpd_partition(k: usize) -> Result<IntervalPartition> {
    let b = gpd_bounds(k);
    IntervalPartition::new(
        b.windows(2)
            .map(|w| Interval {
                lower: w[0],
                upper: w[1],
            })
            .collect(),
    )
}
