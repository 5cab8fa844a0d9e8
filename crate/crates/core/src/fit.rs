//! End-to-end fits driven by a [`RunConfig`].

use crate::basis::{Basis, IntervalPartition, KnotState};
use crate::bundle::Table;
use crate::chain::Chain;
use crate::config::{gpd_partition, BasisName, ModelChoice, RunConfig};
use crate::conjugate::{run_gaussian_chain, BasisChoice, ConjugateModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glm::{run_glm_chain, GlmModel};
use crate::models::{
    return_level, tombs_coefficients, GpdLikelihood, ModeKind, PoissonLikelihood, Segment,
};
use crate::outputs::{
    bma_curve, draw_sigma2, grid, map_estimate, min_band_samples, pointwise_bands,
    prediction_bands, Bands, BmaCurve, CurveEvaluator, MapEstimate,
};
use crate::priors::PriorConfig;
use crate::rng::{stream, BAND_STREAM};

/// How much post-processing a fit performs beyond the chain itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detail {
    /// MAP and BMA curves at the observed `x` only.
    AtData,
    /// Also curves and bands on the output grid.
    Full,
}

#[derive(Debug, Clone)]
pub struct Fit {
    pub chain: Chain,
    pub partition: IntervalPartition,
    pub priors: PriorConfig,
    /// Proposal centre used by the non-Gaussian sampler.
    pub mode_kind: Option<ModeKind>,
    pub map_at_data: MapEstimate,
    pub bma_at_data: BmaCurve,
    pub grid: Vec<f64>,
    pub map: Option<MapEstimate>,
    pub bma: Option<BmaCurve>,
    pub bands: Option<Bands>,
    /// Gaussian models only: bands for a new observation.
    pub prediction: Option<Bands>,
}

impl Fit {
    /// `grid_x, map, bma, lower, upper` (plus prediction bounds when
    /// available); absent estimates are left out.
    pub fn curve_table(&self) -> Table {
        let mut t = Table::new();
        t.push("grid_x", self.grid.clone());
        if let Some(m) = &self.map {
            t.push("map", m.curve.clone());
        }
        if let Some(b) = &self.bma {
            t.push("bma", b.curve.clone());
        }
        if let Some(b) = &self.bands {
            t.push("lower", b.lower.clone());
            t.push("upper", b.upper.clone());
        }
        if let Some(b) = &self.prediction {
            t.push("pred_lower", b.lower.clone());
            t.push("pred_upper", b.upper.clone());
        }
        t
    }
}

fn glm_basis(config: &RunConfig, data: &Dataset) -> Result<Basis> {
    let degree = config.model.degree;
    match config.model.basis {
        BasisName::TruncatedPower => Ok(Basis::TruncatedPower { degree }),
        BasisName::Bspline => Ok(Basis::BSpline {
            degree,
            domain: data.x_range(),
        }),
        BasisName::Auto => Err(Error::validation(
            "model.basis = \"auto\" is only available for Gaussian models",
        )),
    }
}

/// Runs the sampler selected by `config.model.kind` and summarises it.
pub fn fit(data: &Dataset, config: &RunConfig, detail: Detail) -> Result<Fit> {
    config.validate()?;
    let partition = config.partition(data)?;
    let priors = config.priors(data.n(), partition.len())?;
    let sampler = config.sampler_config();
    match config.model.kind {
        ModelChoice::Gaussian | ModelChoice::Changepoint => {
            let basis = match config.model.kind {
                ModelChoice::Changepoint => BasisChoice::ChangePoint,
                _ => config.model.basis.into(),
            };
            let model =
                ConjugateModel::new(data, &partition, priors.clone(), basis, config.model.degree)?;
            let chain = run_gaussian_chain(&model, &sampler)?;
            let mut out = summarise(
                chain,
                &model,
                data,
                config,
                detail,
                partition.clone(),
                priors,
            )?;
            if detail == Detail::Full && out.bands.is_some() {
                out.prediction = gaussian_prediction(&out.chain, &model, &out.grid, config)?;
            }
            Ok(out)
        }
        ModelChoice::Poisson => {
            let lik = PoissonLikelihood::new(data)?;
            let mut model = GlmModel::new(
                data,
                &partition,
                &lik,
                priors.clone(),
                glm_basis(config, data)?,
            )?;
            if let Some(kind) = config.model.mode {
                model = model.with_mode_kind(kind);
            }
            let chain = run_glm_chain(&model, &sampler, config.scales())?;
            let out = summarise(
                chain,
                &model,
                data,
                config,
                detail,
                partition.clone(),
                priors,
            )?;
            Ok(Fit {
                mode_kind: Some(model.mode_kind()),
                ..out
            })
        }
        ModelChoice::Gpd => Err(Error::validation(
            "model.kind = \"gpd\" is fitted by the gpd command",
        )),
    }
}

fn summarise(
    chain: Chain,
    eval: &dyn CurveEvaluator,
    data: &Dataset,
    config: &RunConfig,
    detail: Detail,
    partition: IntervalPartition,
    priors: PriorConfig,
) -> Result<Fit> {
    let shrunken = config.output.shrunken;
    let map_at_data = map_estimate(&chain, eval, data.x())?;
    let bma_at_data = bma_curve(&chain, eval, data.x(), shrunken)?;
    let (lo, hi) = data.x_range();
    let mut out = Fit {
        partition,
        priors,
        mode_kind: None,
        map_at_data,
        bma_at_data,
        grid: Vec::new(),
        map: None,
        bma: None,
        bands: None,
        prediction: None,
        chain,
    };
    if detail == Detail::Full {
        out.grid = grid(lo, hi, config.output.grid_size);
        out.map = Some(map_estimate(&out.chain, eval, &out.grid)?);
        out.bma = Some(bma_curve(&out.chain, eval, &out.grid, shrunken)?);
        let level = config.output.band_level;
        let curves = crate::outputs::sample_curves(&out.chain, eval, &out.grid);
        if curves.len() >= min_band_samples(level) {
            out.bands = Some(pointwise_bands(&curves, level)?);
        }
    }
    Ok(out)
}

/// Per-sample least-squares curves widened by `sigma^2` drawn from its
/// conditional posterior given each sample's `S`.
fn gaussian_prediction(
    chain: &Chain,
    model: &ConjugateModel,
    grid: &[f64],
    config: &RunConfig,
) -> Result<Option<Bands>> {
    let mut rng = stream(config.seed, BAND_STREAM);
    let n = model.data().n();
    let mut curves = Vec::with_capacity(chain.len());
    let mut sigma2 = Vec::with_capacity(chain.len());
    let mut last: Option<(&KnotState, Vec<f64>, f64)> = None;
    for s in &chain.samples {
        let cached = match &last {
            Some((state, c, sv)) if *state == &s.state => Some((c.clone(), *sv)),
            _ => None,
        };
        let (curve, s_value) = match cached {
            Some(v) => v,
            None => {
                let post = model.log_marginal_posterior(&s.state);
                let Ok(curve) = model.curve(&s.state, grid, false) else {
                    continue;
                };
                if !post.s_value.is_finite() {
                    continue;
                }
                last = Some((&s.state, curve.clone(), post.s_value));
                (curve, post.s_value)
            }
        };
        sigma2.push(draw_sigma2(n, s_value, &mut rng));
        curves.push(curve);
    }
    if curves.len() < min_band_samples(config.output.band_level) {
        return Ok(None);
    }
    prediction_bands(&curves, &sigma2, config.output.band_level, &mut rng).map(Some)
}

/// Change-point fit on transformed tombs data with the MAP model's segment
/// coefficients.
#[derive(Debug, Clone)]
pub struct TombsFit {
    pub fit: Fit,
    /// MAP change points in ascending order.
    pub changepoints: Vec<f64>,
    pub segments: Vec<Segment>,
}

/// `data` must already be on the `(log(d + delta), log r)` scale.
pub fn fit_tombs(data: &Dataset, config: &RunConfig) -> Result<TombsFit> {
    if config.model.kind != ModelChoice::Changepoint {
        return Err(Error::validation(
            "model.kind must be \"changepoint\" for the tombs command",
        ));
    }
    let fit = fit(data, config, Detail::Full)?;
    let map = &fit.map_at_data;
    let changepoints = map.state.active_locations();
    let (alpha0, alpha1) = (map.beta[0], map.beta[1]);
    let segments = tombs_coefficients(alpha0, alpha1, &map.beta[2..], &changepoints);
    Ok(TombsFit {
        fit,
        changepoints,
        segments,
    })
}

/// Posterior mean and pointwise band of one seasonal curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSummary {
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

fn summarise_curves(curves: &[Vec<f64>], level: f64) -> Result<CurveSummary> {
    let g = curves.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; g];
    for c in curves {
        for (m, v) in mean.iter_mut().zip(c) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= curves.len() as f64);
    let b = pointwise_bands(curves, level)?;
    Ok(CurveSummary {
        mean,
        lower: b.lower,
        upper: b.upper,
    })
}

#[derive(Debug, Clone)]
pub struct GpdFit {
    pub chain: Chain,
    pub partition: IntervalPartition,
    pub priors: PriorConfig,
    pub mode_kind: ModeKind,
    pub map: MapEstimate,
    /// Days `1..=366`.
    pub days: Vec<f64>,
    pub sigma: CurveSummary,
    pub xi: CurveSummary,
    /// Absolute return level (threshold included).
    pub return_level: CurveSummary,
    /// Days where the posterior-mean scale is not positive.
    pub nonpositive_sigma: Vec<usize>,
}

/// Seasonal GPD fit over `[1, 367)` with equal knot intervals.
pub fn fit_gpd(data: &Dataset, config: &RunConfig) -> Result<GpdFit> {
    config.validate()?;
    if config.model.kind != ModelChoice::Gpd {
        return Err(Error::validation(
            "model.kind must be \"gpd\" for the gpd command",
        ));
    }
    let partition = match config.intervals.strategy {
        crate::config::StrategyName::Explicit => {
            IntervalPartition::from_bounds(&config.intervals.bounds)?
        }
        crate::config::StrategyName::EqualCount => gpd_partition(config.intervals.count)?,
        crate::config::StrategyName::EveryNx => {
            return Err(Error::validation(
                "intervals.strategy = \"every_nx\" is not available for the gpd model",
            ))
        }
    };
    let priors = config.priors(data.n(), partition.len())?;
    let lik = GpdLikelihood::new(data)?;
    let gpd = config.gpd.gpd_config();
    let mut model = GlmModel::new(
        data,
        &partition,
        &lik,
        priors.clone(),
        Basis::PeriodicLinear { period: gpd.period },
    )?;
    if let Some(kind) = config.model.mode {
        model = model.with_mode_kind(kind);
    }
    let chain = run_glm_chain(&model, &config.sampler_config(), config.scales())?;
    let days: Vec<f64> = (1..=gpd.period as usize).map(|d| d as f64).collect();
    let map = map_estimate(&chain, &model, &days)?;
    let years = config.gpd.return_period;
    let mut sig = Vec::with_capacity(chain.len());
    let mut shape = Vec::with_capacity(chain.len());
    let mut level = Vec::with_capacity(chain.len());
    for s in &chain.samples {
        let beta = s
            .beta
            .as_deref()
            .ok_or_else(|| Error::validation("GLM samples must carry coefficients"))?;
        let blocks = model.block_curves(&s.state, beta, &days)?;
        let rl = blocks[0]
            .iter()
            .zip(&blocks[1])
            .map(|(&sg, &x)| return_level(sg, x, &gpd, years).map(|z| gpd.threshold + z))
            .collect::<Result<Vec<f64>>>()?;
        let mut it = blocks.into_iter();
        sig.push(it.next().expect("scale block"));
        shape.push(it.next().expect("shape block"));
        level.push(rl);
    }
    let band = config.output.band_level;
    let sigma = summarise_curves(&sig, band)?;
    let nonpositive_sigma = (0..days.len())
        .filter(|&i| !(sigma.mean[i] > 0.0))
        .map(|i| i + 1)
        .collect();
    Ok(GpdFit {
        mode_kind: model.mode_kind(),
        xi: summarise_curves(&shape, band)?,
        return_level: summarise_curves(&level, band)?,
        sigma,
        nonpositive_sigma,
        map,
        days,
        partition,
        priors,
        chain,
    })
}
