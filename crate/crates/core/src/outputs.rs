//! Point estimates, bands, fit metrics and diagnostics computed from a
//! finished chain.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::Serialize;

use crate::basis::{IntervalPartition, KnotState};
use crate::chain::{Chain, MoveStats, Sample, TracePoint};
use crate::conjugate::ConjugateModel;
use crate::error::{Error, Result};
use crate::glm::GlmModel;

/// Turns one recorded sample into a fitted curve.
pub trait CurveEvaluator {
    /// Curve of `sample` on `grid`; `shrunken` selects posterior-mean rather
    /// than plug-in coefficients where the distinction exists.
    fn sample_curve(&self, sample: &Sample, grid: &[f64], shrunken: bool) -> Result<Vec<f64>>;

    /// Coefficients reported with the MAP state.
    fn sample_beta(&self, sample: &Sample) -> Result<Vec<f64>>;
}

impl CurveEvaluator for ConjugateModel<'_> {
    fn sample_curve(&self, sample: &Sample, grid: &[f64], shrunken: bool) -> Result<Vec<f64>> {
        self.curve(&sample.state, grid, shrunken)
    }

    fn sample_beta(&self, sample: &Sample) -> Result<Vec<f64>> {
        Ok(self.least_squares_beta(&sample.state)?.1)
    }
}

impl CurveEvaluator for GlmModel<'_> {
    fn sample_curve(&self, sample: &Sample, grid: &[f64], _shrunken: bool) -> Result<Vec<f64>> {
        let beta = sample
            .beta
            .as_deref()
            .ok_or_else(|| Error::validation("GLM samples must carry coefficients"))?;
        self.curve(&sample.state, beta, grid)
    }

    fn sample_beta(&self, sample: &Sample) -> Result<Vec<f64>> {
        sample
            .beta
            .clone()
            .ok_or_else(|| Error::validation("GLM samples must carry coefficients"))
    }
}

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapEstimate {
    pub index: usize,
    pub iteration: usize,
    pub log_post: f64,
    pub state: KnotState,
    pub beta: Vec<f64>,
    pub curve: Vec<f64>,
}

/// Highest-posterior recorded state (first one on ties) and its curve.
pub fn map_estimate(chain: &Chain, eval: &dyn CurveEvaluator, grid: &[f64]) -> Result<MapEstimate> {
    let index = chain
        .map_index()
        .ok_or_else(|| Error::validation("chain has no samples"))?;
    let s = &chain.samples[index];
    Ok(MapEstimate {
        index,
        iteration: s.iteration,
        log_post: s.log_post,
        state: s.state.clone(),
        beta: eval.sample_beta(s)?,
        curve: eval.sample_curve(s, grid, false)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BmaCurve {
    pub curve: Vec<f64>,
    /// Samples contributing to the average.
    pub used: usize,
    /// Samples whose plug-in failed and that used the shrunken solve.
    pub fallbacks: usize,
    /// Samples with no usable curve.
    pub skipped: usize,
}

fn curve_with_fallback(
    eval: &dyn CurveEvaluator,
    sample: &Sample,
    grid: &[f64],
    shrunken: bool,
) -> Option<(Vec<f64>, bool)> {
    match eval.sample_curve(sample, grid, shrunken) {
        Ok(c) => Some((c, false)),
        Err(_) if !shrunken => eval
            .sample_curve(sample, grid, true)
            .ok()
            .map(|c| (c, true)),
        Err(_) => None,
    }
}

/// Per-sample curves in chain order; consecutive repeats of a conjugate
/// state reuse the previous evaluation. Failed samples yield `None`.
fn per_sample_curves<'c>(
    chain: &'c Chain,
    eval: &'c dyn CurveEvaluator,
    grid: &'c [f64],
    shrunken: bool,
) -> impl Iterator<Item = Option<(Vec<f64>, bool)>> + 'c {
    let mut last: Option<(&Sample, Option<(Vec<f64>, bool)>)> = None;
    chain.samples.iter().map(move |s| {
        if let Some((prev, value)) = &last {
            if prev.state == s.state && prev.beta == s.beta {
                return value.clone();
            }
        }
        let value = curve_with_fallback(eval, s, grid, shrunken);
        last = Some((s, value.clone()));
        value
    })
}

/// Average of per-sample curves over the recorded chain.
pub fn bma_curve(
    chain: &Chain,
    eval: &dyn CurveEvaluator,
    grid: &[f64],
    shrunken: bool,
) -> Result<BmaCurve> {
    if chain.is_empty() {
        return Err(Error::validation("chain has no samples"));
    }
    let mut acc = vec![0.0; grid.len()];
    let (mut used, mut fallbacks, mut skipped) = (0, 0, 0);
    for value in per_sample_curves(chain, eval, grid, shrunken) {
        match value {
            Some((c, fell_back)) => {
                for (a, v) in acc.iter_mut().zip(&c) {
                    *a += v;
                }
                used += 1;
                fallbacks += fell_back as usize;
            }
            None => skipped += 1,
        }
    }
    if used == 0 {
        return Err(Error::Numerical("no sample produced a usable curve".into()));
    }
    acc.iter_mut().for_each(|a| *a /= used as f64);
    Ok(BmaCurve {
        curve: acc,
        used,
        fallbacks,
        skipped,
    })
}

/// All per-sample curves (samples without a usable curve are dropped).
pub fn sample_curves(chain: &Chain, eval: &dyn CurveEvaluator, grid: &[f64]) -> Vec<Vec<f64>> {
    per_sample_curves(chain, eval, grid, false)
        .flatten()
        .map(|(c, _)| c)
        .collect()
}

/// `(1/n) sum (a_i - b_i)^2`.
pub fn mse(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::validation(format!(
            "curve lengths differ ({} vs {})",
            estimate.len(),
            truth.len()
        )));
    }
    if estimate.is_empty() {
        return Err(Error::validation("cannot compute MSE of empty curves"));
    }
    Ok(estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / estimate.len() as f64)
}

/// Linear-interpolation quantile of sorted values (`p` in `[0, 1]`).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bands {
    pub level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Fewest curves accepted for a band at `level`.
pub fn min_band_samples(level: f64) -> usize {
    if level >= 1.0 {
        1
    } else {
        (2.0 / (1.0 - level) - 1e-9).ceil() as usize
    }
}

/// Pointwise empirical `(1 - level)/2` and `(1 + level)/2` quantiles.
pub fn pointwise_bands(curves: &[Vec<f64>], level: f64) -> Result<Bands> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::validation(format!(
            "band level must lie in (0, 1], got {level}"
        )));
    }
    let need = min_band_samples(level);
    if curves.len() < need {
        return Err(Error::validation(format!(
            "{} samples are too few for a {level} band (need {need})",
            curves.len()
        )));
    }
    let g = curves[0].len();
    if curves.iter().any(|c| c.len() != g) {
        return Err(Error::validation("curves have different lengths"));
    }
    let (pl, pu) = ((1.0 - level) / 2.0, (1.0 + level) / 2.0);
    let mut lower = Vec::with_capacity(g);
    let mut upper = Vec::with_capacity(g);
    let mut column = vec![0.0; curves.len()];
    for j in 0..g {
        for (v, c) in column.iter_mut().zip(curves) {
            *v = c[j];
        }
        column.sort_by(f64::total_cmp);
        lower.push(quantile(&column, pl));
        upper.push(quantile(&column, pu));
    }
    Ok(Bands {
        level,
        lower,
        upper,
    })
}

/// Draws `sigma^2 | z, gamma, Y ~ InvGamma(n/2, S/2)`.
pub fn draw_sigma2<R: Rng + ?Sized>(n: usize, s: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(n as f64 / 2.0, 1.0).expect("positive shape");
    0.5 * s / g.sample(rng)
}

/// Pointwise prediction bands: each curve is perturbed by independent
/// `N(0, sigma2_i)` noise before taking quantiles.
pub fn prediction_bands<R: Rng + ?Sized>(
    curves: &[Vec<f64>],
    sigma2: &[f64],
    level: f64,
    rng: &mut R,
) -> Result<Bands> {
    if curves.len() != sigma2.len() {
        return Err(Error::validation(
            "one noise variance per curve is required",
        ));
    }
    let noisy: Vec<Vec<f64>> = curves
        .iter()
        .zip(sigma2)
        .map(|(c, s2)| {
            let sd = s2.sqrt();
            c.iter()
                .map(|v| v + sd * Distribution::<f64>::sample(&StandardNormal, rng))
                .collect()
        })
        .collect();
    pointwise_bands(&noisy, level)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcceptanceRates {
    pub add_delete: f64,
    pub swap: f64,
    pub model_moves: f64,
    pub gamma: f64,
    pub refresh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub samples: usize,
    pub stats: MoveStats,
    pub acceptance: AcceptanceRates,
    /// Frequency of each model size `0..=L` among recorded samples.
    pub size_histogram: Vec<u64>,
    /// Fraction of recorded samples with each interval's knot active.
    pub inclusion: Vec<f64>,
    /// Counts of active knot locations in equal-width bins spanning the
    /// partition.
    pub location_bins: Vec<f64>,
    pub location_counts: Vec<u64>,
    #[serde(skip)]
    pub trace: Vec<TracePoint>,
}

pub const LOCATION_BINS: usize = 50;

pub fn diagnostics(chain: &Chain, partition: &IntervalPartition, max_knots: usize) -> Diagnostics {
    let st = chain.stats;
    let acceptance = AcceptanceRates {
        add_delete: st.add_delete.rate(),
        swap: st.swap.rate(),
        model_moves: st.model_moves().rate(),
        gamma: st.gamma.rate(),
        refresh: st.refresh.rate(),
    };
    let k = partition.len();
    let mut size_histogram = vec![0u64; max_knots + 1];
    let mut inclusion = vec![0.0; k];
    let lo = partition.get(0).lower;
    let hi = partition.get(k - 1).upper;
    let width = (hi - lo) / LOCATION_BINS as f64;
    let location_bins: Vec<f64> = (0..=LOCATION_BINS).map(|i| lo + width * i as f64).collect();
    let mut location_counts = vec![0u64; LOCATION_BINS];
    for s in &chain.samples {
        let size = s.state.size();
        if size >= size_histogram.len() {
            size_histogram.resize(size + 1, 0);
        }
        size_histogram[size] += 1;
        for (j, g) in s.state.active() {
            inclusion[j] += 1.0;
            let b = (((g - lo) / width).floor() as usize).min(LOCATION_BINS - 1);
            location_counts[b] += 1;
        }
    }
    if !chain.is_empty() {
        inclusion.iter_mut().for_each(|v| *v /= chain.len() as f64);
    }
    Diagnostics {
        samples: chain.len(),
        stats: st,
        acceptance,
        size_histogram,
        inclusion,
        location_bins,
        location_counts,
        trace: chain.trace.clone(),
    }
}
