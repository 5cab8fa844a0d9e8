//! Gaussian-error sampler on the marginal posterior of `(z, gamma)`.
//!
//! With the g-prior `beta ~ N(0, sigma^2 c (X'X)^{-1})` and
//! `pi(sigma^2) ∝ 1/sigma^2`, coefficients and variance integrate out:
//!
//! ```text
//! pi(z, gamma | Y) ∝ (c+1)^{-m/2} S(Y)^{-n/2} pi_z(z) pi_gamma(gamma)
//! S(Y) = Y'Y - c/(c+1) Y'X (X'X)^{-1} X'Y
//! ```
//!
//! where `m` is the number of design columns (`|z| + P + 1` for splines).
//! `z` moves by add/delete or swap proposals, active knot locations by
//! independence Metropolis steps with the uniform prior as proposal, and
//! inactive ones are redrawn from the prior.

use rand::Rng;

use crate::basis::{Basis, DesignMatrix, IntervalPartition, KnotState};
use crate::chain::{Chain, MoveStats, Sample, TracePoint};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::ThinQr;
use crate::priors::{log_gamma_prior, log_trunc_poisson, sample_knot_state, PriorConfig};
use crate::rng::chain_rng;

/// `S < OVERFIT_FLOOR * Y'Y` is treated as an interpolating fit and rejected.
pub const OVERFIT_FLOOR: f64 = 1e-12;

/// Basis used to build `X_{z,gamma}` on the conjugate path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisChoice {
    TruncatedPower,
    BSpline,
    /// Truncated powers, rebuilt as B-splines whenever the truncated-power
    /// factorisation is rank deficient.
    Auto,
    /// `(-1 + x/gamma)_+` change-point columns (degree fixed at one).
    ChangePoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignFailure {
    RankDeficient,
    Overfit,
}

/// Log of the marginal posterior up to a constant, with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalPosterior {
    pub log_value: f64,
    pub s_value: f64,
    pub active_count: usize,
    pub failure: Option<DesignFailure>,
}

impl MarginalPosterior {
    fn rejected(active_count: usize, failure: Option<DesignFailure>) -> Self {
        Self {
            log_value: f64::NEG_INFINITY,
            s_value: f64::NAN,
            active_count,
            failure,
        }
    }
}

/// `Y'Y - c/(c+1) |Q'Y|^2`, clipped below at the analytic floor `Y'Y/(c+1)`.
pub fn shrinkage_residual(y: &[f64], factor: &ThinQr, c: f64) -> f64 {
    let yty: f64 = y.iter().map(|v| v * v).sum();
    let proj = factor.qt_mul(y).norm_squared();
    (yty - c / (c + 1.0) * proj).max(yty / (c + 1.0))
}

/// Data, partition, prior and basis for one conjugate fit.
#[derive(Debug, Clone)]
pub struct ConjugateModel<'a> {
    data: &'a Dataset,
    partition: &'a IntervalPartition,
    priors: PriorConfig,
    basis: BasisChoice,
    degree: usize,
    domain: (f64, f64),
    yty: f64,
}

impl<'a> ConjugateModel<'a> {
    pub fn new(
        data: &'a Dataset,
        partition: &'a IntervalPartition,
        priors: PriorConfig,
        basis: BasisChoice,
        degree: usize,
    ) -> Result<Self> {
        priors.validate(partition.len())?;
        if degree < 1 {
            return Err(Error::validation("model.degree must be at least 1"));
        }
        let degree = if basis == BasisChoice::ChangePoint {
            1
        } else {
            degree
        };
        let yty = data.y_sum_sq();
        if !(yty > 0.0) {
            return Err(Error::validation("response vector is identically zero"));
        }
        Ok(Self {
            data,
            partition,
            priors,
            basis,
            degree,
            domain: data.x_range(),
            yty,
        })
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn partition(&self) -> &IntervalPartition {
        self.partition
    }

    pub fn priors(&self) -> &PriorConfig {
        &self.priors
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    fn primary_basis(&self) -> Basis {
        match self.basis {
            BasisChoice::TruncatedPower | BasisChoice::Auto => Basis::TruncatedPower {
                degree: self.degree,
            },
            BasisChoice::BSpline => Basis::BSpline {
                degree: self.degree,
                domain: self.domain,
            },
            BasisChoice::ChangePoint => Basis::ChangePoint,
        }
    }

    /// Factorised design on the observed `x`, together with the basis that
    /// produced it (after any automatic fallback).
    pub fn design(&self, state: &KnotState) -> Result<(Basis, DesignMatrix)> {
        let basis = self.primary_basis();
        let first = basis.design(self.data.x(), state)?.factorize();
        match first {
            Err(Error::RankDeficient { .. }) if self.basis == BasisChoice::Auto => {
                let fallback = Basis::BSpline {
                    degree: self.degree,
                    domain: self.domain,
                };
                Ok((
                    fallback,
                    fallback.design(self.data.x(), state)?.factorize()?,
                ))
            }
            other => other.map(|d| (basis, d)),
        }
    }

    pub fn log_marginal_posterior(&self, state: &KnotState) -> MarginalPosterior {
        let size = state.size();
        let log_z = log_trunc_poisson(size, &self.priors);
        if log_z == f64::NEG_INFINITY {
            return MarginalPosterior::rejected(size, None);
        }
        let log_g = log_gamma_prior(state, self.partition);
        if log_g == f64::NEG_INFINITY {
            return MarginalPosterior::rejected(size, None);
        }
        let design = match self.design(state) {
            Ok((_, d)) => d,
            Err(_) => return MarginalPosterior::rejected(size, Some(DesignFailure::RankDeficient)),
        };
        let factor = design.factorization().expect("factorised design");
        let s = shrinkage_residual(self.data.y(), factor, self.priors.c);
        if !(s > OVERFIT_FLOOR * self.yty) {
            return MarginalPosterior::rejected(size, Some(DesignFailure::Overfit));
        }
        let m = design.ncols() as f64;
        let n = self.data.n() as f64;
        let log_value = -0.5 * m * (self.priors.c + 1.0).ln() - 0.5 * n * s.ln() + log_z + log_g;
        MarginalPosterior {
            log_value,
            s_value: s,
            active_count: size,
            failure: None,
        }
    }

    /// Least-squares coefficients for `state`, with the basis they refer to.
    pub fn least_squares_beta(&self, state: &KnotState) -> Result<(Basis, Vec<f64>)> {
        let (basis, design) = self.design(state)?;
        let beta = design.factorization().unwrap().least_squares(self.data.y());
        Ok((basis, beta.as_slice().to_vec()))
    }

    /// `E(beta | z, gamma, Y) = c/(c+1) (X'X)^{-1} X'Y`.
    pub fn posterior_mean_beta(&self, state: &KnotState) -> Result<Vec<f64>> {
        let (_, ls) = self.least_squares_beta(state)?;
        let shrink = self.priors.c / (self.priors.c + 1.0);
        Ok(ls.into_iter().map(|b| shrink * b).collect())
    }

    /// Fitted curve on `grid` using least-squares (or, with `shrunken`,
    /// posterior-mean) coefficients for `state`.
    pub fn curve(&self, state: &KnotState, grid: &[f64], shrunken: bool) -> Result<Vec<f64>> {
        let (basis, mut beta) = self.least_squares_beta(state)?;
        if shrunken {
            let shrink = self.priors.c / (self.priors.c + 1.0);
            beta.iter_mut().for_each(|b| *b *= shrink);
        }
        Ok(basis.design(grid, state)?.apply(&beta))
    }

    /// Draws an initial state from the prior, retrying a bounded number of
    /// times when the draw has zero posterior density.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<KnotState> {
        for _ in 0..100 {
            let s = sample_knot_state(self.partition, &self.priors, rng);
            if self.log_marginal_posterior(&s).log_value.is_finite() {
                return Ok(s);
            }
        }
        let mut s = KnotState::empty(self.partition);
        for k in 0..s.len() {
            s.gamma[k] = self.partition.sample(k, rng);
        }
        if self.log_marginal_posterior(&s).log_value.is_finite() {
            Ok(s)
        } else {
            Err(Error::Numerical(
                "could not find an initial state with positive posterior density".into(),
            ))
        }
    }
}

/// Kind of model-indicator move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZMove {
    AddDelete,
    Swap,
}

/// Flips one uniformly chosen indicator.
pub fn propose_add_delete<R: Rng + ?Sized>(state: &KnotState, rng: &mut R) -> KnotState {
    let mut next = state.clone();
    let k = rng.random_range(0..state.len());
    next.z[k] = !next.z[k];
    next
}

/// Exchanges the indicators of two distinct uniformly chosen intervals;
/// knot locations stay with their intervals. With a single interval this
/// falls back to an add/delete move.
pub fn propose_swap<R: Rng + ?Sized>(state: &KnotState, rng: &mut R) -> KnotState {
    let k = state.len();
    if k < 2 {
        return propose_add_delete(state, rng);
    }
    let i = rng.random_range(0..k);
    let mut j = rng.random_range(0..k - 1);
    if j >= i {
        j += 1;
    }
    let mut next = state.clone();
    next.z.swap(i, j);
    next
}

/// Draws the move type and the proposal for one indicator update.
pub fn propose_z<R: Rng + ?Sized>(
    state: &KnotState,
    move_split: f64,
    rng: &mut R,
) -> (ZMove, KnotState) {
    if state.len() < 2 || rng.random::<f64>() < move_split {
        (ZMove::AddDelete, propose_add_delete(state, rng))
    } else {
        (ZMove::Swap, propose_swap(state, rng))
    }
}

/// Metropolis acceptance on the log scale; `-inf` proposals never pass.
pub fn accept_log_ratio<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio.is_nan() || log_ratio == f64::NEG_INFINITY {
        return false;
    }
    if log_ratio >= 0.0 {
        return true;
    }
    rng.random::<f64>() < log_ratio.exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Recorded iterations after burn-in.
    pub iterations: usize,
    pub burnin: usize,
    pub z_steps_per_sweep: usize,
    pub gamma_steps_per_sweep: usize,
    /// Probability of an add/delete (rather than swap) proposal.
    pub move_split: f64,
    pub seed: u64,
    /// Disable to hold knot locations fixed.
    pub update_gamma: bool,
    /// Starting point; drawn from the prior when absent.
    pub initial_state: Option<KnotState>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            burnin: 500,
            z_steps_per_sweep: 20,
            gamma_steps_per_sweep: 1,
            move_split: 0.5,
            seed: 1,
            update_gamma: true,
            initial_state: None,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::validation("sampler.iterations must be positive"));
        }
        if !(self.move_split > 0.0 && self.move_split < 1.0) {
            return Err(Error::validation(format!(
                "sampler.move_split must lie in (0, 1), got {}",
                self.move_split
            )));
        }
        Ok(())
    }
}

/// Current state of a conjugate chain and its kernels.
#[derive(Debug, Clone)]
pub struct GaussianSampler<'m, 'a> {
    model: &'m ConjugateModel<'a>,
    state: KnotState,
    current: MarginalPosterior,
    move_split: f64,
    pub stats: MoveStats,
}

impl<'m, 'a> GaussianSampler<'m, 'a> {
    pub fn new(model: &'m ConjugateModel<'a>, state: KnotState, move_split: f64) -> Result<Self> {
        state.validate(model.partition())?;
        let current = model.log_marginal_posterior(&state);
        if !current.log_value.is_finite() {
            return Err(Error::validation(
                "initial state has zero posterior density",
            ));
        }
        Ok(Self {
            model,
            state,
            current,
            move_split,
            stats: MoveStats::default(),
        })
    }

    pub fn state(&self) -> &KnotState {
        &self.state
    }

    pub fn log_value(&self) -> f64 {
        self.current.log_value
    }

    /// One Metropolis update of `z`; returns whether the proposal was taken.
    pub fn update_z<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let (kind, proposal) = propose_z(&self.state, self.move_split, rng);
        let accepted = if proposal.z == self.state.z {
            // identity swap: ratio is exactly one
            true
        } else {
            let next = self.model.log_marginal_posterior(&proposal);
            match next.failure {
                Some(_) => self.stats.fit_failures += 1,
                None if !next.log_value.is_finite() => self.stats.truncation_rejections += 1,
                None => {}
            }
            let ok = accept_log_ratio(next.log_value - self.current.log_value, rng);
            if ok {
                self.state = proposal;
                self.current = next;
            }
            ok
        };
        match kind {
            ZMove::AddDelete => self.stats.add_delete.record(accepted),
            ZMove::Swap => self.stats.swap.record(accepted),
        }
        accepted
    }

    /// Sweeps `k = 1..K` in ascending order: inactive locations are redrawn
    /// from their uniform prior, active ones get an independence Metropolis
    /// step with the prior as proposal.
    pub fn update_gamma<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let partition = self.model.partition();
        for k in 0..self.state.len() {
            let fresh = partition.sample(k, rng);
            if !self.state.z[k] {
                self.state.gamma[k] = fresh;
                continue;
            }
            let old = self.state.gamma[k];
            self.state.gamma[k] = fresh;
            let next = self.model.log_marginal_posterior(&self.state);
            let ok = accept_log_ratio(next.log_value - self.current.log_value, rng);
            if ok {
                self.current = next;
            } else {
                self.state.gamma[k] = old;
            }
            self.stats.gamma.record(ok);
        }
    }
}

/// Runs `burnin + iterations` sweeps of `z_steps_per_sweep` indicator
/// updates followed by `gamma_steps_per_sweep` location sweeps, recording
/// every post burn-in state.
pub fn run_gaussian_chain(model: &ConjugateModel, config: &SamplerConfig) -> Result<Chain> {
    config.validate()?;
    let mut rng = chain_rng(config.seed);
    let init = match &config.initial_state {
        Some(s) => s.clone(),
        None => model.initial_state(&mut rng)?,
    };
    let mut sampler = GaussianSampler::new(model, init, config.move_split)?;
    let mut chain = Chain::new(config.seed);
    for it in 0..config.burnin + config.iterations {
        for _ in 0..config.z_steps_per_sweep {
            sampler.update_z(&mut rng);
        }
        if config.update_gamma {
            for _ in 0..config.gamma_steps_per_sweep {
                sampler.update_gamma(&mut rng);
            }
        }
        chain.trace.push(TracePoint {
            iteration: it,
            log_post: sampler.log_value(),
            size: sampler.state().size(),
        });
        if it >= config.burnin {
            chain.push(Sample {
                iteration: it,
                state: sampler.state().clone(),
                beta: None,
                log_post: sampler.log_value(),
            });
        }
    }
    chain.stats = sampler.stats;
    Ok(chain)
}
