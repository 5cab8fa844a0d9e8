//! Metropolis-within-Gibbs sampler for non-Gaussian likelihoods.
//!
//! Coefficients are not integrated out. A model move proposes `z'` and
//! draws `beta' ~ N(beta_hat', delta_z Sigma_hat')` around the mode of the
//! proposed model; accepted moves are followed by `kappa` random-walk
//! refreshes of `beta` (optionally every move, see
//! [`ProposalScales::refresh_always`]). Knot locations use the same independence scheme as
//! the conjugate sampler with `beta` held fixed.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::basis::{Basis, DesignMatrix, IntervalPartition, KnotState};
use crate::chain::{Chain, MoveStats, Sample, TracePoint};
use crate::conjugate::{accept_log_ratio, propose_z, SamplerConfig, ZMove};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{LikelihoodModel, ModeKind};
use crate::priors::{log_gamma_prior, log_trunc_poisson, sample_knot_state, PriorConfig};
use crate::rng::chain_rng;

pub const MAX_NEWTON_ITERATIONS: usize = 200;
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
/// Smallest eigenvalue of the negative Hessian accepted without a ridge.
pub const MIN_EIGENVALUE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposalScales {
    pub delta_z: f64,
    pub delta_beta: f64,
    pub kappa: usize,
    /// Refresh after every joint move, not only accepted ones. Refreshing
    /// only on acceptance leaves the posterior invariant only when the
    /// model-move proposal is the exact conditional of `beta`; refreshing
    /// every time is invariant in general.
    pub refresh_always: bool,
}

impl Default for ProposalScales {
    fn default() -> Self {
        Self {
            delta_z: 1.0,
            delta_beta: 0.1,
            kappa: 10,
            refresh_always: false,
        }
    }
}

impl ProposalScales {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_z > 0.0 && self.delta_z.is_finite()) {
            return Err(Error::validation(format!(
                "sampler.delta_z must be positive, got {}",
                self.delta_z
            )));
        }
        if !(self.delta_beta > 0.0 && self.delta_beta.is_finite()) {
            return Err(Error::validation(format!(
                "sampler.delta_beta must be positive, got {}",
                self.delta_beta
            )));
        }
        Ok(())
    }
}

/// Knot state, coefficients and their cached log joint posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmState {
    pub knots: KnotState,
    pub beta: Vec<f64>,
    pub log_joint: f64,
}

/// A design with the pieces of its g-prior precomputed.
#[derive(Debug, Clone)]
pub struct GlmDesign {
    pub matrix: DesignMatrix,
    xtx: DMatrix<f64>,
    log_det_r: f64,
}

impl GlmDesign {
    pub fn new(matrix: DesignMatrix) -> Result<Self> {
        let matrix = matrix.factorize()?;
        let qr = matrix.factorization().expect("factorised above");
        let xtx = qr.r().tr_mul(qr.r());
        let log_det_r = qr.log_abs_det_r();
        Ok(Self {
            matrix,
            xtx,
            log_det_r,
        })
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Proposal centre and the Cholesky factor `L` of the negative Hessian
/// (`-H = L L'`, so the covariance is `(L L')^{-1}`).
#[derive(Debug, Clone)]
pub struct Mode {
    pub beta_hat: Vec<f64>,
    chol: DMatrix<f64>,
    log_det_chol: f64,
    pub ridged: bool,
    pub iterations: usize,
}

impl Mode {
    pub fn dim(&self) -> usize {
        self.beta_hat.len()
    }

    /// `Sigma_hat = (-H)^{-1}`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let p = self.dim();
        let linv = self
            .chol
            .solve_lower_triangular(&DMatrix::identity(p, p))
            .expect("Cholesky factor has a positive diagonal");
        linv.tr_mul(&linv)
    }

    /// Draws from `N(beta_hat, delta Sigma_hat)`.
    pub fn sample<R: Rng + ?Sized>(&self, delta: f64, rng: &mut R) -> Vec<f64> {
        let eps = DVector::from_fn(self.dim(), |_, _| {
            Distribution::<f64>::sample(&StandardNormal, rng)
        });
        let v = self
            .chol
            .tr_solve_lower_triangular(&eps)
            .expect("positive diagonal");
        let s = delta.sqrt();
        self.beta_hat
            .iter()
            .zip(v.iter())
            .map(|(m, vi)| m + s * vi)
            .collect()
    }

    /// Draws from `N(centre, delta Sigma_hat)`.
    pub fn perturb<R: Rng + ?Sized>(&self, centre: &[f64], delta: f64, rng: &mut R) -> Vec<f64> {
        let eps = DVector::from_fn(self.dim(), |_, _| {
            Distribution::<f64>::sample(&StandardNormal, rng)
        });
        let v = self
            .chol
            .tr_solve_lower_triangular(&eps)
            .expect("positive diagonal");
        let s = delta.sqrt();
        centre
            .iter()
            .zip(v.iter())
            .map(|(m, vi)| m + s * vi)
            .collect()
    }

    /// Log-density of `beta` under `N(beta_hat, delta Sigma_hat)`.
    pub fn log_density(&self, beta: &[f64], delta: f64) -> f64 {
        let p = self.dim();
        let d = DVector::from_fn(p, |i, _| beta[i] - self.beta_hat[i]);
        let w = self.chol.tr_mul(&d);
        -0.5 * p as f64 * (2.0 * PI * delta).ln() + self.log_det_chol - 0.5 * w.dot(&w) / delta
    }
}

/// Everything the sampler needs that does not change during a run.
#[derive(Clone, Copy)]
pub struct GlmModel<'a> {
    data: &'a Dataset,
    partition: &'a IntervalPartition,
    likelihood: &'a dyn LikelihoodModel,
    priors: PriorConfig,
    basis: Basis,
    mode_kind: ModeKind,
}

impl<'a> GlmModel<'a> {
    pub fn new(
        data: &'a Dataset,
        partition: &'a IntervalPartition,
        likelihood: &'a dyn LikelihoodModel,
        priors: PriorConfig,
        basis: Basis,
    ) -> Result<Self> {
        priors.validate(partition.len())?;
        if likelihood.n() != data.n() {
            return Err(Error::validation("likelihood and dataset sizes differ"));
        }
        Ok(Self {
            data,
            partition,
            likelihood,
            priors,
            basis,
            mode_kind: likelihood.default_mode_kind(),
        })
    }

    pub fn with_mode_kind(mut self, kind: ModeKind) -> Self {
        self.mode_kind = kind;
        self
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

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn likelihood(&self) -> &dyn LikelihoodModel {
        self.likelihood
    }

    pub fn mode_kind(&self) -> ModeKind {
        self.mode_kind
    }

    pub fn blocks(&self) -> usize {
        self.likelihood.blocks()
    }

    pub fn design(&self, state: &KnotState) -> Result<GlmDesign> {
        GlmDesign::new(self.basis.design(self.data.x(), state)?)
    }

    /// Per-block linear predictors `X beta_b`.
    fn predictors(&self, design: &GlmDesign, beta: &[f64]) -> Vec<Vec<f64>> {
        let m = design.ncols();
        (0..self.blocks())
            .map(|b| design.matrix.apply(&beta[b * m..(b + 1) * m]))
            .collect()
    }

    pub fn log_likelihood(&self, design: &GlmDesign, beta: &[f64]) -> f64 {
        let eta = self.predictors(design, beta);
        let blocks = self.blocks();
        let mut e = [0.0; 2];
        let mut total = 0.0;
        for i in 0..self.data.n() {
            for b in 0..blocks {
                e[b] = eta[b][i];
            }
            let v = self.likelihood.log_density(i, &e[..blocks]);
            if v == f64::NEG_INFINITY || v.is_nan() {
                return f64::NEG_INFINITY;
            }
            total += v;
        }
        total
    }

    fn prior_scale(&self) -> f64 {
        self.likelihood.prior_variance() * self.priors.c
    }

    /// Sum over blocks of the g-prior log-density, each block
    /// `N(0, v c (X'X)^{-1})`.
    pub fn log_coefficient_prior(&self, design: &GlmDesign, beta: &[f64]) -> f64 {
        let m = design.ncols();
        let scale = self.prior_scale();
        let mut total = 0.0;
        for b in 0..self.blocks() {
            let bb = DVector::from_column_slice(&beta[b * m..(b + 1) * m]);
            let quad = bb.dot(&(&design.xtx * &bb));
            total +=
                -0.5 * m as f64 * (2.0 * PI * scale).ln() + design.log_det_r - 0.5 * quad / scale;
        }
        total
    }

    /// Log joint posterior of `(z, gamma, beta)` up to the normalising
    /// constant; `-inf` outside the support.
    pub fn log_joint_with(&self, design: &GlmDesign, state: &KnotState, beta: &[f64]) -> f64 {
        let size = log_trunc_poisson(state.size(), &self.priors);
        if size == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let loc = log_gamma_prior(state, self.partition);
        if loc == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let ll = self.log_likelihood(design, beta);
        if ll == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        ll + self.log_coefficient_prior(design, beta) + size + loc
    }

    pub fn log_joint(&self, state: &KnotState, beta: &[f64]) -> f64 {
        if log_trunc_poisson(state.size(), &self.priors) == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        match self.design(state) {
            Ok(d) if beta.len() == d.ncols() * self.blocks() => {
                self.log_joint_with(&d, state, beta)
            }
            _ => f64::NEG_INFINITY,
        }
    }

    /// Objective maximised by the mode search.
    pub fn mode_objective(&self, design: &GlmDesign, beta: &[f64]) -> f64 {
        let ll = self.log_likelihood(design, beta);
        match self.mode_kind {
            ModeKind::Mle => ll,
            ModeKind::Map if ll == f64::NEG_INFINITY => ll,
            ModeKind::Map => ll + self.log_coefficient_prior(design, beta),
        }
    }

    /// Gradient and Hessian of `mode_objective`.
    pub fn mode_derivatives(
        &self,
        design: &GlmDesign,
        beta: &[f64],
    ) -> (DVector<f64>, DMatrix<f64>) {
        let m = design.ncols();
        let blocks = self.blocks();
        let p = m * blocks;
        let n = self.data.n();
        let x = &design.matrix.values;
        let eta = self.predictors(design, beta);
        // per-observation weights
        let mut g_w = vec![vec![0.0; n]; blocks];
        let mut h_w = vec![vec![vec![0.0; n]; blocks]; blocks];
        let mut e = [0.0; 2];
        for i in 0..n {
            for b in 0..blocks {
                e[b] = eta[b][i];
            }
            let d = self.likelihood.derivatives(i, &e[..blocks]);
            for a in 0..blocks {
                g_w[a][i] = d.grad[a];
                for b in 0..blocks {
                    h_w[a][b][i] = d.hess[a][b];
                }
            }
        }
        let mut grad = DVector::zeros(p);
        let mut hess = DMatrix::zeros(p, p);
        for a in 0..blocks {
            let ga = x.tr_mul(&DVector::from_column_slice(&g_w[a]));
            grad.rows_mut(a * m, m).copy_from(&ga);
            for b in a..blocks {
                let mut xw = x.clone();
                for (j, mut col) in xw.column_iter_mut().enumerate() {
                    let _ = j;
                    for i in 0..n {
                        col[i] *= h_w[a][b][i];
                    }
                }
                let block = x.tr_mul(&xw);
                hess.view_mut((a * m, b * m), (m, m)).copy_from(&block);
                if a != b {
                    hess.view_mut((b * m, a * m), (m, m))
                        .copy_from(&block.transpose());
                }
            }
        }
        if self.mode_kind == ModeKind::Map {
            let scale = self.prior_scale();
            for b in 0..blocks {
                let bb = DVector::from_column_slice(&beta[b * m..(b + 1) * m]);
                let g = &design.xtx * bb / scale;
                let mut gv = grad.rows_mut(b * m, m);
                gv -= g;
                let mut hv = hess.view_mut((b * m, b * m), (m, m));
                hv -= &design.xtx / scale;
            }
        }
        (grad, hess)
    }

    /// Newton search with backtracking for the maximiser of the likelihood
    /// (`Mle`) or likelihood times coefficient prior (`Map`), returning the
    /// mode and the inverse negative Hessian there.
    pub fn fit_mode(&self, design: &GlmDesign, start: Option<&[f64]>) -> Result<Mode> {
        let m = design.ncols();
        let p = m * self.blocks();
        let cold = self.likelihood.start_point(m);
        let warm = match start {
            Some(s)
                if s.len() == p
                    && self.mode_objective(design, s) > self.mode_objective(design, &cold) =>
            {
                s
            }
            _ => return self.newton(design, cold),
        };
        // a warm start copied from another design can sit far from the mode
        self.newton(design, warm.to_vec())
            .or_else(|_| self.newton(design, cold))
    }

    fn newton(&self, design: &GlmDesign, mut beta: Vec<f64>) -> Result<Mode> {
        let p = beta.len();
        let mut f = self.mode_objective(design, &beta);
        if !f.is_finite() {
            return Err(Error::Optimisation(
                "start point has zero likelihood".into(),
            ));
        }
        let mut converged = false;
        let mut iterations = 0;
        let mut last_decrement = f64::INFINITY;
        while iterations < MAX_NEWTON_ITERATIONS {
            let (g, h) = self.mode_derivatives(design, &beta);
            if !g.iter().all(|v| v.is_finite()) {
                return Err(Error::Optimisation("non-finite gradient".into()));
            }
            if g.amax() < GRADIENT_TOLERANCE {
                converged = true;
                break;
            }
            iterations += 1;
            // a near singular Hessian yields wild steps, so the system is
            // damped progressively until a backtracking search succeeds
            let neg_h = -h;
            let scale = (neg_h.trace().abs() / p as f64).max(1e-12);
            let noise = 1e-12 * (1.0 + f.abs());
            let mut moved = false;
            let mut damping = 0.0;
            while !moved && damping <= 1e4 * scale {
                let d = newton_direction(&neg_h, damping, &g)?;
                let decrement = g.dot(&d);
                last_decrement = decrement;
                let mut t = 1.0;
                let min_t = if damping == 0.0 { 1e-12 } else { 1e-4 };
                while t > min_t {
                    let trial: Vec<f64> = beta
                        .iter()
                        .zip(d.iter())
                        .map(|(b, di)| b + t * di)
                        .collect();
                    let ft = self.mode_objective(design, &trial);
                    let sufficient = ft >= f + 1e-4 * t * decrement;
                    // within rounding of the optimum the objective cannot
                    // resolve the step, so take it if not visibly worse
                    let flat = decrement < noise && t == 1.0 && ft >= f - noise;
                    if ft.is_finite() && (sufficient || flat) {
                        beta = trial;
                        f = ft;
                        moved = true;
                        break;
                    }
                    t *= 0.5;
                }
                damping = if damping == 0.0 {
                    1e-6 * scale
                } else {
                    damping * 10.0
                };
            }
            if !moved {
                let (g, _) = self.mode_derivatives(design, &beta);
                converged = g.amax() < 1e-5 * (1.0 + f.abs()).sqrt();
                break;
            }
        }
        if !converged {
            let (g, _) = self.mode_derivatives(design, &beta);
            return Err(Error::Optimisation(format!(
                "mode search did not converge after {iterations} iterations (gradient {:.3e}, decrement {:.3e})",
                g.amax(),
                last_decrement
            )));
        }
        let (_, h) = self.mode_derivatives(design, &beta);
        let mut neg_h = -h;
        neg_h = (&neg_h + neg_h.transpose()) * 0.5;
        if !neg_h.iter().all(|v| v.is_finite()) {
            return Err(Error::Optimisation("non-finite Hessian at the mode".into()));
        }
        let min_eig = neg_h.clone().symmetric_eigen().eigenvalues.min();
        let mut ridged = false;
        if min_eig < MIN_EIGENVALUE {
            let ridge = 1e-6 * neg_h.trace() / p as f64;
            for i in 0..p {
                neg_h[(i, i)] += ridge;
            }
            ridged = true;
        }
        let chol = neg_h
            .cholesky()
            .ok_or_else(|| Error::Optimisation("negative Hessian is not positive definite".into()))?
            .l();
        let log_det_chol = (0..p).map(|i| chol[(i, i)].ln()).sum();
        Ok(Mode {
            beta_hat: beta,
            chol,
            log_det_chol,
            ridged,
            iterations,
        })
    }

    /// Response-scale curve for block 0 evaluated on `grid`.
    pub fn curve(&self, state: &KnotState, beta: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
        let eta = self.block_curves(state, beta, grid)?;
        let blocks = self.blocks();
        let mut e = [0.0; 2];
        Ok((0..grid.len())
            .map(|i| {
                for b in 0..blocks {
                    e[b] = eta[b][i];
                }
                self.likelihood.mean_response(&e[..blocks])
            })
            .collect())
    }

    /// Linear predictor of every block on `grid`.
    pub fn block_curves(
        &self,
        state: &KnotState,
        beta: &[f64],
        grid: &[f64],
    ) -> Result<Vec<Vec<f64>>> {
        let x = self.basis.design(grid, state)?;
        let m = x.ncols();
        if beta.len() != m * self.blocks() {
            return Err(Error::validation(
                "coefficient length does not match the design",
            ));
        }
        Ok((0..self.blocks())
            .map(|b| x.apply(&beta[b * m..(b + 1) * m]))
            .collect())
    }

    /// Prior draw of the knot state followed by a mode fit; the first
    /// draw with a feasible mode and finite joint density wins.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GlmState> {
        for attempt in 0..101 {
            let knots = if attempt < 100 {
                sample_knot_state(self.partition, &self.priors, rng)
            } else {
                let mut s = KnotState::empty(self.partition);
                for k in 0..s.len() {
                    s.gamma[k] = self.partition.sample(k, rng);
                }
                s
            };
            if let Ok(state) = self.state_at_mode(knots) {
                return Ok(state);
            }
        }
        Err(Error::Numerical(
            "could not find an initial state with positive posterior density".into(),
        ))
    }

    /// State with coefficients at the mode for `knots`.
    pub fn state_at_mode(&self, knots: KnotState) -> Result<GlmState> {
        knots.validate(self.partition)?;
        let design = self.design(&knots)?;
        let mode = self.fit_mode(&design, None)?;
        let log_joint = self.log_joint_with(&design, &knots, &mode.beta_hat);
        if !log_joint.is_finite() {
            return Err(Error::Numerical("state has zero posterior density".into()));
        }
        Ok(GlmState {
            knots,
            beta: mode.beta_hat,
            log_joint,
        })
    }
}

fn newton_direction(a: &DMatrix<f64>, damping: f64, g: &DVector<f64>) -> Result<DVector<f64>> {
    let p = a.nrows();
    let mut a = (a + a.transpose()) * 0.5;
    for i in 0..p {
        a[(i, i)] += damping;
    }
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(g));
    }
    let scale = (a.trace().abs() / p as f64).max(1e-12);
    let mut tau = 1e-8 * scale;
    for _ in 0..80 {
        let mut b = a.clone();
        for i in 0..p {
            b[(i, i)] += tau;
        }
        if let Some(ch) = b.cholesky() {
            return Ok(ch.solve(g));
        }
        tau *= 4.0;
    }
    Err(Error::Optimisation(
        "could not regularise the Newton system".into(),
    ))
}

/// Mode cache key: indicators plus active locations rounded to 12 decimals.
type ModeKey = (Vec<bool>, Vec<i64>);

fn mode_key(state: &KnotState) -> ModeKey {
    let sig = state
        .active()
        .map(|(_, g)| (g * 1e12).round() as i64)
        .collect();
    (state.z.clone(), sig)
}

/// Copies coefficients of columns shared (by label) between two designs.
fn warm_start(from: &GlmDesign, beta: &[f64], to: &GlmDesign, blocks: usize) -> Vec<f64> {
    let (mf, mt) = (from.ncols(), to.ncols());
    let mut out = vec![0.0; mt * blocks];
    // labels beyond the column count mark constraint placeholders
    for (jt, label) in to.matrix.labels.iter().take(mt).enumerate() {
        if let Some(jf) = from.matrix.labels.iter().take(mf).position(|l| l == label) {
            for b in 0..blocks {
                out[b * mt + jt] = beta[b * mf + jf];
            }
        }
    }
    out
}

/// Sampler state plus the per-iteration mode cache.
pub struct GlmSampler<'m, 'a> {
    model: &'m GlmModel<'a>,
    state: GlmState,
    design: Arc<GlmDesign>,
    cache: HashMap<ModeKey, Arc<Mode>>,
    scales: ProposalScales,
    move_split: f64,
    pub stats: MoveStats,
}

impl<'m, 'a> GlmSampler<'m, 'a> {
    pub fn new(
        model: &'m GlmModel<'a>,
        state: GlmState,
        scales: ProposalScales,
        move_split: f64,
    ) -> Result<Self> {
        scales.validate()?;
        state.knots.validate(model.partition())?;
        let design = Arc::new(model.design(&state.knots)?);
        if state.beta.len() != design.ncols() * model.blocks() {
            return Err(Error::validation(
                "initial coefficients do not match the design",
            ));
        }
        let log_joint = model.log_joint_with(&design, &state.knots, &state.beta);
        if !log_joint.is_finite() {
            return Err(Error::validation(
                "initial state has zero posterior density",
            ));
        }
        let state = GlmState { log_joint, ..state };
        Ok(Self {
            model,
            state,
            design,
            cache: HashMap::new(),
            scales,
            move_split,
            stats: MoveStats::default(),
        })
    }

    pub fn state(&self) -> &GlmState {
        &self.state
    }

    pub fn scales(&self) -> ProposalScales {
        self.scales
    }

    /// Drops cached modes; called once per iteration.
    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }

    fn mode_for(&mut self, knots: &KnotState, design: &GlmDesign) -> Result<Arc<Mode>> {
        let key = mode_key(knots);
        if let Some(m) = self.cache.get(&key) {
            return Ok(m.clone());
        }
        let start = warm_start(&self.design, &self.state.beta, design, self.model.blocks());
        self.stats.optimizer_runs += 1;
        let mode = Arc::new(self.model.fit_mode(design, Some(&start))?);
        if mode.ridged {
            self.stats.ridged_modes += 1;
        }
        self.cache.insert(key, mode.clone());
        Ok(mode)
    }

    /// Mode of the current model.
    pub fn current_mode(&mut self) -> Result<Arc<Mode>> {
        let knots = self.state.knots.clone();
        let design = self.design.clone();
        self.mode_for(&knots, &design)
    }

    /// One joint `(z, beta)` Metropolis-Hastings step.
    pub fn joint_update<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let (kind, proposal) = propose_z(&self.state.knots, self.move_split, rng);
        let accepted = self.try_joint(proposal, rng);
        match kind {
            ZMove::AddDelete => self.stats.add_delete.record(accepted),
            ZMove::Swap => self.stats.swap.record(accepted),
        }
        accepted
    }

    fn try_joint<R: Rng + ?Sized>(&mut self, proposal: KnotState, rng: &mut R) -> bool {
        if proposal.size() > self.model.priors().max_knots {
            self.stats.truncation_rejections += 1;
            return false;
        }
        self.stats.mode_fits += 1;
        let design = match self.model.design(&proposal) {
            Ok(d) => Arc::new(d),
            Err(_) => {
                self.stats.fit_failures += 1;
                return false;
            }
        };
        let mode_new = match self.mode_for(&proposal, &design) {
            Ok(m) => m,
            Err(_) => {
                self.stats.fit_failures += 1;
                return false;
            }
        };
        let mode_cur = match self.current_mode() {
            Ok(m) => m,
            Err(_) => {
                self.stats.fit_failures += 1;
                return false;
            }
        };
        let delta = self.scales.delta_z;
        let beta_new = mode_new.sample(delta, rng);
        let lj_new = self.model.log_joint_with(&design, &proposal, &beta_new);
        let log_ratio = lj_new + mode_cur.log_density(&self.state.beta, delta)
            - self.state.log_joint
            - mode_new.log_density(&beta_new, delta);
        if lj_new.is_finite() && accept_log_ratio(log_ratio, rng) {
            self.state = GlmState {
                knots: proposal,
                beta: beta_new,
                log_joint: lj_new,
            };
            self.design = design;
            true
        } else {
            false
        }
    }

    /// `kappa` random-walk steps `beta* ~ N(beta, delta_beta Sigma_hat)`
    /// using the current model's mode covariance.
    pub fn refresh_beta<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if self.scales.kappa == 0 {
            return;
        }
        let mode = match self.current_mode() {
            Ok(m) => m,
            Err(_) => {
                self.stats.fit_failures += 1;
                return;
            }
        };
        for _ in 0..self.scales.kappa {
            let proposal = mode.perturb(&self.state.beta, self.scales.delta_beta, rng);
            let lj = self
                .model
                .log_joint_with(&self.design, &self.state.knots, &proposal);
            let ok = lj.is_finite() && accept_log_ratio(lj - self.state.log_joint, rng);
            if ok {
                self.state.beta = proposal;
                self.state.log_joint = lj;
            }
            self.stats.refresh.record(ok);
        }
    }

    /// Ascending sweep over intervals with `beta` fixed.
    pub fn update_gamma<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let partition = self.model.partition();
        for k in 0..self.state.knots.len() {
            let fresh = partition.sample(k, rng);
            if !self.state.knots.z[k] {
                self.state.knots.gamma[k] = fresh;
                continue;
            }
            let mut proposal = self.state.knots.clone();
            proposal.gamma[k] = fresh;
            let (ok, design, lj) = match self.model.design(&proposal) {
                Ok(d) => {
                    let lj = self.model.log_joint_with(&d, &proposal, &self.state.beta);
                    let ok = lj.is_finite() && accept_log_ratio(lj - self.state.log_joint, rng);
                    (ok, Some(d), lj)
                }
                Err(_) => (false, None, f64::NEG_INFINITY),
            };
            if ok {
                self.state.knots = proposal;
                self.state.log_joint = lj;
                self.design = Arc::new(design.expect("accepted design exists"));
            }
            self.stats.gamma.record(ok);
        }
    }
}

/// Runs `burnin + iterations` sweeps of `z_steps_per_sweep` joint updates
/// (each accepted one, or every one with `refresh_always`, followed by
/// `kappa` refreshes) and
/// `gamma_steps_per_sweep` location sweeps.
pub fn run_glm_chain(
    model: &GlmModel,
    config: &SamplerConfig,
    scales: ProposalScales,
) -> Result<Chain> {
    config.validate()?;
    scales.validate()?;
    let mut rng = chain_rng(config.seed);
    let init = match &config.initial_state {
        Some(s) => model.state_at_mode(s.clone())?,
        None => model.initial_state(&mut rng)?,
    };
    let mut sampler = GlmSampler::new(model, init, scales, config.move_split)?;
    let mut chain = Chain::new(config.seed);
    for it in 0..config.burnin + config.iterations {
        sampler.clear_cache();
        for _ in 0..config.z_steps_per_sweep {
            if sampler.joint_update(&mut rng) || scales.refresh_always {
                sampler.refresh_beta(&mut rng);
            }
        }
        if config.update_gamma {
            for _ in 0..config.gamma_steps_per_sweep {
                sampler.update_gamma(&mut rng);
            }
        }
        let s = sampler.state();
        chain.trace.push(TracePoint {
            iteration: it,
            log_post: s.log_joint,
            size: s.knots.size(),
        });
        if it >= config.burnin {
            chain.push(Sample {
                iteration: it,
                state: s.knots.clone(),
                beta: Some(s.beta.clone()),
                log_post: s.log_joint,
            });
        }
    }
    chain.stats = sampler.stats;
    Ok(chain)
}
