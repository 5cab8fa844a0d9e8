//! Poisson sampler checks against targets computed from scratch here.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use auxspline::basis::{Basis, IntervalPartition, KnotState};
use auxspline::conjugate::SamplerConfig;
use auxspline::data::Dataset;
use auxspline::glm::{run_glm_chain, GlmModel, GlmSampler, ProposalScales};
use auxspline::models::PoissonLikelihood;
use auxspline::priors::PriorConfig;

fn counts(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let y = x
        .iter()
        .map(|&v| {
            let rate = (0.8 + 1.5 * (v - 0.5).max(0.0) + 0.6 * (v - 0.5).abs()).exp();
            Poisson::new(rate).unwrap().sample(&mut rng)
        })
        .collect();
    Dataset::new(x, y).unwrap()
}

/// Columns `1, x, (x - k)_+` for each knot.
fn design(x: &[f64], knots: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), 2 + knots.len(), |i, j| match j {
        0 => 1.0,
        1 => x[i],
        _ => (x[i] - knots[j - 2]).max(0.0),
    })
}

/// Poisson log-likelihood plus the `N(0, c (X'X)^{-1})` log density.
fn log_target(xm: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>, c: f64) -> f64 {
    let eta = xm * beta;
    let ll: f64 = eta
        .iter()
        .zip(y)
        .map(|(e, &yi)| yi * e - e.exp() - ln_factorial(yi))
        .sum();
    let xtx = xm.tr_mul(xm);
    let m = xm.ncols() as f64;
    let log_det = xtx
        .clone()
        .cholesky()
        .unwrap()
        .l()
        .diagonal()
        .iter()
        .map(|v| 2.0 * v.ln())
        .sum::<f64>();
    ll - 0.5 * m * (2.0 * std::f64::consts::PI * c).ln() + 0.5 * log_det
        - 0.5 * beta.dot(&(&xtx * beta)) / c
}

fn ln_factorial(count: f64) -> f64 {
    (2..=count as u64).map(|k| (k as f64).ln()).sum()
}

/// Posterior mode and negative Hessian by plain Newton iterations.
fn mode(xm: &DMatrix<f64>, y: &[f64], c: f64) -> (DVector<f64>, DMatrix<f64>) {
    let prec = xm.tr_mul(xm) / c;
    let mut beta = DVector::zeros(xm.ncols());
    let yv = DVector::from_column_slice(y);
    for _ in 0..100 {
        let mu = (xm * &beta).map(f64::exp);
        let g = xm.tr_mul(&(&yv - &mu)) - &prec * &beta;
        let w = DMatrix::from_diagonal(&mu);
        let h = xm.tr_mul(&(w * xm)) + &prec;
        let step = h.clone().cholesky().unwrap().solve(&g);
        beta += &step;
        if step.amax() < 1e-12 {
            break;
        }
    }
    let mu = (xm * &beta).map(f64::exp);
    let h = xm.tr_mul(&(DMatrix::from_diagonal(&mu) * xm)) + &prec;
    (beta, h)
}

/// `log p(y | model)` by importance sampling from an inflated Laplace
/// approximation.
fn log_evidence(xm: &DMatrix<f64>, y: &[f64], c: f64, draws: usize, seed: u64) -> f64 {
    let (centre, h) = mode(xm, y, c);
    let p = centre.len();
    let inflate = 1.3;
    let l = h.cholesky().unwrap().l();
    let log_det_l: f64 = l.diagonal().iter().map(|v| v.ln()).sum();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut logs = Vec::with_capacity(draws);
    for _ in 0..draws {
        let e = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
        let v = l.tr_solve_lower_triangular(&e).unwrap() * inflate;
        let beta = &centre + &v;
        let log_q = -0.5 * p as f64 * (2.0 * std::f64::consts::PI).ln() + log_det_l
            - p as f64 * f64::ln(inflate)
            - 0.5 * e.dot(&e);
        logs.push(log_target(xm, y, &beta, c) - log_q);
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    top + (logs.iter().map(|l| (l - top).exp()).sum::<f64>() / draws as f64).ln()
}

#[test]
fn model_frequencies_match_integrated_posteriors() {
    let data = counts(100, 8);
    let part = IntervalPartition::from_bounds(&[0.2, 0.5, 0.8]).unwrap();
    let mids = part.midpoints();
    let priors = PriorConfig {
        c: 100.0,
        lambda: 1.0,
        max_knots: 2,
    };
    let lik = PoissonLikelihood::new(&data).unwrap();
    let model = GlmModel::new(
        &data,
        &part,
        &lik,
        priors,
        Basis::TruncatedPower { degree: 1 },
    )
    .unwrap();

    let mut exact = [0.0; 4];
    for (code, slot) in exact.iter_mut().enumerate() {
        let knots: Vec<f64> = (0..2)
            .filter(|k| code >> k & 1 == 1)
            .map(|k| mids[k])
            .collect();
        let xm = design(data.x(), &knots);
        // lambda = 1, so the size prior is 1 / |z|!
        let size_prior = if knots.len() == 2 { 0.5f64.ln() } else { 0.0 };
        *slot = log_evidence(&xm, data.y(), priors.c, 200_000, 40 + code as u64) + size_prior;
    }
    let top = exact.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = exact.iter().map(|l| (l - top).exp()).sum();
    let exact: Vec<f64> = exact.iter().map(|l| (l - top).exp() / total).collect();

    let cfg = SamplerConfig {
        iterations: 40_000,
        burnin: 500,
        z_steps_per_sweep: 2,
        update_gamma: false,
        seed: 5,
        initial_state: Some(KnotState::new(vec![false, false], mids.clone()).unwrap()),
        ..SamplerConfig::default()
    };
    let chain = run_glm_chain(&model, &cfg, ProposalScales::default()).unwrap();
    let mut freq = [0.0; 4];
    for s in &chain.samples {
        let code = s.state.z[0] as usize | (s.state.z[1] as usize) << 1;
        freq[code] += 1.0 / chain.len() as f64;
    }
    let err = freq
        .iter()
        .zip(&exact)
        .map(|(f, e)| (f - e).abs())
        .fold(0.0, f64::max);
    assert!(err < 0.03, "sampled {freq:?} vs integrated {exact:?}");
    assert!(
        exact.iter().filter(|&&p| p > 0.05).count() >= 2,
        "instance too easy: {exact:?}"
    );
}

#[test]
fn knot_location_kernel_targets_conditional_density() {
    let data = counts(100, 3);
    let part = IntervalPartition::from_bounds(&[0.3, 0.7]).unwrap();
    let priors = PriorConfig {
        c: 100.0,
        lambda: 1.0,
        max_knots: 1,
    };
    let lik = PoissonLikelihood::new(&data).unwrap();
    let model = GlmModel::new(
        &data,
        &part,
        &lik,
        priors,
        Basis::TruncatedPower { degree: 1 },
    )
    .unwrap();
    let state = model
        .state_at_mode(KnotState::new(vec![true], vec![0.5]).unwrap())
        .unwrap();
    let beta = DVector::from_column_slice(&state.beta);

    // conditional density of the location with beta held at the mode
    let grid_n = 4001;
    let grid: Vec<f64> = (0..grid_n)
        .map(|i| 0.3 + 0.4 * i as f64 / (grid_n - 1) as f64)
        .collect();
    let logs: Vec<f64> = grid
        .iter()
        .map(|&g| log_target(&design(data.x(), &[g]), data.y(), &beta, priors.c))
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dens: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let mut cdf = vec![0.0; grid_n];
    for i in 1..grid_n {
        cdf[i] = cdf[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * (grid[i] - grid[i - 1]);
    }
    let total = cdf[grid_n - 1];
    cdf.iter_mut().for_each(|v| *v /= total);

    let mut sampler = GlmSampler::new(&model, state, ProposalScales::default(), 0.5).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(17);
    let mut draws: Vec<f64> = (0..60_000)
        .map(|_| {
            sampler.update_gamma(&mut rng);
            sampler.state().knots.gamma[0]
        })
        .collect();
    draws.sort_by(f64::total_cmp);
    let oracle = |v: f64| {
        let pos = ((v - 0.3) / 0.4 * (grid_n - 1) as f64).clamp(0.0, (grid_n - 1) as f64);
        let i = (pos.floor() as usize).min(grid_n - 2);
        cdf[i] + (pos - i as f64) * (cdf[i + 1] - cdf[i])
    };
    let n = draws.len() as f64;
    let ks = draws
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = oracle(v);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.02, "KS distance {ks}");
}
