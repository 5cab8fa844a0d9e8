//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). `AUXSPLINE_ACCEPTANCE=1,6`
//! restricts the run to the listed criteria.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use auxspline::basis::{default_intervals, Basis, IntervalPartition, IntervalStrategy, KnotState};
use auxspline::bundle::{read_xy_from, write_xy};
use auxspline::chain::Chain;
use auxspline::cli::{self, TOMBS_CSV};
use auxspline::config::RunConfig;
use auxspline::conjugate::{
    run_gaussian_chain, BasisChoice, ConjugateModel, GaussianSampler, SamplerConfig,
};
use auxspline::data::Dataset;
use auxspline::fit::{fit_gpd, fit_tombs};
use auxspline::glm::{run_glm_chain, GlmModel, ProposalScales};
use auxspline::models::{
    gpd_loglik, return_level, GaussianLikelihood, GpdConfig, ModeKind, PoissonLikelihood, XI_ZERO,
};
use auxspline::outputs::CurveEvaluator;
use auxspline::priors::PriorConfig;
use auxspline::simulate::{simulate_example, tombs_transform, Example, TwoSeasonGpd};
use auxspline::study::{replicate_study, StudyResult, StudySpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------------------
// independent oracles

fn truncated_power_columns(x: &[f64], degree: usize, knots: &[f64]) -> DMatrix<f64> {
    let m = degree + 1 + knots.len();
    DMatrix::from_fn(x.len(), m, |i, j| {
        if j <= degree {
            x[i].powi(j as i32)
        } else {
            (x[i] - knots[j - degree - 1]).max(0.0).powi(degree as i32)
        }
    })
}

/// `-(m/2) log(c+1) - (n/2) log S + log prior(z)` with `S` from the normal
/// equations (LU), not the QR route used by the library.
fn enumerated_log_post(
    x: &[f64],
    y: &[f64],
    degree: usize,
    knots: &[f64],
    c: f64,
    lambda: f64,
) -> f64 {
    let xm = truncated_power_columns(x, degree, knots);
    let yv = DVector::from_column_slice(y);
    let xty = xm.tr_mul(&yv);
    let beta = (xm.tr_mul(&xm)).lu().solve(&xty).expect("full rank");
    let s = yv.dot(&yv) - c / (c + 1.0) * xty.dot(&beta);
    let k = knots.len();
    let log_fact: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
    -0.5 * xm.ncols() as f64 * (c + 1.0).ln() - 0.5 * x.len() as f64 * s.ln()
        + k as f64 * lambda.ln()
        - log_fact
}

/// `log int_0^inf N(y; 0, sigma^2 (I + c H)) sigma^-2 dsigma^2`: the
/// coefficient integral in closed form (explicit n x n covariance), the
/// variance integral by Simpson's rule in `t = log sigma^2`.
fn joint_integral(x: &[f64], y: &[f64], degree: usize, knots: &[f64], c: f64) -> f64 {
    let n = x.len();
    let xm = truncated_power_columns(x, degree, knots);
    let h = &xm * (xm.tr_mul(&xm)).try_inverse().expect("invertible") * xm.transpose();
    let cov = DMatrix::identity(n, n) + h * c;
    let chol = cov.clone().cholesky().expect("positive definite");
    let log_det: f64 = 2.0 * (0..n).map(|i| chol.l()[(i, i)].ln()).sum::<f64>();
    let yv = DVector::from_column_slice(y);
    let q = yv.dot(&chol.solve(&yv));
    let log_f =
        |t: f64| -0.5 * n as f64 * ((2.0 * PI).ln() + t) - 0.5 * log_det - 0.5 * q * (-t).exp();
    let centre = (q / n as f64).ln();
    let (a, b, steps) = (centre - 40.0, centre + 40.0, 200_000);
    let hstep = (b - a) / steps as f64;
    let peak = log_f(centre);
    let mut acc = 0.0;
    for i in 0..=steps {
        let w = if i == 0 || i == steps {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * (log_f(a + i as f64 * hstep) - peak).exp();
    }
    peak + (acc * hstep / 3.0).ln()
}

fn log_prior_z(size: usize, lambda: f64) -> f64 {
    size as f64 * lambda.ln() - (1..=size).map(|i| (i as f64).ln()).sum::<f64>()
}

// ---------------------------------------------------------------------------
// shared instances

/// n = 30, three equal intervals, cubic truncated powers, knots frozen at
/// interval midpoints.
struct Frozen {
    data: Dataset,
    partition: IntervalPartition,
    priors: PriorConfig,
}

fn frozen_instance() -> Frozen {
    let sim = simulate_example(Example::Dms2, 30, None, 11).unwrap();
    let partition = default_intervals(&sim.data, &IntervalStrategy::EqualCount(3)).unwrap();
    let priors = PriorConfig {
        c: PriorConfig::default_c(30),
        lambda: 3.0,
        max_knots: 3,
    };
    Frozen {
        data: sim.data,
        partition,
        priors,
    }
}

fn frozen_start(f: &Frozen) -> KnotState {
    KnotState::new(vec![false; 3], f.partition.midpoints()).unwrap()
}

fn z_index(z: &[bool]) -> usize {
    z.iter().enumerate().map(|(k, &b)| (b as usize) << k).sum()
}

/// Exact model probabilities of the frozen instance by enumeration.
fn frozen_exact(f: &Frozen) -> Vec<f64> {
    let mids = f.partition.midpoints();
    let logs: Vec<f64> = (0..8usize)
        .map(|code| {
            let knots: Vec<f64> = (0..3)
                .filter(|k| code >> k & 1 == 1)
                .map(|k| mids[k])
                .collect();
            enumerated_log_post(
                f.data.x(),
                f.data.y(),
                3,
                &knots,
                f.priors.c,
                f.priors.lambda,
            )
        })
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

// ---------------------------------------------------------------------------
// criteria

fn criterion_1() -> Outcome {
    let f = frozen_instance();
    let model = ConjugateModel::new(
        &f.data,
        &f.partition,
        f.priors.clone(),
        BasisChoice::TruncatedPower,
        3,
    )
    .unwrap();
    let cfg = SamplerConfig {
        iterations: 200_000,
        burnin: 1000,
        z_steps_per_sweep: 1,
        update_gamma: false,
        seed: 101,
        initial_state: Some(frozen_start(&f)),
        ..SamplerConfig::default()
    };
    let chain = run_gaussian_chain(&model, &cfg).unwrap();
    let probs = frozen_exact(&f);
    let mut err: f64 = 0.0;
    let mut shown = Vec::new();
    for k in 0..3 {
        let exact: f64 = (0..8).filter(|c| c >> k & 1 == 1).map(|c| probs[c]).sum();
        let freq =
            chain.samples.iter().filter(|s| s.state.z[k]).count() as f64 / chain.len() as f64;
        err = err.max((freq - exact).abs());
        shown.push(format!("{freq:.4}/{exact:.4}"));
    }
    outcome(
        err < 0.02,
        format!(
            "inclusion sampled/exact {}; max abs error {err:.4} (< 0.02)",
            shown.join(" ")
        ),
    )
}

fn criterion_2() -> Outcome {
    let x = [0.05, 0.2, 0.4, 0.6, 0.8, 0.95];
    let y = [0.3, 0.9, 1.4, 1.1, 0.2, -0.4];
    let data = Dataset::new(x.to_vec(), y.to_vec()).unwrap();
    let partition = IntervalPartition::from_bounds(&[0.1, 0.35, 0.65, 0.9]).unwrap();
    let priors = PriorConfig {
        c: 200.0,
        lambda: 3.0,
        max_knots: 3,
    };
    let model = ConjugateModel::new(
        &data,
        &partition,
        priors.clone(),
        BasisChoice::TruncatedPower,
        1,
    )
    .unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let mut lib = Vec::new();
    let mut oracle = Vec::new();
    while lib.len() < 5 {
        let z: Vec<bool> = (0..3).map(|_| rng.random::<bool>()).collect();
        let gamma: Vec<f64> = (0..3).map(|k| partition.sample(k, &mut rng)).collect();
        let state = KnotState::new(z, gamma).unwrap();
        let knots = state.active_locations();
        let log_gamma: f64 = partition
            .intervals()
            .iter()
            .map(|iv| -iv.width().ln())
            .sum();
        lib.push(model.log_marginal_posterior(&state).log_value);
        oracle.push(
            joint_integral(&x, &y, 1, &knots, priors.c)
                + log_prior_z(knots.len(), priors.lambda)
                + log_gamma,
        );
    }
    let err = (1..5)
        .map(|i| ((lib[i] - lib[0]) - (oracle[i] - oracle[0])).abs())
        .fold(0.0, f64::max);
    outcome(
        err < 1e-6,
        format!("max difference error over 5 states {err:.2e} (< 1e-6)"),
    )
}

fn study(example: Example, n: usize, config: RunConfig) -> StudyResult {
    let spec = StudySpec {
        example,
        n,
        replicates: 50,
        sigma: None,
        base_seed: 0,
        config,
        fixed_seeds: false,
        threads: 0,
    };
    replicate_study(&spec).unwrap()
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo && v <= hi
}

fn criterion_3() -> Outcome {
    let e1 = study(Example::Sk1, 100, RunConfig::curve_study(Example::Sk1, 100));
    let e2 = study(
        Example::Dms2,
        200,
        RunConfig::curve_study(Example::Dms2, 200),
    );
    let e3 = study(
        Example::Dgk3,
        101,
        RunConfig::curve_study(Example::Dgk3, 101),
    );
    let checks = [
        within(e1.map.mean, 0.0050, 0.0105),
        within(e1.bma.mean, 0.0045, 0.0100),
        within(e2.map.mean, 0.0070 - 0.0029, 0.0070 + 0.0029),
        within(e3.map.mean, 0.0123 - 0.0068, 0.0123 + 0.0068),
    ];
    outcome(
        checks.iter().all(|&c| c),
        format!(
            "ex1 n=100 MAP {:.4} (sd {:.4}) in [0.0050,0.0105], BMA {:.4} in [0.0045,0.0100]; \
             ex2 n=200 MAP {:.4} in [0.0041,0.0099]; ex3 n=101 MAP {:.4} in [0.0055,0.0191]",
            e1.map.mean, e1.map.sd, e1.bma.mean, e2.map.mean, e3.map.mean
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut config = RunConfig::curve_study(Example::Sk1, 20);
    config.prior.c = Some(200.0);
    let r = study(Example::Sk1, 20, config);
    outcome(
        within(r.map.mean, 0.0355 - 0.0169, 0.0355 + 0.0169),
        format!(
            "ex1 n=20 B-spline n_x=2 MAP {:.4} (sd {:.4}) in [0.0186,0.0524]",
            r.map.mean, r.map.sd
        ),
    )
}

fn poisson_study(degree: usize, delta: Option<f64>) -> StudyResult {
    let mut config = RunConfig::poisson_example(degree);
    if let Some(d) = delta {
        config.sampler.delta_z = d;
        config.sampler.delta_beta = d;
    }
    study(Example::Poisson, 500, config)
}

fn criterion_5() -> Outcome {
    let p3 = poisson_study(3, None);
    let p1 = poisson_study(1, None);
    let pass = within(p3.map.mean, 0.1176 - 0.0648, 0.1176 + 0.0648)
        && within(p1.map.mean, 0.3659 - 0.0959, 0.3659 + 0.0959)
        && p1.bma.mean <= p1.map.mean;
    let mut detail = format!(
        "delta 1/50: P=3 MAP {:.4} (sd {:.4}) in [0.0528,0.1824]; P=1 MAP {:.4} (sd {:.4}) in [0.2700,0.4618], \
         BMA {:.4} <= MAP",
        p3.map.mean, p3.map.sd, p1.map.mean, p1.map.sd, p1.bma.mean
    );
    if !pass {
        // same study with unit proposal scales, reported for comparison only
        let q3 = poisson_study(3, Some(1.0));
        let q1 = poisson_study(1, Some(1.0));
        detail.push_str(&format!(
            "; for reference delta 1: P=3 MAP {:.4}, P=1 MAP {:.4}, P=1 BMA {:.4}",
            q3.map.mean, q1.map.mean, q1.bma.mean
        ));
    }
    outcome(pass, detail)
}

fn criterion_6() -> Outcome {
    let raw = read_xy_from(TOMBS_CSV.as_bytes(), "d", "r").unwrap();
    let data = tombs_transform(&raw).unwrap();
    let t = fit_tombs(&data, &RunConfig::tombs()).unwrap();
    let target = [-0.15, 0.37, 0.96, 0.56];
    let got = if t.segments.len() == 2 {
        [
            t.segments[0].log_a,
            t.segments[1].log_a,
            t.segments[0].b,
            t.segments[1].b,
        ]
    } else {
        [f64::NAN; 4]
    };
    let coef_ok = got.iter().zip(&target).all(|(g, e)| (g - e).abs() <= 0.05);
    let one = t.changepoints.len() == 1;
    let loc_ok = one && within(t.changepoints[0], 1.2, 1.4);
    outcome(
        one && loc_ok && coef_ok,
        format!(
            "MAP change points {:?} (one in [1.2,1.4]); (log a1, log a2, b1, b2) = ({:.3}, {:.3}, {:.3}, {:.3}) vs \
             (-0.15, 0.37, 0.96, 0.56) +- 0.05",
            t.changepoints, got[0], got[1], got[2], got[3]
        ),
    )
}

fn criterion_7() -> Outcome {
    // (a) return level solves the exceedance equation
    let cfg = GpdConfig::default();
    let mut rt_err: f64 = 0.0;
    for &sigma in &[0.5, 1.0, 10.0, 50.0] {
        for &xi in &[-0.3, -0.05, -2e-6, 0.0, 5e-7, 2e-6, 0.05, 0.2, 0.5] {
            for &years in &[2.0, 10.0, 50.0, 100.0] {
                let z = return_level(sigma, xi, &cfg, years).unwrap();
                let tail = if xi.abs() < XI_ZERO {
                    (-z / sigma).exp()
                } else {
                    (-(xi * z / sigma).ln_1p() / xi).exp()
                };
                let target = 1.0 / (years * cfg.n_y);
                rt_err = rt_err.max((cfg.zeta_u * tail - target).abs() / target);
            }
        }
    }
    let a = rt_err < 1e-10;

    // (b) planted two-season recovery
    let truth = TwoSeasonGpd::default();
    let data = truth.simulate(1000, 3).unwrap();
    let g = fit_gpd(&data, &RunConfig::gpd()).unwrap();
    let mean_over = |days: &mut dyn Iterator<Item = usize>| {
        let v: Vec<f64> = days.map(|d| g.return_level.mean[d - 1]).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let high = mean_over(&mut (153..=213));
    let low = mean_over(&mut (1..=30).chain(337..=366));
    let peak_day = (1..=366)
        .max_by(|&a, &b| g.return_level.mean[a - 1].total_cmp(&g.return_level.mean[b - 1]))
        .unwrap();
    let b = high > low && (peak_day as f64 - truth.peak_day).abs() <= truth.half_width;

    // (c) continuity across the small-shape switchover, against the direct
    // formula (accurate in f64 through ln_1p for any non-zero shape)
    let mut cont: f64 = 0.0;
    for &y in &[0.01, 0.5, 1.0, 5.0, 20.0] {
        for &sigma in &[0.5, 1.0, 10.0] {
            let u: f64 = y / sigma;
            for e in -10..=-2 {
                for sign in [-1.0, 1.0] {
                    for m in [1.0, 3.0, 9.99] {
                        let xi = sign * m * 10f64.powi(e);
                        if 1.0 + xi * u <= 0.0 {
                            continue;
                        }
                        let direct = -sigma.ln() - (1.0 + 1.0 / xi) * (xi * u).ln_1p();
                        cont =
                            cont.max((gpd_loglik(y, sigma, xi) - direct).abs() / (1.0 + u.powi(3)));
                    }
                }
            }
            let below = gpd_loglik(y, sigma, XI_ZERO * (1.0 - 1e-9));
            let above = gpd_loglik(y, sigma, XI_ZERO * (1.0 + 1e-9));
            cont = cont.max((below - above).abs() / (1.0 + u.powi(3)));
        }
    }
    let c = cont < 1e-10;
    outcome(
        a && b && c,
        format!(
            "(a) round-trip rel error {rt_err:.1e} (< 1e-10); (b) 50-year level {high:.2} in days 153-213 vs {low:.2} \
             at year ends, peak day {peak_day}; (c) max scaled switchover error {cont:.1e} (< 1e-10)"
        ),
    )
}

/// Chi-square statistic for `N(i->j) = N(j->i)` over observed model pairs.
fn detailed_balance_p(counts: &HashMap<(usize, usize), u64>) -> (f64, usize, f64) {
    let mut stat = 0.0;
    let mut df = 0;
    for (&(i, j), &nij) in counts {
        if i < j {
            let nji = counts.get(&(j, i)).copied().unwrap_or(0);
            if nij + nji > 0 {
                stat += (nij as f64 - nji as f64).powi(2) / (nij + nji) as f64;
                df += 1;
            }
        }
    }
    for (&(i, j), &nij) in counts {
        if i > j && !counts.contains_key(&(j, i)) && nij > 0 {
            stat += nij as f64;
            df += 1;
        }
    }
    let p = 1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat);
    (stat, df, p)
}

/// Self-normalised weighted mean and its batch-means standard error.
fn batch_mean_se(values: &[f64], weights: &[f64], batches: usize) -> (f64, f64) {
    let ratio = |v: &[f64], w: &[f64]| {
        v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>()
    };
    let size = values.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| {
            ratio(
                &values[b * size..(b + 1) * size],
                &weights[b * size..(b + 1) * size],
            )
        })
        .collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (ratio(values, weights), (var / batches as f64).sqrt())
}

fn curve_series(
    chain: &Chain,
    eval: &dyn CurveEvaluator,
    points: &[f64],
    shrunken: bool,
) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(chain.len()); points.len()];
    for s in &chain.samples {
        let c = eval.sample_curve(s, points, shrunken).unwrap();
        for (o, v) in out.iter_mut().zip(c) {
            o.push(v);
        }
    }
    out
}

fn criterion_8() -> Outcome {
    // detailed balance on the frozen instance
    let f = frozen_instance();
    let model = ConjugateModel::new(
        &f.data,
        &f.partition,
        f.priors.clone(),
        BasisChoice::TruncatedPower,
        3,
    )
    .unwrap();
    let mut sampler = GaussianSampler::new(&model, frozen_start(&f), 0.5).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(808);
    let mut counts = HashMap::new();
    let mut from = z_index(&sampler.state().z);
    for _ in 0..200_000 {
        sampler.update_z(&mut rng);
        let to = z_index(&sampler.state().z);
        if to != from {
            *counts.entry((from, to)).or_insert(0u64) += 1;
        }
        from = to;
    }
    let (stat, df, p) = detailed_balance_p(&counts);
    let balance = p > 0.01;

    // gradient of the mode objective at the returned mode, by a five-point
    // stencil that never touches the library's analytic derivatives
    let sim = simulate_example(Example::Poisson, 60, None, 4).unwrap();
    let part = IntervalPartition::from_bounds(&[0.02, 0.35, 0.65, 0.98]).unwrap();
    let lik = PoissonLikelihood::new(&sim.data).unwrap();
    let glm = GlmModel::new(
        &sim.data,
        &part,
        &lik,
        PriorConfig {
            c: 60.0,
            lambda: 1.0,
            max_knots: 3,
        },
        Basis::TruncatedPower { degree: 3 },
    )
    .unwrap();
    let state = KnotState::new(vec![true, false, true], vec![0.3, 0.5, 0.8]).unwrap();
    let design = glm.design(&state).unwrap();
    let mode = glm.fit_mode(&design, None).unwrap();
    let h = 1e-4;
    let mut grad_norm: f64 = 0.0;
    for j in 0..mode.beta_hat.len() {
        let at = |d: f64| {
            let mut b = mode.beta_hat.clone();
            b[j] += d;
            glm.mode_objective(&design, &b)
        };
        let g = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
        grad_norm = grad_norm.max(g.abs());
    }
    let gradient = grad_norm < 1e-6;

    // acceptance frequency of one indicator update from a fixed state,
    // taken where the exact rate is least extreme
    let mids = f.partition.midpoints();
    let log_at = |code: usize| {
        let z = (0..3).map(|k| code >> k & 1 == 1).collect();
        model
            .log_marginal_posterior(&KnotState::new(z, mids.clone()).unwrap())
            .log_value
    };
    let exact_rate = |code: usize| {
        let base = log_at(code);
        let p = |other: usize| (log_at(other) - base).exp().min(1.0);
        let add_delete: f64 = (0..3).map(|k| p(code ^ (1 << k)) / 3.0).sum();
        let mut swap = 0.0;
        for i in 0..3 {
            for j in (0..3).filter(|&j| j != i) {
                let (bi, bj) = (code >> i & 1, code >> j & 1);
                let swapped = code & !(1 << i) & !(1 << j) | bj << i | bi << j;
                swap += p(swapped) / 6.0;
            }
        }
        0.5 * add_delete + 0.5 * swap
    };
    let code = (0..8)
        .max_by(|&a, &b| {
            let spread = |c: usize| exact_rate(c) * (1.0 - exact_rate(c));
            spread(a).total_cmp(&spread(b))
        })
        .unwrap();
    let expected = exact_rate(code);
    let start = KnotState::new((0..3).map(|k| code >> k & 1 == 1).collect(), mids.clone()).unwrap();
    let trials = 200_000;
    let mut accepted = 0u64;
    let mut rng = ChaCha20Rng::seed_from_u64(909);
    for _ in 0..trials {
        let mut s = GaussianSampler::new(&model, start.clone(), 0.5).unwrap();
        accepted += s.update_z(&mut rng) as u64;
    }
    let freq = accepted as f64 / trials as f64;
    let sd = (expected * (1.0 - expected) / trials as f64).sqrt();
    let acceptance = (freq - expected).abs() <= 3.0 * sd;

    // conjugate and Gaussian-GLM paths agree on the model-averaged curve.
    // Knot locations are frozen. The GLM path holds sigma fixed, so its
    // model weights differ from the sigma-integrated ones at second order;
    // its samples are reweighted by the exact ratio of the two model
    // posteriors, with the known-sigma evidence from y ~ N(0, s2 (I + cH)).
    let sim = simulate_example(Example::Sk1, 200, None, 21).unwrap();
    let part = default_intervals(&sim.data, &IntervalStrategy::EqualCount(4)).unwrap();
    let priors = PriorConfig {
        c: 200.0,
        lambda: 3.0,
        max_knots: 4,
    };
    let conj = ConjugateModel::new(
        &sim.data,
        &part,
        priors.clone(),
        BasisChoice::TruncatedPower,
        3,
    )
    .unwrap();
    let frozen = KnotState::new(vec![false; 4], part.midpoints()).unwrap();
    let cfg = SamplerConfig {
        iterations: 60_000,
        burnin: 1000,
        z_steps_per_sweep: 5,
        update_gamma: false,
        seed: 31,
        initial_state: Some(frozen),
        ..SamplerConfig::default()
    };
    let chain_c = run_gaussian_chain(&conj, &cfg).unwrap();
    let map_state = &chain_c.map_sample().unwrap().state;
    let sigma_hat = (conj.log_marginal_posterior(map_state).s_value / sim.data.n() as f64).sqrt();
    let gl = GaussianLikelihood::new(&sim.data, sigma_hat).unwrap();
    let points: Vec<f64> = (0..50).map(|i| 0.01 + 0.98 * i as f64 / 49.0).collect();
    let sc = curve_series(&chain_c, &conj, &points, true);
    let ones = vec![1.0; chain_c.len()];
    // The proposal centred on the posterior mode is the exact conditional
    // of beta, so refreshing only after acceptance is valid. Centred on the
    // MLE it is not, and refreshing after every move keeps the target.
    let variants = [(ModeKind::Map, false), (ModeKind::Mle, true)];
    let mut worst = [0.0f64; 2];
    for (slot, (kind, refresh_always)) in worst.iter_mut().zip(variants) {
        let glm = GlmModel::new(
            &sim.data,
            &part,
            &gl,
            priors.clone(),
            Basis::TruncatedPower { degree: 3 },
        )
        .unwrap()
        .with_mode_kind(kind);
        let scales = ProposalScales {
            refresh_always,
            ..ProposalScales::default()
        };
        let chain_g = run_glm_chain(&glm, &cfg, scales).unwrap();
        let sg = curve_series(&chain_g, &glm, &points, false);
        let weights: Vec<f64> = chain_g
            .samples
            .iter()
            .map(|s| {
                let mp = conj.log_marginal_posterior(&s.state);
                let m = (4 + s.state.size()) as f64;
                let known = -0.5 * m * (priors.c + 1.0).ln()
                    - 0.5 * mp.s_value / (sigma_hat * sigma_hat)
                    + log_prior_z(s.state.size(), priors.lambda);
                mp.log_value - known
            })
            .collect();
        let top = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = weights.iter().map(|w| (w - top).exp()).collect();
        for (a, b) in sc.iter().zip(&sg) {
            let (ma, sa) = batch_mean_se(a, &ones, 20);
            let (mb, sb) = batch_mean_se(b, &weights, 20);
            *slot = slot.max((ma - mb).abs() / sa.hypot(sb));
        }
    }
    let cross = worst.iter().all(|&w| w < 3.0);

    outcome(
        balance && gradient && acceptance && cross,
        format!(
            "detailed balance chi2 {stat:.1} on {df} df, p {p:.3} (> 0.01); mode gradient inf-norm {grad_norm:.1e} \
             (< 1e-6); acceptance {freq:.4} vs exact {expected:.4} (3 sd = {:.4}); cross-engine max |diff|/SE \
             {:.2} with the posterior-mode proposal, {:.2} with the MLE proposal and refresh after every move (< 3)",
            3.0 * sd,
            worst[0],
            worst[1]
        ),
    )
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let gauss = simulate_example(Example::Sk1, 60, None, 5).unwrap();
    write_xy(&root.join("g.csv"), &gauss.data, "x", "y").unwrap();
    let pois = simulate_example(Example::Poisson, 80, None, 5).unwrap();
    write_xy(&root.join("p.csv"), &pois.data, "x", "y").unwrap();
    let gpd = TwoSeasonGpd::default().simulate(150, 5).unwrap();
    write_xy(&root.join("e.csv"), &gpd, "day", "y").unwrap();
    let p = |name: &str| root.join(name).to_string_lossy().into_owned();
    let short = ["--iterations", "200", "--burnin", "50", "--seed", "17"];
    let runs: Vec<(&str, Vec<String>)> = vec![
        (
            "fit gaussian",
            vec!["fit".into(), "--data".into(), p("g.csv")],
        ),
        (
            "fit poisson",
            vec![
                "fit".into(),
                "--data".into(),
                p("p.csv"),
                "--model".into(),
                "poisson".into(),
                "--interval-count".into(),
                "5".into(),
            ],
        ),
        ("tombs", vec!["tombs".into()]),
        ("gpd", vec!["gpd".into(), "--data".into(), p("e.csv")]),
    ];
    let mut failed = Vec::new();
    for (name, args) in &runs {
        let mut files = Vec::new();
        for rep in 0..2 {
            let out = root.join(format!("{}-{rep}", name.replace(' ', "-")));
            let mut full = vec!["auxspline".to_string()];
            full.extend(args.iter().cloned());
            full.extend(short.iter().map(|s| s.to_string()));
            full.extend(["--out".to_string(), out.to_string_lossy().into_owned()]);
            let code = cli::run(full);
            files.push((
                code,
                std::fs::read(out.join("samples.csv")).unwrap_or_default(),
            ));
        }
        if files[0].0 != 0 || files[0] != files[1] || files[0].1.is_empty() {
            failed.push(*name);
        }
    }
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            format!(
                "samples.csv bit-identical across reruns for {} commands",
                runs.len()
            )
        } else {
            format!("reruns differ or failed for {failed:?}")
        },
    )
}

fn main() {
    let selected: Option<Vec<usize>> = std::env::var("AUXSPLINE_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn() -> Outcome); 9] = [
        (1, "exact-posterior oracle equivalence", criterion_1),
        (2, "conjugacy validation", criterion_2),
        (3, "large-n gaussian study", criterion_3),
        (4, "small-n gaussian study", criterion_4),
        (5, "poisson study", criterion_5),
        (6, "tombs change point", criterion_6),
        (7, "gpd properties", criterion_7),
        (8, "kernel correctness suite", criterion_8),
        (9, "determinism", criterion_9),
    ];
    let mut failures = Vec::new();
    for (id, name, run) in criteria {
        if selected.as_ref().is_some_and(|s| !s.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id} {verdict} [{name}] {} ({:.1}s)",
            o.detail,
            t.elapsed().as_secs_f64()
        );
        if !o.pass {
            failures.push(id);
        }
    }
    if !failures.is_empty() {
        println!("failed criteria: {failures:?}");
        std::process::exit(1);
    }
}
