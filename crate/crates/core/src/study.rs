//! Repeated fits to freshly simulated datasets, scored by MSE against the
//! true function at the observed `x`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fit::{fit, Detail};
use crate::outputs::mse;
use crate::simulate::{simulate_example, Example};

/// A study fails when more than this share of replicates fail.
pub const MAX_FAILURE_SHARE: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct StudySpec {
    pub example: Example,
    pub n: usize,
    pub replicates: usize,
    /// Noise sd override for Gaussian examples.
    pub sigma: Option<f64>,
    /// Replicate `r` (1-based) simulates with seed `base_seed + r`.
    pub base_seed: u64,
    /// Replicate `r` runs its chain with `config.seed + r`.
    pub config: RunConfig,
    /// Reuse the replicate-1 seeds for every replicate.
    pub fixed_seeds: bool,
    /// Worker threads; `0` picks the available parallelism.
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MseSummary {
    pub mean: f64,
    pub sd: f64,
}

impl MseSummary {
    /// Mean and sample standard deviation (`n - 1` divisor).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub data_seed: u64,
    pub map_mse: f64,
    pub bma_mse: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyResult {
    pub example: String,
    pub n: usize,
    pub replicates: usize,
    pub map: MseSummary,
    pub bma: MseSummary,
    pub results: Vec<ReplicateResult>,
    /// `(replicate, message)` for every failed replicate.
    pub failures: Vec<(usize, String)>,
}

/// Fits one simulated replicate and scores both estimators.
pub fn run_replicate(spec: &StudySpec, replicate: usize) -> Result<ReplicateResult> {
    let offset = if spec.fixed_seeds {
        1
    } else {
        replicate as u64
    };
    let data_seed = spec.base_seed.wrapping_add(offset);
    let sim = simulate_example(spec.example, spec.n, spec.sigma, data_seed)?;
    let mut config = spec.config.clone();
    config.seed = spec.config.seed.wrapping_add(offset);
    let f = fit(&sim.data, &config, Detail::AtData)?;
    let truth = sim.truth_at_data();
    Ok(ReplicateResult {
        replicate,
        data_seed,
        map_mse: mse(&f.map_at_data.curve, &truth)?,
        bma_mse: mse(&f.bma_at_data.curve, &truth)?,
    })
}

/// Runs replicates `1..=spec.replicates`, possibly on several threads; the
/// result does not depend on the thread count.
pub fn replicate_study(spec: &StudySpec) -> Result<StudyResult> {
    if spec.replicates < 2 {
        return Err(Error::validation(format!(
            "replicates must be at least 2, got {}",
            spec.replicates
        )));
    }
    spec.config.validate()?;
    let threads = match spec.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        t => t,
    }
    .min(spec.replicates);
    let next = AtomicUsize::new(1);
    let outcomes: Mutex<Vec<(usize, Result<ReplicateResult>)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let r = next.fetch_add(1, Ordering::Relaxed);
                if r > spec.replicates {
                    break;
                }
                let out = run_replicate(spec, r);
                outcomes.lock().expect("no worker panicked").push((r, out));
            });
        }
    });
    let mut outcomes = outcomes.into_inner().expect("no worker panicked");
    outcomes.sort_by_key(|(r, _)| *r);
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (r, out) in outcomes {
        match out {
            Ok(res) => results.push(res),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    if failures.len() as f64 > MAX_FAILURE_SHARE * spec.replicates as f64 {
        return Err(Error::Numerical(format!(
            "{} of {} replicates failed (first: replicate {}: {})",
            failures.len(),
            spec.replicates,
            failures[0].0,
            failures[0].1
        )));
    }
    let map: Vec<f64> = results.iter().map(|r| r.map_mse).collect();
    let bma: Vec<f64> = results.iter().map(|r| r.bma_mse).collect();
    Ok(StudyResult {
        example: spec.example.to_string(),
        n: spec.n,
        replicates: spec.replicates,
        map: MseSummary::of(&map),
        bma: MseSummary::of(&bma),
        results,
        failures,
    })
}
