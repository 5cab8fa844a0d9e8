//! Recorded sampler output shared by both engines.

use serde::Serialize;

use crate::basis::KnotState;

/// One recorded (post burn-in) iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub iteration: usize,
    pub state: KnotState,
    /// Sampled coefficients; absent on the conjugate path where they are
    /// integrated out.
    pub beta: Option<Vec<f64>>,
    pub log_post: f64,
}

/// Per-iteration trace entry, burn-in included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub log_post: f64,
    pub size: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MoveCounter {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveCounter {
    pub fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        if accepted {
            self.accepted += 1;
        }
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Proposal bookkeeping, split by move type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MoveStats {
    pub add_delete: MoveCounter,
    pub swap: MoveCounter,
    /// Metropolis updates of active knot locations (prior refreshes of
    /// inactive ones are exact draws and not counted).
    pub gamma: MoveCounter,
    /// Coefficient refresh steps (non-Gaussian path only).
    pub refresh: MoveCounter,
    /// Model moves rejected because `|z'| > L`, before any fitting.
    pub truncation_rejections: u64,
    /// Model moves rejected because the proposed design was rank deficient
    /// or the mode search failed.
    pub fit_failures: u64,
    /// Mode requests for proposed models (served from cache or optimised).
    pub mode_fits: u64,
    /// Mode searches actually run, including those for the current model.
    pub optimizer_runs: u64,
    /// Mode searches whose Hessian needed a ridge.
    pub ridged_modes: u64,
}

impl MoveStats {
    pub fn model_moves(&self) -> MoveCounter {
        MoveCounter {
            proposed: self.add_delete.proposed + self.swap.proposed,
            accepted: self.add_delete.accepted + self.swap.accepted,
        }
    }
}

/// Ordered record of sampler output plus the running MAP index.
#[derive(Debug, Clone, Default)]
pub struct Chain {
    pub samples: Vec<Sample>,
    pub trace: Vec<TracePoint>,
    pub stats: MoveStats,
    pub seed: u64,
    map_index: Option<usize>,
}

impl Chain {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Appends a sample, keeping the MAP index on the first maximum.
    pub fn push(&mut self, sample: Sample) {
        let better = match self.map_index {
            None => true,
            Some(i) => sample.log_post > self.samples[i].log_post,
        };
        self.samples.push(sample);
        if better {
            self.map_index = Some(self.samples.len() - 1);
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn map_index(&self) -> Option<usize> {
        self.map_index
    }

    pub fn map_sample(&self) -> Option<&Sample> {
        self.map_index.map(|i| &self.samples[i])
    }
}
