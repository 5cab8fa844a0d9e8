//! Bayesian free-knot spline regression with auxiliary indicator variables.
//!
//! Knots live in fixed intervals `I_1..I_K`; a binary indicator per interval
//! switches its knot on or off and the knot location moves continuously
//! inside the interval. Gaussian models are sampled on the marginal posterior
//! of `(z, gamma)` with coefficients and variance integrated out
//! ([`conjugate`]); other likelihoods use joint `(z, beta)` moves with
//! mode-based proposals ([`glm`]).

pub mod basis;
pub mod bundle;
pub mod chain;
pub mod cli;
pub mod config;
pub mod conjugate;
pub mod data;
pub mod error;
pub mod fit;
pub mod glm;
pub mod linalg;
pub mod models;
pub mod outputs;
pub mod priors;
pub mod rng;
pub mod simulate;
pub mod study;

pub use error::{Error, Result};
