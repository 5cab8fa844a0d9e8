//! Seeded random streams.
//!
//! Every chain is driven by ChaCha20 (`rand_chacha::ChaCha20Rng`), a
//! counter-based generator with 2^64 independent streams per seed. A chain
//! seeded with `s` uses stream 0 of `ChaCha20Rng::seed_from_u64(s)`; auxiliary
//! consumers (prediction bands, simulators) use distinct stream ids so they
//! never perturb the chain's draws. The output is platform independent.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type ChainRng = ChaCha20Rng;

pub const CHAIN_STREAM: u64 = 0;
pub const SIMULATION_STREAM: u64 = 1;
pub const BAND_STREAM: u64 = 2;

pub fn stream(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn chain_rng(seed: u64) -> ChainRng {
    stream(seed, CHAIN_STREAM)
}
