//! Decision-oriented learning for parameterized submodular route selection.
//!
//! The library trains a predictor that maps context observations (UAV task
//! circles plus a wind field) to the weights of a monotone submodular
//! coverage objective, by differentiating through a smoothed greedy
//! maximization layer with a score-function gradient estimator. A synthetic
//! simulator of UGVs recharging UAVs on a road network supplies ground-truth
//! data and the end-to-end evaluation loop.
//!
//! Module map:
//! - [`submodular`]: coverage basis functions, the weighted objective, and
//!   marginal gains with their weight-gradients.
//! - [`greedy`]: deterministic greedy and the entropy-smoothed greedy with
//!   full trace recording.
//! - [`gradient`]: decision loss, the unbiased score-function gradient
//!   estimator, and an exact enumeration oracle.
//! - [`predictor`]: a one-hidden-layer MLP with manual backprop, SGD/Adam,
//!   and the two training loops (decision-oriented and two-stage MSE).
//! - [`sim`]: road graph, Weibull wind, the UAV energy model, mission
//!   rollouts, candidate route generation, and graph partitioning.
//! - [`datagen`]: rollout-driven data generation and non-negative
//!   regularized least-squares weight fitting.

pub mod datagen;
pub mod error;
pub mod gradient;
pub mod greedy;
pub mod predictor;
pub mod sim;
pub mod submodular;

pub use error::{Error, Result};

/// Derives a child seed from a root seed and a stream index.
///
/// SplitMix64 finalizer over the combined words; used everywhere a
/// reproducible sub-stream is needed (per-trial, per-sample, per-UAV).
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    let mut z = root ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A ChaCha stream seeded from `root` on stream `stream`.
pub fn seeded_rng(root: u64, stream: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(stream);
    rng
}
