//! Deterministic per-trial random streams.
//!
//! Every random draw in an experiment comes from a generator keyed by
//! `(master seed, trial index, hypothesis, stream)`. Streams never overlap,
//! so results are independent of execution order and thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::experiment::Hypothesis;

/// Independent random substream within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Measurement noise for one meter of the detected block.
    MeterNoise(usize),
    /// Attack construction (support positions, injected state, component
    /// perturbation).
    Attack,
    /// Measurement noise for one meter of the attacker's clean window.
    WindowNoise(usize),
    /// Component-analysis initialization and quasi-state draw.
    AttackerInference,
    /// Per-trial state perturbation.
    StatePerturbation,
}

impl Stream {
    fn code(self) -> u64 {
        match self {
            Stream::MeterNoise(i) => (1u64 << 56) | i as u64,
            Stream::Attack => 2u64 << 56,
            Stream::WindowNoise(i) => (3u64 << 56) | i as u64,
            Stream::AttackerInference => 4u64 << 56,
            Stream::StatePerturbation => 5u64 << 56,
        }
    }
}

/// Builds the generator for one `(master, trial, hypothesis, stream)` tuple.
///
/// The full tuple is written into the 256-bit cipher key, so distinct tuples
/// can never collide.
pub fn trial_rng(master_seed: u64, trial: u64, hypothesis: Hypothesis, stream: Stream) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    key[16..24].copy_from_slice(&(hypothesis as u64).to_le_bytes());
    key[24..32].copy_from_slice(&stream.code().to_le_bytes());
    ChaCha12Rng::from_seed(key)
}
