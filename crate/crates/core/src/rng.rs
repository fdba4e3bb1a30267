//! Counter-based RNG stream derivation.
//!
//! Every random draw in an experiment comes from a `ChaCha8Rng` keyed by the
//! experiment seed plus a `(stream, a, b)` tag, so each consumer owns an
//! independent stream that does not depend on execution order, thread
//! scheduling, or which strategy is running. This is what makes parallel
//! client training and cross-strategy comparisons bit-reproducible.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Logical owners of RNG streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamId {
    /// Synthetic class-mean placement.
    SynthMeans = 1,
    /// Synthetic per-class sample draws (`a` = class).
    SynthSamples = 2,
    /// Held-out global test split.
    GlobalSplit = 3,
    /// Per-class Dirichlet draw + shuffle during partitioning (`a` = class).
    PartitionClass = 4,
    /// Local train/test split (`a` = client id + 1; 0 is the standalone entry point).
    LocalSplit = 5,
    /// Global model weight initialization (`a` = layer index).
    ModelInit = 6,
    /// Per-round client sampling (`a` = round).
    ClientSampling = 7,
    /// Per-round, per-client batch shuffling (`a` = round, `b` = client id).
    LocalTraining = 8,
}

/// Derive the RNG stream for `(seed, id, a, b)`.
pub fn stream(seed: u64, id: StreamId, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(id as u64).to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
