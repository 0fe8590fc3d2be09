//! Shared fixtures for the criterion benchmarks.

use bandbatch_core::synth::random_pair;
use bandbatch_core::EmbeddingPair;

pub const BENCH_DIM: usize = 64;

/// Normalized random pair of `n` rows with a fixed seed per size.
pub fn fixture(n: usize) -> EmbeddingPair {
    random_pair(n, BENCH_DIM, n as u64).expect("valid synthetic shape")
}
