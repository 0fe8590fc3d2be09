//! Seeded synthetic embedding pairs for tests, benchmarks and demos.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::batching::seeded_rng;
use crate::error::Result;
use crate::tensor_io::{EmbeddingMatrix, EmbeddingPair};

fn gaussian_rows(rng: &mut impl Rng, n: usize, d: usize) -> Vec<f64> {
    (0..n * d).map(|_| rng.sample(StandardNormal)).collect()
}

/// Independent standard normal `X` and `Y`, rows normalized.
pub fn random_pair(n: usize, d: usize, seed: u64) -> Result<EmbeddingPair> {
    let mut rng = seeded_rng(seed);
    let x = EmbeddingMatrix::new(n, d, gaussian_rows(&mut rng, n, d))?;
    let y = EmbeddingMatrix::new(n, d, gaussian_rows(&mut rng, n, d))?;
    EmbeddingPair::new(x, y)?.normalized()
}

#[derive(Clone, Debug)]
pub struct ClusteredPair {
    pub pair: EmbeddingPair,
    /// Cluster label of each row.
    pub labels: Vec<usize>,
}

/// `clusters` random unit centers; sample `i` belongs to cluster
/// `i % clusters`, and both `x_i` and `y_i` are its center plus independent
/// isotropic noise with per-coordinate standard deviation
/// `noise / sqrt(d)`, then normalized.
pub fn clustered_pair(
    n: usize,
    d: usize,
    clusters: usize,
    noise: f64,
    seed: u64,
) -> Result<ClusteredPair> {
    let mut rng = seeded_rng(seed);
    let centers = EmbeddingMatrix::new(clusters, d, gaussian_rows(&mut rng, clusters, d))?
        .normalize_rows()?;
    let sigma = noise / (d as f64).sqrt();
    let labels: Vec<usize> = (0..n).map(|i| i % clusters).collect();
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        let mut data = Vec::with_capacity(n * d);
        for &c in &labels {
            for v in centers.row(c) {
                let e: f64 = rng.sample(StandardNormal);
                data.push(v + sigma * e);
            }
        }
        data
    };
    let x = EmbeddingMatrix::new(n, d, draw(&mut rng))?;
    let y = EmbeddingMatrix::new(n, d, draw(&mut rng))?;
    Ok(ClusteredPair {
        pair: EmbeddingPair::new(x, y)?.normalized()?,
        labels,
    })
}
