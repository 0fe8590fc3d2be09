//! Batch assignments: sequential batching over a permutation, the random and
//! one-hard-negative baselines, and the thresholded-bandwidth pipeline.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bandwidth::{cuthill_mckee, matrix_bandwidth, Permutation};
use crate::error::{Error, Result};
use crate::similarity::{
    build_sparse_graph, estimate_quantile_threshold, SimilarityThreshold, DEFAULT_QUANTILE,
};
use crate::tensor_io::EmbeddingPair;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Quantile-thresholded similarity graph ordered by Cuthill-McKee.
    Gcbs,
    Random,
    /// One mined hard negative per sample, doubling the slot count.
    HardNeg1,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Gcbs => "gcbs",
            Strategy::Random => "random",
            Strategy::HardNeg1 => "hardneg1",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcbs" => Ok(Strategy::Gcbs),
            "random" => Ok(Strategy::Random),
            "hardneg1" => Ok(Strategy::HardNeg1),
            other => Err(Error::Parameter(format!(
                "unknown strategy {other:?} (expected gcbs, random or hardneg1)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BatchLayout {
    /// Consecutive blocks of a permutation; a partition of the samples.
    Sequential(Permutation),
    /// Free-form slot lists, possibly repeating samples across batches.
    Slots,
}

/// Batches over `n` samples. Each batch lists original row indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchAssignment {
    n: usize,
    batch_size: usize,
    batches: Vec<Vec<usize>>,
    layout: BatchLayout,
}

impl BatchAssignment {
    /// Wraps explicit slot lists. Every index must be `< n` and every sample
    /// must occur in at least one batch.
    pub fn from_slots(n: usize, batch_size: usize, batches: Vec<Vec<usize>>) -> Result<Self> {
        let b = BatchAssignment {
            n,
            batch_size,
            batches,
            layout: BatchLayout::Slots,
        };
        b.validate(n)?;
        Ok(b)
    }

    /// Builds a sequential assignment from a partition into blocks of size
    /// `batch_size` (at most one shorter block, which is moved last).
    pub fn from_partition(n: usize, batch_size: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut ordered: Vec<&Vec<usize>> = blocks.iter().collect();
        ordered.sort_by_key(|b| b.len() != batch_size);
        let order: Vec<usize> = ordered.into_iter().flatten().copied().collect();
        let perm = Permutation::new(order)?;
        if perm.len() != n {
            return Err(Error::Parameter(format!(
                "partition covers {} samples, expected {n}",
                perm.len()
            )));
        }
        let b = sequential_batches(&perm, batch_size)?;
        let mut want: Vec<Vec<usize>> = blocks.iter().map(|b| sorted(b)).collect();
        let mut got: Vec<Vec<usize>> = b.batches.iter().map(|b| sorted(b)).collect();
        want.sort();
        got.sort();
        if want != got {
            return Err(Error::Parameter(
                "blocks do not form a sequential batching of the given size".into(),
            ));
        }
        Ok(b)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn batches(&self) -> &[Vec<usize>] {
        &self.batches
    }

    pub fn layout(&self) -> &BatchLayout {
        &self.layout
    }

    pub fn permutation(&self) -> Option<&Permutation> {
        match &self.layout {
            BatchLayout::Sequential(p) => Some(p),
            BatchLayout::Slots => None,
        }
    }

    pub fn slot_count(&self) -> usize {
        self.batches.iter().map(Vec::len).sum()
    }

    /// Checks the assignment against a sample count: indices in range and
    /// every sample present somewhere.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.n != n {
            return Err(Error::Parameter(format!(
                "assignment is over {} samples, data has {n}",
                self.n
            )));
        }
        let mut covered = vec![false; n];
        for (b, batch) in self.batches.iter().enumerate() {
            for &i in batch {
                if i >= n {
                    return Err(Error::Parameter(format!(
                        "batch {b} references sample {i} >= {n}"
                    )));
                }
                covered[i] = true;
            }
        }
        if let Some(missing) = covered.iter().position(|c| !c) {
            return Err(Error::Parameter(format!("sample {missing} is in no batch")));
        }
        Ok(())
    }

    /// Distinct members of each batch, sorted.
    pub fn contrast_sets(&self) -> Vec<Vec<usize>> {
        self.batches
            .iter()
            .map(|b| {
                let mut s = sorted(b);
                s.dedup();
                s
            })
            .collect()
    }

    /// For each sample, the batches whose contrast set contains it.
    pub fn occurrences(&self) -> Vec<Vec<usize>> {
        let mut occ = vec![Vec::new(); self.n];
        for (b, set) in self.contrast_sets().iter().enumerate() {
            for &i in set {
                occ[i].push(b);
            }
        }
        occ
    }

    /// Sorted, canonical view of the batches (each batch sorted, batches
    /// sorted). Two assignments with the same membership compare equal.
    pub fn canonical_blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks: Vec<Vec<usize>> = self.batches.iter().map(|b| sorted(b)).collect();
        blocks.sort();
        blocks
    }

    /// One line per batch: `"b: i1 i2 ..."`.
    pub fn to_dump_string(&self) -> String {
        let mut out = String::new();
        for (b, batch) in self.batches.iter().enumerate() {
            let _ = write!(out, "{b}:");
            for i in batch {
                let _ = write!(out, " {i}");
            }
            out.push('\n');
        }
        out
    }
}

fn sorted(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}

fn check_batch_size(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Parameter(format!(
            "batch size must be in [1, {n}], got {k}"
        )));
    }
    Ok(())
}

/// Splits `p` into consecutive blocks of `k` positions; the last block is
/// shorter when `k` does not divide `n`.
pub fn sequential_batches(p: &Permutation, k: usize) -> Result<BatchAssignment> {
    check_batch_size(p.len(), k)?;
    let batches = p.order().chunks(k).map(<[usize]>::to_vec).collect();
    Ok(BatchAssignment {
        n: p.len(),
        batch_size: k,
        batches,
        layout: BatchLayout::Sequential(p.clone()),
    })
}

/// Deterministic generator for all seeded baselines: ChaCha with 8 rounds,
/// seeded through `SeedableRng::seed_from_u64`.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform permutation of `0..n` by Fisher-Yates (Durstenfeld) over
/// [`seeded_rng`].
pub fn random_permutation(n: usize, seed: u64) -> Permutation {
    let mut rng = seeded_rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    Permutation::new(order).expect("shuffle of 0..n is a bijection")
}

pub fn random_batches(n: usize, k: usize, seed: u64) -> Result<BatchAssignment> {
    check_batch_size(n, k)?;
    sequential_batches(&random_permutation(n, seed), k)
}

/// `argmax_{j != i} x_i . y_j` for every `i`, ties to the lowest `j`.
/// For `N = 1` the only candidate is the sample itself.
pub fn mine_hard_negatives(pair: &EmbeddingPair) -> Vec<usize> {
    let n = pair.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = None;
            let mut best_score = f64::NEG_INFINITY;
            for j in (0..n).filter(|&j| j != i) {
                let s = pair.score(i, j);
                if best.is_none() || s > best_score {
                    best = Some(j);
                    best_score = s;
                }
            }
            best.unwrap_or(i)
        })
        .collect()
}

/// One-hard-negative baseline over `2N` slots.
///
/// Samples are visited in a seeded random order; each contributes itself and
/// its mined partner as two adjacent slots. Consecutive runs of `k` slots
/// form a batch, so every batch holds `k / 2` reference samples and their
/// partners (the last batch may be shorter). A sample can therefore appear
/// in several batches.
pub fn hard_negative_batches(pair: &EmbeddingPair, k: usize, seed: u64) -> Result<BatchAssignment> {
    let n = pair.len();
    if k == 0 || !k.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "hard-negative batches need an even batch size, got {k}"
        )));
    }
    if k > 2 * n {
        return Err(Error::Parameter(format!(
            "batch size {k} exceeds the {} available slots",
            2 * n
        )));
    }
    let partners = mine_hard_negatives(pair);
    let visit = random_permutation(n, seed);
    let slots: Vec<usize> = visit
        .order()
        .iter()
        .flat_map(|&i| [i, partners[i]])
        .collect();
    let batches = slots.chunks(k).map(<[usize]>::to_vec).collect();
    BatchAssignment::from_slots(n, k, batches)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineConfig {
    pub quantile: f64,
    pub batch_size: usize,
    /// Rows per inner-product chunk; `None` means `min(N, 4096)`.
    pub chunk_rows: Option<usize>,
    /// Reverse the Cuthill-McKee ordering.
    pub reverse: bool,
}

impl PipelineConfig {
    pub fn new(batch_size: usize) -> Self {
        PipelineConfig {
            quantile: DEFAULT_QUANTILE,
            batch_size,
            chunk_rows: None,
            reverse: true,
        }
    }
}

pub fn default_chunk_rows(n: usize) -> usize {
    n.clamp(1, 4096)
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub permutation: Permutation,
    pub batches: BatchAssignment,
    pub threshold: SimilarityThreshold,
    pub edge_count: usize,
    pub max_degree: usize,
    pub bandwidth: usize,
}

/// normalize -> quantile threshold -> sparse graph -> Cuthill-McKee ->
/// sequential batches.
pub fn gcbs_pipeline(pair: &EmbeddingPair, config: &PipelineConfig) -> Result<PipelineOutput> {
    let n = pair.len();
    check_batch_size(n, config.batch_size)?;
    let chunk_rows = config.chunk_rows.unwrap_or_else(|| default_chunk_rows(n));
    let pair = pair.normalized()?;
    let threshold = estimate_quantile_threshold(&pair, config.quantile, chunk_rows)?;
    let graph = build_sparse_graph(&pair, &threshold)?;
    let permutation = cuthill_mckee(&graph, config.reverse)?;
    let bandwidth = matrix_bandwidth(&graph, &permutation)?;
    let batches = sequential_batches(&permutation, config.batch_size)?;
    Ok(PipelineOutput {
        permutation,
        batches,
        threshold,
        edge_count: graph.edge_count(),
        max_degree: graph.max_degree(),
        bandwidth,
    })
}
