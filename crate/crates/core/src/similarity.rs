//! Quantile thresholding of the cross inner-product matrix `X Y^T` and the
//! sparse similarity graph built from it.
//!
//! The inner-product matrix is never materialized in full. It is produced in
//! blocks of `chunk_rows` rows of `X` against all of `Y`, so peak memory is
//! `O(chunk_rows * N)`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor_io::EmbeddingPair;

/// Default quantile used to sparsify the inner-product matrix.
pub const DEFAULT_QUANTILE: f64 = 0.999;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuantileEstimator {
    /// Median over row chunks of the per-chunk quantile.
    ChunkMedian,
    /// Quantile over all `N^2` entries.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityThreshold {
    pub quantile: f64,
    pub value: f64,
    pub chunk_rows: usize,
    pub estimator: QuantileEstimator,
}

impl SimilarityThreshold {
    /// A threshold with a caller-chosen cutoff, bypassing estimation.
    pub fn fixed(value: f64) -> Self {
        SimilarityThreshold {
            quantile: f64::NAN,
            value,
            chunk_rows: 0,
            estimator: QuantileEstimator::Exact,
        }
    }
}

pub fn validate_quantile(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "quantile must lie in (0, 1), got {q}"
        )))
    }
}

/// q-quantile with linear interpolation between order statistics
/// (position `q * (len - 1)`). Reorders `values`.
pub fn interpolated_quantile(values: &mut [f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty slice");
    let h = q * (values.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let (_, lo_val, upper) = values.select_nth_unstable_by(lo, f64::total_cmp);
    let lo_val = *lo_val;
    if frac == 0.0 || upper.is_empty() {
        return lo_val;
    }
    let hi_val = upper.iter().copied().fold(f64::INFINITY, f64::min);
    lo_val + frac * (hi_val - lo_val)
}

/// Median; the mean of the two middle values for even lengths.
fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Writes `x_i . y_j` for `i` in `rows` and all `j` into `out` (row-major).
fn fill_score_block(pair: &EmbeddingPair, rows: std::ops::Range<usize>, out: &mut [f64]) {
    let n = pair.len();
    debug_assert_eq!(out.len(), rows.len() * n);
    out.par_chunks_mut(n)
        .zip(rows.into_par_iter())
        .for_each(|(dst, i)| {
            for (j, slot) in dst.iter_mut().enumerate() {
                *slot = pair.score(i, j);
            }
        });
}

fn check_chunk_rows(n: usize, chunk_rows: usize) -> Result<()> {
    if chunk_rows == 0 || chunk_rows > n {
        return Err(Error::Parameter(format!(
            "chunk_rows must be in [1, {n}], got {chunk_rows}"
        )));
    }
    Ok(())
}

/// Estimates the q-quantile of `X Y^T` as the median of the per-chunk
/// quantiles over `ceil(N / chunk_rows)` row chunks. `chunk_rows = N` gives
/// the exact quantile.
pub fn estimate_quantile_threshold(
    pair: &EmbeddingPair,
    q: f64,
    chunk_rows: usize,
) -> Result<SimilarityThreshold> {
    validate_quantile(q)?;
    let n = pair.len();
    check_chunk_rows(n, chunk_rows)?;

    let mut buf = vec![0.0; chunk_rows * n];
    let mut per_chunk = Vec::with_capacity(n.div_ceil(chunk_rows));
    for start in (0..n).step_by(chunk_rows) {
        let end = (start + chunk_rows).min(n);
        let block = &mut buf[..(end - start) * n];
        fill_score_block(pair, start..end, block);
        per_chunk.push(interpolated_quantile(block, q));
    }
    let estimator = if per_chunk.len() == 1 {
        QuantileEstimator::Exact
    } else {
        QuantileEstimator::ChunkMedian
    };
    Ok(SimilarityThreshold {
        quantile: q,
        value: median(&mut per_chunk),
        chunk_rows,
        estimator,
    })
}

pub fn exact_quantile_threshold(pair: &EmbeddingPair, q: f64) -> Result<SimilarityThreshold> {
    estimate_quantile_threshold(pair, q, pair.len())
}

/// Undirected, unweighted graph in compressed row layout with sorted
/// neighbor lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseSimilarityGraph {
    n: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    /// Ordered pairs `(i, j)`, `i != j`, that passed the threshold before
    /// symmetrization.
    directed_entries: usize,
}

impl SparseSimilarityGraph {
    /// Builds a symmetric graph from an edge list. Self-loops are dropped and
    /// duplicate edges merged.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut lists = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Graph(format!(
                    "edge ({a}, {b}) out of range for n={n}"
                )));
            }
            if a != b {
                lists[a].push(b);
                lists[b].push(a);
            }
        }
        let mut g = Self::from_adjacency(lists)?;
        g.directed_entries = g.neighbors.len();
        Ok(g)
    }

    /// Takes adjacency lists verbatim (sorted and deduplicated, but not
    /// symmetrized). Use [`Self::check_symmetric`] to validate.
    pub fn from_adjacency(mut lists: Vec<Vec<usize>>) -> Result<Self> {
        let n = lists.len();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut neighbors = Vec::new();
        for (i, list) in lists.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            if let Some(&bad) = list.iter().find(|&&j| j >= n) {
                return Err(Error::Graph(format!(
                    "node {i} lists neighbor {bad} >= n={n}"
                )));
            }
            if list.binary_search(&i).is_ok() {
                return Err(Error::Graph(format!("self-loop at node {i}")));
            }
            neighbors.extend_from_slice(list);
            offsets.push(neighbors.len());
        }
        let directed_entries = neighbors.len();
        Ok(SparseSimilarityGraph {
            n,
            offsets,
            neighbors,
            directed_entries,
        })
    }

    pub fn empty(n: usize) -> Self {
        SparseSimilarityGraph {
            n,
            offsets: vec![0; n + 1],
            neighbors: Vec::new(),
            directed_entries: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn directed_entries(&self) -> usize {
        self.directed_entries
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    pub fn check_symmetric(&self) -> Result<()> {
        for i in 0..self.n {
            for &j in self.neighbors(i) {
                if !self.has_edge(j, i) {
                    return Err(Error::Graph(format!(
                        "asymmetric adjacency: {j} in adj({i}) but {i} not in adj({j})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Undirected edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .filter(move |&&j| j > i)
                .map(move |&j| (i, j))
        })
    }

    /// Debug dump: one `"i j"` line per undirected edge, `i < j`, sorted.
    pub fn to_edge_list_string(&self) -> String {
        let mut out = String::new();
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }
}

/// Keeps edge `{i, j}`, `i != j`, iff `x_i . y_j > t` or `x_j . y_i > t`.
pub fn build_sparse_graph(
    pair: &EmbeddingPair,
    threshold: &SimilarityThreshold,
) -> Result<SparseSimilarityGraph> {
    let block = if threshold.chunk_rows == 0 {
        pair.len().min(4096)
    } else {
        threshold.chunk_rows
    };
    build_sparse_graph_blocked(pair, threshold.value, block)
}

/// [`build_sparse_graph`] with an explicit block size for the score pass.
/// The block size only bounds memory; the result does not depend on it.
pub fn build_sparse_graph_blocked(
    pair: &EmbeddingPair,
    threshold: f64,
    block_rows: usize,
) -> Result<SparseSimilarityGraph> {
    if !threshold.is_finite() {
        return Err(Error::Parameter(format!(
            "threshold must be finite, got {threshold}"
        )));
    }
    let n = pair.len();
    check_chunk_rows(n, block_rows)?;

    let mut directed: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut buf = vec![0.0; block_rows * n];
    for start in (0..n).step_by(block_rows) {
        let end = (start + block_rows).min(n);
        let block = &mut buf[..(end - start) * n];
        fill_score_block(pair, start..end, block);
        let rows: Vec<Vec<usize>> = block
            .par_chunks(n)
            .zip((start..end).into_par_iter())
            .map(|(scores, i)| {
                scores
                    .iter()
                    .enumerate()
                    .filter(|&(j, &s)| j != i && s > threshold)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        directed.extend(rows);
    }

    let directed_entries = directed.iter().map(Vec::len).sum();
    let mut lists: Vec<Vec<usize>> = directed.clone();
    for (i, row) in directed.iter().enumerate() {
        for &j in row {
            lists[j].push(i);
        }
    }
    let mut g = SparseSimilarityGraph::from_adjacency(lists)?;
    g.directed_entries = directed_entries;
    Ok(g)
}

/// Fraction of the `N^2` entries that passed the threshold (self pairs
/// excluded). For an exact q-quantile threshold this is close to `1 - q`.
pub fn expected_retained_fraction(g: &SparseSimilarityGraph, q: f64) -> Result<f64> {
    validate_quantile(q)?;
    if g.n == 0 {
        return Ok(0.0);
    }
    Ok(g.directed_entries as f64 / (g.n as f64 * g.n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_io::EmbeddingMatrix;

    fn unit_angles(degrees: &[f64]) -> EmbeddingPair {
        let rows: Vec<Vec<f64>> = degrees
            .iter()
            .map(|d| vec![d.to_radians().cos(), d.to_radians().sin()])
            .collect();
        let m = EmbeddingMatrix::from_rows(&rows).unwrap();
        EmbeddingPair::new(m.clone(), m).unwrap()
    }

    #[test]
    fn quantile_parameter_errors() {
        let pair = unit_angles(&[0.0, 90.0]);
        for q in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                estimate_quantile_threshold(&pair, q, 1),
                Err(Error::Parameter(_))
            ));
        }
        assert!(estimate_quantile_threshold(&pair, 0.5, 0).is_err());
        assert!(estimate_quantile_threshold(&pair, 0.5, 3).is_err());
    }

    #[test]
    fn constant_matrix_quantile_is_constant() {
        let pair = unit_angles(&[30.0, 30.0, 30.0, 30.0]);
        let c = pair.score(0, 1);
        for q in [0.01, 0.5, 0.999] {
            for chunk in [1, 2, 4] {
                let t = estimate_quantile_threshold(&pair, q, chunk).unwrap();
                assert_eq!(t.value, c);
            }
        }
    }

    #[test]
    fn interpolation_between_order_statistics() {
        let mut v = vec![4.0, 1.0, 3.0, 2.0];
        // position 0.5 * 3 = 1.5 -> halfway between 2 and 3
        assert_eq!(interpolated_quantile(&mut v, 0.5), 2.5);
        let mut v = vec![10.0];
        assert_eq!(interpolated_quantile(&mut v, 0.3), 10.0);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn angle_graph_has_single_edge() {
        let pair = unit_angles(&[0.0, 5.0, 90.0]);
        let g = build_sparse_graph_blocked(&pair, 0.9, 3).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1)]);
        assert_eq!(g.to_edge_list_string(), "0 1\n");
    }

    #[test]
    fn extreme_thresholds() {
        let pair = unit_angles(&[0.0, 40.0, 100.0, 200.0]);
        let g = build_sparse_graph_blocked(&pair, 1.5, 2).unwrap();
        assert_eq!(g.edge_count(), 0);
        let g = build_sparse_graph_blocked(&pair, -1.5, 2).unwrap();
        assert_eq!(g.edge_count(), 4 * 3 / 2);
        assert!(matches!(
            build_sparse_graph_blocked(&pair, f64::NAN, 2),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn retained_fraction_extremes() {
        let complete =
            SparseSimilarityGraph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
                .unwrap();
        let f = expected_retained_fraction(&complete, 0.5).unwrap();
        assert!((f - (1.0 - 1.0 / 4.0)).abs() < 1e-15);
        let empty = SparseSimilarityGraph::empty(7);
        assert_eq!(expected_retained_fraction(&empty, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn adjacency_validation() {
        assert!(SparseSimilarityGraph::from_adjacency(vec![vec![0]]).is_err());
        assert!(SparseSimilarityGraph::from_adjacency(vec![vec![5], vec![]]).is_err());
        let g = SparseSimilarityGraph::from_adjacency(vec![vec![1], vec![]]).unwrap();
        assert!(matches!(g.check_symmetric(), Err(Error::Graph(_))));
        let g = SparseSimilarityGraph::from_adjacency(vec![vec![1], vec![0]]).unwrap();
        assert!(g.check_symmetric().is_ok());
        assert!(SparseSimilarityGraph::from_edges(2, &[(0, 2)]).is_err());
    }
}
