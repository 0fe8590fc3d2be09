//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's numeric paths.
#![allow(dead_code)]

use bandbatch_core::{EmbeddingMatrix, EmbeddingPair};

pub fn pair_from(x: &[Vec<f64>], y: &[Vec<f64>]) -> EmbeddingPair {
    EmbeddingPair::new(
        EmbeddingMatrix::from_rows(x).unwrap(),
        EmbeddingMatrix::from_rows(y).unwrap(),
    )
    .unwrap()
}

pub fn naive_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

pub fn naive_scores(pair: &EmbeddingPair) -> Vec<Vec<f64>> {
    let n = pair.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| naive_dot(pair.x().row(i), pair.y().row(j)))
                .collect()
        })
        .collect()
}

/// Straight transcription of the loss definition: exp, sum, divide, log.
pub fn naive_ntxent(pair: &EmbeddingPair, tau: f64, batch_of: impl Fn(usize) -> Vec<usize>) -> f64 {
    let s = naive_scores(pair);
    let n = pair.len();
    let mut total = 0.0;
    for i in 0..n {
        let num = (s[i][i] / tau).exp();
        let den: f64 = batch_of(i).iter().map(|&j| (s[i][j] / tau).exp()).sum();
        total += -(num / den).ln();
    }
    total / n as f64
}

/// Same as [`naive_ntxent`] but in `f32`, which overflows for small `tau`.
pub fn naive_ntxent_f32(pair: &EmbeddingPair, tau: f32) -> f32 {
    let s = naive_scores(pair);
    let n = pair.len();
    let mut total = 0.0f32;
    for i in 0..n {
        let num = (s[i][i] as f32 / tau).exp();
        let den: f32 = (0..n).map(|j| (s[i][j] as f32 / tau).exp()).sum();
        total += -(num / den).ln();
    }
    total / n as f32
}

/// Full sort, then linear interpolation at position `q * (len - 1)`.
pub fn sorted_quantile(mut v: Vec<f64>, q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let h = q * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 {
        v[lo]
    } else {
        v[lo] + frac * (v[lo + 1] - v[lo])
    }
}

pub fn all_scores(pair: &EmbeddingPair) -> Vec<f64> {
    let n = pair.len();
    let mut v = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            v.push(pair.score(i, j));
        }
    }
    v
}

/// Unit vectors at the given angles in degrees, used for both X and Y.
pub fn angle_pair(degrees: &[f64]) -> EmbeddingPair {
    let rows: Vec<Vec<f64>> = degrees
        .iter()
        .map(|d| vec![d.to_radians().cos(), d.to_radians().sin()])
        .collect();
    pair_from(&rows, &rows)
}

/// Eight 2-d samples in two tight clusters (near 0 and near 90 degrees),
/// interleaved so the identity order mixes them. Returns the pair and the
/// cluster label of each row.
pub fn two_cluster_fixture() -> (EmbeddingPair, Vec<usize>) {
    let degrees = [0.0, 90.0, 1.0, 91.0, 2.0, 92.0, 3.0, 93.0];
    let labels = vec![0, 1, 0, 1, 0, 1, 0, 1];
    (angle_pair(&degrees), labels)
}

/// Pseudo-random matrix without going through the library's generators.
pub fn lcg_matrix(rows: usize, cols: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut state = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    (0..rows)
        .map(|_| (0..cols).map(|_| next()).collect())
        .collect()
}

/// BFS distance from `root` within its component; `usize::MAX` elsewhere.
pub fn bfs_levels(adj: &[Vec<usize>], root: usize) -> Vec<usize> {
    let mut level = vec![usize::MAX; adj.len()];
    level[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &u in &adj[v] {
            if level[u] == usize::MAX {
                level[u] = level[v] + 1;
                queue.push_back(u);
            }
        }
    }
    level
}

/// Bandwidth recomputed from an edge list and an ordering.
pub fn bandwidth_of(edges: &[(usize, usize)], order: &[usize]) -> usize {
    let mut pos = vec![0; order.len()];
    for (t, &v) in order.iter().enumerate() {
        pos[v] = t;
    }
    edges
        .iter()
        .map(|&(a, b)| pos[a].abs_diff(pos[b]))
        .max()
        .unwrap_or(0)
}
