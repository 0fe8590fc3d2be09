//! Exhaustive solvers over batch partitions for tiny `N`.
//!
//! A batching is a set partition of `0..N` into blocks of size `k` (plus one
//! block of size `N mod k` when `k` does not divide `N`). Blocks are
//! enumerated canonically: the smallest unassigned index always opens the
//! next block, and the remaining members are chosen in increasing order, so
//! each partition is visited exactly once.

use crate::batching::BatchAssignment;
use crate::error::{Error, Result};
use crate::losses::{ntxent_global, Temperature};
use crate::reduce::{log_sum_exp, pairwise_mean, pairwise_sum};
use crate::tensor_io::EmbeddingPair;

pub const ORACLE_MAX_N: usize = 10;
pub const ORACLE_MAX_PARTITIONS: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub best_value: f64,
    pub best_assignment: BatchAssignment,
    pub enumerated_count: u64,
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// `N! / ((k!)^m m! r!)` with `m = N / k` full blocks and a remainder block
/// of size `r = N mod k`.
pub fn partition_count(n: usize, k: usize) -> u64 {
    if k == 0 || k > n {
        return 0;
    }
    let m = n / k;
    let r = n % k;
    factorial(n) / (factorial(k).pow(m as u32) * factorial(m) * factorial(r))
}

/// Calls `visit` once for every canonical partition of `0..n` into blocks of
/// size `k` (and one remainder block).
pub fn for_each_partition(n: usize, k: usize, mut visit: impl FnMut(&[Vec<usize>])) {
    if k == 0 || k > n {
        return;
    }
    struct State {
        n: usize,
        k: usize,
        full_left: usize,
        short: usize,
        used: Vec<bool>,
        blocks: Vec<Vec<usize>>,
    }

    fn open_block(s: &mut State, visit: &mut dyn FnMut(&[Vec<usize>])) {
        let Some(first) = (0..s.n).find(|&i| !s.used[i]) else {
            visit(&s.blocks);
            return;
        };
        let mut sizes = Vec::with_capacity(2);
        if s.full_left > 0 {
            sizes.push(s.k);
        }
        if s.short > 0 {
            sizes.push(s.short);
        }
        for size in sizes {
            let is_full = size == s.k && s.full_left > 0;
            if is_full {
                s.full_left -= 1;
            } else {
                s.short = 0;
            }
            s.used[first] = true;
            s.blocks.push(vec![first]);
            fill(s, first + 1, size, visit);
            s.blocks.pop();
            s.used[first] = false;
            if is_full {
                s.full_left += 1;
            } else {
                s.short = size;
            }
        }
    }

    fn fill(s: &mut State, from: usize, size: usize, visit: &mut dyn FnMut(&[Vec<usize>])) {
        if s.blocks.last().map_or(0, Vec::len) == size {
            open_block(s, visit);
            return;
        }
        for j in from..s.n {
            if s.used[j] {
                continue;
            }
            s.used[j] = true;
            s.blocks.last_mut().unwrap().push(j);
            fill(s, j + 1, size, visit);
            s.blocks.last_mut().unwrap().pop();
            s.used[j] = false;
        }
    }

    let mut state = State {
        n,
        k,
        full_left: n / k,
        short: n % k,
        used: vec![false; n],
        blocks: Vec::new(),
    };
    open_block(&mut state, &mut visit);
}

fn check_limits(n: usize, k: usize) -> Result<u64> {
    if k == 0 || k > n {
        return Err(Error::Parameter(format!(
            "batch size must be in [1, {n}], got {k}"
        )));
    }
    if n > ORACLE_MAX_N {
        return Err(Error::Capacity(format!(
            "exhaustive search is limited to N <= {ORACLE_MAX_N}, got {n}"
        )));
    }
    let count = partition_count(n, k);
    if count > ORACLE_MAX_PARTITIONS {
        return Err(Error::Capacity(format!(
            "{count} partitions exceed the limit of {ORACLE_MAX_PARTITIONS}"
        )));
    }
    Ok(count)
}

/// Maximizes `score(partition)`; ties go to the lexicographically smaller
/// canonical partition, which is the one visited first.
fn search_max(
    pair: &EmbeddingPair,
    k: usize,
    mut score: impl FnMut(&[Vec<usize>]) -> f64,
) -> Result<OracleResult> {
    let n = pair.len();
    check_limits(n, k)?;
    let mut best_value = f64::NEG_INFINITY;
    let mut best: Option<Vec<Vec<usize>>> = None;
    let mut count = 0u64;
    for_each_partition(n, k, |blocks| {
        count += 1;
        let v = score(blocks);
        if best.is_none() || v > best_value {
            best_value = v;
            best = Some(blocks.to_vec());
        }
    });
    let blocks = best.expect("at least one partition");
    Ok(OracleResult {
        best_value,
        best_assignment: BatchAssignment::from_partition(n, k, &blocks)?,
        enumerated_count: count,
    })
}

/// Partition maximizing the smallest in-batch `Z_ij = min(x_i . y_j, x_j . y_i)`.
pub fn exhaustive_qbap(pair: &EmbeddingPair, k: usize) -> Result<OracleResult> {
    if k == 1 {
        check_limits(pair.len(), k)?;
        return Err(Error::ObjectiveUndefined(
            "batch size 1 leaves no in-batch negatives".into(),
        ));
    }
    let s = pair.score_matrix();
    search_max(pair, k, |blocks| {
        let mut m = f64::INFINITY;
        for block in blocks {
            for (a, &i) in block.iter().enumerate() {
                for &j in &block[a + 1..] {
                    m = m.min(s[i][j].min(s[j][i]));
                }
            }
        }
        m
    })
}

/// Partition maximizing the total in-batch similarity
/// `sum_i sum_{j in B_i, j != i} (x_i . y_j + x_j . y_i)`.
pub fn exhaustive_qap(pair: &EmbeddingPair, k: usize) -> Result<OracleResult> {
    let n = pair.len();
    let s = pair.score_matrix();
    let mut per_sample = vec![0.0; n];
    let mut terms = Vec::with_capacity(k);
    search_max(pair, k, |blocks| {
        for block in blocks {
            for &i in block {
                terms.clear();
                terms.extend(
                    block
                        .iter()
                        .filter(|&&j| j != i)
                        .map(|&j| s[i][j] + s[j][i]),
                );
                per_sample[i] = pairwise_sum(&terms);
            }
        }
        pairwise_sum(&per_sample)
    })
}

/// Partition minimizing the true gap `L_global - L_train`. `best_value` is
/// that gap.
pub fn exhaustive_min_gap(
    pair: &EmbeddingPair,
    k: usize,
    tau: Temperature,
) -> Result<OracleResult> {
    let n = pair.len();
    let t = tau.value();
    let s = pair.score_matrix();
    let global = ntxent_global(pair, tau);
    let mut train = vec![0.0; n];
    let mut result = search_max(pair, k, |blocks| {
        for block in blocks {
            for &i in block {
                train[i] = -s[i][i] / t + log_sum_exp(block.iter().map(|&j| s[i][j] / t));
            }
        }
        // maximizing the training loss minimizes the gap
        pairwise_mean(&train)
    })?;
    result.best_value = global - result.best_value;
    Ok(result)
}
