//! Cuthill-McKee ordering and matrix bandwidth.

use crate::error::{Error, Result};
use crate::similarity::SparseSimilarityGraph;

/// A bijection on `0..n`. `order()[t]` is the original index placed at
/// position `t`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    order: Vec<usize>,
}

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for (pos, &idx) in order.iter().enumerate() {
            if idx >= n {
                return Err(Error::Permutation(format!(
                    "index {idx} at position {pos} out of range for length {n}"
                )));
            }
            if std::mem::replace(&mut seen[idx], true) {
                return Err(Error::Permutation(format!(
                    "duplicate index {idx} at position {pos}"
                )));
            }
        }
        Ok(Permutation { order })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            order: (0..n).collect(),
        }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn into_order(self) -> Vec<usize> {
        self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `positions()[i]` is the position of original index `i`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (t, &i) in self.order.iter().enumerate() {
            pos[i] = t;
        }
        pos
    }

    pub fn reversed(&self) -> Self {
        let mut order = self.order.clone();
        order.reverse();
        Permutation { order }
    }
}

/// Cuthill-McKee ordering.
///
/// Each connected component is rooted at its minimum-degree unvisited vertex
/// and explored breadth first; every BFS level is emitted sorted by
/// ascending degree. Remaining ties go to the lower index. With
/// `reverse = true` the finished ordering is reversed (RCM).
pub fn cuthill_mckee(g: &SparseSimilarityGraph, reverse: bool) -> Result<Permutation> {
    g.check_symmetric()?;
    let n = g.n();
    let by_degree = {
        let mut v: Vec<usize> = (0..n).collect();
        v.sort_by_key(|&i| (g.degree(i), i));
        v
    };

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut next_root = 0;
    let mut level = Vec::new();
    let mut next = Vec::new();
    while order.len() < n {
        while visited[by_degree[next_root]] {
            next_root += 1;
        }
        let root = by_degree[next_root];
        visited[root] = true;
        order.push(root);
        level.clear();
        level.push(root);
        loop {
            next.clear();
            for &v in &level {
                for &u in g.neighbors(v) {
                    if !visited[u] {
                        visited[u] = true;
                        next.push(u);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            next.sort_unstable_by_key(|&u| (g.degree(u), u));
            order.extend_from_slice(&next);
            std::mem::swap(&mut level, &mut next);
        }
    }
    if reverse {
        order.reverse();
    }
    Ok(Permutation { order })
}

/// Largest `|pos(i) - pos(j)|` over the edges of `g`; 0 without edges.
pub fn matrix_bandwidth(g: &SparseSimilarityGraph, p: &Permutation) -> Result<usize> {
    if p.len() != g.n() {
        return Err(Error::Parameter(format!(
            "permutation of length {} for a graph on {} nodes",
            p.len(),
            g.n()
        )));
    }
    let pos = p.positions();
    Ok(g.edges()
        .map(|(i, j)| pos[i].abs_diff(pos[j]))
        .max()
        .unwrap_or(0))
}

pub const EXHAUSTIVE_BANDWIDTH_MAX_N: usize = 10;

/// Exact minimum bandwidth by depth-first enumeration of orderings, returning
/// the lexicographically smallest minimizer. Limited to
/// [`EXHAUSTIVE_BANDWIDTH_MAX_N`] nodes.
pub fn exhaustive_min_bandwidth(g: &SparseSimilarityGraph) -> Result<(Permutation, usize)> {
    let n = g.n();
    if n > EXHAUSTIVE_BANDWIDTH_MAX_N {
        return Err(Error::Capacity(format!(
            "exhaustive bandwidth search is limited to {EXHAUSTIVE_BANDWIDTH_MAX_N} nodes, got {n}"
        )));
    }
    g.check_symmetric()?;

    struct Search<'a> {
        g: &'a SparseSimilarityGraph,
        pos: Vec<Option<usize>>,
        order: Vec<usize>,
        best: usize,
        best_order: Vec<usize>,
    }

    impl Search<'_> {
        // `width` is the bandwidth of the placed prefix.
        fn place(&mut self, width: usize) {
            let n = self.g.n();
            let t = self.order.len();
            if t == n {
                if width < self.best {
                    self.best = width;
                    self.best_order = self.order.clone();
                }
                return;
            }
            for v in 0..n {
                if self.pos[v].is_some() {
                    continue;
                }
                let mut w = width;
                for &u in self.g.neighbors(v) {
                    if let Some(pu) = self.pos[u] {
                        w = w.max(t - pu);
                    }
                }
                // Only strict improvements are kept, so the first minimizer
                // found (lexicographically smallest) survives.
                if w >= self.best {
                    continue;
                }
                self.pos[v] = Some(t);
                self.order.push(v);
                self.place(w);
                self.order.pop();
                self.pos[v] = None;
            }
        }
    }

    let mut s = Search {
        g,
        pos: vec![None; n],
        order: Vec::with_capacity(n),
        best: usize::MAX,
        best_order: Vec::new(),
    };
    s.place(0);
    let best = if n == 0 { 0 } else { s.best };
    Ok((
        Permutation {
            order: s.best_order,
        },
        best,
    ))
}
