mod common;

use bandbatch_core::batching::{mine_hard_negatives, BatchLayout};
use bandbatch_core::synth::{clustered_pair, random_pair};
use bandbatch_core::{
    gcbs_pipeline, hard_negative_batches, random_batches, sequential_batches, BatchAssignment,
    PipelineConfig,
};
use proptest::prelude::*;

#[test]
fn random_pairs_co_occur_uniformly() {
    let n = 6;
    let trials = 10_000;
    let mut together = [[0u32; 6]; 6];
    for seed in 0..trials {
        let b = random_batches(n, 2, seed).unwrap();
        for batch in b.batches() {
            together[batch[0]][batch[1]] += 1;
            together[batch[1]][batch[0]] += 1;
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let f = f64::from(together[i][j]) / trials as f64;
            // P(j shares i's batch) = (k - 1) / (n - 1) = 1/5
            assert!((f - 0.2).abs() < 0.02, "pair ({i},{j}): {f}");
        }
    }
}

#[test]
fn mined_partners_are_row_maxima() {
    let c = clustered_pair(64, 8, 4, 0.5, 1).unwrap();
    let partners = mine_hard_negatives(&c.pair);
    let s = common::naive_scores(&c.pair);
    for i in 0..64 {
        let j = partners[i];
        assert_ne!(i, j);
        // 1 - 1/N quantile of row i = its largest value among N entries
        let mut row: Vec<f64> = (0..64).filter(|&j| j != i).map(|j| s[i][j]).collect();
        row.sort_by(f64::total_cmp);
        let top = *row.last().unwrap();
        assert!(s[i][j] >= top - 1e-12, "row {i}");
        assert!(s[i][j] >= common::sorted_quantile(row, 1.0 - 1.0 / 64.0));
    }
}

#[test]
fn hard_negative_layout() {
    let pair = random_pair(10, 4, 2).unwrap();
    let partners = mine_hard_negatives(&pair);
    let b = hard_negative_batches(&pair, 4, 9).unwrap();
    assert_eq!(b.layout(), &BatchLayout::Slots);
    assert_eq!(b.slot_count(), 20);
    assert_eq!(b.batches().len(), 5);
    let mut refs = Vec::new();
    for batch in b.batches() {
        for slot in batch.chunks(2) {
            assert_eq!(slot[1], partners[slot[0]]);
            refs.push(slot[0]);
        }
    }
    refs.sort_unstable();
    assert_eq!(refs, (0..10).collect::<Vec<_>>());
    // short final batch when 2N is not a multiple of k
    let b = hard_negative_batches(&pair, 8, 9).unwrap();
    assert_eq!(b.batches().last().unwrap().len(), 4);
}

#[test]
fn two_clusters_are_recovered() {
    let (pair, labels) = common::two_cluster_fixture();
    for reverse in [true, false] {
        let out = gcbs_pipeline(
            &pair,
            &PipelineConfig {
                quantile: 0.5,
                batch_size: 4,
                chunk_rows: None,
                reverse,
            },
        )
        .unwrap();
        assert_eq!(out.edge_count, 12, "two disjoint K4");
        for batch in out.batches.batches() {
            assert!(batch.iter().all(|&i| labels[i] == labels[batch[0]]));
        }
        assert_eq!(
            out.batches.canonical_blocks(),
            vec![vec![0, 2, 4, 6], vec![1, 3, 5, 7]]
        );
    }
}

#[test]
fn empty_graph_still_yields_batches() {
    // Orthonormal rows: only the diagonal is nonzero, and it sits at the
    // quantile value itself, so nothing passes the strict threshold.
    let rows: Vec<Vec<f64>> = (0..50)
        .map(|i| (0..50).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let pair = common::pair_from(&rows, &rows);
    let out = gcbs_pipeline(
        &pair,
        &PipelineConfig {
            quantile: 0.99,
            batch_size: 8,
            chunk_rows: Some(7),
            reverse: true,
        },
    )
    .unwrap();
    assert_eq!(out.edge_count, 0);
    assert_eq!(out.batches.batches().len(), 7);
    out.batches.validate(50).unwrap();
}

#[test]
fn pipeline_is_repeatable_and_thread_invariant() {
    let pair = random_pair(400, 16, 8).unwrap();
    let config = PipelineConfig {
        quantile: 0.99,
        batch_size: 16,
        chunk_rows: Some(64),
        reverse: true,
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| gcbs_pipeline(&pair, &config).unwrap().permutation)
    };
    let a = run(1);
    assert_eq!(a, run(1));
    assert_eq!(a, run(3));
}

fn check_partition(b: &BatchAssignment, n: usize, k: usize) {
    let perm = b.permutation().expect("sequential layout");
    let pos = perm.positions();
    let mut seen = vec![0; n];
    for (bi, batch) in b.batches().iter().enumerate() {
        let expected_len = if bi + 1 == b.batches().len() && !n.is_multiple_of(k) {
            n % k
        } else {
            k
        };
        assert_eq!(batch.len(), expected_len);
        for &i in batch {
            seen[i] += 1;
            assert_eq!(pos[i] / k, bi);
        }
    }
    assert!(seen.iter().all(|&c| c == 1));
    for i in 0..n {
        for j in 0..n {
            let same = b
                .batches()
                .iter()
                .any(|bt| bt.contains(&i) && bt.contains(&j));
            assert_eq!(same, pos[i] / k == pos[j] / k);
        }
    }
}

proptest! {
    #[test]
    fn sequential_membership_is_block_diagonal(n in 1usize..30, k in 1usize..30, seed in any::<u64>()) {
        let k = k.min(n);
        let b = random_batches(n, k, seed).unwrap();
        check_partition(&b, n, k);
        let b2 = sequential_batches(b.permutation().unwrap(), k).unwrap();
        prop_assert_eq!(b, b2);
    }

    #[test]
    fn pipeline_output_is_a_partition(n in 2usize..40, k in 1usize..40, seed in any::<u64>(), q in 0.5f64..0.99) {
        let k = k.min(n);
        let pair = random_pair(n, 4, seed).unwrap();
        let out = gcbs_pipeline(&pair, &PipelineConfig { quantile: q, batch_size: k, chunk_rows: None, reverse: true }).unwrap();
        check_partition(&out.batches, n, k);
    }
}
