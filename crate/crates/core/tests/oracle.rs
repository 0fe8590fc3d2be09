mod common;

use bandbatch_core::losses::evaluate;
use bandbatch_core::oracle::{for_each_partition, partition_count};
use bandbatch_core::synth::random_pair;
use bandbatch_core::{
    exhaustive_min_gap, exhaustive_qap, exhaustive_qbap, gcbs_pipeline, qap_objective,
    qbap_objective, random_batches, BatchAssignment, PipelineConfig, Temperature,
};

const EPS: f64 = 1e-12;

fn pipeline(pair: &bandbatch_core::EmbeddingPair, k: usize, q: f64) -> BatchAssignment {
    gcbs_pipeline(
        pair,
        &PipelineConfig {
            quantile: q,
            batch_size: k,
            chunk_rows: None,
            reverse: true,
        },
    )
    .unwrap()
    .batches
}

#[test]
fn two_cluster_optimum_is_the_clusters() {
    let (pair, _) = common::two_cluster_fixture();
    let r = exhaustive_qbap(&pair, 4).unwrap();
    assert_eq!(r.enumerated_count, 35);
    let clusters = vec![vec![0, 2, 4, 6], vec![1, 3, 5, 7]];
    assert_eq!(r.best_assignment.canonical_blocks(), clusters);
    let ours = pipeline(&pair, 4, 0.5);
    assert_eq!(ours.canonical_blocks(), clusters);
    assert_eq!(qbap_objective(&pair, &ours).unwrap(), r.best_value);

    let mixed =
        BatchAssignment::from_partition(8, 4, &[vec![0, 1, 2, 3], vec![4, 5, 6, 7]]).unwrap();
    assert!(qbap_objective(&pair, &ours).unwrap() > qbap_objective(&pair, &mixed).unwrap());
}

#[test]
fn constant_logits_tie_everywhere() {
    let rows = vec![vec![1.0, 0.0]; 6];
    let pair = common::pair_from(&rows, &rows);
    let r = exhaustive_min_gap(&pair, 2, Temperature::new(0.05).unwrap()).unwrap();
    assert!((r.best_value - 3f64.ln()).abs() < 1e-9);
    // ties resolve to the first canonical partition
    assert_eq!(
        r.best_assignment.canonical_blocks(),
        vec![vec![0, 1], vec![2, 3], vec![4, 5]]
    );
    assert_eq!(r.enumerated_count, 15);
}

#[test]
fn full_batch_cases() {
    let pair = random_pair(4, 3, 1).unwrap();
    let r = exhaustive_min_gap(&pair, 4, Temperature::new(0.5).unwrap()).unwrap();
    assert_eq!(r.enumerated_count, 1);
    assert!(r.best_value.abs() < EPS);

    let r = exhaustive_qap(&pair, 4).unwrap();
    let s = common::naive_scores(&pair);
    let off_diagonal: f64 = (0..4)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .map(|(i, j)| s[i][j] + s[j][i])
        .sum();
    assert!((r.best_value - off_diagonal).abs() < 1e-12);

    let r = exhaustive_qap(&pair, 1).unwrap();
    assert_eq!(r.best_value, 0.0);
}

#[test]
fn enumeration_counts_follow_multinomial() {
    for (n, k) in [(6, 2), (8, 4), (9, 3), (10, 5), (7, 2), (10, 2)] {
        let mut c = 0u64;
        for_each_partition(n, k, |_| c += 1);
        let m = n / k;
        let r = n % k;
        let fact = |x: usize| (1..=x as u64).product::<u64>();
        let formula = fact(n) / (fact(k).pow(m as u32) * fact(m) * fact(r));
        assert_eq!(c, formula);
        assert_eq!(partition_count(n, k), formula);
    }
}

#[test]
fn oracles_dominate_heuristics_at_six_samples() {
    let tau = Temperature::new(0.05).unwrap();
    let mut shortfall = Vec::new();
    let mut excess = Vec::new();
    for seed in 0..100 {
        let pair = random_pair(6, 4, seed).unwrap();
        let qbap = exhaustive_qbap(&pair, 2).unwrap();
        let qap = exhaustive_qap(&pair, 2).unwrap();
        let gap = exhaustive_min_gap(&pair, 2, tau).unwrap();
        assert_eq!(qbap.enumerated_count, 15);

        let ours = pipeline(&pair, 2, 0.8);
        let candidates = [ours.clone(), random_batches(6, 2, seed).unwrap()];
        for b in &candidates {
            assert!(qbap_objective(&pair, b).unwrap() <= qbap.best_value + EPS);
            assert!(qap_objective(&pair, b).unwrap() <= qap.best_value + EPS);
            assert!(evaluate(&pair, b, tau).unwrap().gap() >= gap.best_value - EPS);
        }
        shortfall.push(qbap.best_value - qbap_objective(&pair, &ours).unwrap());
        excess.push(evaluate(&pair, &ours, tau).unwrap().gap() - gap.best_value);
    }
    let mean_excess = excess.iter().sum::<f64>() / excess.len() as f64;
    println!("N=6 k=2: pipeline gap - optimal gap, mean over 100 = {mean_excess:.4}");
    let exact = shortfall.iter().filter(|d| **d <= EPS).count();
    println!("N=6 k=2: pipeline reaches the bottleneck optimum in {exact}/100 instances");
}

#[test]
fn bottleneck_optimum_tends_to_small_gaps() {
    let tau = Temperature::new(0.05).unwrap();
    let mut below_median = 0;
    for seed in 0..50 {
        let pair = random_pair(6, 4, 1000 + seed).unwrap();
        let best = exhaustive_qbap(&pair, 2).unwrap().best_assignment;
        let mut gaps = Vec::new();
        for_each_partition(6, 2, |blocks| {
            let b = BatchAssignment::from_partition(6, 2, blocks).unwrap();
            gaps.push(evaluate(&pair, &b, tau).unwrap().gap());
        });
        gaps.sort_by(f64::total_cmp);
        let median = gaps[gaps.len() / 2];
        if evaluate(&pair, &best, tau).unwrap().gap() <= median {
            below_median += 1;
        }
    }
    // reported, not asserted: the bound is not a law for the true gap
    println!("bottleneck-optimal partition at or below median gap in {below_median}/50 instances");
}
