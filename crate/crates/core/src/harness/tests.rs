use std::collections::BTreeSet;
use std::sync::Arc;

use super::*;
use crate::graph::{build_patch_graph, EdgeIdx, VertexIdx};
use crate::uf::decode_global;
use proptest::prelude::*;

#[test]
fn wilson_matches_closed_forms() {
    // zero successes: upper bound z^2 / (n + z^2)
    let (lo, hi) = wilson(0, 10, Z95);
    assert_eq!(lo, 0.0);
    assert!((hi - Z95 * Z95 / (10.0 + Z95 * Z95)).abs() < 1e-12);
    let (lo, hi) = wilson(3, 10, Z95);
    let (lo2, hi2) = wilson(7, 10, Z95);
    assert!((lo - (1.0 - hi2)).abs() < 1e-12 && (hi - (1.0 - lo2)).abs() < 1e-12);
    assert!(lo < 0.3 && 0.3 < hi);
}

#[test]
fn percentile_and_summary_order() {
    let mut v = vec![5, 1, 9, 3, 7, 2, 8, 4, 6, 10];
    let s = LatencySummary::new(&mut v);
    assert_eq!((s.min_ns, s.p95_ns, s.max_ns), (1, 10, 10));
    assert!(s.min_ns as f64 <= s.mean_ns && s.mean_ns <= s.p95_ns as f64);
    assert_eq!(percentile(&[1, 2, 3, 4], 0.5), 2);
    assert_eq!(mean_sd(&[2.0, 4.0]), (3.0, 2f64.sqrt()));
}

/// Minimum weight over every edge subset with the given syndrome.
fn brute_force_min(g: &crate::graph::DecodingGraph, defects: &BTreeSet<VertexIdx>) -> u32 {
    let m = g.edge_count();
    assert!(m <= 16);
    (0u32..1 << m)
        .filter_map(|mask| {
            let edges: Vec<EdgeIdx> = (0..m as u32).filter(|i| mask >> i & 1 == 1).map(EdgeIdx).collect();
            (g.syndrome(edges.iter().copied()) == *defects).then(|| edges.iter().map(|e| g.edge(*e).weight).sum())
        })
        .min()
        .unwrap()
}

#[test]
fn oracle_small_cases() {
    let g = build_patch_graph(3, 1).unwrap();
    assert_eq!(oracle_mwpm(&g, &BTreeSet::new()).unwrap(), 0);
    assert_eq!(oracle_mwpm(&g, &BTreeSet::from([VertexIdx(0), VertexIdx(1)])).unwrap(), 1);
    let big = build_patch_graph(5, 3).unwrap();
    let many: BTreeSet<_> = (0..13).map(VertexIdx).collect();
    assert!(matches!(oracle_mwpm(&big, &many), Err(HarnessError::OracleTooLarge { defects: 13, .. })));
}

proptest! {
    #[test]
    fn oracle_matches_edge_subset_search(mask in 0u32..64) {
        let g = build_patch_graph(3, 1).unwrap();
        let defects: BTreeSet<_> = (0..6).filter(|i| mask >> i & 1 == 1).map(VertexIdx).collect();
        prop_assert_eq!(oracle_mwpm(&g, &defects).unwrap(), brute_force_min(&g, &defects));
    }

    #[test]
    fn union_find_is_never_below_the_optimum(defects in proptest::collection::btree_set((0u32..18).prop_map(VertexIdx), 0..8)) {
        let g = Arc::new(build_patch_graph(3, 3).unwrap());
        let c = decode_global(&g, &defects).unwrap();
        prop_assert_eq!(g.syndrome(c.edges.iter().copied()), defects.clone());
        prop_assert!(c.weight(&g) >= oracle_mwpm(&g, &defects).unwrap());
    }

    #[test]
    fn fused_pair_corrections_are_valid(seed: u64) {
        let pair = MergedPair::new(3).unwrap();
        let params = crate::noise::NoiseParams::new(0.05, seed).unwrap();
        let sample = crate::noise::sample_errors(&pair.graph, &params);
        let c = pair.decode_fused(&sample).unwrap();
        prop_assert!(logical_failure(&pair.graph, &sample, &c).is_ok());
    }
}

#[test]
fn noiseless_accuracy_is_exact() {
    let rows = cmd_accuracy(&[3], &[0.0], 50, 1).unwrap();
    assert_eq!((rows[0].fusion_errors, rows[0].global_errors), (0, 0));
    assert!(rows[0].consistent());
    assert!(matches!(cmd_accuracy(&[3], &[0.0], 0, 1), Err(HarnessError::NoTrials)));
}

#[test]
fn fusion_and_global_agree_at_high_noise() {
    let rows = cmd_accuracy(&[3], &[0.05], 4000, 2).unwrap();
    assert!(rows[0].global_errors > 0);
    assert!(rows[0].consistent(), "{:?}", rows[0]);
}

#[test]
fn catalog_counts() {
    let expected = [
        ("feedback", 1, 1),
        ("merge_split", 2, 3),
        ("move", 3, 3),
        ("cnot", 3, 3),
        ("cnot_plane", 6, 3),
        ("multi_cnot", 5, 3),
        ("state_expansion", 4, 2),
        ("distillation_15_1", 24, 5),
    ];
    let cat = catalog();
    assert_eq!(cat.len(), expected.len());
    for (b, (name, q, e)) in cat.iter().zip(expected) {
        assert_eq!((b.name, b.qubits(), b.epochs()), (name, q, e));
        let sc = b.scenario(3).unwrap();
        assert_eq!(sc.layout.epochs(), e);
    }
    let cnot = microbenchmark("cnot").unwrap().scenario(5).unwrap();
    let seams: usize = cnot.layout.schedule().iter().map(|s| s.len()).sum();
    assert_eq!(seams, 2);
    assert!(matches!(microbenchmark("teleport"), Err(HarnessError::UnknownBenchmark(_))));
}

#[test]
fn noiseless_merge_split_is_error_free() {
    let r = cmd_microbench("merge_split", 3, 0.0, 5, 1, &SimConfig::default()).unwrap();
    assert_eq!(r.report.logical_errors, 0);
    assert_eq!(r.report.completed_epochs, 3);
    assert_eq!(r.rows.len(), 2 * 3);
    assert!(!r.report.backlog);
}

#[test]
fn feedback_reaches_second_leaf_in_time() {
    let r = cmd_microbench("feedback", 5, 0.001, 20, 3, &SimConfig::default()).unwrap();
    assert_eq!(r.report.feedback_messages, 20);
    assert_eq!(r.report.feedback_late, 0);
}

#[test]
fn single_qubit_pipeline_keeps_up() {
    let cfg = SimConfig::default();
    let r = cmd_scalability(3, 1, 8, 0.0, 0.001, 4, 1, &cfg).unwrap();
    assert!(r.report.inv_throughput_mean_ns < cfg.latency.t_round_ns as f64);
    assert!(r.report.steady_latency.min_ns >= 3 * cfg.latency.t_round_ns);
    assert!(r.report.latency.min_ns > 0);
    assert!(!r.report.backlog);
}

#[test]
fn more_qubits_per_leaf_cost_more_per_round() {
    let cfg = SimConfig::default();
    let inv: Vec<f64> = [4, 16, 64]
        .iter()
        .map(|&n| cmd_scalability(3, n, 6, 0.5, 0.001, 2, 4, &cfg).unwrap().report.inv_throughput_mean_ns)
        .collect();
    assert!(inv.windows(2).all(|w| w[0] <= w[1]), "{inv:?}");
}

#[test]
fn inflated_decode_cost_sets_backlog() {
    let cfg =
        SimConfig { latency: crate::net::LatencyModel { cost_scale: 20, ..Default::default() }, ..Default::default() };
    let r = cmd_scalability(3, 4, 12, 0.5, 0.01, 1, 5, &cfg).unwrap();
    assert!(r.report.backlog);
    assert!(r.report.max_backlog_depth > MAX_HEALTHY_DEPTH);
}

#[test]
fn scenario_runs_are_deterministic() {
    let cfg = SimConfig::default();
    let a = cmd_scalability(3, 4, 5, 0.5, 0.01, 3, 9, &cfg).unwrap();
    let b = cmd_scalability(3, 4, 5, 0.5, 0.01, 3, 9, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(csv_string(&a.rows).unwrap(), csv_string(&b.rows).unwrap());
    assert!(csv_string(&a.rows).unwrap().starts_with("epoch,patch,latency_ns,inv_throughput_ns,backlog_depth\n"));
}

#[test]
fn netcheck_laws() {
    let rows = topology_sweep(&[4, 25, 625], 25).unwrap();
    let hops: Vec<u32> = rows.iter().map(|r| r.max_leaf_hops).collect();
    assert_eq!(hops, vec![2, 2, 4]);
    let (words, bad) = codec_sweep(1, 3).unwrap();
    assert_eq!((words, bad), (65536 * 3, 0));
}

#[test]
fn config_defaults_fill_missing_fields() {
    let cfg: SimConfig = serde_json::from_str(r#"{"fanout": 4, "latency": {"t_link_ns": 190}}"#).unwrap();
    assert_eq!(cfg.fanout, 4);
    assert_eq!(cfg.latency.t_link_ns, 190);
    assert_eq!(cfg.latency.t_round_ns, 1000);
    assert_eq!(cfg.leaf_rows, 2);
}
