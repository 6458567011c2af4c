use super::*;
use crate::fusion::decode_streaming;
use crate::graph::{Owner, SeamId, VertexId};
use crate::noise::{random_merge_schedule, sample_errors, NoiseParams};
use proptest::prelude::*;

#[test]
fn row_of_three_leaves_gets_three_groups() {
    let layout = Layout::grid(3, 1, 3).unwrap();
    assert_eq!(assign_groups(&LeafMap::per_patch(&layout)), vec![1, 2, 3]);
}

#[test]
fn colorings_are_proper() {
    for (rows, cols) in [(2, 2), (1, 1), (3, 4), (5, 5), (1, 7)] {
        let layout = Layout::grid(3, rows, cols).unwrap();
        let map = LeafMap::per_patch(&layout);
        let groups = assign_groups(&map);
        for a in 0..map.leaf_count() {
            assert!((1..=3).contains(&groups[a as usize]));
            for b in map.neighbors(a) {
                assert_ne!(groups[a as usize], groups[b as usize], "{rows}x{cols} leaves {a},{b}");
            }
        }
    }
}

#[test]
fn tiles_split_patch_grid_evenly() {
    let layout = Layout::grid(5, 10, 10).unwrap();
    let map = LeafMap::tiled(&layout, 2, 2).unwrap();
    for leaf in 0..4 {
        assert_eq!(map.patches_on(leaf).len(), 25);
    }
    assert_eq!(map.leaf_of[&PatchId(99)], 3);
    assert!(LeafMap::tiled(&layout, 0, 2).is_err());
}

#[test]
fn single_leaf_is_plain_fusion() {
    let mut layout = Layout::grid(3, 2, 2).unwrap();
    let schedule = random_merge_schedule(&layout, 3, 0.5, 21).unwrap();
    layout.set_schedule(schedule).unwrap();
    let g = Arc::new(DecodingGraph::from_layout(&layout).unwrap());
    let map = LeafMap::tiled(&layout, 1, 1).unwrap();
    for t in 0..10 {
        let sample = sample_errors(&g, &NoiseParams::new(0.04, 5).unwrap().for_trial(t));
        let out = decode_windows(&g, &map, &sample).unwrap();
        assert_eq!(out.correction, decode_streaming(&g, &sample.defects).unwrap());
    }
}

fn straddling_pair() -> (Arc<DecodingGraph>, LeafMap, VertexIdx, VertexIdx) {
    let mut layout = Layout::grid(5, 1, 2).unwrap();
    let seam: SeamId = layout.seam_between(PatchId(0), PatchId(1)).unwrap();
    layout.activate(0, seam).unwrap();
    let g = Arc::new(DecodingGraph::from_layout(&layout).unwrap());
    let s = g.index_of(&VertexId { owner: Owner::Seam(seam), round: 2, row: 2, col: 4 }).unwrap();
    let b = g.index_of(&VertexId { owner: Owner::Patch(PatchId(1)), round: 2, row: 2, col: 0 }).unwrap();
    (g, LeafMap::per_patch(&layout), s, b)
}

#[test]
fn upstream_commits_the_crossing_and_downstream_absorbs_it() {
    let (g, map, s, b) = straddling_pair();
    let defects = BTreeSet::from([s, b]);
    let out = Pipeline::new(g.clone(), map, &defects).unwrap().run().unwrap();
    let crossing = *g.incident(b).iter().find(|e| g.edge(**e).other(b) == Endpoint::Vertex(s)).unwrap();
    assert_eq!(out.correction.edges, BTreeSet::from([crossing]));
    let sent: Vec<&BoundaryInfo> =
        out.records.iter().flat_map(|r| &r.sent).filter(|i| !i.committed_crossings.is_empty()).collect();
    assert_eq!(sent.len(), 1);
    assert_eq!((sent[0].from, sent[0].to), (0, 1));
    let downstream: Vec<&JobRecord> = out.records.iter().filter(|r| r.leaf == 1).collect();
    assert_eq!(downstream.iter().map(|r| r.flips).sum::<usize>(), 1);
    assert!(downstream.iter().all(|r| r.sent.is_empty()));
}

#[test]
fn downstream_waits_for_upstream() {
    let (g, map, s, b) = straddling_pair();
    let mut pipe = Pipeline::new(g, map, &BTreeSet::from([s, b])).unwrap();
    assert_eq!(pipe.run_job(1).err(), Some(PipelineError::MissingBoundary { leaf: 1, epoch: 0, from: 0 }));
    pipe.run_job(0).unwrap();
    // epoch 0 is committed by leaf 0's second (drain) job
    assert!(pipe.run_job(1).is_err());
    pipe.run_job(0).unwrap();
    pipe.run_job(1).unwrap();
}

#[test]
fn groups_lag_by_one_job_per_group() {
    let mut layout = Layout::grid(3, 1, 3).unwrap();
    layout.pad_epochs(4);
    let g = Arc::new(DecodingGraph::from_layout(&layout).unwrap());
    let mut pipe = Pipeline::new(g, LeafMap::per_patch(&layout), &BTreeSet::new()).unwrap();
    for step in 0..7 {
        for r in pipe.run_epoch(step).unwrap() {
            assert_eq!(r.job + (r.group as u32 - 1), step);
        }
    }
    assert!(pipe.next_job.iter().all(|j| *j == 5));
}

#[test]
fn flips_equal_received_crossings() {
    let mut layout = Layout::grid(3, 3, 3).unwrap();
    layout.set_schedule(random_merge_schedule(&layout, 3, 0.7, 2).unwrap()).unwrap();
    let g = Arc::new(DecodingGraph::from_layout(&layout).unwrap());
    let map = LeafMap::per_patch(&layout);
    for t in 0..10 {
        let sample = sample_errors(&g, &NoiseParams::new(0.05, 9).unwrap().for_trial(t));
        let out = decode_windows(&g, &map, &sample).unwrap();
        for leaf in 0..map.leaf_count() {
            let received: usize = out
                .records
                .iter()
                .flat_map(|r| &r.sent)
                .filter(|i| i.to == leaf)
                .map(|i| i.committed_crossings.len())
                .sum();
            let flips: usize = out.records.iter().filter(|r| r.leaf == leaf).map(|r| r.flips).sum();
            assert_eq!(received, flips);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn window_corrections_are_valid(seed in any::<u64>(), p in 0.0f64..0.06) {
        let mut layout = Layout::grid(3, 4, 4).unwrap();
        layout.set_schedule(random_merge_schedule(&layout, 3, 0.5, seed).unwrap()).unwrap();
        let g = Arc::new(DecodingGraph::from_layout(&layout).unwrap());
        let map = LeafMap::tiled(&layout, 2, 2).unwrap();
        let sample = sample_errors(&g, &NoiseParams::new(p, seed).unwrap());
        let out = decode_windows(&g, &map, &sample).unwrap();
        prop_assert_eq!(g.syndrome(out.correction.edges.iter().copied()), sample.defects);
    }
}
