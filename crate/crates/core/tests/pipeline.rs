use std::sync::Arc;

use netdecode::fusion::decode_streaming;
use netdecode::graph::{DecodingGraph, Layout, PatchId};
use netdecode::harness::logical_failure;
use netdecode::noise::{sample_errors, NoiseParams};
use netdecode::uf::decode_global;
use netdecode::window::{decode_windows, LeafMap};
use proptest::prelude::*;

fn merged_row(d: u32, cols: u32, merges: &[(u32, u32)], epochs: u32) -> Arc<DecodingGraph> {
    let mut layout = Layout::grid(d, 1, cols).unwrap();
    for &(a, e) in merges {
        let s = layout.seam_between(PatchId(a), PatchId(a + 1)).unwrap();
        layout.activate(e, s).unwrap();
    }
    layout.pad_epochs(epochs);
    Arc::new(DecodingGraph::from_layout(&layout).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_decoder_returns_a_valid_correction(seed: u64, merge_epoch in 0u32..3, p in 0.001f64..0.05) {
        let mut layout = Layout::grid(3, 1, 3).unwrap();
        let s = layout.seam_between(PatchId(0), PatchId(1)).unwrap();
        layout.activate(merge_epoch, s).unwrap();
        layout.pad_epochs(3);
        let g = Arc::new(DecodingGraph::from_layout(&layout).unwrap());
        let sample = sample_errors(&g, &NoiseParams::new(p, seed).unwrap().for_trial(0));
        let map = LeafMap::per_patch(&layout);
        for c in [
            decode_global(&g, &sample.defects).unwrap(),
            decode_streaming(&g, &sample.defects).unwrap(),
            decode_windows(&g, &map, &sample).unwrap().correction,
        ] {
            prop_assert_eq!(g.syndrome(c.edges.iter().copied()), sample.defects.clone());
            prop_assert!(logical_failure(&g, &sample, &c).is_ok());
        }
    }
}

#[test]
fn streaming_matches_global_accuracy_on_merged_row() {
    let g = merged_row(3, 2, &[(0, 0), (0, 1)], 3);
    let params = NoiseParams::new(0.02, 11).unwrap();
    let (mut streaming, mut global) = (0, 0);
    for t in 0..2000 {
        let s = sample_errors(&g, &params.for_trial(t));
        streaming += logical_failure(&g, &s, &decode_streaming(&g, &s.defects).unwrap()).unwrap() as u32;
        global += logical_failure(&g, &s, &decode_global(&g, &s.defects).unwrap()).unwrap() as u32;
    }
    // same decoder up to tie breaks, counts within a few percent
    assert!(streaming.abs_diff(global) * 10 <= global.max(10), "streaming {streaming} global {global}");
}

#[test]
fn single_leaf_windows_equal_streaming() {
    let mut layout = Layout::grid(3, 1, 2).unwrap();
    let s = layout.seam_between(PatchId(0), PatchId(1)).unwrap();
    layout.activate(1, s).unwrap();
    layout.pad_epochs(3);
    let g = Arc::new(DecodingGraph::from_layout(&layout).unwrap());
    let map = LeafMap::tiled(&layout, 1, 1).unwrap();
    let params = NoiseParams::new(0.03, 5).unwrap();
    for t in 0..200 {
        let s = sample_errors(&g, &params.for_trial(t));
        let w = decode_windows(&g, &map, &s).unwrap().correction;
        assert_eq!(w, decode_streaming(&g, &s.defects).unwrap());
    }
}
