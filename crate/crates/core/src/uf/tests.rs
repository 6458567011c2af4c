use super::*;
use crate::graph::{build_patch_graph, BlockKey, EdgeKind, Endpoint, Owner, VertexId};
use proptest::prelude::*;

fn vid(g: &DecodingGraph, round: u32, row: u32, col: u32) -> VertexIdx {
    g.index_of(&VertexId { owner: Owner::Patch(PatchId(0)), round, row, col }).unwrap()
}

fn edge_between(g: &DecodingGraph, a: VertexIdx, b: VertexIdx) -> EdgeIdx {
    *g.incident(a).iter().find(|e| g.edge(**e).other(a) == Endpoint::Vertex(b)).unwrap()
}

fn patch(d: u32, rounds: u32) -> Arc<DecodingGraph> {
    Arc::new(build_patch_graph(d, rounds).unwrap())
}

#[test]
fn no_defects_no_correction() {
    let g = patch(5, 5);
    let c = decode_global(&g, &BTreeSet::new()).unwrap();
    assert!(c.is_empty());
    assert!(c.logical_flip.values().all(|f| !f));
}

#[test]
fn adjacent_pair_takes_the_shared_edge() {
    let g = patch(5, 1);
    let (a, b) = (vid(&g, 0, 2, 1), vid(&g, 0, 2, 2));
    let c = decode_global(&g, &BTreeSet::from([a, b])).unwrap();
    assert_eq!(c.edges, BTreeSet::from([edge_between(&g, a, b)]));
    assert!(!c.flips(PatchId(0)));
}

#[test]
fn lone_defect_next_to_boundary_takes_boundary_edge() {
    let g = patch(5, 1);
    let v = vid(&g, 0, 2, 0);
    let c = decode_global(&g, &BTreeSet::from([v])).unwrap();
    assert_eq!(c.edges.len(), 1);
    let e = g.edge(*c.edges.iter().next().unwrap());
    assert!(e.is_boundary() && e.a == v);
    assert!(c.flips(PatchId(0)));
}

#[test]
fn measurement_error_pair_takes_time_edge() {
    let g = patch(5, 5);
    let (a, b) = (vid(&g, 1, 2, 1), vid(&g, 2, 2, 1));
    let c = decode_global(&g, &BTreeSet::from([a, b])).unwrap();
    let e = edge_between(&g, a, b);
    assert_eq!(g.edge(e).kind, EdgeKind::Time);
    assert_eq!(c.edges, BTreeSet::from([e]));
}

#[test]
fn isolated_defect_fills_its_six_edges_in_two_steps() {
    let g = patch(5, 5);
    let v = vid(&g, 2, 2, 1);
    let mut s = UfState::new(Arc::new(Region::whole(g.clone())), &BTreeSet::from([v])).unwrap();
    s.grow_step().unwrap();
    assert!(g.incident(v).iter().all(|e| s.growth_of(*e) == Some(1)));
    s.grow_step().unwrap();
    assert_eq!(g.incident(v).len(), 6);
    assert!(g.incident(v).iter().all(|e| s.growth_of(*e) == Some(2)));
}

#[test]
fn defects_two_apart_meet_after_two_half_steps_each() {
    let g = patch(7, 1);
    let (a, b) = (vid(&g, 0, 3, 1), vid(&g, 0, 3, 3));
    let mut s = UfState::new(Arc::new(Region::whole(g.clone())), &BTreeSet::from([a, b])).unwrap();
    s.grow_step().unwrap();
    assert!(!s.is_quiescent());
    s.grow_step().unwrap();
    assert!(s.is_quiescent());
    assert_eq!(s.grow_step(), Err(UfError::Quiescent));
    s.peel().unwrap();
    assert_eq!(s.correction().edges.len(), 2);
}

#[test]
fn boundary_contact_absorbs_odd_cluster() {
    let g = patch(5, 1);
    let mut s = UfState::new(Arc::new(Region::whole(g.clone())), &BTreeSet::from([vid(&g, 0, 0, 0)])).unwrap();
    s.grow_step().unwrap();
    s.grow_step().unwrap();
    assert!(s.is_quiescent());
}

#[test]
fn even_cluster_without_defects_contributes_nothing() {
    let g = patch(3, 3);
    let mut s = UfState::new(Arc::new(Region::whole(g.clone())), &BTreeSet::new()).unwrap();
    s.decode().unwrap();
    assert!(s.correction().is_empty());
    assert!(s.clusters().is_empty());
}

#[test]
fn suspended_cluster_is_not_peeled() {
    let g = patch(5, 10);
    let block = g.describe_block(BlockKey::new(PatchId(0), 0));
    let mut block = block;
    block.defects.insert(vid(&g, 4, 2, 1));
    let (mut state, c) = decode_block(&g, &block, &FacePolicy::Suspend).unwrap();
    assert!(c.is_empty());
    assert!(state.has_suspended());
    assert!(state.is_quiescent());
}

#[test]
fn defect_outside_region_is_rejected() {
    let g = patch(3, 6);
    let mut block = g.describe_block(BlockKey::new(PatchId(0), 0));
    let outside = vid(&g, 4, 0, 0);
    block.defects.insert(outside);
    assert_eq!(decode_block(&g, &block, &FacePolicy::Suspend).err(), Some(UfError::DefectOutsideRegion(outside)));
}

#[test]
fn correction_merge_is_symmetric_difference() {
    let g = patch(3, 1);
    let mut a = Correction::from_edges(&g, [EdgeIdx(0), EdgeIdx(1)]);
    let b = Correction::from_edges(&g, [EdgeIdx(1), EdgeIdx(2)]);
    a.merge(&b);
    assert_eq!(a.edges, BTreeSet::from([EdgeIdx(0), EdgeIdx(2)]));
    assert_eq!(a, Correction::from_edges(&g, [EdgeIdx(2), EdgeIdx(0)]));
}

fn defect_strategy(n: usize) -> impl Strategy<Value = BTreeSet<VertexIdx>> {
    proptest::collection::btree_set((0..n as u32).prop_map(VertexIdx), 0..12)
}

proptest! {
    #[test]
    fn global_correction_is_valid(defects in defect_strategy(5 * 4 * 4)) {
        let g = patch(5, 4);
        let c = decode_global(&g, &defects).unwrap();
        prop_assert_eq!(g.syndrome(c.edges.iter().copied()), defects);
    }

    #[test]
    fn growth_is_monotone_and_terminates(defects in defect_strategy(3 * 2 * 6)) {
        let g = patch(3, 6);
        let mut s = UfState::new(Arc::new(Region::whole(g.clone())), &defects).unwrap();
        let mut last = 0;
        let mut steps = 0;
        while !s.is_quiescent() {
            s.grow_step().unwrap();
            let total = s.total_growth();
            prop_assert!(total > last);
            last = total;
            steps += 1;
        }
        // diameter of the 3x2x6 lattice plus boundary
        prop_assert!(steps <= 2 * (3 + 2 + 6));
        s.peel().unwrap();
        prop_assert_eq!(g.syndrome(s.correction_edges()), defects);
    }

    #[test]
    fn decoding_is_deterministic(defects in defect_strategy(5 * 4 * 3)) {
        let g = patch(5, 3);
        prop_assert_eq!(decode_global(&g, &defects).unwrap(), decode_global(&g, &defects).unwrap());
    }
}
