use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use super::*;
use crate::graph::{DecodingGraph, EdgeIdx, Layout, PatchId};
use crate::noise::{sample_errors, NoiseParams};
use crate::window::{decode_windows, LeafMap};
use proptest::prelude::*;

/// All-pairs leaf distance by breadth-first search over the explicit tree.
fn bfs_max_leaf_hops(t: &Topology) -> u32 {
    let n = t.node_count() as usize;
    let mut adj = vec![Vec::new(); n];
    for v in 0..n as NodeId {
        if let Some(p) = t.parent(v) {
            adj[v as usize].push(p);
            adj[p as usize].push(v);
        }
    }
    let leaves: Vec<NodeId> = (0..t.leaf_count()).map(|l| t.leaf_node(l)).collect();
    let mut worst = 0;
    for &s in &leaves {
        let mut dist = vec![u32::MAX; n];
        dist[s as usize] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for &w in &adj[v as usize] {
                if dist[w as usize] == u32::MAX {
                    dist[w as usize] = dist[v as usize] + 1;
                    q.push_back(w);
                }
            }
        }
        worst = worst.max(leaves.iter().map(|l| dist[*l as usize]).max().unwrap());
    }
    worst
}

#[test]
fn worst_case_hops_at_fanout_25() {
    for (n, rows, hops) in [(4, 2, 2), (25, 5, 2), (625, 25, 4)] {
        let t = build_topology(n, 25, rows, n / rows).unwrap();
        assert_eq!(t.max_leaf_hops(), hops, "{n} leaves");
    }
    let t = build_topology(4, 25, 2, 2).unwrap();
    assert_eq!((t.node_count(), t.depth()), (5, 1));
}

#[test]
fn single_leaf_is_one_hop_from_root() {
    let t = build_topology(1, 25, 1, 1).unwrap();
    assert_eq!(t.max_leaf_hops(), 0);
    assert_eq!(t.route(header::LOGICAL_RESULT, t.leaf_node(0), t.root()).unwrap().len(), 1);
}

#[test]
fn bad_dimensions_are_rejected() {
    assert_eq!(build_topology(4, 1, 2, 2), Err(NetError::Fanout(1)));
    assert_eq!(build_topology(5, 4, 2, 2), Err(NetError::Dims { n_leaves: 5, rows: 2, cols: 2 }));
    let t = build_topology(4, 4, 2, 2).unwrap();
    assert_eq!(t.route(header::LOGICAL_RESULT, 0, 99), Err(NetError::UnknownNode(99)));
}

#[test]
fn routes_follow_grid_for_neighbors_and_tree_otherwise() {
    let t = build_topology(4, 25, 2, 2).unwrap();
    let (a, b, c) = (t.leaf_node(0), t.leaf_node(1), t.leaf_node(3));
    let grid = t.route(header::BOUNDARY_INFO, a, b).unwrap();
    assert_eq!(grid, vec![Hop { from: a, to: b, link: Link::Grid }]);
    assert_eq!(t.route(header::LOGICAL_RESULT, a, t.root()).unwrap().len(), 1);
    let far = t.route(header::BOUNDARY_INFO, a, c).unwrap();
    assert_eq!(far.len(), 2);
    assert!(far.iter().all(|h| h.link == Link::Tree));
    assert_eq!(far[0].to, t.root());
    // control traffic never takes grid links
    assert_eq!(t.route(header::INSTR_MERGE, a, b).unwrap().len(), 2);
}

proptest! {
    #[test]
    fn max_hops_match_search_and_grow_logarithmically(n in 1u32..80, fanout in 2u32..6) {
        let t = build_topology(n, fanout, 1, n).unwrap();
        prop_assert_eq!(t.max_leaf_hops(), bfs_max_leaf_hops(&t));
        let mut log = 0;
        while fanout.pow(log) < n {
            log += 1;
        }
        prop_assert!(t.max_leaf_hops() <= 2 * log.max(1));
        prop_assert_eq!(t.depth(), log.max(1));
    }

    #[test]
    fn standard_messages_round_trip(dest in 0u16..256, h: u8, payload in 0u64..=PAYLOAD_MASK) {
        let m = Message::new(dest, h, payload);
        let word = m.encode().unwrap();
        prop_assert_eq!(Message::decode(word), m);
        prop_assert_eq!(word >> 56, dest as u64);
        prop_assert_eq!((word >> 48) & 0xFF, h as u64);
    }

    #[test]
    fn extended_messages_round_trip(dest: u16, h: u8, payload in 0u64..1 << 40) {
        let m = Message::new(dest, h, payload);
        prop_assert_eq!(Message::decode_as(m.encode_as(WireFormat::Extended16).unwrap(), WireFormat::Extended16), m);
    }

    #[test]
    fn boundary_info_round_trips(face in 1usize..200, picks in proptest::collection::btree_set(0usize..200, 0..60)) {
        let index = FaceIndex::new((0..face as u32).map(|i| EdgeIdx(3 * i + 7)).collect());
        let crossings: BTreeSet<EdgeIdx> = picks.into_iter().filter(|i| *i < face).map(|i| EdgeIdx(3 * i as u32 + 7)).collect();
        let msgs = encode_boundary_info(&crossings, &index, 3).unwrap();
        prop_assert_eq!(msgs.len(), boundary_message_count(crossings.len()));
        for m in &msgs {
            prop_assert_eq!(Message::decode(m.encode().unwrap()), *m);
        }
        prop_assert_eq!(decode_boundary_info(&msgs, &index).unwrap(), crossings);
    }
}

#[test]
fn codec_limits() {
    assert_eq!(Message::new(256, 0, 0).encode(), Err(CodecError::DestOverflow(256)));
    assert_eq!(Message::new(0, 0, 1 << 48).encode(), Err(CodecError::PayloadOverflow(1 << 48)));
    let index = FaceIndex::new((0..25).map(EdgeIdx).collect());
    let empty = encode_boundary_info(&BTreeSet::new(), &index, 1).unwrap();
    assert_eq!(empty, vec![Message::new(1, header::BOUNDARY_INFO_LAST, 0)]);
    assert_eq!(encode_boundary_info(&BTreeSet::from([EdgeIdx(4)]), &index, 1).unwrap().len(), 1);
    let all: BTreeSet<EdgeIdx> = (0..25).map(EdgeIdx).collect();
    assert_eq!(encode_boundary_info(&all, &index, 1).unwrap().len(), 9);
    assert_eq!(
        encode_boundary_info(&BTreeSet::from([EdgeIdx(99)]), &index, 1),
        Err(CodecError::UnknownEdge(EdgeIdx(99)))
    );
    let huge = FaceIndex::new((0..70_000).map(EdgeIdx).collect());
    assert_eq!(
        encode_boundary_info(&BTreeSet::from([EdgeIdx(69_999)]), &huge, 1),
        Err(CodecError::IndexOverflow(69_999))
    );
}

struct Run {
    d: u32,
    epochs: u32,
    map: LeafMap,
    topology: Topology,
    program: Program,
    records: Vec<crate::window::JobRecord>,
}

impl Run {
    fn new(d: u32, rows: u32, cols: u32, program: Program, p: f64, seed: u64) -> Self {
        let mut layout = Layout::grid(d, rows, cols).unwrap();
        let schedule = program.schedule(&layout, |_| true).unwrap();
        layout.set_schedule(schedule).unwrap();
        layout.pad_epochs(program.epochs);
        let g = Arc::new(DecodingGraph::from_layout(&layout).unwrap());
        let map = LeafMap::per_patch(&layout);
        let sample = sample_errors(&g, &NoiseParams::new(p, seed).unwrap());
        let records = decode_windows(&g, &map, &sample).unwrap().records;
        let topology = build_topology(rows * cols, 25, rows, cols).unwrap();
        Run { d, epochs: program.epochs, map, topology, program, records }
    }

    fn sim(&self, latency: &LatencyModel) -> Result<SimOutcome, NetError> {
        simulate(&SimSetup {
            d: self.d,
            epochs: self.epochs,
            map: &self.map,
            topology: &self.topology,
            program: &self.program,
            records: &self.records,
            latency,
            stall_timeout_ns: None,
            trace: true,
        })
    }
}

fn idle(epochs: u32) -> Program {
    Program { epochs, instructions: vec![Instruction::Halt] }
}

#[test]
fn zero_cost_latency_is_group_times_d_rounds() {
    let run = Run::new(3, 1, 3, idle(6), 0.02, 1);
    let lat = LatencyModel::zero_cost();
    let out = run.sim(&lat).unwrap();
    for g in 1..=3u8 {
        assert_eq!(out.first_commit_latency(g), Some(g as u64 * 3 * lat.t_round_ns));
    }
    for c in out.commits.iter().filter(|c| c.steady) {
        assert_eq!(c.latency_ns, c.group as u64 * 3 * lat.t_round_ns);
    }
    assert_eq!(out.rows.len(), 3 * 6);
}

#[test]
fn costs_only_add_latency() {
    for (rows, cols, seed) in [(1, 3, 2), (2, 2, 3), (3, 3, 4)] {
        let run = Run::new(3, rows, cols, idle(5), 0.02, seed);
        let out = run.sim(&LatencyModel::default()).unwrap();
        assert!(out.first_commit_latency(3).unwrap_or(u64::MAX) >= 3 * 3 * 1000);
        assert!(out.max_depth() <= 4);
    }
}

#[test]
fn slow_decoding_builds_a_growing_backlog() {
    let run = Run::new(3, 1, 1, idle(12), 0.05, 5);
    let lat = LatencyModel { cost_scale: 200, ..LatencyModel::default() };
    let out = run.sim(&lat).unwrap();
    let depths = &out.depths[0];
    assert!(depths.windows(2).all(|w| w[0] <= w[1]), "{depths:?}");
    assert!(*depths.last().unwrap() > 4);
}

#[test]
fn simulation_is_deterministic() {
    let run = Run::new(3, 2, 2, idle(4), 0.03, 6);
    assert_eq!(run.sim(&LatencyModel::default()).unwrap(), run.sim(&LatencyModel::default()).unwrap());
}

#[test]
fn conditional_merge_round_trip_costs_two_links_and_root_time() {
    let program = Program {
        epochs: 4,
        instructions: vec![
            Instruction::CondMerge { a: PatchId(0), b: PatchId(1), epoch: 3, on: PatchId(0), measured: 0 },
            Instruction::Halt,
        ],
    };
    let run = Run::new(3, 1, 2, program, 0.0, 7);
    let lat = LatencyModel::default();
    let out = run.sim(&lat).unwrap();
    let commit = out.commits.iter().find(|c| c.leaf == 0 && c.epoch == 0).unwrap().time_ns;
    let result = out.trace.iter().find(|e| e.kind == EventKind::LogicalResult).unwrap().time;
    let instr = out
        .trace
        .iter()
        .find(|e| e.detail == Detail::Instruction { epoch: 3 } && e.node == run.topology.leaf_node(1))
        .unwrap()
        .time;
    let hop = lat.t_link_ns + lat.t_serialize_ns;
    assert_eq!(result - commit, hop);
    assert_eq!(instr - commit, 2 * hop + lat.root_ns());
}

#[test]
fn merge_depending_on_an_uncommitted_outcome_stalls() {
    let program = Program {
        epochs: 3,
        instructions: vec![Instruction::CondMerge {
            a: PatchId(0),
            b: PatchId(1),
            epoch: 1,
            on: PatchId(0),
            measured: 0,
        }],
    };
    let run = Run::new(3, 1, 2, program, 0.0, 8);
    match run.sim(&LatencyModel::default()) {
        Err(NetError::Stall { waiting, .. }) => {
            assert!(waiting.iter().any(|w| w.leaf == 0 && w.job == 1 && w.instructions == 1));
        }
        other => panic!("expected a stall, got {other:?}"),
    }
}

#[test]
fn feedback_arrives_before_the_next_epoch_ends() {
    let program = Program {
        epochs: 1,
        instructions: vec![
            Instruction::Measure { patch: PatchId(0), epoch: 0, forward_to: Some(1) },
            Instruction::Halt,
        ],
    };
    let run = Run::new(5, 1, 2, program, 0.001, 9);
    let out = run.sim(&LatencyModel::default()).unwrap();
    assert_eq!(out.feedback.len(), 1);
    let f = out.feedback[0];
    assert!(f.arrive_ns < f.deadline_ns);
}

#[test]
fn link_latency_moves_latency_not_throughput() {
    let run = Run::new(3, 1, 3, idle(8), 0.03, 10);
    let slow = LatencyModel { t_link_ns: 190, ..LatencyModel::default() };
    let (a, b) = (run.sim(&LatencyModel::default()).unwrap(), run.sim(&slow).unwrap());
    assert_eq!(a.inv_throughputs(3), b.inv_throughputs(3));
    let mean = |o: &SimOutcome| o.rows.iter().map(|r| r.latency_ns).sum::<u64>();
    assert!(mean(&b) > mean(&a));
}

#[test]
fn affine_cost_model() {
    use crate::fusion::EpochReport;
    use crate::graph::BlockKey;
    let report = EpochReport {
        decode_steps: vec![(BlockKey::new(PatchId(0), 0), 3), (BlockKey::new(PatchId(1), 0), 5)],
        fuse_steps: 2,
        defects: 4,
        ..Default::default()
    };
    let lat = LatencyModel::default();
    let c = lat.job_cost(&report, false);
    assert_eq!(c.coordinator_ns, (2 * 2 + 4) * 10);
    assert_eq!(c.decode_ns, (10 + 4 * 5) * 10);
    assert_eq!(c.fuse_ns, (4 + 4 * 2) * 10);
    let one = LatencyModel { units_per_leaf: Some(1), ..lat.clone() };
    assert_eq!(one.job_cost(&report, false).decode_ns, (10 + 4 * 3 + 10 + 4 * 5) * 10);
    assert_eq!(LatencyModel::zero_cost().job_cost(&report, false).total(), 0);
    assert!(LatencyModel { t_round_ns: 0, ..lat }.validate().is_err());
}
