use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::Serialize;

use super::codec::{boundary_message_count, header};
use super::latency::LatencyModel;
use super::program::{Instruction, Program};
use super::topology::{NodeId, Topology};
use super::NetError;
use crate::graph::PatchId;
use crate::window::{assign_groups, JobRecord, LeafId, LeafMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum EventKind {
    RoundAvailable,
    MsgArrive,
    DecodeDone,
    FuseDone,
    Commit,
    LogicalResult,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Detail {
    /// Last round of an epoch reached the leaf.
    Epoch(u32),
    /// A leaf job changed phase.
    Job(u32),
    Boundary {
        from: LeafId,
        epoch: u32,
    },
    Instruction {
        epoch: u32,
    },
    /// Logical outcome forwarded to another leaf.
    Forward {
        patch: PatchId,
        epoch: u32,
    },
    /// Logical outcome reaching the root.
    Result {
        patch: PatchId,
        epoch: u32,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SimEvent {
    pub time: u64,
    pub node: NodeId,
    pub kind: EventKind,
    pub detail: Detail,
}

/// Everything a simulation run needs. `records` are the jobs the window
/// pipeline actually ran on the sampled syndrome; the simulator replays them
/// in simulated time.
pub struct SimSetup<'a> {
    pub d: u32,
    pub epochs: u32,
    pub map: &'a LeafMap,
    pub topology: &'a Topology,
    pub program: &'a Program,
    pub records: &'a [JobRecord],
    pub latency: &'a LatencyModel,
    /// Simulated time after which an unfinished run counts as stalled.
    pub stall_timeout_ns: Option<u64>,
    pub trace: bool,
}

/// One output row per committed (epoch, patch).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MetricRow {
    pub epoch: u32,
    pub patch: u32,
    pub latency_ns: u64,
    pub inv_throughput_ns: u64,
    pub backlog_depth: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct JobTiming {
    pub leaf: LeafId,
    pub job: u32,
    pub drain: bool,
    pub start_ns: u64,
    pub end_ns: u64,
    pub busy_ns: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CommitTiming {
    pub leaf: LeafId,
    pub group: u8,
    pub epoch: u32,
    pub time_ns: u64,
    pub latency_ns: u64,
    /// The commit did not benefit from the faster drain at the end of the run.
    pub steady: bool,
}

/// A forwarded logical outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Feedback {
    pub patch: PatchId,
    pub epoch: u32,
    pub to: LeafId,
    pub sent_ns: u64,
    pub arrive_ns: u64,
    /// End of the epoch after the measured one.
    pub deadline_ns: u64,
}

/// A leaf that could not finish, and what it was waiting for.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Waiting {
    pub leaf: LeafId,
    pub job: u32,
    pub data: bool,
    pub boundary_from: Vec<LeafId>,
    pub instructions: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SimOutcome {
    pub rows: Vec<MetricRow>,
    pub jobs: Vec<JobTiming>,
    pub commits: Vec<CommitTiming>,
    pub feedback: Vec<Feedback>,
    /// Backlog depth per leaf, indexed by epoch.
    pub depths: Vec<Vec<u32>>,
    pub trace: Vec<SimEvent>,
    pub end_ns: u64,
}

impl SimOutcome {
    /// Latency of the earliest commit made by a leaf of `group`.
    pub fn first_commit_latency(&self, group: u8) -> Option<u64> {
        self.commits.iter().filter(|c| c.group == group).min_by_key(|c| (c.time_ns, c.epoch)).map(|c| c.latency_ns)
    }

    /// Busy time per round of every non-drain job.
    pub fn inv_throughputs(&self, d: u32) -> Vec<f64> {
        self.jobs.iter().filter(|j| !j.drain).map(|j| j.busy_ns as f64 / d as f64).collect()
    }

    pub fn max_depth(&self) -> u32 {
        self.depths.iter().flatten().copied().max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    time: u64,
    node: NodeId,
    kind: EventKind,
    seq: u64,
}

struct Queue {
    heap: BinaryHeap<Reverse<Key>>,
    details: BTreeMap<u64, Detail>,
    seq: u64,
}

impl Queue {
    fn push(&mut self, time: u64, node: NodeId, kind: EventKind, detail: Detail) {
        self.seq += 1;
        self.details.insert(self.seq, detail);
        self.heap.push(Reverse(Key { time, node, kind, seq: self.seq }));
    }

    fn pop(&mut self) -> Option<SimEvent> {
        let Reverse(k) = self.heap.pop()?;
        let detail = self.details.remove(&k.seq).expect("queued detail");
        Some(SimEvent { time: k.time, node: k.node, kind: k.kind, detail })
    }
}

struct Leaf {
    node: NodeId,
    group: u8,
    patches: Vec<PatchId>,
    upstream: Vec<LeafId>,
    data: u32,
    next_job: u32,
    started: u32,
    busy: bool,
    boundary: BTreeMap<u32, BTreeSet<LeafId>>,
    instr: BTreeMap<u32, usize>,
    busy_ns: Vec<u64>,
    committed_ns: BTreeMap<u32, u64>,
}

struct Sim<'a> {
    s: &'a SimSetup<'a>,
    leaves: Vec<Leaf>,
    records: BTreeMap<(LeafId, u32), &'a JobRecord>,
    expected: BTreeMap<(LeafId, u32), usize>,
    /// (patch, epoch) outcomes the root needs.
    reported: BTreeSet<(PatchId, u32)>,
    queue: Queue,
    root_free: u64,
    out: SimOutcome,
}

/// Replays the window pipeline on the network in simulated time.
pub fn simulate(setup: &SimSetup) -> Result<SimOutcome, NetError> {
    setup.latency.validate()?;
    let map = setup.map;
    let topo = setup.topology;
    if topo.leaf_count() != map.leaf_count() {
        return Err(NetError::Dims { n_leaves: map.leaf_count(), rows: topo.grid().0, cols: topo.grid().1 });
    }
    let groups = assign_groups(map);
    let leaves = (0..map.leaf_count())
        .map(|l| Leaf {
            node: topo.leaf_node(l),
            group: groups[l as usize],
            patches: map.patches_on(l),
            upstream: map.neighbors(l).into_iter().filter(|n| groups[*n as usize] < groups[l as usize]).collect(),
            data: 0,
            next_job: 0,
            started: 0,
            busy: false,
            boundary: BTreeMap::new(),
            instr: BTreeMap::new(),
            busy_ns: vec![0; setup.epochs as usize + 1],
            committed_ns: BTreeMap::new(),
        })
        .collect();
    let records = setup.records.iter().map(|r| ((r.leaf, r.job), r)).collect();
    let mut reported = BTreeSet::new();
    for (_, instr) in setup.program.active() {
        match *instr {
            Instruction::Measure { patch, epoch, .. } => {
                reported.insert((patch, epoch));
            }
            Instruction::CondMerge { on, measured, .. } => {
                reported.insert((on, measured));
            }
            _ => {}
        }
    }
    let mut sim = Sim {
        s: setup,
        leaves,
        records,
        expected: setup.program.expected_deliveries(map),
        reported,
        queue: Queue { heap: BinaryHeap::new(), details: BTreeMap::new(), seq: 0 },
        root_free: 0,
        out: SimOutcome {
            depths: vec![vec![0; setup.epochs as usize]; map.leaf_count() as usize],
            ..Default::default()
        },
    };
    sim.run()?;
    Ok(sim.out)
}

impl<'a> Sim<'a> {
    fn epoch_end(&self, k: u32) -> u64 {
        (k as u64 + 1) * self.s.d as u64 * self.s.latency.t_round_ns
    }

    fn run(&mut self) -> Result<(), NetError> {
        for l in 0..self.leaves.len() {
            for k in 0..self.s.epochs {
                let node = self.leaves[l].node;
                self.queue.push(self.epoch_end(k), node, EventKind::RoundAvailable, Detail::Epoch(k));
            }
        }
        self.dispatch_static()?;
        for l in 0..self.leaves.len() as LeafId {
            self.try_start(l, 0)?;
        }
        while let Some(ev) = self.queue.pop() {
            if self.s.stall_timeout_ns.is_some_and(|limit| ev.time > limit) {
                return Err(self.stall(ev.time));
            }
            self.out.end_ns = ev.time;
            if self.s.trace {
                self.out.trace.push(ev);
            }
            self.handle(ev)?;
        }
        if self.leaves.iter().any(|l| l.next_job <= self.s.epochs) {
            return Err(self.stall(self.out.end_ns));
        }
        self.collect_rows();
        Ok(())
    }

    /// Instructions known ahead of time leave the root when their epoch
    /// begins.
    fn dispatch_static(&mut self) -> Result<(), NetError> {
        let program = self.s.program;
        for (_, instr) in program.active() {
            let epoch = match *instr {
                Instruction::Merge { epoch, .. } | Instruction::Split { epoch, .. } => epoch,
                _ => continue,
            };
            let h = if matches!(instr, Instruction::Merge { .. }) { header::INSTR_MERGE } else { header::INSTR_SPLIT };
            let issue = if epoch == 0 { 0 } else { self.epoch_end(epoch - 1) } + self.s.latency.root_ns();
            for leaf in program.leaves(instr, self.s.map) {
                self.send_from_root(issue, h, leaf, Detail::Instruction { epoch })?;
            }
        }
        Ok(())
    }

    fn send_from_root(&mut self, at: u64, h: u8, leaf: LeafId, detail: Detail) -> Result<u64, NetError> {
        let to = self.s.topology.leaf_node(leaf);
        let hops = self.s.topology.route(h, self.s.topology.root(), to)?;
        let arrive = at + self.s.latency.transfer_ns(&hops, 1);
        self.queue.push(arrive, to, EventKind::MsgArrive, detail);
        Ok(arrive)
    }

    fn handle(&mut self, ev: SimEvent) -> Result<(), NetError> {
        let t = ev.time;
        match (ev.kind, ev.detail) {
            (EventKind::RoundAvailable, Detail::Epoch(k)) => {
                let l = self.leaf_of(ev.node);
                let leaf = &mut self.leaves[l as usize];
                leaf.data = leaf.data.max(k + 1);
                self.out.depths[l as usize][k as usize] = (k + 1).saturating_sub(leaf.started);
                self.try_start(l, t)?;
            }
            (EventKind::MsgArrive, Detail::Boundary { from, epoch }) => {
                let l = self.leaf_of(ev.node);
                self.leaves[l as usize].boundary.entry(epoch).or_default().insert(from);
                self.try_start(l, t)?;
            }
            (EventKind::MsgArrive, Detail::Instruction { epoch }) => {
                let l = self.leaf_of(ev.node);
                *self.leaves[l as usize].instr.entry(epoch).or_default() += 1;
                self.try_start(l, t)?;
            }
            (EventKind::MsgArrive, Detail::Forward { .. }) => {}
            (EventKind::DecodeDone, _) => {}
            (EventKind::FuseDone, Detail::Job(j)) => {
                self.queue.push(t, ev.node, EventKind::Commit, Detail::Job(j));
            }
            (EventKind::Commit, Detail::Job(j)) => {
                let l = self.leaf_of(ev.node);
                self.commit(l, j, t)?;
                let leaf = &mut self.leaves[l as usize];
                leaf.busy = false;
                leaf.next_job += 1;
                self.try_start(l, t)?;
            }
            (EventKind::LogicalResult, Detail::Result { patch, epoch }) => self.root_result(patch, epoch, t)?,
            _ => unreachable!("event {ev:?} is never queued"),
        }
        Ok(())
    }

    fn leaf_of(&self, node: NodeId) -> LeafId {
        self.s.topology.node_leaf(node).expect("leaf event")
    }

    fn waiting(&self, l: LeafId) -> Option<Waiting> {
        let leaf = &self.leaves[l as usize];
        let job = leaf.next_job;
        if job >= self.s.epochs {
            return None;
        }
        let got = leaf.boundary.get(&job);
        let boundary_from: Vec<LeafId> =
            leaf.upstream.iter().copied().filter(|u| !got.is_some_and(|g| g.contains(u))).collect();
        let expected = self.expected.get(&(l, job)).copied().unwrap_or(0);
        let instructions = expected.saturating_sub(leaf.instr.get(&job).copied().unwrap_or(0));
        let data = leaf.data <= job;
        (data || !boundary_from.is_empty() || instructions > 0).then_some(Waiting {
            leaf: l,
            job,
            data,
            boundary_from,
            instructions,
        })
    }

    fn try_start(&mut self, l: LeafId, t: u64) -> Result<(), NetError> {
        let leaf = &self.leaves[l as usize];
        if leaf.busy || leaf.next_job > self.s.epochs || self.waiting(l).is_some() {
            return Ok(());
        }
        let job = leaf.next_job;
        let rec = *self.records.get(&(l, job)).ok_or(NetError::MissingRecord { leaf: l, job })?;
        let cost = self.s.latency.job_cost(&rec.report, rec.drain);
        let node = leaf.node;
        let leaf = &mut self.leaves[l as usize];
        leaf.busy = true;
        if !rec.drain {
            leaf.started += 1;
        }
        leaf.busy_ns[job as usize] = cost.total();
        let decoded = t + cost.coordinator_ns + cost.decode_ns;
        self.queue.push(decoded, node, EventKind::DecodeDone, Detail::Job(job));
        self.queue.push(decoded + cost.fuse_ns, node, EventKind::FuseDone, Detail::Job(job));
        self.out.jobs.push(JobTiming {
            leaf: l,
            job,
            drain: rec.drain,
            start_ns: t,
            end_ns: decoded + cost.fuse_ns,
            busy_ns: cost.total(),
        });
        Ok(())
    }

    fn commit(&mut self, l: LeafId, job: u32, t: u64) -> Result<(), NetError> {
        let rec = self.records[&(l, job)];
        let Some(epoch) = rec.report.committed_epoch else { return Ok(()) };
        let (node, group) = (self.leaves[l as usize].node, self.leaves[l as usize].group);
        self.leaves[l as usize].committed_ns.insert(epoch, t);
        self.out.commits.push(CommitTiming {
            leaf: l,
            group,
            epoch,
            time_ns: t,
            latency_ns: t - self.epoch_end(epoch),
            steady: epoch + (group as u32) < self.s.epochs,
        });
        for info in &rec.sent {
            let to = self.s.topology.leaf_node(info.to);
            let hops = self.s.topology.route(header::BOUNDARY_INFO, node, to)?;
            let msgs = boundary_message_count(info.committed_crossings.len());
            let arrive = t + self.s.latency.transfer_ns(&hops, msgs);
            self.queue.push(arrive, to, EventKind::MsgArrive, Detail::Boundary { from: l, epoch: info.epoch });
        }
        let patches = self.leaves[l as usize].patches.clone();
        for patch in patches {
            if self.reported.contains(&(patch, epoch)) {
                let hops = self.s.topology.route(header::LOGICAL_RESULT, node, self.s.topology.root())?;
                let arrive = t + self.s.latency.transfer_ns(&hops, 1);
                self.queue.push(
                    arrive,
                    self.s.topology.root(),
                    EventKind::LogicalResult,
                    Detail::Result { patch, epoch },
                );
            }
        }
        Ok(())
    }

    /// The root handles one outcome at a time, then forwards it and issues
    /// the conditional instructions that depended on it.
    fn root_result(&mut self, patch: PatchId, epoch: u32, t: u64) -> Result<(), NetError> {
        let done = t.max(self.root_free) + self.s.latency.root_ns();
        self.root_free = done;
        let program = self.s.program;
        for (_, instr) in program.active() {
            match *instr {
                Instruction::Measure { patch: p, epoch: e, forward_to: Some(to) } if p == patch && e == epoch => {
                    let arrive =
                        self.send_from_root(done, header::LOGICAL_RESULT, to, Detail::Forward { patch, epoch })?;
                    self.out.feedback.push(Feedback {
                        patch,
                        epoch,
                        to,
                        sent_ns: t,
                        arrive_ns: arrive,
                        deadline_ns: self.epoch_end(epoch + 1),
                    });
                }
                Instruction::CondMerge { epoch: target, on, measured, .. } if on == patch && measured == epoch => {
                    for leaf in program.leaves(instr, self.s.map) {
                        self.send_from_root(done, header::INSTR_MERGE, leaf, Detail::Instruction { epoch: target })?;
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn stall(&self, time_ns: u64) -> NetError {
        let waiting = (0..self.leaves.len() as LeafId).filter_map(|l| self.waiting(l)).collect();
        NetError::Stall { time_ns, waiting }
    }

    fn collect_rows(&mut self) {
        let d = self.s.d as u64;
        for (l, leaf) in self.leaves.iter().enumerate() {
            for (&epoch, &t) in &leaf.committed_ns {
                for p in &leaf.patches {
                    self.out.rows.push(MetricRow {
                        epoch,
                        patch: p.0,
                        latency_ns: t - self.epoch_end(epoch),
                        inv_throughput_ns: leaf.busy_ns[epoch as usize] / d,
                        backlog_depth: self.out.depths[l][epoch as usize],
                    });
                }
            }
        }
        self.out.rows.sort_by_key(|r| (r.epoch, r.patch));
    }
}
