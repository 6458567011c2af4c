use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::accuracy::logical_failure;
use super::stats::{mean_sd, LatencySummary};
use super::HarnessError;
use crate::graph::{DecodingGraph, GridPos, Layout, PatchId};
use crate::net::{build_topology, simulate, Instruction, LatencyModel, MetricRow, Program, SimSetup, Topology};
use crate::noise::{random_merge_schedule, sample_errors, NoiseParams};
use crate::window::{decode_windows, LeafMap};

/// Backlog is declared when more than this many epochs wait at a leaf.
pub const MAX_HEALTHY_DEPTH: u32 = 4;

/// Network and timing configuration, loadable from a JSON file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub latency: LatencyModel,
    pub fanout: u32,
    /// Leaf grid for tiled runs.
    pub leaf_rows: u32,
    pub leaf_cols: u32,
    pub stall_timeout_ns: Option<u64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { latency: LatencyModel::default(), fanout: 25, leaf_rows: 2, leaf_cols: 2, stall_timeout_ns: None }
    }
}

impl SimConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))
    }
}

/// A layout, its placement on leaves and the root program driving it.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub layout: Layout,
    pub map: LeafMap,
    pub program: Program,
}

impl Scenario {
    /// Applies the program's merges to the layout.
    pub fn new(name: &str, mut layout: Layout, map: LeafMap, program: Program) -> Result<Self, HarnessError> {
        let schedule = program.schedule(&layout, |_| true)?;
        layout.set_schedule(schedule)?;
        layout.pad_epochs(program.epochs);
        Ok(Scenario { name: name.to_string(), layout, map, program })
    }

    pub fn qubits(&self) -> usize {
        self.layout.patches().count()
    }
}

/// Aggregate metrics of a simulated run over many trials.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MetricsReport {
    pub name: String,
    pub d: u32,
    pub p: f64,
    pub qubits: usize,
    pub epochs: u32,
    pub trials: u64,
    /// Epochs committed for every qubit in every trial.
    pub completed_epochs: u32,
    pub latency: LatencySummary,
    /// Commits not shortened by the final drain.
    pub steady_latency: LatencySummary,
    pub inv_throughput_mean_ns: f64,
    pub inv_throughput_sd_ns: f64,
    pub max_backlog_depth: u32,
    pub backlog: bool,
    pub logical_errors: u64,
    /// Smallest latency of a first group-3 commit over trials.
    pub first_group3_latency_ns: Option<u64>,
    pub feedback_messages: u64,
    pub feedback_late: u64,
}

/// Report plus per-(epoch, patch) means for the CSV output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchResult {
    pub report: MetricsReport,
    pub rows: Vec<MetricRow>,
}

struct TrialStats {
    rows: Vec<MetricRow>,
    steady: Vec<u64>,
    inv: Vec<f64>,
    max_depth: u32,
    first_g3: Option<u64>,
    logical_fail: bool,
    feedback: u64,
    feedback_late: u64,
}

fn run_trial(
    sc: &Scenario,
    graph: &Arc<DecodingGraph>,
    topology: &Topology,
    cfg: &SimConfig,
    params: &NoiseParams,
) -> Result<TrialStats, HarnessError> {
    let d = sc.layout.d();
    let sample = sample_errors(graph, params);
    let outcome = decode_windows(graph, &sc.map, &sample)?;
    let logical_fail = logical_failure(graph, &sample, &outcome.correction)?;
    let sim = simulate(&SimSetup {
        d,
        epochs: graph.epochs(),
        map: &sc.map,
        topology,
        program: &sc.program,
        records: &outcome.records,
        latency: &cfg.latency,
        stall_timeout_ns: cfg.stall_timeout_ns,
        trace: false,
    })?;
    let steady_epochs: BTreeMap<(u32, u32), bool> = sim.commits.iter().map(|c| ((c.leaf, c.epoch), c.steady)).collect();
    let steady = sim
        .rows
        .iter()
        .filter(|r| steady_epochs.get(&(sc.map.leaf_of[&PatchId(r.patch)], r.epoch)).copied().unwrap_or(false))
        .map(|r| r.latency_ns)
        .collect();
    Ok(TrialStats {
        steady,
        inv: sim.inv_throughputs(d),
        max_depth: sim.max_depth(),
        first_g3: sim.first_commit_latency(3),
        logical_fail,
        feedback: sim.feedback.len() as u64,
        feedback_late: sim.feedback.iter().filter(|f| f.arrive_ns >= f.deadline_ns).count() as u64,
        rows: sim.rows,
    })
}

/// Samples noise, decodes through the window pipeline, checks every
/// correction and replays the jobs on the simulated network, per trial.
pub fn run_scenario(
    sc: &Scenario,
    p: f64,
    trials: u64,
    seed: u64,
    cfg: &SimConfig,
) -> Result<BenchResult, HarnessError> {
    if trials == 0 {
        return Err(HarnessError::NoTrials);
    }
    let graph = Arc::new(DecodingGraph::from_layout(&sc.layout)?);
    let topology = build_topology(sc.map.leaf_count(), cfg.fanout, sc.map.rows, sc.map.cols)?;
    let params = NoiseParams::new(p, seed)?;
    let stats: Vec<TrialStats> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(sc, &graph, &topology, cfg, &params.for_trial(t)))
        .collect::<Result<_, _>>()?;

    let d = sc.layout.d();
    let epochs = graph.epochs();
    let qubits = sc.qubits();
    let mut per_cell: BTreeMap<(u32, u32), (u64, u64, u32, u64)> = BTreeMap::new();
    let mut latencies = Vec::new();
    let mut steady = Vec::new();
    let mut inv = Vec::new();
    let mut report = MetricsReport {
        name: sc.name.clone(),
        d,
        p,
        qubits,
        epochs,
        trials,
        completed_epochs: epochs,
        ..Default::default()
    };
    for s in &stats {
        for r in &s.rows {
            let cell = per_cell.entry((r.epoch, r.patch)).or_default();
            cell.0 += r.latency_ns;
            cell.1 += r.inv_throughput_ns;
            cell.2 = cell.2.max(r.backlog_depth);
            cell.3 += 1;
            latencies.push(r.latency_ns);
        }
        let mut done = vec![0usize; epochs as usize];
        for r in &s.rows {
            done[r.epoch as usize] += 1;
        }
        report.completed_epochs = report.completed_epochs.min(done.iter().take_while(|n| **n == qubits).count() as u32);
        steady.extend_from_slice(&s.steady);
        inv.extend_from_slice(&s.inv);
        report.max_backlog_depth = report.max_backlog_depth.max(s.max_depth);
        report.logical_errors += s.logical_fail as u64;
        report.first_group3_latency_ns = match (report.first_group3_latency_ns, s.first_g3) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        report.feedback_messages += s.feedback;
        report.feedback_late += s.feedback_late;
    }
    report.latency = LatencySummary::new(&mut latencies);
    report.steady_latency = LatencySummary::new(&mut steady);
    (report.inv_throughput_mean_ns, report.inv_throughput_sd_ns) = mean_sd(&inv);
    report.backlog =
        report.inv_throughput_mean_ns >= cfg.latency.t_round_ns as f64 || report.max_backlog_depth > MAX_HEALTHY_DEPTH;
    let rows = per_cell
        .into_iter()
        .map(|((epoch, patch), (lat, inv, depth, n))| MetricRow {
            epoch,
            patch,
            latency_ns: lat / n,
            inv_throughput_ns: inv / n,
            backlog_depth: depth,
        })
        .collect();
    Ok(BenchResult { report, rows })
}

/// Patch grid `rows × cols` holding `n` qubits, as square as possible.
pub fn grid_shape(n: u32) -> (u32, u32) {
    let rows = (1..=n).filter(|r| r * r <= n && n.is_multiple_of(*r)).max().unwrap_or(1);
    (rows, n / rows)
}

/// Random merge/split stress run: `qubits` patches tiled onto the
/// configured leaf grid, each adjacent seam merged with probability
/// `merge_prob` per epoch.
#[allow(clippy::too_many_arguments)]
pub fn cmd_scalability(
    d: u32,
    qubits: u32,
    epochs: u32,
    merge_prob: f64,
    p: f64,
    trials: u64,
    seed: u64,
    cfg: &SimConfig,
) -> Result<BenchResult, HarnessError> {
    let (rows, cols) = grid_shape(qubits);
    let layout = Layout::grid(d, rows, cols)?;
    let map = LeafMap::tiled(&layout, cfg.leaf_rows.min(rows), cfg.leaf_cols.min(cols))?;
    let schedule = random_merge_schedule(&layout, epochs, merge_prob, seed)?;
    let mut program = Program::from_schedule(&schedule);
    program.epochs = epochs;
    let sc = Scenario::new(&format!("scalability-{qubits}"), layout, map, program)?;
    run_scenario(&sc, p, trials, seed, cfg)
}

/// A catalog circuit: qubit positions and root program, independent of d.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Microbenchmark {
    pub name: &'static str,
    pub positions: Vec<(u32, u32)>,
    /// Leaf grid; by default every qubit sits on the leaf at its position.
    pub leaf_grid: Option<(u32, u32)>,
    pub program: Program,
}

impl Microbenchmark {
    pub fn qubits(&self) -> usize {
        self.positions.len()
    }

    pub fn epochs(&self) -> u32 {
        self.program.epochs
    }

    pub fn scenario(&self, d: u32) -> Result<Scenario, HarnessError> {
        let mut layout = Layout::new(d)?;
        for (i, &(r, c)) in self.positions.iter().enumerate() {
            layout.add_patch(PatchId(i as u32), GridPos::new(r, c))?;
        }
        let (rows, cols) = self.leaf_grid.unwrap_or_else(|| {
            let rows = self.positions.iter().map(|p| p.0).max().unwrap_or(0) + 1;
            let cols = self.positions.iter().map(|p| p.1).max().unwrap_or(0) + 1;
            (rows, cols)
        });
        let leaf_of = self.positions.iter().enumerate().map(|(i, &(r, c))| (PatchId(i as u32), r * cols + c)).collect();
        Scenario::new(self.name, layout, LeafMap { rows, cols, leaf_of }, self.program.clone())
    }
}

fn merge(a: u32, b: u32, epoch: u32) -> Instruction {
    Instruction::Merge { a: PatchId(a), b: PatchId(b), epoch }
}

fn split(a: u32, b: u32, epoch: u32) -> Instruction {
    Instruction::Split { a: PatchId(a), b: PatchId(b), epoch }
}

fn measure(patch: u32, epoch: u32) -> Instruction {
    Instruction::Measure { patch: PatchId(patch), epoch, forward_to: None }
}

fn bench(
    name: &'static str,
    positions: Vec<(u32, u32)>,
    epochs: u32,
    mut instructions: Vec<Instruction>,
) -> Microbenchmark {
    instructions.push(Instruction::Halt);
    Microbenchmark { name, positions, leaf_grid: None, program: Program { epochs, instructions } }
}

fn row_major(rows: u32, cols: u32) -> Vec<(u32, u32)> {
    (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).collect()
}

/// The eight catalog circuits. Only qubit and epoch counts are fixed by the
/// catalog; the seam activations are reconstructions from standard lattice
/// surgery.
pub fn catalog() -> Vec<Microbenchmark> {
    let mut feedback = bench(
        "feedback",
        vec![(0, 0)],
        1,
        vec![Instruction::Measure { patch: PatchId(0), epoch: 0, forward_to: Some(1) }],
    );
    feedback.leaf_grid = Some((1, 2));

    // 4x6 block: two rounds of east-west pairings and two of north-south
    // pairings, then every qubit is measured
    let mut distill = Vec::new();
    for r in 0..4 {
        for c in (0..6).step_by(2) {
            distill.push(merge(r * 6 + c, r * 6 + c + 1, 0));
        }
        for c in [1, 3] {
            distill.push(merge(r * 6 + c, r * 6 + c + 1, 2));
        }
    }
    for c in 0..6 {
        for r in [0, 2] {
            distill.push(merge(r * 6 + c, (r + 1) * 6 + c, 1));
        }
        distill.push(merge(6 + c, 12 + c, 3));
    }
    distill.extend((0..24).map(|q| measure(q, 4)));

    vec![
        feedback,
        bench(
            "merge_split",
            vec![(0, 0), (0, 1)],
            3,
            vec![merge(0, 1, 1), split(0, 1, 2), measure(0, 2), measure(1, 2)],
        ),
        // source, route, destination
        bench(
            "move",
            row_major(1, 3),
            3,
            vec![merge(0, 1, 0), merge(1, 2, 1), split(1, 2, 2), measure(0, 2), measure(1, 2)],
        ),
        // control, ancilla, target
        bench("cnot", vec![(0, 0), (0, 1), (1, 1)], 3, vec![merge(0, 1, 0), merge(1, 2, 1), measure(1, 2)]),
        // two CNOTs side by side: 0 -> 4 through 3, and 5 -> 1 through 2
        bench(
            "cnot_plane",
            row_major(2, 3),
            3,
            vec![merge(0, 3, 0), merge(2, 5, 0), merge(3, 4, 1), merge(1, 2, 1), measure(3, 2), measure(2, 2)],
        ),
        // control in the middle, one target on each arm
        bench(
            "multi_cnot",
            vec![(1, 1), (0, 1), (1, 0), (1, 2), (2, 1)],
            3,
            vec![merge(1, 0, 0), merge(0, 4, 0), merge(2, 0, 1), merge(0, 3, 1), measure(0, 2)],
        ),
        bench(
            "state_expansion",
            row_major(2, 2),
            2,
            vec![merge(0, 1, 0), merge(2, 3, 0), merge(0, 2, 1), merge(1, 3, 1)],
        ),
        bench("distillation_15_1", row_major(4, 6), 5, distill),
    ]
}

pub fn microbenchmark(name: &str) -> Result<Microbenchmark, HarnessError> {
    catalog().into_iter().find(|b| b.name == name).ok_or_else(|| HarnessError::UnknownBenchmark(name.to_string()))
}

pub fn cmd_microbench(
    name: &str,
    d: u32,
    p: f64,
    trials: u64,
    seed: u64,
    cfg: &SimConfig,
) -> Result<BenchResult, HarnessError> {
    run_scenario(&microbenchmark(name)?.scenario(d)?, p, trials, seed, cfg)
}
