//! Parallel window decoding across compute resources (leaves).
//!
//! Each leaf owns a rectangular tile of patches and is one window. Leaves are
//! colored into three groups so that grid neighbors never share a group. A
//! window treats faces towards higher-group neighbors as absorbing
//! boundaries and commits the crossing edges it selects there; the
//! downstream window flips the defect at the far end of every committed
//! crossing before decoding, and keeps faces towards lower-group neighbors
//! closed. Within a leaf, blocks combine by fusion.
//!
//! Each leaf runs one job per epoch plus a final drain job. Job `k` decodes
//! epoch `k`, fuses it, and commits epoch `k - 1`; the drain job commits the
//! last epoch. At step `s`, group `g` runs job `s - (g - 1)`, groups in
//! increasing order, so upstream commitments are always available.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::{EpochReport, FusionError, StreamDecoder};
use crate::graph::{DecodingGraph, EdgeIdx, Endpoint, GridPos, Layout, PatchId, VertexIdx};
use crate::noise::ErrorSample;
use crate::uf::{Correction, FacePolicy, WindowMap};

pub type LeafId = u32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PipelineError {
    #[error("leaf {leaf} cannot decode epoch {epoch}: boundary information from leaf {from} has not arrived")]
    MissingBoundary { leaf: LeafId, epoch: u32, from: LeafId },
    #[error("leaf {leaf} has no job {job}")]
    NoSuchJob { leaf: LeafId, job: u32 },
    #[error("leaf grid {rows}x{cols} cannot tile the patch grid")]
    BadLeafGrid { rows: u32, cols: u32 },
    #[error("patch {0} is not mapped to a leaf")]
    Unmapped(PatchId),
    #[error(transparent)]
    Fusion(#[from] FusionError),
}

/// Placement of patches onto a rectangular grid of leaves.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafMap {
    pub rows: u32,
    pub cols: u32,
    pub leaf_of: BTreeMap<PatchId, LeafId>,
}

impl LeafMap {
    /// Splits the patch grid into `rows × cols` near-equal tiles, one per
    /// leaf, numbered row-major.
    pub fn tiled(layout: &Layout, rows: u32, cols: u32) -> Result<Self, PipelineError> {
        if rows == 0 || cols == 0 {
            return Err(PipelineError::BadLeafGrid { rows, cols });
        }
        let max_row = layout.patches().map(|(_, p)| p.row).max().unwrap_or(0) + 1;
        let max_col = layout.patches().map(|(_, p)| p.col).max().unwrap_or(0) + 1;
        let tile_h = max_row.div_ceil(rows);
        let tile_w = max_col.div_ceil(cols);
        let leaf_of = layout.patches().map(|(id, pos)| (id, (pos.row / tile_h) * cols + pos.col / tile_w)).collect();
        Ok(LeafMap { rows, cols, leaf_of })
    }

    /// One leaf per patch, laid out like the patch grid.
    pub fn per_patch(layout: &Layout) -> Self {
        let rows = layout.patches().map(|(_, p)| p.row).max().unwrap_or(0) + 1;
        let cols = layout.patches().map(|(_, p)| p.col).max().unwrap_or(0) + 1;
        let leaf_of = layout.patches().map(|(id, p)| (id, p.row * cols + p.col)).collect();
        LeafMap { rows, cols, leaf_of }
    }

    pub fn leaf_count(&self) -> u32 {
        self.rows * self.cols
    }

    pub fn position(&self, leaf: LeafId) -> GridPos {
        GridPos::new(leaf / self.cols, leaf % self.cols)
    }

    pub fn patches_on(&self, leaf: LeafId) -> Vec<PatchId> {
        self.leaf_of.iter().filter(|(_, l)| **l == leaf).map(|(p, _)| *p).collect()
    }

    /// Grid neighbors of `leaf`, sorted.
    pub fn neighbors(&self, leaf: LeafId) -> Vec<LeafId> {
        let GridPos { row, col } = self.position(leaf);
        let mut out = Vec::new();
        if row > 0 {
            out.push(leaf - self.cols);
        }
        if col > 0 {
            out.push(leaf - 1);
        }
        if col + 1 < self.cols {
            out.push(leaf + 1);
        }
        if row + 1 < self.rows {
            out.push(leaf + self.cols);
        }
        out
    }

    pub fn adjacent(&self, a: LeafId, b: LeafId) -> bool {
        self.neighbors(a).contains(&b)
    }
}

/// Three-coloring of the leaf grid: group `(row + col) mod 3 + 1`.
pub fn assign_groups(map: &LeafMap) -> Vec<u8> {
    (0..map.leaf_count())
        .map(|l| {
            let p = map.position(l);
            ((p.row + p.col) % 3 + 1) as u8
        })
        .collect()
}

/// Crossing edges committed by an upstream window on the face it shares with
/// a downstream window, for one epoch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryInfo {
    pub from: LeafId,
    pub to: LeafId,
    pub epoch: u32,
    pub committed_crossings: BTreeSet<EdgeIdx>,
}

/// What one job did.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JobRecord {
    pub leaf: LeafId,
    pub group: u8,
    /// Epoch decoded by the job; equal to the epoch count for the drain job.
    pub job: u32,
    /// True for the final job, which only commits the last epoch.
    pub drain: bool,
    pub report: EpochReport,
    /// Defects flipped by incoming boundary information.
    pub flips: usize,
    pub sent: Vec<BoundaryInfo>,
}

/// Final outcome of a pipeline run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PipelineOutcome {
    pub correction: Correction,
    pub records: Vec<JobRecord>,
}

/// Three-group parallel window pipeline over one noise sample.
pub struct Pipeline {
    graph: Arc<DecodingGraph>,
    map: LeafMap,
    groups: Vec<u8>,
    decoders: Vec<StreamDecoder>,
    defects: BTreeMap<(LeafId, u32), BTreeSet<VertexIdx>>,
    inbox: BTreeMap<(LeafId, u32), BTreeMap<LeafId, BoundaryInfo>>,
    next_job: Vec<u32>,
    committed: Vec<EdgeIdx>,
    records: Vec<JobRecord>,
}

impl Pipeline {
    pub fn new(graph: Arc<DecodingGraph>, map: LeafMap, defects: &BTreeSet<VertexIdx>) -> Result<Self, PipelineError> {
        for p in graph.patch_ids() {
            if !map.leaf_of.contains_key(&p) {
                return Err(PipelineError::Unmapped(p));
            }
        }
        let groups = assign_groups(&map);
        let window_map = Arc::new(WindowMap { leaf_of: map.leaf_of.clone(), group_of: groups.clone() });
        let decoders = (0..map.leaf_count())
            .map(|l| StreamDecoder::new(graph.clone(), map.patches_on(l), FacePolicy::Windows(window_map.clone())))
            .collect();
        let mut by_leaf: BTreeMap<(LeafId, u32), BTreeSet<VertexIdx>> = BTreeMap::new();
        for &v in defects {
            let block = graph.block_of(v);
            by_leaf.entry((map.leaf_of[&block.patch], block.epoch)).or_default().insert(v);
        }
        Ok(Pipeline {
            next_job: vec![0; map.leaf_count() as usize],
            graph,
            map,
            groups,
            decoders,
            defects: by_leaf,
            inbox: BTreeMap::new(),
            committed: Vec::new(),
            records: Vec::new(),
        })
    }

    pub fn groups(&self) -> &[u8] {
        &self.groups
    }

    pub fn map(&self) -> &LeafMap {
        &self.map
    }

    fn epochs(&self) -> u32 {
        self.graph.epochs()
    }

    fn upstream(&self, leaf: LeafId) -> Vec<LeafId> {
        let g = self.groups[leaf as usize];
        self.map.neighbors(leaf).into_iter().filter(|n| self.groups[*n as usize] < g).collect()
    }

    fn downstream(&self, leaf: LeafId) -> Vec<LeafId> {
        let g = self.groups[leaf as usize];
        self.map.neighbors(leaf).into_iter().filter(|n| self.groups[*n as usize] > g).collect()
    }

    /// Runs the next job of `leaf`.
    pub fn run_job(&mut self, leaf: LeafId) -> Result<JobRecord, PipelineError> {
        let job = self.next_job[leaf as usize];
        if job > self.epochs() {
            return Err(PipelineError::NoSuchJob { leaf, job });
        }
        let (report, flips) = if job < self.epochs() {
            let mut defects = self.defects.get(&(leaf, job)).cloned().unwrap_or_default();
            let inbox = self.inbox.remove(&(leaf, job)).unwrap_or_default();
            for from in self.upstream(leaf) {
                if !inbox.contains_key(&from) {
                    self.inbox.insert((leaf, job), inbox);
                    return Err(PipelineError::MissingBoundary { leaf, epoch: job, from });
                }
            }
            let mut flips = 0;
            for info in inbox.values() {
                for &e in &info.committed_crossings {
                    let v = self.local_endpoint(e, leaf);
                    if !defects.remove(&v) {
                        defects.insert(v);
                    }
                    flips += 1;
                }
            }
            (self.decoders[leaf as usize].fuse_epoch(job, &defects)?, flips)
        } else {
            let mut report = self.decoders[leaf as usize].finish();
            report.committed.extend(self.decoders[leaf as usize].drain());
            (report, 0)
        };
        let sent = match report.committed_epoch {
            Some(epoch) => self.route_crossings(leaf, epoch, &report.committed),
            None => Vec::new(),
        };
        for info in &sent {
            self.inbox.entry((info.to, info.epoch)).or_default().insert(info.from, info.clone());
        }
        self.committed.extend(report.committed.iter().copied());
        self.next_job[leaf as usize] += 1;
        let record = JobRecord {
            leaf,
            group: self.groups[leaf as usize],
            job,
            drain: job == self.epochs(),
            report,
            flips,
            sent,
        };
        self.records.push(record.clone());
        Ok(record)
    }

    fn leaf_of_vertex(&self, v: VertexIdx) -> LeafId {
        self.map.leaf_of[&self.graph.block_of(v).patch]
    }

    /// The endpoint of crossing edge `e` that lies on `leaf`.
    fn local_endpoint(&self, e: EdgeIdx, leaf: LeafId) -> VertexIdx {
        let edge = self.graph.edge(e);
        match edge.b {
            Endpoint::Vertex(b) if self.leaf_of_vertex(b) == leaf => b,
            _ => edge.a,
        }
    }

    fn route_crossings(&self, leaf: LeafId, epoch: u32, committed: &[EdgeIdx]) -> Vec<BoundaryInfo> {
        let mut out: BTreeMap<LeafId, BoundaryInfo> = self
            .downstream(leaf)
            .into_iter()
            .map(|to| (to, BoundaryInfo { from: leaf, to, epoch, committed_crossings: BTreeSet::new() }))
            .collect();
        for &e in committed {
            let edge = self.graph.edge(e);
            let Endpoint::Vertex(b) = edge.b else { continue };
            let (la, lb) = (self.leaf_of_vertex(edge.a), self.leaf_of_vertex(b));
            let far = if la == leaf { lb } else { la };
            if far != leaf {
                out.get_mut(&far).expect("crossings only go downstream").committed_crossings.insert(e);
            }
        }
        out.into_values().collect()
    }

    /// Runs step `step`: group `g` runs job `step - (g - 1)` on each of its
    /// leaves, groups in increasing order.
    pub fn run_epoch(&mut self, step: u32) -> Result<Vec<JobRecord>, PipelineError> {
        let mut out = Vec::new();
        for g in 1..=3u8 {
            let Some(job) = step.checked_sub(g as u32 - 1) else { continue };
            if job > self.epochs() {
                continue;
            }
            for leaf in 0..self.map.leaf_count() {
                if self.groups[leaf as usize] == g && self.next_job[leaf as usize] == job {
                    out.push(self.run_job(leaf)?);
                }
            }
        }
        Ok(out)
    }

    /// Runs every step until all leaves have drained.
    pub fn run(mut self) -> Result<PipelineOutcome, PipelineError> {
        let steps = self.epochs() + 3;
        for s in 0..steps {
            self.run_epoch(s)?;
        }
        Ok(PipelineOutcome { correction: Correction::from_edges(&self.graph, self.committed), records: self.records })
    }
}

/// Decodes `sample` through the window pipeline and checks validity.
pub fn decode_windows(
    graph: &Arc<DecodingGraph>,
    map: &LeafMap,
    sample: &ErrorSample,
) -> Result<PipelineOutcome, PipelineError> {
    Pipeline::new(graph.clone(), map.clone(), &sample.defects)?.run()
}

#[cfg(test)]
mod tests;
