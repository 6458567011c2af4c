//! Fusion Union-Find: combining independently decoded blocks by removing
//! the artificial faces between them and resuming growth where needed.
//!
//! Fusing rebuilds one state over the union of the regions. Growth recorded
//! on both sides of a face adds up, so a cluster that had filled the edge to
//! the face now reaches the vertex behind it. Cluster flags are recomputed
//! eagerly, odd clusters grow again in lockstep across the whole fused
//! region, and the result is peeled as a single graph.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::graph::{BlockKey, DecodingGraph, EdgeIdx, PatchId, VertexIdx};
use crate::uf::{Correction, FaceId, FacePolicy, Region, UfError, UfState};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FusionError {
    #[error("a state passed to fusion still has odd clusters free to grow")]
    NotQuiescent,
    #[error("the states share no face that is artificial on both sides")]
    NoSharedFace,
    #[error("the states overlap")]
    Overlap,
    #[error("epoch {got} fused out of order, expected {expected}")]
    EpochOrder { expected: u32, got: u32 },
    #[error("defect {0:?} does not belong to this decoder's blocks for the epoch")]
    ForeignDefect(VertexIdx),
    #[error(transparent)]
    Uf(#[from] UfError),
}

/// Faces artificial on both `left` and `right`.
pub fn shared_faces(left: &UfState, right: &UfState) -> Vec<FaceId> {
    left.region().shared_faces(right.region())
}

/// Fuses two quiescent states across every face they share. Returns the
/// fused state, itself fusable again, and the correction of the whole fused
/// region.
pub fn fuse(left: UfState, right: UfState) -> Result<(UfState, Correction), FusionError> {
    if shared_faces(&left, &right).is_empty() {
        return Err(FusionError::NoSharedFace);
    }
    fuse_all(vec![left, right], None)
}

/// Fuses any number of quiescent states over disjoint regions at once.
/// `region` may supply a prebuilt region equal to the union of the parts.
pub fn fuse_all(mut parts: Vec<UfState>, region: Option<Arc<Region>>) -> Result<(UfState, Correction), FusionError> {
    for p in parts.iter_mut() {
        if !p.is_quiescent() {
            return Err(FusionError::NotQuiescent);
        }
    }
    let region = match region {
        Some(r) => r,
        None => union_region(&parts)?,
    };
    let refs: Vec<&UfState> = parts.iter().collect();
    let mut state = UfState::from_parts(region, &refs);
    state.decode()?;
    let correction = state.correction();
    Ok((state, correction))
}

fn union_region(parts: &[UfState]) -> Result<Arc<Region>, FusionError> {
    let first = parts.first().ok_or(FusionError::NoSharedFace)?;
    let total: usize = parts.iter().map(|p| p.region().vertex_count()).sum();
    let mut vertices: Vec<VertexIdx> = parts.iter().flat_map(|p| p.region().vertices().iter().copied()).collect();
    vertices.sort_unstable();
    vertices.dedup();
    if vertices.len() != total {
        return Err(FusionError::Overlap);
    }
    let committed = parts.iter().filter_map(|p| p.region().committed()).max();
    Ok(Arc::new(Region::build(first.graph().clone(), vertices, first.region().policy().clone(), committed)))
}

/// Result of feeding one epoch to a [`StreamDecoder`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EpochReport {
    pub epoch: u32,
    /// Growth steps spent decoding each block on its own.
    pub decode_steps: Vec<(BlockKey, u64)>,
    /// Growth steps spent after fusing the epoch into the live state.
    pub fuse_steps: u64,
    pub defects: usize,
    /// The epoch whose corrections became final, if any.
    pub committed_epoch: Option<u32>,
    /// Correction edges that became final.
    pub committed: Vec<EdgeIdx>,
}

/// Streaming decoder for the patches owned by one compute resource.
///
/// Each epoch, the blocks of every owned patch are decoded independently,
/// then fused in one step with each other (across active seams) and with the
/// live state left over from the previous epoch (temporal faces). The
/// previous epoch is then committed: its settled vertices leave the state and
/// the correction edges touching them become final.
#[derive(Debug)]
pub struct StreamDecoder {
    graph: Arc<DecodingGraph>,
    patches: Vec<PatchId>,
    policy: FacePolicy,
    live: Option<UfState>,
    next_epoch: u32,
    finished: bool,
}

impl StreamDecoder {
    pub fn new(graph: Arc<DecodingGraph>, patches: Vec<PatchId>, policy: FacePolicy) -> Self {
        let mut patches = patches;
        patches.sort();
        StreamDecoder { graph, patches, policy, live: None, next_epoch: 0, finished: false }
    }

    pub fn patches(&self) -> &[PatchId] {
        &self.patches
    }

    pub fn next_epoch(&self) -> u32 {
        self.next_epoch
    }

    /// Decodes and fuses `epoch`, then commits `epoch - 1`. `defects` must lie
    /// in this decoder's blocks of `epoch`.
    pub fn fuse_epoch(&mut self, epoch: u32, defects: &BTreeSet<VertexIdx>) -> Result<EpochReport, FusionError> {
        if epoch != self.next_epoch || self.finished {
            return Err(FusionError::EpochOrder { expected: self.next_epoch, got: epoch });
        }
        let mut by_block: BTreeMap<BlockKey, BTreeSet<VertexIdx>> =
            self.patches.iter().map(|p| (BlockKey::new(*p, epoch), BTreeSet::new())).collect();
        for &v in defects {
            let key = self.graph.block_of(v);
            by_block.get_mut(&key).ok_or(FusionError::ForeignDefect(v))?.insert(v);
        }
        let committed = self.live.as_ref().and_then(|s| s.region().committed());
        let mut report = EpochReport { epoch, defects: defects.len(), ..Default::default() };
        let mut parts = Vec::with_capacity(by_block.len() + 1);
        if let Some(live) = self.live.take() {
            parts.push(live);
        }
        for (key, block_defects) in &by_block {
            let vertices = self.graph.block_ranges(*key).into_iter().flatten().map(VertexIdx).collect();
            let region = Arc::new(Region::build(self.graph.clone(), vertices, self.policy.clone(), committed));
            let mut state = UfState::new(region, block_defects)?;
            state.decode()?;
            report.decode_steps.push((*key, state.steps()));
            parts.push(state);
        }
        self.live = if parts.len() <= 1 {
            parts.pop()
        } else {
            let fused = fuse_all(parts, None)?.0;
            report.fuse_steps = fused.steps();
            Some(fused)
        };
        self.next_epoch += 1;
        if epoch > 0 {
            let edges = self.commit(epoch - 1);
            report.committed_epoch = Some(epoch - 1);
            report.committed = edges;
        }
        Ok(report)
    }

    /// Commits the last fused epoch. No more epochs can be fed afterwards.
    pub fn finish(&mut self) -> EpochReport {
        let mut report = EpochReport { epoch: self.next_epoch, ..Default::default() };
        if self.next_epoch > 0 && !self.finished {
            let last = self.next_epoch - 1;
            report.committed_epoch = Some(last);
            report.committed = self.commit(last);
        }
        self.finished = true;
        report
    }

    fn commit(&mut self, epoch: u32) -> Vec<EdgeIdx> {
        let Some(live) = self.live.take() else {
            return Vec::new();
        };
        let (next, edges) = live.commit_through(epoch);
        self.live = Some(next);
        edges
    }

    /// Drains the final state: every remaining correction edge becomes final.
    pub fn drain(&mut self) -> Vec<EdgeIdx> {
        self.live.take().map(|s| s.correction_edges().collect()).unwrap_or_default()
    }
}

/// Decodes the whole graph with one [`StreamDecoder`] owning every patch and
/// returns the final correction.
pub fn decode_streaming(graph: &Arc<DecodingGraph>, defects: &BTreeSet<VertexIdx>) -> Result<Correction, FusionError> {
    let mut decoder = StreamDecoder::new(graph.clone(), graph.patch_ids().collect(), FacePolicy::Suspend);
    let mut edges = Vec::new();
    for epoch in 0..graph.epochs() {
        let epoch_defects = defects.iter().copied().filter(|v| graph.block_of(*v).epoch == epoch).collect();
        edges.extend(decoder.fuse_epoch(epoch, &epoch_defects)?.committed);
    }
    edges.extend(decoder.finish().committed);
    edges.extend(decoder.drain());
    Ok(Correction::from_edges(graph, edges))
}
