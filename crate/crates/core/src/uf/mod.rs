//! Union-Find decoding over a [`Region`] of the decoding graph.
//!
//! Clusters grow in half-edge steps around odd clusters, merge when an edge
//! between them fills, and are peeled along a spanning forest once even.
//! A cluster that fills an edge into a real boundary (or an absorbing face)
//! counts as even. A cluster that fills an edge into a suspended face stops
//! growing and is left unpeeled, with its full growth record kept, so that a
//! later fusion can pick it up where it stopped.
//!
//! Peeling works on residual defects (defects not yet explained by emitted
//! correction edges), so clusters that merge with already-peeled ones after
//! fusion produce corrections that compose by symmetric difference.

mod region;

pub use region::{FaceId, FaceMode, FacePolicy, FaceRef, Region, RegionEdge, Target, WindowMap};

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::graph::{DecodingBlock, DecodingGraph, EdgeIdx, PatchId, VertexIdx};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum UfError {
    #[error("defect {0:?} is not in the decoded region")]
    DefectOutsideRegion(VertexIdx),
    #[error("no odd cluster is free to grow")]
    Quiescent,
    #[error("an odd cluster has no room to grow and no boundary to absorb it")]
    Stuck,
    #[error("an odd cluster without boundary access was left for peeling")]
    OddCluster,
}

const ODD: u8 = 1;
const ABSORB: u8 = 2;
const SUSPEND: u8 = 4;
const PENDING: u8 = 8;
const NO_EDGE: u32 = u32::MAX;

/// A set of correction edges plus the per-patch logical parity they imply.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Correction {
    pub edges: BTreeSet<EdgeIdx>,
    pub logical_flip: BTreeMap<PatchId, bool>,
}

impl Correction {
    pub fn from_edges<I: IntoIterator<Item = EdgeIdx>>(graph: &DecodingGraph, edges: I) -> Self {
        let mut c = Correction::default();
        for e in edges {
            c.toggle(graph, e);
        }
        c
    }

    /// Flips `e` in or out of the set.
    pub fn toggle(&mut self, graph: &DecodingGraph, e: EdgeIdx) {
        if !self.edges.remove(&e) {
            self.edges.insert(e);
        }
        if let Some(p) = graph.edge(e).cut {
            *self.logical_flip.entry(p).or_default() ^= true;
        }
    }

    /// Symmetric difference with `other`.
    pub fn merge(&mut self, other: &Correction) {
        for e in &other.edges {
            if !self.edges.remove(e) {
                self.edges.insert(*e);
            }
        }
        for (p, f) in &other.logical_flip {
            *self.logical_flip.entry(*p).or_default() ^= *f;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn flips(&self, patch: PatchId) -> bool {
        self.logical_flip.get(&patch).copied().unwrap_or(false)
    }

    pub fn weight(&self, graph: &DecodingGraph) -> u32 {
        self.edges.iter().map(|e| graph.edge(*e).weight).sum()
    }
}

/// Summary of one growth step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GrowReport {
    pub active_clusters: usize,
    pub filled_edges: usize,
}

/// Union-Find decoder state for one region.
#[derive(Clone, Debug)]
pub struct UfState {
    region: Arc<Region>,
    growth: Vec<u32>,
    in_correction: Vec<bool>,
    parent: Vec<u32>,
    members: Vec<Vec<u32>>,
    defect: Vec<bool>,
    residual: Vec<bool>,
    settled: Vec<bool>,
    flags: Vec<u8>,
    pending: Vec<u32>,
    steps: u64,
}

impl UfState {
    pub fn new(region: Arc<Region>, defects: &BTreeSet<VertexIdx>) -> Result<Self, UfError> {
        let n = region.vertex_count();
        let m = region.edges().len();
        let mut state = UfState {
            growth: vec![0; m],
            in_correction: vec![false; m],
            parent: (0..n as u32).collect(),
            members: vec![Vec::new(); n],
            defect: vec![false; n],
            residual: vec![false; n],
            settled: vec![true; n],
            flags: vec![0; n],
            pending: Vec::with_capacity(defects.len()),
            steps: 0,
            region,
        };
        for &v in defects {
            let l = state.region.local(v).ok_or(UfError::DefectOutsideRegion(v))?;
            let l = l as usize;
            state.defect[l] = true;
            state.residual[l] = true;
            state.settled[l] = false;
            state.flags[l] = ODD | PENDING;
            state.pending.push(l as u32);
        }
        Ok(state)
    }

    /// Rebuilds a state over `region` from states of disjoint sub-regions
    /// (fusion) or from a larger state (pruning). Growth on edges seen from
    /// several parts adds up, capped at the full edge; clusters are the
    /// components of filled edges; flags are recomputed from scratch.
    pub(crate) fn from_parts(region: Arc<Region>, parts: &[&UfState]) -> Self {
        let n = region.vertex_count();
        let m = region.edges().len();
        let mut growth = vec![0u32; m];
        let mut in_correction = vec![false; m];
        let mut defect = vec![false; n];
        let mut residual = vec![false; n];
        let mut settled = vec![true; n];
        for part in parts {
            let pr = &part.region;
            for (i, e) in pr.edges().iter().enumerate() {
                if let Some(l) = region.local_edge(e.global) {
                    let l = l as usize;
                    growth[l] = (growth[l] + part.growth[i]).min(region.edges()[l].full);
                    in_correction[l] ^= part.in_correction[i];
                }
            }
            for (i, &v) in pr.vertices().iter().enumerate() {
                if let Some(l) = region.local(v) {
                    let l = l as usize;
                    defect[l] = part.defect[i];
                    residual[l] = part.residual[i];
                    settled[l] = part.settled[i];
                }
            }
        }
        let mut state = UfState {
            growth,
            in_correction,
            parent: (0..n as u32).collect(),
            members: vec![Vec::new(); n],
            defect,
            residual,
            settled,
            flags: vec![0; n],
            pending: Vec::new(),
            steps: 0,
            region,
        };
        for v in 0..n {
            if state.residual[v] {
                state.flags[v] |= ODD;
            }
            if !state.settled[v] {
                state.flags[v] |= PENDING;
                state.pending.push(v as u32);
            }
        }
        let region = state.region.clone();
        for (i, e) in region.edges().iter().enumerate() {
            if state.growth[i] < e.full {
                continue;
            }
            match e.b {
                Target::Vertex(b) => state.union(e.a, b),
                other => state.mark_boundary(e.a, other),
            }
        }
        state
    }

    pub fn region(&self) -> &Arc<Region> {
        &self.region
    }

    pub fn graph(&self) -> &Arc<DecodingGraph> {
        self.region.graph()
    }

    /// Growth steps executed by this state since it was created.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn defects(&self) -> BTreeSet<VertexIdx> {
        (0..self.defect.len()).filter(|&v| self.defect[v]).map(|v| self.region.global(v as u32)).collect()
    }

    pub fn growth_of(&self, e: EdgeIdx) -> Option<u32> {
        self.region.local_edge(e).map(|l| self.growth[l as usize])
    }

    pub fn total_growth(&self) -> u64 {
        self.growth.iter().map(|g| *g as u64).sum()
    }

    fn find(&mut self, mut v: u32) -> u32 {
        while self.parent[v as usize] != v {
            let p = self.parent[v as usize];
            self.parent[v as usize] = self.parent[p as usize];
            v = self.parent[v as usize];
        }
        v
    }

    fn size(&self, root: u32) -> usize {
        self.members[root as usize].len().max(1)
    }

    fn union(&mut self, x: u32, y: u32) {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx == ry {
            return;
        }
        // larger cluster wins; ties go to the smaller vertex id
        let (root, child) = match self.size(rx).cmp(&self.size(ry)) {
            std::cmp::Ordering::Greater => (rx, ry),
            std::cmp::Ordering::Less => (ry, rx),
            std::cmp::Ordering::Equal => (rx.min(ry), rx.max(ry)),
        };
        let (r, c) = (root as usize, child as usize);
        if self.members[r].is_empty() {
            self.members[r].push(root);
        }
        let mut moved = std::mem::take(&mut self.members[c]);
        if moved.is_empty() {
            moved.push(child);
        }
        self.members[r].extend(moved);
        self.parent[c] = root;
        let cf = self.flags[c];
        self.flags[r] = (self.flags[r] | (cf & !ODD)) ^ (cf & ODD);
    }

    fn mark_boundary(&mut self, v: u32, target: Target) {
        let root = self.find(v) as usize;
        match target {
            Target::Real => self.flags[root] |= ABSORB,
            Target::Face(f) => match self.region.face(f).mode {
                FaceMode::Suspend => self.flags[root] |= SUSPEND,
                FaceMode::Absorb => self.flags[root] |= ABSORB,
                FaceMode::Closed => {}
            },
            Target::Vertex(_) => unreachable!("vertex targets are unions"),
        }
    }

    fn is_active(&self, root: u32) -> bool {
        let f = self.flags[root as usize];
        f & ODD != 0 && f & (ABSORB | SUSPEND) == 0
    }

    fn members_of(&self, root: u32) -> Vec<u32> {
        if self.members[root as usize].is_empty() {
            vec![root]
        } else {
            self.members[root as usize].clone()
        }
    }

    fn active_roots(&mut self) -> Vec<u32> {
        let mut roots: Vec<u32> = (0..self.pending.len()).map(|i| self.pending[i]).collect();
        for r in roots.iter_mut() {
            *r = self.find(*r);
        }
        roots.sort_unstable();
        roots.dedup();
        roots.retain(|&r| self.is_active(r));
        roots
    }

    /// True when no odd cluster is free to grow.
    pub fn is_quiescent(&mut self) -> bool {
        self.active_roots().is_empty()
    }

    /// One half-edge growth step for every odd, unsuspended, unabsorbed
    /// cluster, followed by the unions and boundary contacts it causes.
    pub fn grow_step(&mut self) -> Result<GrowReport, UfError> {
        let active = self.active_roots();
        if active.is_empty() {
            return Err(UfError::Quiescent);
        }
        self.grow_roots(&active)
    }

    fn grow_roots(&mut self, active: &[u32]) -> Result<GrowReport, UfError> {
        let region = self.region.clone();
        let mut filled = Vec::new();
        let mut grew = false;
        for &root in active {
            let members = std::mem::take(&mut self.members[root as usize]);
            let single = [root];
            let list: &[u32] = if members.is_empty() { &single } else { &members };
            for &v in list {
                for &e in region.incident(v) {
                    let edge = region.edge(e);
                    let g = &mut self.growth[e as usize];
                    if *g >= edge.full {
                        continue;
                    }
                    if let Target::Vertex(b) = edge.b {
                        let w = if edge.a == v { b } else { edge.a };
                        if self.parent[w as usize] == root || self.find_const(w) == root {
                            continue;
                        }
                    }
                    let g = &mut self.growth[e as usize];
                    *g += 1;
                    grew = true;
                    if *g == edge.full {
                        filled.push(e);
                    }
                }
            }
            self.members[root as usize] = members;
        }
        if !grew {
            return Err(UfError::Stuck);
        }
        self.steps += 1;
        for &e in &filled {
            let edge = *region.edge(e);
            match edge.b {
                Target::Vertex(b) => self.union(edge.a, b),
                other => self.mark_boundary(edge.a, other),
            }
        }
        Ok(GrowReport { active_clusters: active.len(), filled_edges: filled.len() })
    }

    fn find_const(&self, mut v: u32) -> u32 {
        while self.parent[v as usize] != v {
            v = self.parent[v as usize];
        }
        v
    }

    /// Grows until no odd cluster is free to grow.
    pub fn grow_to_quiescence(&mut self) -> Result<(), UfError> {
        loop {
            let active = self.active_roots();
            if active.is_empty() {
                return Ok(());
            }
            self.grow_roots(&active)?;
        }
    }

    /// Peels every cluster that holds unsettled vertices and is not
    /// suspended on an artificial face.
    pub fn peel(&mut self) -> Result<(), UfError> {
        let pending = std::mem::take(&mut self.pending);
        let mut roots: Vec<u32> = Vec::with_capacity(pending.len());
        for &v in &pending {
            if !self.settled[v as usize] {
                let r = self.find(v);
                roots.push(r);
            }
        }
        roots.sort_unstable();
        roots.dedup();
        let mut keep = Vec::new();
        for &r in &roots {
            let f = self.flags[r as usize];
            if f & SUSPEND != 0 {
                continue;
            }
            if f & ODD != 0 && f & ABSORB == 0 {
                self.pending = pending;
                return Err(UfError::OddCluster);
            }
        }
        for r in roots {
            if self.flags[r as usize] & SUSPEND != 0 {
                keep.extend(self.members_of(r).into_iter().filter(|v| !self.settled[*v as usize]));
            } else {
                self.peel_cluster(r)?;
            }
        }
        self.pending = keep;
        Ok(())
    }

    fn peel_cluster(&mut self, root: u32) -> Result<(), UfError> {
        let members = self.members_of(root);
        if members.iter().any(|&v| self.residual[v as usize]) {
            let region = self.region.clone();
            let mut parent_edge: BTreeMap<u32, u32> = BTreeMap::new();
            let mut order = Vec::with_capacity(members.len());
            if self.flags[root as usize] & ABSORB != 0 {
                // real boundaries win over absorbing faces, so ties resolve as a
                // global decode would
                for real_only in [true, false] {
                    for &v in &members {
                        let exit = region.incident(v).iter().copied().find(|&e| {
                            let edge = region.edge(e);
                            self.growth[e as usize] >= edge.full
                                && match edge.b {
                                    Target::Real => true,
                                    Target::Face(f) => !real_only && region.face(f).mode == FaceMode::Absorb,
                                    Target::Vertex(_) => false,
                                }
                        });
                        if let Some(e) = exit {
                            parent_edge.insert(v, e);
                            order.push(v);
                        }
                    }
                    if !order.is_empty() {
                        break;
                    }
                }
            }
            if order.is_empty() {
                let start = *members.iter().min().expect("clusters are non-empty");
                parent_edge.insert(start, NO_EDGE);
                order.push(start);
            }
            let mut head = 0;
            while head < order.len() {
                let v = order[head];
                head += 1;
                for &e in region.incident(v) {
                    let edge = region.edge(e);
                    if self.growth[e as usize] < edge.full {
                        continue;
                    }
                    if let Target::Vertex(b) = edge.b {
                        let w = if edge.a == v { b } else { edge.a };
                        if let std::collections::btree_map::Entry::Vacant(slot) = parent_edge.entry(w) {
                            slot.insert(e);
                            order.push(w);
                        }
                    }
                }
            }
            for &v in order.iter().rev() {
                if !self.residual[v as usize] {
                    continue;
                }
                let e = parent_edge[&v];
                if e == NO_EDGE {
                    return Err(UfError::OddCluster);
                }
                self.in_correction[e as usize] ^= true;
                self.residual[v as usize] = false;
                if let Target::Vertex(b) = region.edge(e).b {
                    let a = region.edge(e).a;
                    let w = if a == v { b } else { a };
                    self.residual[w as usize] ^= true;
                }
            }
        }
        for &v in &members {
            self.settled[v as usize] = true;
        }
        self.flags[root as usize] &= !(ODD | PENDING);
        Ok(())
    }

    /// Grows to quiescence and peels.
    pub fn decode(&mut self) -> Result<(), UfError> {
        self.grow_to_quiescence()?;
        self.peel()
    }

    /// All correction edges emitted so far in this region.
    pub fn correction(&self) -> Correction {
        let graph = self.region.graph().clone();
        Correction::from_edges(&graph, self.correction_edges())
    }

    pub fn correction_edges(&self) -> impl Iterator<Item = EdgeIdx> + '_ {
        self.in_correction.iter().enumerate().filter(|(_, c)| **c).map(|(i, _)| self.region.edges()[i].global)
    }

    /// Per-patch parity of emitted correction edges across the west cuts.
    pub fn logical_flip(&self) -> BTreeMap<PatchId, bool> {
        let mut out = BTreeMap::new();
        for (i, e) in self.region.edges().iter().enumerate() {
            if let (true, Some(p)) = (self.in_correction[i], e.cut) {
                *out.entry(p).or_default() ^= true;
            }
        }
        out
    }

    /// Vertices of every cluster that is not a lone untouched vertex, each
    /// cluster sorted, in order of their smallest vertex.
    pub fn clusters(&mut self) -> Vec<Vec<VertexIdx>> {
        let n = self.parent.len();
        let mut by_root: BTreeMap<u32, Vec<VertexIdx>> = BTreeMap::new();
        for v in 0..n as u32 {
            let r = self.find(v);
            by_root.entry(r).or_default().push(self.region.global(v));
        }
        let mut touched = vec![false; n];
        for (i, e) in self.region.edges().iter().enumerate() {
            if self.growth[i] > 0 {
                touched[e.a as usize] = true;
                if let Target::Vertex(b) = e.b {
                    touched[b as usize] = true;
                }
            }
        }
        let mut out: Vec<Vec<VertexIdx>> = by_root
            .into_values()
            .filter(|c| {
                c.len() > 1 || {
                    let l = self.region.local(c[0]).unwrap() as usize;
                    touched[l] || self.defect[l]
                }
            })
            .collect();
        out.sort();
        out
    }

    /// True if some cluster is stopped on a suspended face.
    pub fn has_suspended(&mut self) -> bool {
        let pending = self.pending.clone();
        pending.into_iter().any(|v| {
            let r = self.find(v);
            self.flags[r as usize] & SUSPEND != 0
        })
    }

    /// Drops every settled vertex of epochs `<= epoch` from the region and
    /// returns the correction edges that leave the region with them. Those
    /// edges are final. Clusters still waiting on a suspended face keep all
    /// their vertices.
    pub fn commit_through(mut self, epoch: u32) -> (UfState, Vec<EdgeIdx>) {
        let live = self.live_vertices();
        let graph = self.region.graph().clone();
        let keep: Vec<VertexIdx> = (0..self.parent.len() as u32)
            .filter(|v| live.contains(v) || graph.block_of(self.region.global(*v)).epoch > epoch)
            .map(|v| self.region.global(v))
            .collect();
        let committed = self.region.committed().map_or(epoch, |c| c.max(epoch));
        let region = Arc::new(Region::build(graph, keep, self.region.policy().clone(), Some(committed)));
        let dropped = self.correction_edges().filter(|e| region.local_edge(*e).is_none()).collect();
        let mut next = UfState::from_parts(region, &[&self]);
        next.steps = self.steps;
        (next, dropped)
    }

    /// Vertices whose cluster still holds unsettled defects.
    pub(crate) fn live_vertices(&mut self) -> BTreeSet<u32> {
        let mut live = BTreeSet::new();
        let pending = self.pending.clone();
        let mut seen = BTreeSet::new();
        for v in pending {
            let r = self.find(v);
            if seen.insert(r) {
                live.extend(self.members_of(r));
            }
        }
        live
    }
}

/// Decodes one block on its own. Faces towards other blocks follow `policy`.
pub fn decode_block(
    graph: &Arc<DecodingGraph>,
    block: &DecodingBlock,
    policy: &FacePolicy,
) -> Result<(UfState, Correction), UfError> {
    let region = Arc::new(Region::blocks(graph.clone(), &[block.key], policy.clone()));
    decode_region(region, &block.defects)
}

pub fn decode_region(region: Arc<Region>, defects: &BTreeSet<VertexIdx>) -> Result<(UfState, Correction), UfError> {
    let mut state = UfState::new(region, defects)?;
    state.decode()?;
    let correction = state.correction();
    Ok((state, correction))
}

/// Decodes the whole graph as a single region.
pub fn decode_global(graph: &Arc<DecodingGraph>, defects: &BTreeSet<VertexIdx>) -> Result<Correction, UfError> {
    Ok(decode_region(Arc::new(Region::whole(graph.clone())), defects)?.1)
}

#[cfg(test)]
mod tests;
