//! Z-type decoding graphs for unrotated planar surface-code patches under the
//! phenomenological noise model, with lattice-surgery merges and splits.
//!
//! Every patch contributes `d × (d-1)` ancilla vertices per measurement round.
//! Space edges are data-qubit errors, time edges are measurement errors, and
//! boundary edges terminate on the west (`col = 0`) and east (`col = d-2`)
//! sides. Merging two grid-adjacent patches inserts one seam vertex per row
//! (east-west seams) or per column (north-south seams) for every merged round.
//!
//! Vertices are stored in lexicographic `(owner, round, row, col)` order with
//! all patch vertices before all seam vertices, so vertex indices double as a
//! deterministic tie-breaker for the decoders.

mod block;
mod layout;

pub use block::{BlockKey, DecodingBlock, FaceDir, FaceLabel};
pub use layout::{GridPos, Layout, LayoutConfig, PatchConfig};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Logical qubit patch identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PatchId(pub u32);

impl fmt::Display for PatchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SeamOrientation {
    /// `patch_a` is west of `patch_b`.
    EastWest,
    /// `patch_a` is north of `patch_b`.
    NorthSouth,
}

/// The shared boundary between two grid-adjacent patches.
///
/// `patch_a` is always the west (or north) patch. Seam vertices are owned by
/// `patch_a` when the graph is carved into blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SeamId {
    pub patch_a: PatchId,
    pub patch_b: PatchId,
    pub orientation: SeamOrientation,
}

impl fmt::Display for SeamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sep = match self.orientation {
            SeamOrientation::EastWest => "|",
            SeamOrientation::NorthSouth => "/",
        };
        write!(f, "{}{}{}", self.patch_a, sep, self.patch_b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Owner {
    Patch(PatchId),
    Seam(SeamId),
}

/// Coordinates of one ancilla measurement.
///
/// Seam vertices of east-west seams sit at `col = d-1`; those of north-south
/// seams sit at `row = d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId {
    pub owner: Owner,
    pub round: u32,
    pub row: u32,
    pub col: u32,
}

/// Index of a vertex in [`DecodingGraph::vertices`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexIdx(pub u32);

impl VertexIdx {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Index of an edge in [`DecodingGraph::edges`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeIdx(pub u32);

impl EdgeIdx {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Space,
    Time,
    SeamSpace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BoundarySide {
    West,
    East,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Endpoint {
    Vertex(VertexIdx),
    Boundary(BoundarySide),
}

/// A possible single error. Vertex-vertex edges always satisfy `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub a: VertexIdx,
    pub b: Endpoint,
    pub kind: EdgeKind,
    pub weight: u32,
    /// The patch whose west cut this edge crosses, if any. The parity of
    /// flipped cut edges is that patch's logical observable.
    pub cut: Option<PatchId>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        matches!(self.b, Endpoint::Boundary(_))
    }

    pub fn other(&self, v: VertexIdx) -> Endpoint {
        if self.a == v {
            self.b
        } else {
            Endpoint::Vertex(self.a)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("code distance must be odd and at least 3, got {0}")]
    InvalidDistance(u32),
    #[error("a decoding graph needs at least one round")]
    NoRounds,
    #[error("unknown patch {0}")]
    UnknownPatch(PatchId),
    #[error("patch {0} is already placed")]
    DuplicatePatch(PatchId),
    #[error("grid position ({row}, {col}) is already occupied")]
    OccupiedPosition { row: u32, col: u32 },
    #[error("seam {0} does not join grid-adjacent patches")]
    NotAdjacent(SeamId),
    #[error("seam {seam} is already merged in round {round}")]
    AlreadyMerged { seam: SeamId, round: u32 },
    #[error("seam {seam} is not merged in round {round}")]
    NotMerged { seam: SeamId, round: u32 },
    #[error("round range {start}..{end} exceeds the {rounds} rounds of the graph")]
    RoundOutOfRange { start: u32, end: u32, rounds: u32 },
    #[error("{rounds} rounds is not a multiple of d = {d}")]
    RoundsNotMultipleOfD { rounds: u32, d: u32 },
    #[error("layout has no patches")]
    EmptyLayout,
    #[error("invalid layout config: {0}")]
    Config(String),
}

fn check_distance(d: u32) -> Result<(), GraphError> {
    if d < 3 || d.is_multiple_of(2) {
        return Err(GraphError::InvalidDistance(d));
    }
    Ok(())
}

/// Decoding graph of one or more patches over a fixed number of rounds.
///
/// Immutable once built; [`merge_patches`](Self::merge_patches) and
/// [`split_patches`](Self::split_patches) rebuild the materialized vertex and
/// edge tables from the seam activity record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodingGraph {
    d: u32,
    rounds: u32,
    patches: Vec<(PatchId, GridPos)>,
    seam_rounds: BTreeMap<SeamId, Vec<bool>>,
    vertices: Vec<VertexId>,
    seam_base: BTreeMap<(SeamId, u32), u32>,
    edges: Vec<Edge>,
    adj_offsets: Vec<u32>,
    adj_edges: Vec<EdgeIdx>,
}

/// Single patch at grid origin with id 0.
pub fn build_patch_graph(d: u32, rounds: u32) -> Result<DecodingGraph, GraphError> {
    let mut layout = Layout::new(d)?;
    layout.add_patch(PatchId(0), GridPos::new(0, 0))?;
    DecodingGraph::new(&layout, rounds)
}

impl DecodingGraph {
    /// Unmerged graph of every patch in `layout` (the merge schedule is ignored).
    pub fn new(layout: &Layout, rounds: u32) -> Result<Self, GraphError> {
        check_distance(layout.d())?;
        if rounds == 0 {
            return Err(GraphError::NoRounds);
        }
        if layout.patch_count() == 0 {
            return Err(GraphError::EmptyLayout);
        }
        let mut graph = DecodingGraph {
            d: layout.d(),
            rounds,
            patches: layout.patches().collect(),
            seam_rounds: BTreeMap::new(),
            vertices: Vec::new(),
            seam_base: BTreeMap::new(),
            edges: Vec::new(),
            adj_offsets: Vec::new(),
            adj_edges: Vec::new(),
        };
        graph.rebuild();
        Ok(graph)
    }

    /// Graph spanning `layout.epochs() × d` rounds with every scheduled seam
    /// merged for the rounds of its epoch.
    pub fn from_layout(layout: &Layout) -> Result<Self, GraphError> {
        let d = layout.d();
        let epochs = layout.epochs().max(1);
        let mut graph = Self::new(layout, epochs * d)?;
        for (epoch, seams) in layout.schedule().iter().enumerate() {
            let start = epoch as u32 * d;
            for seam in seams {
                graph.mark_merged(*seam, start..start + d)?;
            }
        }
        graph.rebuild();
        Ok(graph)
    }

    /// Activates `seam` for `rounds`. An empty range leaves the graph untouched.
    pub fn merge_patches(&mut self, seam: SeamId, rounds: Range<u32>) -> Result<(), GraphError> {
        if rounds.is_empty() {
            return Ok(());
        }
        self.mark_merged(seam, rounds)?;
        self.rebuild();
        Ok(())
    }

    /// Ends the merge of `seam`: no seam vertices from `round` onward.
    ///
    /// The seam must be merged in round `round - 1` (a split after a merge)
    /// or in `round` itself (undoing a merge that starts there).
    pub fn split_patches(&mut self, seam: SeamId, round: u32) -> Result<(), GraphError> {
        if round >= self.rounds {
            return Err(GraphError::RoundOutOfRange { start: round, end: round + 1, rounds: self.rounds });
        }
        let merged_at = |r: &Vec<bool>| r[round as usize] || (round > 0 && r[round as usize - 1]);
        let active = self
            .seam_rounds
            .get_mut(&seam)
            .filter(|r| merged_at(r))
            .ok_or(GraphError::NotMerged { seam, round: round.saturating_sub(1) })?;
        for flag in &mut active[round as usize..] {
            *flag = false;
        }
        if active.iter().all(|f| !f) {
            self.seam_rounds.remove(&seam);
        }
        self.rebuild();
        Ok(())
    }

    fn mark_merged(&mut self, seam: SeamId, rounds: Range<u32>) -> Result<(), GraphError> {
        if rounds.end > self.rounds {
            return Err(GraphError::RoundOutOfRange { start: rounds.start, end: rounds.end, rounds: self.rounds });
        }
        self.check_seam(seam)?;
        let total = self.rounds as usize;
        let active = self.seam_rounds.entry(seam).or_insert_with(|| vec![false; total]);
        if let Some(round) = rounds.clone().find(|&r| active[r as usize]) {
            return Err(GraphError::AlreadyMerged { seam, round });
        }
        for r in rounds {
            active[r as usize] = true;
        }
        Ok(())
    }

    fn check_seam(&self, seam: SeamId) -> Result<(), GraphError> {
        let a = self.position(seam.patch_a)?;
        let b = self.position(seam.patch_b)?;
        let adjacent = match seam.orientation {
            SeamOrientation::EastWest => b.row == a.row && b.col == a.col + 1,
            SeamOrientation::NorthSouth => b.col == a.col && b.row == a.row + 1,
        };
        if !adjacent || seam.patch_a == seam.patch_b {
            return Err(GraphError::NotAdjacent(seam));
        }
        Ok(())
    }

    pub fn position(&self, patch: PatchId) -> Result<GridPos, GraphError> {
        self.patch_slot(patch).map(|k| self.patches[k].1).ok_or(GraphError::UnknownPatch(patch))
    }

    fn patch_slot(&self, patch: PatchId) -> Option<usize> {
        self.patches.binary_search_by_key(&patch, |(p, _)| *p).ok()
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn rounds(&self) -> u32 {
        self.rounds
    }

    /// Number of `d`-round epochs, rounded up.
    pub fn epochs(&self) -> u32 {
        self.rounds.div_ceil(self.d)
    }

    pub fn patch_ids(&self) -> impl Iterator<Item = PatchId> + '_ {
        self.patches.iter().map(|(p, _)| *p)
    }

    pub fn patch_count(&self) -> usize {
        self.patches.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex(&self, v: VertexIdx) -> &VertexId {
        &self.vertices[v.index()]
    }

    pub fn edge(&self, e: EdgeIdx) -> &Edge {
        &self.edges[e.index()]
    }

    /// Edges incident to `v`, in increasing edge index.
    pub fn incident(&self, v: VertexIdx) -> &[EdgeIdx] {
        let lo = self.adj_offsets[v.index()] as usize;
        let hi = self.adj_offsets[v.index() + 1] as usize;
        &self.adj_edges[lo..hi]
    }

    pub fn seam_active(&self, seam: SeamId, round: u32) -> bool {
        self.seam_rounds.get(&seam).is_some_and(|r| r.get(round as usize).copied().unwrap_or(false))
    }

    /// Seams active in at least one round of `rounds`, in sorted order.
    pub fn active_seams(&self, rounds: Range<u32>) -> BTreeSet<SeamId> {
        self.seam_rounds
            .iter()
            .filter(|(_, active)| rounds.clone().any(|r| active.get(r as usize).copied().unwrap_or(false)))
            .map(|(s, _)| *s)
            .collect()
    }

    /// Total number of (seam, round) merge slots.
    pub fn merged_seam_rounds(&self) -> usize {
        self.seam_rounds.values().map(|r| r.iter().filter(|f| **f).count()).sum()
    }

    fn per_round(&self) -> u32 {
        self.d * (self.d - 1)
    }

    fn patch_base(&self, slot: usize) -> u32 {
        slot as u32 * self.rounds * self.per_round()
    }

    fn seam_len(&self, seam: SeamId) -> u32 {
        match seam.orientation {
            SeamOrientation::EastWest => self.d,
            SeamOrientation::NorthSouth => self.d - 1,
        }
    }

    /// Looks up the index of a vertex, if it exists in the current graph.
    pub fn index_of(&self, id: &VertexId) -> Option<VertexIdx> {
        match id.owner {
            Owner::Patch(p) => {
                let slot = self.patch_slot(p)?;
                if id.round >= self.rounds || id.row >= self.d || id.col >= self.d - 1 {
                    return None;
                }
                Some(VertexIdx(self.patch_vertex(slot, id.round, id.row, id.col)))
            }
            Owner::Seam(s) => {
                let base = *self.seam_base.get(&(s, id.round))?;
                let offset = match s.orientation {
                    SeamOrientation::EastWest if id.col == self.d - 1 && id.row < self.d => id.row,
                    SeamOrientation::NorthSouth if id.row == self.d && id.col < self.d - 1 => id.col,
                    _ => return None,
                };
                Some(VertexIdx(base + offset))
            }
        }
    }

    fn patch_vertex(&self, slot: usize, round: u32, row: u32, col: u32) -> u32 {
        self.patch_base(slot) + round * self.per_round() + row * (self.d - 1) + col
    }

    /// The block a vertex belongs to. Seam vertices belong to `patch_a`.
    pub fn block_of(&self, v: VertexIdx) -> BlockKey {
        let id = &self.vertices[v.index()];
        let patch = match id.owner {
            Owner::Patch(p) => p,
            Owner::Seam(s) => s.patch_a,
        };
        BlockKey { patch, epoch: id.round / self.d }
    }

    /// Contiguous vertex index ranges making up `block`, in increasing order.
    pub fn block_ranges(&self, block: BlockKey) -> Vec<Range<u32>> {
        let Some(slot) = self.patch_slot(block.patch) else {
            return Vec::new();
        };
        let start = block.epoch * self.d;
        if start >= self.rounds {
            return Vec::new();
        }
        let end = (start + self.d).min(self.rounds);
        let first = self.patch_vertex(slot, start, 0, 0);
        let last = self.patch_vertex(slot, end - 1, self.d - 1, self.d - 2) + 1;
        #[allow(clippy::single_range_in_vec_init)] // seam ranges are appended below
        let mut ranges = vec![first..last];
        for (&(seam, round), &base) in &self.seam_base {
            if seam.patch_a != block.patch || round < start || round >= end {
                continue;
            }
            let r = base..base + self.seam_len(seam);
            match ranges.last_mut() {
                Some(prev) if prev.end == r.start => prev.end = r.end,
                _ => ranges.push(r),
            }
        }
        ranges
    }

    /// Vertices with an odd number of incident edges in `edges` (the
    /// syndrome those flips would produce). Boundary endpoints are dropped.
    pub fn syndrome<I>(&self, edges: I) -> BTreeSet<VertexIdx>
    where
        I: IntoIterator<Item = EdgeIdx>,
    {
        let mut odd = BTreeSet::new();
        for e in edges {
            let edge = &self.edges[e.index()];
            toggle(&mut odd, edge.a);
            if let Endpoint::Vertex(b) = edge.b {
                toggle(&mut odd, b);
            }
        }
        odd
    }

    /// Per-patch parity of west-cut crossings in `edges`. Every patch of
    /// the graph has an entry.
    pub fn cut_parity<I>(&self, edges: I) -> BTreeMap<PatchId, bool>
    where
        I: IntoIterator<Item = EdgeIdx>,
    {
        let mut parity: BTreeMap<PatchId, bool> = self.patch_ids().map(|p| (p, false)).collect();
        for e in edges {
            if let Some(p) = self.edges[e.index()].cut {
                *parity.entry(p).or_default() ^= true;
            }
        }
        parity
    }

    fn rebuild(&mut self) {
        let d = self.d;
        let cols = d - 1;
        let rounds = self.rounds;

        let mut vertices = Vec::with_capacity(self.patches.len() * (rounds * self.per_round()) as usize);
        for &(p, _) in &self.patches {
            for round in 0..rounds {
                for row in 0..d {
                    for col in 0..cols {
                        vertices.push(VertexId { owner: Owner::Patch(p), round, row, col });
                    }
                }
            }
        }
        let mut seam_base = BTreeMap::new();
        for (&seam, active) in &self.seam_rounds {
            for round in (0..rounds).filter(|r| active[*r as usize]) {
                seam_base.insert((seam, round), vertices.len() as u32);
                for i in 0..self.seam_len(seam) {
                    let (row, col) = match seam.orientation {
                        SeamOrientation::EastWest => (i, d - 1),
                        SeamOrientation::NorthSouth => (d, i),
                    };
                    vertices.push(VertexId { owner: Owner::Seam(seam), round, row, col });
                }
            }
        }

        // boundary replacement: (patch, round) whose west/east boundary is a seam
        let mut west_seamed = BTreeSet::new();
        let mut east_seamed = BTreeSet::new();
        for &(seam, round) in seam_base.keys() {
            if seam.orientation == SeamOrientation::EastWest {
                east_seamed.insert((seam.patch_a, round));
                west_seamed.insert((seam.patch_b, round));
            }
        }

        let mut edges = Vec::new();
        for (slot, &(p, _)) in self.patches.iter().enumerate() {
            for round in 0..rounds {
                let west_open = !west_seamed.contains(&(p, round));
                let east_open = !east_seamed.contains(&(p, round));
                for row in 0..d {
                    for col in 0..cols {
                        let v = VertexIdx(self.patch_vertex(slot, round, row, col));
                        if col == 0 && west_open {
                            edges.push(Edge {
                                a: v,
                                b: Endpoint::Boundary(BoundarySide::West),
                                kind: EdgeKind::Space,
                                weight: 1,
                                cut: Some(p),
                            });
                        }
                        if col + 1 < cols {
                            edges.push(space(v, self.patch_vertex(slot, round, row, col + 1)));
                        }
                        if col == cols - 1 && east_open {
                            edges.push(Edge {
                                a: v,
                                b: Endpoint::Boundary(BoundarySide::East),
                                kind: EdgeKind::Space,
                                weight: 1,
                                cut: None,
                            });
                        }
                        if row + 1 < d {
                            edges.push(space(v, self.patch_vertex(slot, round, row + 1, col)));
                        }
                        if round + 1 < rounds {
                            edges.push(Edge {
                                a: v,
                                b: Endpoint::Vertex(VertexIdx(self.patch_vertex(slot, round + 1, row, col))),
                                kind: EdgeKind::Time,
                                weight: 1,
                                cut: None,
                            });
                        }
                    }
                }
            }
        }
        for (&(seam, round), &base) in &seam_base {
            let slot_a = self.patch_slot(seam.patch_a).expect("seam patches are validated");
            let slot_b = self.patch_slot(seam.patch_b).expect("seam patches are validated");
            let next = seam_base.get(&(seam, round + 1)).copied();
            for i in 0..self.seam_len(seam) {
                let s = VertexIdx(base + i);
                let (va, vb) = match seam.orientation {
                    SeamOrientation::EastWest => {
                        (self.patch_vertex(slot_a, round, i, cols - 1), self.patch_vertex(slot_b, round, i, 0))
                    }
                    SeamOrientation::NorthSouth => {
                        (self.patch_vertex(slot_a, round, d - 1, i), self.patch_vertex(slot_b, round, 0, i))
                    }
                };
                edges.push(Edge {
                    a: VertexIdx(va),
                    b: Endpoint::Vertex(s),
                    kind: EdgeKind::SeamSpace,
                    weight: 1,
                    cut: None,
                });
                edges.push(Edge {
                    a: VertexIdx(vb),
                    b: Endpoint::Vertex(s),
                    kind: EdgeKind::SeamSpace,
                    weight: 1,
                    cut: (seam.orientation == SeamOrientation::EastWest).then_some(seam.patch_b),
                });
                if let Some(next_base) = next {
                    edges.push(Edge {
                        a: s,
                        b: Endpoint::Vertex(VertexIdx(next_base + i)),
                        kind: EdgeKind::Time,
                        weight: 1,
                        cut: None,
                    });
                }
            }
        }

        let n = vertices.len();
        let mut degree = vec![0u32; n + 1];
        for edge in &edges {
            degree[edge.a.index() + 1] += 1;
            if let Endpoint::Vertex(b) = edge.b {
                degree[b.index() + 1] += 1;
            }
        }
        for i in 0..n {
            degree[i + 1] += degree[i];
        }
        let offsets = degree;
        let mut cursor = offsets.clone();
        let mut adj = vec![EdgeIdx(0); offsets[n] as usize];
        for (i, edge) in edges.iter().enumerate() {
            adj[cursor[edge.a.index()] as usize] = EdgeIdx(i as u32);
            cursor[edge.a.index()] += 1;
            if let Endpoint::Vertex(b) = edge.b {
                adj[cursor[b.index()] as usize] = EdgeIdx(i as u32);
                cursor[b.index()] += 1;
            }
        }
        for v in 0..n {
            adj[offsets[v] as usize..offsets[v + 1] as usize].sort_unstable();
        }

        self.vertices = vertices;
        self.seam_base = seam_base;
        self.edges = edges;
        self.adj_offsets = offsets;
        self.adj_edges = adj;
    }
}

fn space(a: VertexIdx, b: u32) -> Edge {
    Edge { a, b: Endpoint::Vertex(VertexIdx(b)), kind: EdgeKind::Space, weight: 1, cut: None }
}

fn toggle(set: &mut BTreeSet<VertexIdx>, v: VertexIdx) {
    if !set.remove(&v) {
        set.insert(v);
    }
}
