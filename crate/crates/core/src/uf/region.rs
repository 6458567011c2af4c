use std::collections::BTreeMap;
use std::sync::Arc;

use crate::graph::{BlockKey, DecodingGraph, EdgeIdx, Endpoint, PatchId, VertexIdx};

/// Identity of the face between two blocks, stored with `lo < hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FaceId {
    pub lo: BlockKey,
    pub hi: BlockKey,
}

impl FaceId {
    pub fn new(a: BlockKey, b: BlockKey) -> Self {
        if a <= b {
            FaceId { lo: a, hi: b }
        } else {
            FaceId { lo: b, hi: a }
        }
    }

    pub fn touches(&self, block: BlockKey) -> bool {
        self.lo == block || self.hi == block
    }
}

/// How a region treats edges leaving it through a face.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FaceMode {
    /// Artificial boundary awaiting fusion: clusters that reach it stop
    /// growing and are not peeled.
    Suspend,
    /// Boundary whose crossings are committed to a downstream window:
    /// behaves like a real boundary.
    Absorb,
    /// Edge removed from the region.
    Closed,
}

/// Decides the mode of the face between a block inside the region and a
/// block outside it.
#[derive(Clone, Debug, Default)]
pub enum FacePolicy {
    /// Every face is an artificial boundary awaiting fusion.
    #[default]
    Suspend,
    /// Parallel-window assignment: faces towards blocks on the same leaf are
    /// suspended, faces towards higher-group leaves absorb, faces towards
    /// lower-group leaves are closed.
    Windows(Arc<WindowMap>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowMap {
    pub leaf_of: BTreeMap<PatchId, u32>,
    pub group_of: Vec<u8>,
}

impl WindowMap {
    pub fn leaf(&self, patch: PatchId) -> u32 {
        self.leaf_of[&patch]
    }

    pub fn group(&self, leaf: u32) -> u8 {
        self.group_of[leaf as usize]
    }
}

impl FacePolicy {
    pub fn mode(&self, inside: BlockKey, outside: BlockKey) -> FaceMode {
        match self {
            FacePolicy::Suspend => FaceMode::Suspend,
            FacePolicy::Windows(map) => {
                let (li, lo) = (map.leaf(inside.patch), map.leaf(outside.patch));
                if li == lo {
                    FaceMode::Suspend
                } else if map.group(lo) > map.group(li) {
                    FaceMode::Absorb
                } else {
                    FaceMode::Closed
                }
            }
        }
    }
}

/// Where the far end of a region edge lands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Vertex(u32),
    Real,
    Face(u16),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegionEdge {
    pub global: EdgeIdx,
    pub a: u32,
    pub b: Target,
    /// Growth needed to fill the edge, in half-steps. Edges to a suspended
    /// face need half of that: each side owns one half of the edge.
    pub full: u32,
    pub cut: Option<PatchId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FaceRef {
    pub id: FaceId,
    pub mode: FaceMode,
}

/// An immutable, locally indexed view of a vertex subset of the decoding
/// graph. Local vertex and edge indices follow global order.
#[derive(Debug)]
pub struct Region {
    graph: Arc<DecodingGraph>,
    policy: FacePolicy,
    committed: Option<u32>,
    vertices: Vec<VertexIdx>,
    edges: Vec<RegionEdge>,
    faces: Vec<FaceRef>,
    adj_offsets: Vec<u32>,
    adj: Vec<u32>,
}

impl Region {
    /// Region over the given vertices. Edges to vertices outside take the
    /// policy's face mode, except that vertices of epochs `<= committed`
    /// outside the region are closed, and absorbing faces are closed for
    /// inside vertices of those epochs.
    pub fn build(
        graph: Arc<DecodingGraph>,
        mut vertices: Vec<VertexIdx>,
        policy: FacePolicy,
        committed: Option<u32>,
    ) -> Self {
        vertices.sort_unstable();
        vertices.dedup();
        let is_old = |v: VertexIdx| committed.is_some_and(|c| graph.block_of(v).epoch <= c);
        let mut faces: Vec<FaceRef> = Vec::new();
        let mut edges = Vec::new();
        for (local, &v) in vertices.iter().enumerate() {
            let inside_block = graph.block_of(v);
            for &e in graph.incident(v) {
                let edge = graph.edge(e);
                let target = match edge.other(v) {
                    Endpoint::Boundary(_) => Target::Real,
                    Endpoint::Vertex(w) => match vertices.binary_search(&w) {
                        Ok(wl) => {
                            if w < v {
                                continue;
                            }
                            Target::Vertex(wl as u32)
                        }
                        Err(_) => {
                            if is_old(w) {
                                continue;
                            }
                            let outside_block = graph.block_of(w);
                            let mode = policy.mode(inside_block, outside_block);
                            if mode == FaceMode::Closed || (mode == FaceMode::Absorb && is_old(v)) {
                                continue;
                            }
                            let id = FaceId::new(inside_block, outside_block);
                            let slot = match faces.iter().position(|f| f.id == id) {
                                Some(s) => s,
                                None => {
                                    faces.push(FaceRef { id, mode });
                                    faces.len() - 1
                                }
                            };
                            Target::Face(slot as u16)
                        }
                    },
                };
                // a suspended face sits at the midpoint of the crossing edge
                let full = match target {
                    Target::Face(slot) if faces[slot as usize].mode == FaceMode::Suspend => edge.weight,
                    _ => 2 * edge.weight,
                };
                edges.push(RegionEdge { global: e, a: local as u32, b: target, full, cut: edge.cut });
            }
        }
        edges.sort_unstable_by_key(|e| e.global);
        let mut degree = vec![0u32; vertices.len() + 1];
        for e in &edges {
            degree[e.a as usize + 1] += 1;
            if let Target::Vertex(b) = e.b {
                degree[b as usize + 1] += 1;
            }
        }
        for i in 1..degree.len() {
            degree[i] += degree[i - 1];
        }
        let adj_offsets = degree;
        let mut fill = adj_offsets.clone();
        let mut adj = vec![0u32; *adj_offsets.last().unwrap() as usize];
        for (i, e) in edges.iter().enumerate() {
            adj[fill[e.a as usize] as usize] = i as u32;
            fill[e.a as usize] += 1;
            if let Target::Vertex(b) = e.b {
                adj[fill[b as usize] as usize] = i as u32;
                fill[b as usize] += 1;
            }
        }
        Region { graph, policy, committed, vertices, edges, faces, adj_offsets, adj }
    }

    /// Region covering the given blocks.
    pub fn blocks(graph: Arc<DecodingGraph>, blocks: &[BlockKey], policy: FacePolicy) -> Self {
        let vertices = blocks.iter().flat_map(|b| graph.block_ranges(*b)).flatten().map(VertexIdx).collect();
        Self::build(graph, vertices, policy, None)
    }

    /// Region covering the whole graph.
    pub fn whole(graph: Arc<DecodingGraph>) -> Self {
        let vertices = (0..graph.vertex_count() as u32).map(VertexIdx).collect();
        Self::build(graph, vertices, FacePolicy::Suspend, None)
    }

    pub fn graph(&self) -> &Arc<DecodingGraph> {
        &self.graph
    }

    pub fn policy(&self) -> &FacePolicy {
        &self.policy
    }

    pub fn committed(&self) -> Option<u32> {
        self.committed
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[VertexIdx] {
        &self.vertices
    }

    pub fn global(&self, local: u32) -> VertexIdx {
        self.vertices[local as usize]
    }

    pub fn local(&self, v: VertexIdx) -> Option<u32> {
        self.vertices.binary_search(&v).ok().map(|i| i as u32)
    }

    pub fn edges(&self) -> &[RegionEdge] {
        &self.edges
    }

    pub fn edge(&self, e: u32) -> &RegionEdge {
        &self.edges[e as usize]
    }

    pub fn local_edge(&self, e: EdgeIdx) -> Option<u32> {
        self.edges.binary_search_by_key(&e, |r| r.global).ok().map(|i| i as u32)
    }

    pub fn incident(&self, v: u32) -> &[u32] {
        &self.adj[self.adj_offsets[v as usize] as usize..self.adj_offsets[v as usize + 1] as usize]
    }

    pub fn faces(&self) -> &[FaceRef] {
        &self.faces
    }

    pub fn face(&self, slot: u16) -> FaceRef {
        self.faces[slot as usize]
    }

    /// Faces suspended on both `self` and `other`.
    pub fn shared_faces(&self, other: &Region) -> Vec<FaceId> {
        self.faces
            .iter()
            .filter(|f| f.mode == FaceMode::Suspend)
            .filter(|f| other.faces.iter().any(|g| g.id == f.id && g.mode == FaceMode::Suspend))
            .map(|f| f.id)
            .collect()
    }
}
