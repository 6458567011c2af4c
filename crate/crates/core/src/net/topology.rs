use serde::{Deserialize, Serialize};

use super::NetError;
use crate::window::LeafId;

pub type NodeId = u16;

/// Which physical link a hop uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Link {
    Tree,
    Grid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub from: NodeId,
    pub to: NodeId,
    pub link: Link,
}

/// Hybrid tree-grid network: a balanced `fanout`-ary tree from the root
/// through router levels down to the leaves, plus grid links between
/// grid-adjacent leaves.
///
/// Node ids are assigned level by level: the root is 0, leaves come last in
/// row-major leaf order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    fanout: u32,
    rows: u32,
    cols: u32,
    level_start: Vec<u32>,
    level_size: Vec<u32>,
}

pub fn build_topology(n_leaves: u32, fanout: u32, rows: u32, cols: u32) -> Result<Topology, NetError> {
    if fanout < 2 {
        return Err(NetError::Fanout(fanout));
    }
    if n_leaves == 0 || rows.checked_mul(cols) != Some(n_leaves) {
        return Err(NetError::Dims { n_leaves, rows, cols });
    }
    let mut depth = 1;
    let mut reach = fanout as u64;
    while reach < n_leaves as u64 {
        reach *= fanout as u64;
        depth += 1;
    }
    let mut level_size = vec![0u32; depth + 1];
    level_size[depth] = n_leaves;
    for l in (0..depth).rev() {
        level_size[l] = level_size[l + 1].div_ceil(fanout);
    }
    let mut level_start = Vec::with_capacity(depth + 1);
    let mut next = 0u32;
    for s in &level_size {
        level_start.push(next);
        next += s;
    }
    if next > u16::MAX as u32 + 1 {
        return Err(NetError::TooManyNodes(next));
    }
    Ok(Topology { fanout, rows, cols, level_start, level_size })
}

impl Topology {
    pub fn fanout(&self) -> u32 {
        self.fanout
    }

    pub fn leaf_count(&self) -> u32 {
        self.rows * self.cols
    }

    pub fn grid(&self) -> (u32, u32) {
        (self.rows, self.cols)
    }

    /// Number of tree edges between the root and any leaf.
    pub fn depth(&self) -> u32 {
        self.level_size.len() as u32 - 1
    }

    /// Number of node levels, root and leaves included.
    pub fn levels(&self) -> u32 {
        self.level_size.len() as u32
    }

    pub fn node_count(&self) -> u32 {
        self.level_size.iter().sum()
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn leaf_node(&self, leaf: LeafId) -> NodeId {
        (self.level_start[self.depth() as usize] + leaf) as NodeId
    }

    pub fn node_leaf(&self, node: NodeId) -> Option<LeafId> {
        let start = self.level_start[self.depth() as usize];
        (node as u32 >= start && (node as u32) < start + self.leaf_count()).then(|| node as u32 - start)
    }

    fn level_of(&self, node: NodeId) -> Option<usize> {
        let n = node as u32;
        (0..self.level_size.len()).find(|&l| n >= self.level_start[l] && n < self.level_start[l] + self.level_size[l])
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.level_of(node).is_some()
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        let l = self.level_of(node)?;
        if l == 0 {
            return None;
        }
        let idx = node as u32 - self.level_start[l];
        Some((self.level_start[l - 1] + idx / self.fanout) as NodeId)
    }

    pub fn children(&self, node: NodeId) -> Vec<NodeId> {
        let Some(l) = self.level_of(node) else { return Vec::new() };
        if l + 1 >= self.level_size.len() {
            return Vec::new();
        }
        let idx = node as u32 - self.level_start[l];
        let first = idx * self.fanout;
        let last = ((idx + 1) * self.fanout).min(self.level_size[l + 1]);
        (first..last).map(|i| (self.level_start[l + 1] + i) as NodeId).collect()
    }

    pub fn grid_adjacent(&self, a: LeafId, b: LeafId) -> bool {
        let (ra, ca) = (a / self.cols, a % self.cols);
        let (rb, cb) = (b / self.cols, b % self.cols);
        ra.abs_diff(rb) + ca.abs_diff(cb) == 1
    }

    /// Hops along the tree from `from` up to the lowest common ancestor and
    /// down to `to`.
    pub fn tree_path(&self, from: NodeId, to: NodeId) -> Result<Vec<Hop>, NetError> {
        let (Some(mut la), Some(mut lb)) = (self.level_of(from), self.level_of(to)) else {
            return Err(NetError::UnknownNode(if self.contains(from) { to } else { from }));
        };
        let (mut a, mut b) = (from, to);
        let mut up = Vec::new();
        let mut down = Vec::new();
        while la > lb {
            let p = self.parent(a).expect("below root");
            up.push(Hop { from: a, to: p, link: Link::Tree });
            a = p;
            la -= 1;
        }
        while lb > la {
            let p = self.parent(b).expect("below root");
            down.push(Hop { from: p, to: b, link: Link::Tree });
            b = p;
            lb -= 1;
        }
        while a != b {
            let (pa, pb) = (self.parent(a).expect("below root"), self.parent(b).expect("below root"));
            up.push(Hop { from: a, to: pa, link: Link::Tree });
            down.push(Hop { from: pb, to: b, link: Link::Tree });
            a = pa;
            b = pb;
        }
        down.reverse();
        up.extend(down);
        Ok(up)
    }

    /// Route for a message of kind `header` from `from` to `to`. Boundary
    /// information between grid-adjacent leaves takes the grid link; all
    /// other traffic uses the tree.
    pub fn route(&self, header: u8, from: NodeId, to: NodeId) -> Result<Vec<Hop>, NetError> {
        if !self.contains(to) {
            return Err(NetError::UnknownNode(to));
        }
        if super::codec::header::is_boundary_info(header) {
            if let (Some(a), Some(b)) = (self.node_leaf(from), self.node_leaf(to)) {
                if self.grid_adjacent(a, b) {
                    return Ok(vec![Hop { from, to, link: Link::Grid }]);
                }
            }
        }
        self.tree_path(from, to)
    }

    /// Largest tree hop count between any two leaves.
    pub fn max_leaf_hops(&self) -> u32 {
        let n = self.leaf_count();
        if n < 2 {
            return 0;
        }
        // the two leaves whose ancestors split earliest are the first and last
        let mut worst = 0;
        for a in [0, n - 1] {
            for b in 0..n {
                let hops = self.tree_path(self.leaf_node(a), self.leaf_node(b)).map(|p| p.len() as u32).unwrap_or(0);
                worst = worst.max(hops);
            }
        }
        worst
    }
}
