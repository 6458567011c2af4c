use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use super::HarnessError;
use crate::graph::{DecodingGraph, Endpoint, VertexIdx};

pub const ORACLE_MAX_DEFECTS: usize = 12;
pub const ORACLE_MAX_VERTICES: usize = 1024;

/// Shortest-path distances from `src` to every vertex, and to the nearest
/// real boundary.
fn distances(graph: &DecodingGraph, src: VertexIdx) -> (Vec<u32>, u32) {
    let mut dist = vec![u32::MAX; graph.vertex_count()];
    let mut boundary = u32::MAX;
    let mut heap = BinaryHeap::from([Reverse((0u32, src))]);
    dist[src.index()] = 0;
    while let Some(Reverse((dv, v))) = heap.pop() {
        if dv > dist[v.index()] {
            continue;
        }
        for &e in graph.incident(v) {
            let edge = graph.edge(e);
            let nd = dv + edge.weight;
            match edge.other(v) {
                Endpoint::Boundary(_) => boundary = boundary.min(nd),
                Endpoint::Vertex(w) => {
                    if nd < dist[w.index()] {
                        dist[w.index()] = nd;
                        heap.push(Reverse((nd, w)));
                    }
                }
            }
        }
    }
    (dist, boundary)
}

/// Exact minimum total weight of a correction whose syndrome is `defects`:
/// every defect is paired with another or with the boundary, over
/// shortest-path distances, by dynamic programming over defect subsets.
pub fn oracle_mwpm(graph: &DecodingGraph, defects: &BTreeSet<VertexIdx>) -> Result<u32, HarnessError> {
    let n = defects.len();
    if n > ORACLE_MAX_DEFECTS || graph.vertex_count() > ORACLE_MAX_VERTICES {
        return Err(HarnessError::OracleTooLarge { defects: n, vertices: graph.vertex_count() });
    }
    let ds: Vec<VertexIdx> = defects.iter().copied().collect();
    let mut pair = vec![vec![u32::MAX; n]; n];
    let mut bound = vec![u32::MAX; n];
    for (i, &v) in ds.iter().enumerate() {
        let (dist, b) = distances(graph, v);
        bound[i] = b;
        for (j, &w) in ds.iter().enumerate() {
            pair[i][j] = dist[w.index()];
        }
    }
    let full = (1usize << n) - 1;
    let mut best = vec![u32::MAX; 1 << n];
    best[0] = 0;
    for mask in 1..=full {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut v = best[rest].saturating_add(bound[i]);
        let mut others = rest;
        while others != 0 {
            let j = others.trailing_zeros() as usize;
            others &= others - 1;
            v = v.min(best[rest & !(1 << j)].saturating_add(pair[i][j]));
        }
        best[mask] = v;
    }
    Ok(best[full])
}
