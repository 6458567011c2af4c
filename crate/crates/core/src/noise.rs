//! Phenomenological noise sampling and random merge/split schedules.
//!
//! Every edge of the decoding graph flips independently with probability
//! `p`: space edges are data-qubit errors, time edges are measurement errors.
//! The last round has no outgoing time edges, so it is measured perfectly.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use thiserror::Error;

use crate::graph::{DecodingGraph, EdgeIdx, Layout, PatchId, SeamId, VertexIdx};

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams {
    pub p: f64,
    pub seed: u64,
}

impl NoiseParams {
    pub fn new(p: f64, seed: u64) -> Result<Self, NoiseError> {
        check_probability(p)?;
        Ok(NoiseParams { p, seed })
    }

    /// Parameters for Monte-Carlo trial `trial`: the seed is `seed ^ trial`.
    pub fn for_trial(&self, trial: u64) -> Self {
        NoiseParams { p: self.p, seed: self.seed ^ trial }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

fn check_probability(p: f64) -> Result<(), NoiseError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(NoiseError::InvalidProbability(p))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorSample {
    /// Flipped edges in increasing index order.
    pub flipped: Vec<EdgeIdx>,
    pub defects: BTreeSet<VertexIdx>,
    /// Per-patch parity of flipped edges crossing the patch's west cut.
    pub true_logical: BTreeMap<PatchId, bool>,
}

impl ErrorSample {
    pub fn from_edges(graph: &DecodingGraph, mut flipped: Vec<EdgeIdx>) -> Self {
        flipped.sort_unstable();
        flipped.dedup();
        let defects = graph.syndrome(flipped.iter().copied());
        let true_logical = graph.cut_parity(flipped.iter().copied());
        ErrorSample { flipped, defects, true_logical }
    }
}

pub fn sample_errors(graph: &DecodingGraph, params: &NoiseParams) -> ErrorSample {
    sample_with_rng(graph, params.p, &mut params.rng())
}

pub fn sample_with_rng<R: Rng + ?Sized>(graph: &DecodingGraph, p: f64, rng: &mut R) -> ErrorSample {
    ErrorSample::from_edges(graph, sample_flips(graph.edge_count(), p, rng))
}

/// Indices in `0..n` kept independently with probability `p`, found by
/// geometric skipping so the cost scales with the number of flips.
pub fn sample_flips<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Vec<EdgeIdx> {
    if p <= 0.0 || n == 0 {
        return Vec::new();
    }
    if p >= 1.0 {
        return (0..n as u32).map(EdgeIdx).collect();
    }
    let skip = Geometric::new(p).expect("0 < p < 1");
    let mut flips = Vec::new();
    let mut i: u64 = 0;
    loop {
        i = i.saturating_add(skip.sample(rng));
        if i >= n as u64 {
            return flips;
        }
        flips.push(EdgeIdx(i as u32));
        i += 1;
    }
}

/// Independent per-seam activations before conflict resolution: entry
/// `[e]` lists every adjacent seam whose coin came up active in epoch `e`.
pub fn raw_merge_draws(
    layout: &Layout,
    epochs: u32,
    prob: f64,
    seed: u64,
) -> Result<Vec<BTreeSet<SeamId>>, NoiseError> {
    check_probability(prob)?;
    let seams = layout.adjacent_seams();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..epochs).map(|_| seams.iter().copied().filter(|_| rng.random_bool(prob)).collect()).collect())
}

/// Random merge schedule: each adjacent seam is drawn active with
/// probability `prob` per epoch, then each patch keeps only the smallest of
/// its active seams so it joins at most one merge per epoch.
pub fn random_merge_schedule(
    layout: &Layout,
    epochs: u32,
    prob: f64,
    seed: u64,
) -> Result<Vec<BTreeSet<SeamId>>, NoiseError> {
    Ok(raw_merge_draws(layout, epochs, prob, seed)?.into_iter().map(resolve_conflicts).collect())
}

fn resolve_conflicts(draws: BTreeSet<SeamId>) -> BTreeSet<SeamId> {
    let mut busy = BTreeSet::new();
    let mut kept = BTreeSet::new();
    for seam in draws {
        if busy.contains(&seam.patch_a) || busy.contains(&seam.patch_b) {
            continue;
        }
        busy.insert(seam.patch_a);
        busy.insert(seam.patch_b);
        kept.insert(seam);
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_patch_graph, Endpoint, GridPos};

    #[test]
    fn zero_noise_is_silent() {
        let g = build_patch_graph(5, 5).unwrap();
        let s = sample_errors(&g, &NoiseParams::new(0.0, 3).unwrap());
        assert!(s.flipped.is_empty() && s.defects.is_empty());
        assert!(s.true_logical.values().all(|b| !b));
    }

    #[test]
    fn full_noise_flips_every_edge() {
        let g = build_patch_graph(3, 1).unwrap();
        let s = sample_errors(&g, &NoiseParams::new(1.0, 3).unwrap());
        assert_eq!(s.flipped.len(), 13);
        // hand count: each vertex's degree parity
        let mut expected = BTreeSet::new();
        for v in 0..g.vertex_count() {
            if g.incident(VertexIdx(v as u32)).len() % 2 == 1 {
                expected.insert(VertexIdx(v as u32));
            }
        }
        assert_eq!(s.defects, expected);
        // corners have degree 3 (two space + one boundary), the middle row 4 or 3
        assert_eq!(s.defects.len(), 4);
        // three west boundary edges cross the cut
        assert!(s.true_logical[&PatchId(0)]);
    }

    #[test]
    fn rejects_bad_probability() {
        assert_eq!(NoiseParams::new(1.5, 0), Err(NoiseError::InvalidProbability(1.5)));
        assert!(random_merge_schedule(&Layout::grid(3, 1, 2).unwrap(), 2, -0.1, 0).is_err());
    }

    #[test]
    fn same_seed_same_sample() {
        let g = build_patch_graph(5, 10).unwrap();
        let params = NoiseParams::new(0.05, 99).unwrap();
        assert_eq!(sample_errors(&g, &params), sample_errors(&g, &params));
        assert_ne!(sample_errors(&g, &params.for_trial(1)), sample_errors(&g, &params));
    }

    #[test]
    fn flipped_edges_reproduce_defects() {
        let g = build_patch_graph(5, 5).unwrap();
        for t in 0..50 {
            let s = sample_errors(&g, &NoiseParams::new(0.08, 7).unwrap().for_trial(t));
            assert_eq!(g.syndrome(s.flipped.iter().copied()), s.defects);
            let boundary = s.flipped.iter().filter(|e| matches!(g.edge(**e).b, Endpoint::Boundary(_))).count();
            assert_eq!((s.defects.len() + boundary) % 2, 0);
        }
    }

    #[test]
    fn schedule_extremes() {
        let layout = Layout::grid(3, 1, 2).unwrap();
        assert!(random_merge_schedule(&layout, 5, 0.0, 1).unwrap().iter().all(|e| e.is_empty()));
        assert!(random_merge_schedule(&layout, 5, 1.0, 1).unwrap().iter().all(|e| e.len() == 1));
    }

    #[test]
    fn conflicts_keep_smallest_seam() {
        let layout = Layout::grid(3, 2, 2).unwrap();
        let schedule = random_merge_schedule(&layout, 1, 1.0, 5).unwrap();
        let smallest = layout.adjacent_seams()[0];
        assert!(schedule[0].contains(&smallest));
        let mut used = BTreeSet::new();
        for s in &schedule[0] {
            assert!(used.insert(s.patch_a) && used.insert(s.patch_b));
        }
        assert_eq!(schedule[0].len(), 2);
    }

    #[test]
    fn single_patch_layout_has_no_seams() {
        let mut layout = Layout::new(3).unwrap();
        layout.add_patch(PatchId(4), GridPos::new(2, 2)).unwrap();
        assert_eq!(random_merge_schedule(&layout, 3, 1.0, 0).unwrap().len(), 3);
    }
}
