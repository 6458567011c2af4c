use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::stats::Rate;
use super::HarnessError;
use crate::fusion::fuse_all;
use crate::graph::{BlockKey, DecodingGraph, Layout, PatchId};
use crate::noise::{sample_errors, ErrorSample, NoiseParams};
use crate::uf::{decode_region, Correction, FacePolicy, Region, UfState};

/// Two patches merged across their east-west seam for one epoch, with the
/// regions of both decoding paths built once.
pub struct MergedPair {
    pub graph: Arc<DecodingGraph>,
    left: Arc<Region>,
    right: Arc<Region>,
    whole: Arc<Region>,
}

/// Logical failures of one trial on each path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PairOutcome {
    pub fusion_fail: bool,
    pub global_fail: bool,
}

impl MergedPair {
    pub fn new(d: u32) -> Result<Self, HarnessError> {
        let mut layout = Layout::grid(d, 1, 2)?;
        let seam = layout.seam_between(PatchId(0), PatchId(1))?;
        layout.activate(0, seam)?;
        let graph = Arc::new(DecodingGraph::from_layout(&layout)?);
        let region =
            |p: u32| Arc::new(Region::blocks(graph.clone(), &[BlockKey::new(PatchId(p), 0)], FacePolicy::Suspend));
        let (left, right) = (region(0), region(1));
        let whole = Arc::new(Region::whole(graph.clone()));
        Ok(MergedPair { graph, left, right, whole })
    }

    /// Decodes each block alone and fuses them.
    pub fn decode_fused(&self, sample: &ErrorSample) -> Result<Correction, HarnessError> {
        let mut parts = Vec::with_capacity(2);
        for region in [&self.left, &self.right] {
            let defects: BTreeSet<_> = sample.defects.iter().copied().filter(|v| region.local(*v).is_some()).collect();
            let mut state = UfState::new(region.clone(), &defects)?;
            state.decode()?;
            parts.push(state);
        }
        Ok(fuse_all(parts, Some(self.whole.clone()))?.1)
    }

    pub fn decode_global(&self, sample: &ErrorSample) -> Result<Correction, HarnessError> {
        Ok(decode_region(self.whole.clone(), &sample.defects)?.1)
    }

    pub fn trial(&self, params: &NoiseParams) -> Result<PairOutcome, HarnessError> {
        let sample = sample_errors(&self.graph, params);
        let fused = self.decode_fused(&sample)?;
        let global = self.decode_global(&sample)?;
        Ok(PairOutcome {
            fusion_fail: logical_failure(&self.graph, &sample, &fused)?,
            global_fail: logical_failure(&self.graph, &sample, &global)?,
        })
    }
}

/// Checks that `c` clears every defect and reports whether it leaves a
/// logical error on any patch.
pub fn logical_failure(graph: &DecodingGraph, sample: &ErrorSample, c: &Correction) -> Result<bool, HarnessError> {
    if graph.syndrome(c.edges.iter().copied()) != sample.defects {
        return Err(HarnessError::InvalidCorrection);
    }
    Ok(graph.patch_ids().any(|p| c.flips(p) != sample.true_logical.get(&p).copied().unwrap_or(false)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub d: u32,
    pub p: f64,
    pub trials: u64,
    pub fusion_errors: u64,
    pub fusion_ler: f64,
    pub fusion_lo: f64,
    pub fusion_hi: f64,
    pub global_errors: u64,
    pub global_ler: f64,
    pub global_lo: f64,
    pub global_hi: f64,
}

/// Largest relative difference tolerated between resolved estimates,
/// before interval slack.
pub const MAX_RELATIVE_DIFFERENCE: f64 = 0.10;
/// Estimates count as resolved when their interval half-width is below this
/// fraction of the estimate.
pub const RESOLVED_HALF_WIDTH: f64 = 0.30;

impl AccuracyRow {
    fn new(d: u32, p: f64, fusion: Rate, global: Rate) -> Self {
        AccuracyRow {
            d,
            p,
            trials: fusion.trials,
            fusion_errors: fusion.errors,
            fusion_ler: fusion.estimate,
            fusion_lo: fusion.lo,
            fusion_hi: fusion.hi,
            global_errors: global.errors,
            global_ler: global.estimate,
            global_lo: global.lo,
            global_hi: global.hi,
        }
    }

    pub fn fusion(&self) -> Rate {
        Rate::new(self.fusion_errors, self.trials)
    }

    pub fn global(&self) -> Rate {
        Rate::new(self.global_errors, self.trials)
    }

    /// Relative difference of the two estimates, against the global one.
    pub fn relative_difference(&self) -> f64 {
        if self.global_ler == 0.0 {
            if self.fusion_ler == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.fusion_ler - self.global_ler).abs() / self.global_ler
        }
    }

    /// Intervals overlap and, when both estimates are resolved, the
    /// estimates differ by less than 10% plus the combined relative
    /// half-width.
    pub fn consistent(&self) -> bool {
        let (f, g) = (self.fusion(), self.global());
        if !f.overlaps(&g) {
            return false;
        }
        if f.relative_half_width() >= RESOLVED_HALF_WIDTH || g.relative_half_width() >= RESOLVED_HALF_WIDTH {
            return true;
        }
        let slack = (f.relative_half_width().powi(2) + g.relative_half_width().powi(2)).sqrt();
        self.relative_difference() < MAX_RELATIVE_DIFFERENCE + slack
    }
}

/// Seed of the (d, p) point, so points draw independent samples.
fn point_seed(seed: u64, d: u32, pi: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((d as u64) << 40) ^ ((pi as u64) << 32)
}

/// Fusion-path and global logical error rates on the merged pair for each
/// (d, p), on identical samples.
pub fn cmd_accuracy(ds: &[u32], ps: &[f64], trials: u64, seed: u64) -> Result<Vec<AccuracyRow>, HarnessError> {
    if trials == 0 {
        return Err(HarnessError::NoTrials);
    }
    let mut rows = Vec::new();
    for &d in ds {
        let pair = MergedPair::new(d)?;
        for (pi, &p) in ps.iter().enumerate() {
            let params = NoiseParams::new(p, point_seed(seed, d, pi))?;
            let (fusion, global) = (0..trials)
                .into_par_iter()
                .map(|t| pair.trial(&params.for_trial(t)).map(|o| (o.fusion_fail as u64, o.global_fail as u64)))
                .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
            rows.push(AccuracyRow::new(d, p, Rate::new(fusion, trials), Rate::new(global, trials)));
        }
    }
    Ok(rows)
}
