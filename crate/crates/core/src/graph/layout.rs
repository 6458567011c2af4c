use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_distance, GraphError, PatchId, SeamId, SeamOrientation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridPos {
    pub row: u32,
    pub col: u32,
}

impl GridPos {
    pub const fn new(row: u32, col: u32) -> Self {
        GridPos { row, col }
    }
}

/// Patch placement on the logical grid plus the per-epoch seam schedule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    d: u32,
    patches: BTreeMap<PatchId, GridPos>,
    by_pos: BTreeMap<GridPos, PatchId>,
    schedule: Vec<BTreeSet<SeamId>>,
}

impl Layout {
    pub fn new(d: u32) -> Result<Self, GraphError> {
        check_distance(d)?;
        Ok(Layout { d, patches: BTreeMap::new(), by_pos: BTreeMap::new(), schedule: Vec::new() })
    }

    /// `rows × cols` patches numbered row-major from 0.
    pub fn grid(d: u32, rows: u32, cols: u32) -> Result<Self, GraphError> {
        let mut layout = Self::new(d)?;
        for r in 0..rows {
            for c in 0..cols {
                layout.add_patch(PatchId(r * cols + c), GridPos::new(r, c))?;
            }
        }
        Ok(layout)
    }

    pub fn add_patch(&mut self, id: PatchId, pos: GridPos) -> Result<(), GraphError> {
        if self.patches.contains_key(&id) {
            return Err(GraphError::DuplicatePatch(id));
        }
        if self.by_pos.contains_key(&pos) {
            return Err(GraphError::OccupiedPosition { row: pos.row, col: pos.col });
        }
        self.patches.insert(id, pos);
        self.by_pos.insert(pos, id);
        Ok(())
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn patch_count(&self) -> usize {
        self.patches.len()
    }

    pub fn patches(&self) -> impl Iterator<Item = (PatchId, GridPos)> + '_ {
        self.patches.iter().map(|(p, pos)| (*p, *pos))
    }

    pub fn position(&self, id: PatchId) -> Option<GridPos> {
        self.patches.get(&id).copied()
    }

    pub fn patch_at(&self, pos: GridPos) -> Option<PatchId> {
        self.by_pos.get(&pos).copied()
    }

    /// The seam joining two grid-adjacent patches, with `patch_a` west/north.
    pub fn seam_between(&self, p: PatchId, q: PatchId) -> Result<SeamId, GraphError> {
        let pp = self.position(p).ok_or(GraphError::UnknownPatch(p))?;
        let qp = self.position(q).ok_or(GraphError::UnknownPatch(q))?;
        let (a, b, pa, pb) = if (pp.row, pp.col) <= (qp.row, qp.col) { (p, q, pp, qp) } else { (q, p, qp, pp) };
        let orientation = if pa.row == pb.row && pb.col == pa.col + 1 {
            SeamOrientation::EastWest
        } else if pa.col == pb.col && pb.row == pa.row + 1 {
            SeamOrientation::NorthSouth
        } else {
            return Err(GraphError::NotAdjacent(SeamId {
                patch_a: a,
                patch_b: b,
                orientation: SeamOrientation::EastWest,
            }));
        };
        Ok(SeamId { patch_a: a, patch_b: b, orientation })
    }

    /// Every seam between grid-adjacent patches, sorted.
    pub fn adjacent_seams(&self) -> Vec<SeamId> {
        let mut seams = Vec::new();
        for (&p, &pos) in &self.patches {
            if let Some(&q) = self.by_pos.get(&GridPos::new(pos.row, pos.col + 1)) {
                seams.push(SeamId { patch_a: p, patch_b: q, orientation: SeamOrientation::EastWest });
            }
            if let Some(&q) = self.by_pos.get(&GridPos::new(pos.row + 1, pos.col)) {
                seams.push(SeamId { patch_a: p, patch_b: q, orientation: SeamOrientation::NorthSouth });
            }
        }
        seams.sort();
        seams
    }

    fn validate_seam(&self, seam: SeamId) -> Result<(), GraphError> {
        match self.seam_between(seam.patch_a, seam.patch_b) {
            Ok(s) if s == seam => Ok(()),
            _ => Err(GraphError::NotAdjacent(seam)),
        }
    }

    pub fn epochs(&self) -> u32 {
        self.schedule.len() as u32
    }

    pub fn schedule(&self) -> &[BTreeSet<SeamId>] {
        &self.schedule
    }

    /// Replaces the whole merge schedule; every seam must join adjacent patches.
    pub fn set_schedule(&mut self, schedule: Vec<BTreeSet<SeamId>>) -> Result<(), GraphError> {
        for seam in schedule.iter().flatten() {
            self.validate_seam(*seam)?;
        }
        self.schedule = schedule;
        Ok(())
    }

    /// Extends the schedule to at least `epochs` epochs with idle epochs.
    pub fn pad_epochs(&mut self, epochs: u32) {
        while self.schedule.len() < epochs as usize {
            self.schedule.push(BTreeSet::new());
        }
    }

    pub fn activate(&mut self, epoch: u32, seam: SeamId) -> Result<(), GraphError> {
        self.validate_seam(seam)?;
        self.pad_epochs(epoch + 1);
        self.schedule[epoch as usize].insert(seam);
        Ok(())
    }

    pub fn to_config(&self) -> LayoutConfig {
        LayoutConfig {
            d: self.d,
            patches: self.patches.iter().map(|(p, pos)| PatchConfig { id: p.0, row: pos.row, col: pos.col }).collect(),
            schedule: self
                .schedule
                .iter()
                .map(|seams| seams.iter().map(|s| [s.patch_a.0, s.patch_b.0]).collect())
                .collect(),
        }
    }

    pub fn from_config(config: &LayoutConfig) -> Result<Self, GraphError> {
        let mut layout = Self::new(config.d)?;
        for p in &config.patches {
            layout.add_patch(PatchId(p.id), GridPos::new(p.row, p.col))?;
        }
        let mut schedule = Vec::with_capacity(config.schedule.len());
        for epoch in &config.schedule {
            let mut seams = BTreeSet::new();
            for [a, b] in epoch {
                seams.insert(layout.seam_between(PatchId(*a), PatchId(*b))?);
            }
            schedule.push(seams);
        }
        layout.schedule = schedule;
        Ok(layout)
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let config: LayoutConfig = serde_json::from_str(text).map_err(|e| GraphError::Config(e.to_string()))?;
        Self::from_config(&config)
    }

    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path).map_err(|e| GraphError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// On-disk layout description.
///
/// ```json
/// { "d": 5,
///   "patches": [{"id": 0, "row": 0, "col": 0}, {"id": 1, "row": 0, "col": 1}],
///   "schedule": [[], [[0, 1]], []] }
/// ```
///
/// `schedule[e]` lists the patch pairs merged during epoch `e`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutConfig {
    pub d: u32,
    pub patches: Vec<PatchConfig>,
    #[serde(default)]
    pub schedule: Vec<Vec<[u32; 2]>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchConfig {
    pub id: u32,
    pub row: u32,
    pub col: u32,
}
