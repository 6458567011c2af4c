use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{DecodingGraph, GraphError, PatchId, SeamOrientation, VertexIdx};

/// `d` consecutive rounds of one patch: rounds `[epoch·d, (epoch+1)·d)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockKey {
    pub patch: PatchId,
    pub epoch: u32,
}

impl BlockKey {
    pub const fn new(patch: PatchId, epoch: u32) -> Self {
        BlockKey { patch, epoch }
    }
}

impl fmt::Display for BlockKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.patch, self.epoch)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FaceDir {
    Past,
    Future,
    West,
    East,
    North,
    South,
}

impl FaceDir {
    pub const ALL: [FaceDir; 6] =
        [FaceDir::Past, FaceDir::Future, FaceDir::West, FaceDir::East, FaceDir::North, FaceDir::South];

    fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaceLabel {
    /// Edge of the lattice (or of the recorded time span).
    Real,
    /// Shared with a block that is decoded separately.
    Artificial,
    /// Formerly artificial, removed by fusion.
    Fused,
}

/// The unit of decoding: one patch over one epoch, its defects and the
/// labels of its six faces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodingBlock {
    pub key: BlockKey,
    pub rounds: Range<u32>,
    pub defects: BTreeSet<VertexIdx>,
    faces: [FaceLabel; 6],
}

impl DecodingBlock {
    pub fn face(&self, dir: FaceDir) -> FaceLabel {
        self.faces[dir.slot()]
    }

    pub fn mark_fused(&mut self, dir: FaceDir) {
        if self.faces[dir.slot()] == FaceLabel::Artificial {
            self.faces[dir.slot()] = FaceLabel::Fused;
        }
    }

    pub fn artificial_faces(&self) -> impl Iterator<Item = FaceDir> + '_ {
        FaceDir::ALL.into_iter().filter(|d| self.face(*d) == FaceLabel::Artificial)
    }
}

impl DecodingGraph {
    /// Splits the graph into one block per (patch, epoch) with faces labeled
    /// from the seam activity. Blocks are sorted by key.
    pub fn carve_blocks(&self) -> Result<Vec<DecodingBlock>, GraphError> {
        self.carve_blocks_with(&BTreeSet::new())
    }

    /// As [`carve_blocks`](Self::carve_blocks), distributing `defects` to
    /// the blocks that own them.
    pub fn carve_blocks_with(&self, defects: &BTreeSet<VertexIdx>) -> Result<Vec<DecodingBlock>, GraphError> {
        if !self.rounds.is_multiple_of(self.d) {
            return Err(GraphError::RoundsNotMultipleOfD { rounds: self.rounds, d: self.d });
        }
        let epochs = self.epochs();
        let mut blocks = Vec::with_capacity(self.patches.len() * epochs as usize);
        for patch in self.patch_ids() {
            for epoch in 0..epochs {
                blocks.push(self.describe_block(BlockKey::new(patch, epoch)));
            }
        }
        for &v in defects {
            let key = self.block_of(v);
            let slot = blocks.binary_search_by_key(&key, |b| b.key).expect("every vertex has a block");
            blocks[slot].defects.insert(v);
        }
        Ok(blocks)
    }

    /// Face labels of a single block, without defects.
    pub fn describe_block(&self, key: BlockKey) -> DecodingBlock {
        let start = key.epoch * self.d;
        let end = (start + self.d).min(self.rounds);
        let last_epoch = self.epochs().saturating_sub(1);
        let mut faces = [FaceLabel::Real; 6];
        let artificial = |f: &mut [FaceLabel; 6], dir: FaceDir| f[dir.slot()] = FaceLabel::Artificial;
        if key.epoch > 0 {
            artificial(&mut faces, FaceDir::Past);
        }
        if key.epoch < last_epoch {
            artificial(&mut faces, FaceDir::Future);
        }
        for seam in self.active_seams(start..end) {
            match seam.orientation {
                SeamOrientation::EastWest if seam.patch_a == key.patch => artificial(&mut faces, FaceDir::East),
                SeamOrientation::EastWest if seam.patch_b == key.patch => artificial(&mut faces, FaceDir::West),
                SeamOrientation::NorthSouth if seam.patch_a == key.patch => artificial(&mut faces, FaceDir::South),
                SeamOrientation::NorthSouth if seam.patch_b == key.patch => artificial(&mut faces, FaceDir::North),
                _ => {}
            }
        }
        DecodingBlock { key, rounds: start..end, defects: BTreeSet::new(), faces }
    }
}
