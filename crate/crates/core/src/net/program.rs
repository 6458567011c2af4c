use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::NetError;
use crate::graph::{Layout, PatchId, SeamId};
use crate::window::{LeafId, LeafMap};

/// Instruction for the root's logical-level processor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Instruction {
    /// Report the logical outcome of `patch` after `epoch`, optionally
    /// forwarding it to another leaf.
    Measure {
        patch: PatchId,
        epoch: u32,
        forward_to: Option<LeafId>,
    },
    /// Merge two adjacent patches for `epoch`.
    Merge {
        a: PatchId,
        b: PatchId,
        epoch: u32,
    },
    /// Stop joint measurements from `epoch` on.
    Split {
        a: PatchId,
        b: PatchId,
        epoch: u32,
    },
    /// Merge for `epoch` if the outcome of `on` measured after `measured` is 1.
    CondMerge {
        a: PatchId,
        b: PatchId,
        epoch: u32,
        on: PatchId,
        measured: u32,
    },
    Halt,
}

impl Instruction {
    pub fn epoch(&self) -> Option<u32> {
        match self {
            Instruction::Measure { epoch, .. }
            | Instruction::Merge { epoch, .. }
            | Instruction::Split { epoch, .. }
            | Instruction::CondMerge { epoch, .. } => Some(*epoch),
            Instruction::Halt => None,
        }
    }

    fn patches(&self) -> Vec<PatchId> {
        match self {
            Instruction::Measure { patch, .. } => vec![*patch],
            Instruction::Merge { a, b, .. } | Instruction::Split { a, b, .. } | Instruction::CondMerge { a, b, .. } => {
                vec![*a, *b]
            }
            Instruction::Halt => Vec::new(),
        }
    }
}

/// Instruction list executed by the root, up to the first `Halt`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub epochs: u32,
    pub instructions: Vec<Instruction>,
}

impl Program {
    /// Merges from a per-epoch seam schedule, followed by `Halt`.
    pub fn from_schedule(schedule: &[BTreeSet<SeamId>]) -> Self {
        let mut instructions = Vec::new();
        for (e, seams) in schedule.iter().enumerate() {
            for s in seams {
                instructions.push(Instruction::Merge { a: s.patch_a, b: s.patch_b, epoch: e as u32 });
            }
        }
        instructions.push(Instruction::Halt);
        Program { epochs: schedule.len() as u32, instructions }
    }

    /// Instructions before the first `Halt`, with their positions.
    pub fn active(&self) -> impl Iterator<Item = (usize, &Instruction)> {
        self.instructions.iter().enumerate().take_while(|(_, i)| **i != Instruction::Halt)
    }

    /// Per-epoch merged seams, given the outcome bit of each conditional
    /// merge (indexed by instruction position).
    pub fn schedule(
        &self,
        layout: &Layout,
        outcome: impl Fn(usize) -> bool,
    ) -> Result<Vec<BTreeSet<SeamId>>, NetError> {
        let mut schedule = vec![BTreeSet::new(); self.epochs as usize];
        for (i, instr) in self.active() {
            if let Some(e) = instr.epoch() {
                if e >= self.epochs {
                    return Err(NetError::Program(format!("instruction {i} targets epoch {e} of {}", self.epochs)));
                }
            }
            let (a, b, e) = match *instr {
                Instruction::Merge { a, b, epoch } => (a, b, epoch),
                Instruction::CondMerge { a, b, epoch, measured, .. } => {
                    if measured >= epoch {
                        return Err(NetError::Program(format!("instruction {i} depends on a later measurement")));
                    }
                    if !outcome(i) {
                        continue;
                    }
                    (a, b, epoch)
                }
                _ => continue,
            };
            let seam = layout.seam_between(a, b).map_err(|e| NetError::Program(e.to_string()))?;
            schedule[e as usize].insert(seam);
        }
        Ok(schedule)
    }

    /// Instruction messages each leaf must receive before decoding an
    /// epoch: one per instruction touching one of its patches.
    pub fn expected_deliveries(&self, map: &LeafMap) -> BTreeMap<(LeafId, u32), usize> {
        let mut out = BTreeMap::new();
        for (_, instr) in self.active() {
            if matches!(instr, Instruction::Measure { .. }) {
                continue;
            }
            let Some(e) = instr.epoch() else { continue };
            for leaf in self.leaves(instr, map) {
                *out.entry((leaf, e)).or_default() += 1;
            }
        }
        out
    }

    pub(crate) fn leaves(&self, instr: &Instruction, map: &LeafMap) -> BTreeSet<LeafId> {
        instr.patches().iter().filter_map(|p| map.leaf_of.get(p).copied()).collect()
    }
}
