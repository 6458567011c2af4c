use serde::{Deserialize, Serialize};

use super::topology::{Hop, Link};
use super::NetError;
use crate::fusion::EpochReport;

/// Timing constants for the simulated decoder network. Cycle counts are
/// affine in the growth steps the UF engine actually ran; the constants are
/// calibration inputs, not hardware truth.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatencyModel {
    pub t_round_ns: u64,
    /// Per-hop link latency.
    pub t_link_ns: u64,
    pub t_cycle_ns: u64,
    /// Extra time per 64-bit message on a link.
    pub t_serialize_ns: u64,
    pub decode_base_cycles: u64,
    pub decode_cycles_per_step: u64,
    pub fuse_base_cycles: u64,
    pub fuse_cycles_per_step: u64,
    pub cycles_per_defect: u64,
    pub coordinator_cycles_per_block: u64,
    /// Forwarding cost at each intermediate router.
    pub router_cycles: u64,
    /// Instruction processing at the root.
    pub root_cycles: u64,
    /// Decoder units per leaf; `None` gives every block its own unit.
    pub units_per_leaf: Option<u32>,
    /// Multiplier on every cycle count.
    pub cost_scale: u64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel {
            t_round_ns: 1000,
            t_link_ns: 95,
            t_cycle_ns: 10,
            t_serialize_ns: 4,
            decode_base_cycles: 10,
            decode_cycles_per_step: 4,
            fuse_base_cycles: 4,
            fuse_cycles_per_step: 4,
            cycles_per_defect: 1,
            coordinator_cycles_per_block: 2,
            router_cycles: 2,
            root_cycles: 10,
            units_per_leaf: None,
            cost_scale: 1,
        }
    }
}

/// Busy time of one job, split by phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct JobCost {
    pub coordinator_ns: u64,
    pub decode_ns: u64,
    pub fuse_ns: u64,
}

impl JobCost {
    pub fn total(&self) -> u64 {
        self.coordinator_ns + self.decode_ns + self.fuse_ns
    }
}

impl LatencyModel {
    /// No link, decode or fusion cost: only the round clock remains.
    pub fn zero_cost() -> Self {
        LatencyModel {
            t_link_ns: 0,
            t_serialize_ns: 0,
            decode_base_cycles: 0,
            decode_cycles_per_step: 0,
            fuse_base_cycles: 0,
            fuse_cycles_per_step: 0,
            cycles_per_defect: 0,
            coordinator_cycles_per_block: 0,
            router_cycles: 0,
            root_cycles: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.t_round_ns == 0 || self.t_cycle_ns == 0 || self.cost_scale == 0 || self.units_per_leaf == Some(0) {
            return Err(NetError::Latency("round time, cycle time, cost scale and unit count must be positive".into()));
        }
        Ok(())
    }

    fn cycles(&self, c: u64) -> u64 {
        c * self.cost_scale * self.t_cycle_ns
    }

    /// Busy time of a leaf job: the coordinator dispatches blocks, decoder
    /// units decode them in parallel, then the coordinator fuses and commits.
    pub fn job_cost(&self, report: &EpochReport, drain: bool) -> JobCost {
        if drain {
            return JobCost { fuse_ns: self.cycles(self.fuse_base_cycles), ..Default::default() };
        }
        let blocks = report.decode_steps.len() as u64;
        let coordinator = self.coordinator_cycles_per_block * blocks + self.cycles_per_defect * report.defects as u64;
        let per_block =
            report.decode_steps.iter().map(|(_, s)| self.decode_base_cycles + self.decode_cycles_per_step * s);
        let decode = match self.units_per_leaf {
            None => per_block.max().unwrap_or(0),
            Some(units) => {
                let mut load = vec![0u64; units as usize];
                for c in per_block {
                    let slot = (0..load.len()).min_by_key(|&i| (load[i], i)).expect("units > 0");
                    load[slot] += c;
                }
                load.into_iter().max().unwrap_or(0)
            }
        };
        let fuse = self.fuse_base_cycles + self.fuse_cycles_per_step * report.fuse_steps;
        JobCost { coordinator_ns: self.cycles(coordinator), decode_ns: self.cycles(decode), fuse_ns: self.cycles(fuse) }
    }

    /// Time for `messages` words to traverse `hops`.
    pub fn transfer_ns(&self, hops: &[Hop], messages: usize) -> u64 {
        if hops.is_empty() {
            return 0;
        }
        let routers = hops.iter().skip(1).filter(|h| h.link == Link::Tree).count() as u64;
        hops.len() as u64 * self.t_link_ns
            + self.cycles(self.router_cycles * routers)
            + messages as u64 * self.t_serialize_ns
    }

    pub fn root_ns(&self) -> u64 {
        self.cycles(self.root_cycles)
    }
}
