//! Discrete-event model of the hybrid tree-grid decoder network: a root
//! running the logical program, router levels, leaves running the window
//! pipeline, and grid links between adjacent leaves for boundary traffic.

use thiserror::Error;

mod codec;
mod latency;
mod program;
mod sim;
mod topology;

pub use codec::{
    boundary_message_count, decode_boundary_info, encode_boundary_info, header, CodecError, FaceIndex, Message,
    WireFormat, PAYLOAD_BITS, PAYLOAD_MASK, SLOTS_PER_MESSAGE,
};
pub use latency::{JobCost, LatencyModel};
pub use program::{Instruction, Program};
pub use sim::{
    simulate, CommitTiming, Detail, EventKind, Feedback, JobTiming, MetricRow, SimEvent, SimOutcome, SimSetup, Waiting,
};
pub use topology::{build_topology, Hop, Link, NodeId, Topology};

use crate::window::LeafId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetError {
    #[error("fanout must be at least 2, got {0}")]
    Fanout(u32),
    #[error("{rows}x{cols} leaf grid does not hold {n_leaves} leaves")]
    Dims { n_leaves: u32, rows: u32, cols: u32 },
    #[error("{0} nodes exceed the node id space")]
    TooManyNodes(u32),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("invalid latency model: {0}")]
    Latency(String),
    #[error("invalid program: {0}")]
    Program(String),
    #[error("no job record for leaf {leaf} job {job}")]
    MissingRecord { leaf: LeafId, job: u32 },
    #[error("pipeline stalled at {time_ns} ns with {} leaves waiting", waiting.len())]
    Stall { time_ns: u64, waiting: Vec<Waiting> },
}

#[cfg(test)]
mod tests;
