//! 64-bit wire messages.
//!
//! Standard layout: `dest[63:56] header[55:48] payload[47:0]`. The extended
//! layout used for networks with more than 256 nodes widens the destination
//! to 16 bits: `dest[63:48] header[47:40] payload[39:0]`; it is not part of
//! the standard format.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::topology::NodeId;
use crate::graph::EdgeIdx;

pub mod header {
    pub const BOUNDARY_INFO: u8 = 0x10;
    pub const BOUNDARY_INFO_LAST: u8 = 0x11;
    pub const LOGICAL_RESULT: u8 = 0x20;
    pub const INSTR_MERGE: u8 = 0x30;
    pub const INSTR_SPLIT: u8 = 0x31;
    pub const INSTR_MEASURE: u8 = 0x32;
    pub const INSTR_HALT: u8 = 0x3F;

    pub fn is_boundary_info(h: u8) -> bool {
        h == BOUNDARY_INFO || h == BOUNDARY_INFO_LAST
    }
}

pub const PAYLOAD_BITS: u32 = 48;
pub const PAYLOAD_MASK: u64 = (1 << PAYLOAD_BITS) - 1;
const WIDE_PAYLOAD_MASK: u64 = (1 << 40) - 1;
/// Crossing indices per boundary-information message.
pub const SLOTS_PER_MESSAGE: usize = 3;
const SLOT_BITS: u32 = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum WireFormat {
    #[default]
    Standard,
    Extended16,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("destination {0} does not fit the wire format")]
    DestOverflow(NodeId),
    #[error("payload {0:#x} does not fit the wire format")]
    PayloadOverflow(u64),
    #[error("face index {0} does not fit a 16-bit slot")]
    IndexOverflow(usize),
    #[error("edge {0:?} is not a crossing of this face")]
    UnknownEdge(EdgeIdx),
    #[error("boundary information stream is malformed")]
    Malformed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub dest: NodeId,
    pub header: u8,
    pub payload: u64,
}

impl Message {
    pub fn new(dest: NodeId, header: u8, payload: u64) -> Self {
        Message { dest, header, payload }
    }

    pub fn encode(&self) -> Result<u64, CodecError> {
        self.encode_as(WireFormat::Standard)
    }

    pub fn encode_as(&self, format: WireFormat) -> Result<u64, CodecError> {
        match format {
            WireFormat::Standard => {
                if self.dest > 0xFF {
                    return Err(CodecError::DestOverflow(self.dest));
                }
                if self.payload > PAYLOAD_MASK {
                    return Err(CodecError::PayloadOverflow(self.payload));
                }
                Ok((self.dest as u64) << 56 | (self.header as u64) << 48 | self.payload)
            }
            WireFormat::Extended16 => {
                if self.payload > WIDE_PAYLOAD_MASK {
                    return Err(CodecError::PayloadOverflow(self.payload));
                }
                Ok((self.dest as u64) << 48 | (self.header as u64) << 40 | self.payload)
            }
        }
    }

    pub fn decode(word: u64) -> Self {
        Self::decode_as(word, WireFormat::Standard)
    }

    pub fn decode_as(word: u64, format: WireFormat) -> Self {
        match format {
            WireFormat::Standard => {
                Message { dest: (word >> 56) as NodeId, header: (word >> 48) as u8, payload: word & PAYLOAD_MASK }
            }
            WireFormat::Extended16 => {
                Message { dest: (word >> 48) as NodeId, header: (word >> 40) as u8, payload: word & WIDE_PAYLOAD_MASK }
            }
        }
    }
}

/// The agreed index space of one face: every edge that could cross it,
/// in increasing edge order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaceIndex {
    edges: Vec<EdgeIdx>,
}

impl FaceIndex {
    pub fn new(mut edges: Vec<EdgeIdx>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        FaceIndex { edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    fn position(&self, e: EdgeIdx) -> Result<usize, CodecError> {
        self.edges.binary_search(&e).map_err(|_| CodecError::UnknownEdge(e))
    }
}

/// Messages needed for `crossings` committed edges: three per message, and
/// one empty message when there are none.
pub fn boundary_message_count(crossings: usize) -> usize {
    crossings.div_ceil(SLOTS_PER_MESSAGE).max(1)
}

/// Packs committed crossings into 16-bit slots holding `face index + 1`
/// (0 marks an empty slot), three per payload. The last message carries
/// the `BOUNDARY_INFO_LAST` header.
pub fn encode_boundary_info(
    crossings: &BTreeSet<EdgeIdx>,
    index: &FaceIndex,
    dest: NodeId,
) -> Result<Vec<Message>, CodecError> {
    let mut slots = Vec::with_capacity(crossings.len());
    for &e in crossings {
        let i = index.position(e)?;
        if i + 1 > u16::MAX as usize {
            return Err(CodecError::IndexOverflow(i));
        }
        slots.push(i as u64 + 1);
    }
    let count = boundary_message_count(slots.len());
    let mut out = Vec::with_capacity(count);
    for m in 0..count {
        let mut payload = 0u64;
        for (k, s) in slots.iter().skip(m * SLOTS_PER_MESSAGE).take(SLOTS_PER_MESSAGE).enumerate() {
            payload |= s << (SLOT_BITS * k as u32);
        }
        let h = if m + 1 == count { header::BOUNDARY_INFO_LAST } else { header::BOUNDARY_INFO };
        out.push(Message::new(dest, h, payload));
    }
    Ok(out)
}

pub fn decode_boundary_info(messages: &[Message], index: &FaceIndex) -> Result<BTreeSet<EdgeIdx>, CodecError> {
    let mut out = BTreeSet::new();
    for (m, msg) in messages.iter().enumerate() {
        let last = m + 1 == messages.len();
        let expected = if last { header::BOUNDARY_INFO_LAST } else { header::BOUNDARY_INFO };
        if msg.header != expected {
            return Err(CodecError::Malformed);
        }
        for k in 0..SLOTS_PER_MESSAGE as u32 {
            let slot = (msg.payload >> (SLOT_BITS * k)) & 0xFFFF;
            if slot != 0 {
                let e = *index.edges.get(slot as usize - 1).ok_or(CodecError::Malformed)?;
                out.insert(e);
            }
        }
    }
    if messages.is_empty() {
        return Err(CodecError::Malformed);
    }
    Ok(out)
}
