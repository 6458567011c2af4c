use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::bench::grid_shape;
use super::HarnessError;
use crate::net::{build_topology, Message, PAYLOAD_MASK};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TopologyRow {
    pub n_leaves: u32,
    pub fanout: u32,
    pub depth: u32,
    pub nodes: u32,
    pub max_leaf_hops: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NetcheckReport {
    pub topology: Vec<TopologyRow>,
    pub codec_words: u64,
    pub codec_mismatches: u64,
}

/// Worst-case tree hops for each leaf count.
pub fn topology_sweep(leaf_counts: &[u32], fanout: u32) -> Result<Vec<TopologyRow>, HarnessError> {
    leaf_counts
        .iter()
        .map(|&n| {
            let (rows, cols) = grid_shape(n);
            let t = build_topology(n, fanout, rows, cols)?;
            Ok(TopologyRow {
                n_leaves: n,
                fanout,
                depth: t.depth(),
                nodes: t.node_count(),
                max_leaf_hops: t.max_leaf_hops(),
            })
        })
        .collect()
}

/// Encodes and decodes every (destination, header) pair with
/// `payloads_per_pair` random payloads plus the all-zero and all-one
/// payloads, counting words that do not round-trip.
pub fn codec_sweep(payloads_per_pair: u64, seed: u64) -> Result<(u64, u64), HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut words, mut mismatches) = (0u64, 0u64);
    for dest in 0..=255u16 {
        for header in 0..=255u8 {
            let random = (0..payloads_per_pair).map(|_| rng.random::<u64>() & PAYLOAD_MASK);
            for payload in [0, PAYLOAD_MASK].into_iter().chain(random) {
                let m = Message::new(dest, header, payload);
                let word = m.encode()?;
                words += 1;
                let back = Message::decode(word);
                let fields = (word >> 56, (word >> 48) & 0xFF, word & PAYLOAD_MASK);
                if back != m || fields != (dest as u64, header as u64, payload) {
                    mismatches += 1;
                }
            }
        }
    }
    Ok((words, mismatches))
}

pub fn cmd_netcheck(
    fanout: u32,
    leaf_counts: &[u32],
    payloads_per_pair: u64,
    seed: u64,
) -> Result<NetcheckReport, HarnessError> {
    let topology = topology_sweep(leaf_counts, fanout)?;
    let (codec_words, codec_mismatches) = codec_sweep(payloads_per_pair, seed)?;
    Ok(NetcheckReport { topology, codec_words, codec_mismatches })
}
