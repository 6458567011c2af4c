//! Experiment harness: accuracy sweeps, network simulations over many noise
//! samples, the microbenchmark catalog, network checks and the exact
//! matching oracle.

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

mod accuracy;
mod bench;
mod netcheck;
mod oracle;
mod stats;

pub use accuracy::{
    cmd_accuracy, logical_failure, AccuracyRow, MergedPair, PairOutcome, MAX_RELATIVE_DIFFERENCE, RESOLVED_HALF_WIDTH,
};
pub use bench::{
    catalog, cmd_microbench, cmd_scalability, grid_shape, microbenchmark, run_scenario, BenchResult, MetricsReport,
    Microbenchmark, Scenario, SimConfig, MAX_HEALTHY_DEPTH,
};
pub use netcheck::{cmd_netcheck, codec_sweep, topology_sweep, NetcheckReport, TopologyRow};
pub use oracle::{oracle_mwpm, ORACLE_MAX_DEFECTS, ORACLE_MAX_VERTICES};
pub use stats::{mean_sd, percentile, wilson, LatencySummary, Rate, Z95};

use crate::fusion::FusionError;
use crate::graph::GraphError;
use crate::net::{CodecError, NetError};
use crate::noise::NoiseError;
use crate::uf::UfError;
use crate::window::PipelineError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Uf(#[from] UfError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("oracle limited to {ORACLE_MAX_DEFECTS} defects and {ORACLE_MAX_VERTICES} vertices, got {defects} and {vertices}")]
    OracleTooLarge { defects: usize, vertices: usize },
    #[error("a correction does not reproduce the syndrome")]
    InvalidCorrection,
    #[error("at least one trial is required")]
    NoTrials,
    #[error("unknown microbenchmark {0}")]
    UnknownBenchmark(String),
    #[error("bad configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Writes `rows` as CSV with a header line.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// CSV text of `rows`, header included.
pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests;
