use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use netdecode::harness::{
    catalog, cmd_accuracy, cmd_microbench, cmd_netcheck, cmd_scalability, write_csv, BenchResult, SimConfig,
};

#[derive(Parser)]
#[command(name = "netdecode", about = "Distributed surface-code decoding experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fusion-path versus global Union-Find logical error rates on two merged patches.
    Accuracy {
        #[arg(long, value_delimiter = ',', default_values_t = [3, 5, 7])]
        d: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.005, 0.01, 0.02])]
        p: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Random merge/split run of many qubits on the simulated network.
    Scalability {
        #[arg(long, default_value_t = 5)]
        d: u32,
        #[arg(long, default_value_t = 0.001)]
        p: f64,
        #[arg(long, default_value_t = 100)]
        qubits: u32,
        #[arg(long, default_value_t = 100)]
        epochs: u32,
        #[arg(long, default_value_t = 0.5)]
        merge_prob: f64,
        #[command(flatten)]
        common: Common,
    },
    /// One catalog circuit, or `all`.
    Microbench {
        #[arg(default_value = "all")]
        name: String,
        #[arg(long, default_value_t = 5)]
        d: u32,
        #[arg(long, default_value_t = 0.001)]
        p: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Topology hop counts and exhaustive codec round trips.
    Netcheck {
        #[arg(long, default_value_t = 25)]
        fanout: u32,
        #[arg(long, value_delimiter = ',', default_values_t = [4, 25, 625])]
        leaves: Vec<u32>,
        /// Random payloads per (destination, header) pair.
        #[arg(long, default_value_t = 16)]
        payloads: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// JSON network and latency configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<SimConfig> {
        match &self.config {
            Some(path) => Ok(SimConfig::load(path)?),
            None => Ok(SimConfig::default()),
        }
    }
}

fn emit(result: &BenchResult, out: Option<&PathBuf>) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(&result.report)?);
    if let Some(path) = out {
        write_csv(path, &result.rows).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Accuracy { d, p, common } => {
            let rows = cmd_accuracy(&d, &p, common.trials, common.seed)?;
            for r in &rows {
                println!("{}", serde_json::to_string(r)?);
            }
            if let Some(path) = &common.out {
                write_csv(path, &rows)?;
            }
        }
        Cmd::Scalability { d, p, qubits, epochs, merge_prob, common } => {
            let cfg = common.config()?;
            emit(
                &cmd_scalability(d, qubits, epochs, merge_prob, p, common.trials, common.seed, &cfg)?,
                common.out.as_ref(),
            )?;
        }
        Cmd::Microbench { name, d, p, common } => {
            let cfg = common.config()?;
            let names: Vec<&str> =
                if name == "all" { catalog().iter().map(|b| b.name).collect() } else { vec![name.as_str()] };
            if names.len() > 1 && common.out.is_some() {
                bail!("--out needs a single benchmark name");
            }
            for n in names {
                emit(&cmd_microbench(n, d, p, common.trials, common.seed, &cfg)?, common.out.as_ref())?;
            }
        }
        Cmd::Netcheck { fanout, leaves, payloads, seed } => {
            let report = cmd_netcheck(fanout, &leaves, payloads, seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if report.codec_mismatches > 0 {
                bail!("{} codec mismatches", report.codec_mismatches);
            }
        }
    }
    Ok(())
}
