//! `sentinel`: sign, verify and benchmark ML model and dataset digests.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage, configuration
//! or I/O error.

mod bench;
mod dataset_cmd;
mod inspect;
mod keys;
mod model_cmd;
mod synth;
mod workers;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sentinel_core::model::{Construction, HashConfig, DEFAULT_BLOCK_SIZE};
use sentinel_core::{CompressionAlg, Strategy};

#[derive(Parser)]
#[command(name = "sentinel", version, about = "Parallel hashing and signed attestations for ML models and datasets")]
struct Cli {
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a P-256 key pair (<prefix>.key, <prefix>.pub).
    Keygen(KeygenArgs),
    /// Hash a model and write a signed bundle.
    SignModel(SignModelArgs),
    /// Recompute a model digest and check it against a bundle.
    VerifyModel(VerifyModelArgs),
    /// Stream a dataset and write one signed bundle per source.
    SignDataset(SignDatasetArgs),
    /// Stream a dataset and check every source's bundle.
    VerifyDataset(VerifyDatasetArgs),
    /// Time every strategy on synthetic models.
    Bench(bench::BenchArgs),
    /// Print a bundle's statement without verifying it.
    Inspect(InspectArgs),
    /// Write a seeded synthetic model (manifest + data file).
    SynthModel(synth::SynthModelArgs),
    /// Write a seeded synthetic multi-source dataset.
    SynthDataset(synth::SynthDatasetArgs),
}

#[derive(Args)]
struct KeygenArgs {
    /// Output prefix.
    #[arg(long)]
    out: PathBuf,
    /// Overwrite existing key files.
    #[arg(long)]
    force: bool,
}

#[derive(Args, Clone, Copy)]
struct HashArgs {
    #[arg(long, default_value = "merkle")]
    construction: Construction,
    /// Merkle compression function [default: sha256; lattice always uses blake2b].
    #[arg(long)]
    compression: Option<CompressionAlg>,
    #[arg(long, default_value = "in-place")]
    strategy: Strategy,
    #[arg(long, default_value_t = DEFAULT_BLOCK_SIZE)]
    block_size: usize,
    /// Lattice per-layer: launch layers smallest first.
    #[arg(long)]
    ordered: bool,
}

impl HashArgs {
    fn config(&self) -> sentinel_core::Result<HashConfig> {
        let alg = self.compression.unwrap_or(match self.construction {
            Construction::Merkle => CompressionAlg::Sha256,
            Construction::Lattice => CompressionAlg::Blake2b,
        });
        let cfg = HashConfig {
            construction: self.construction,
            alg,
            strategy: self.strategy,
            block_size: self.block_size,
            ordered_per_layer: self.ordered,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SignModelArgs {
    /// Model manifest (JSON).
    #[arg(long)]
    model: PathBuf,
    /// PKCS#8 PEM private key.
    #[arg(long)]
    key: PathBuf,
    /// Bundle path [default: <manifest stem>.bundle.json].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Subject name [default: the data file name].
    #[arg(long)]
    name: Option<String>,
    #[command(flatten)]
    hash: HashArgs,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct VerifyModelArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    bundle: PathBuf,
    /// Require this SPKI PEM public key instead of trusting the embedded one.
    #[arg(long)]
    key: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct DatasetStreamArgs {
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    shuffle_seed: u64,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SignDatasetArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    key: PathBuf,
    /// Directory for the per-source bundles.
    #[arg(long)]
    out_dir: PathBuf,
    /// Only sign these sources [default: every declared source].
    #[arg(long, value_delimiter = ',')]
    sources: Vec<u32>,
    /// Bind labels into sample digests.
    #[arg(long)]
    include_labels: bool,
    #[command(flatten)]
    stream: DatasetStreamArgs,
}

#[derive(Args)]
struct VerifyDatasetArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Bundle files, or directories scanned for *.bundle.json.
    #[arg(long, num_args = 1.., required = true)]
    bundles: Vec<PathBuf>,
    #[arg(long)]
    key: Option<PathBuf>,
    #[command(flatten)]
    stream: DatasetStreamArgs,
}

#[derive(Args)]
struct InspectArgs {
    bundle: PathBuf,
}

/// Result of a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Success,
    VerificationFailed,
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    let json = cli.json;
    match cli.command {
        Command::Keygen(a) => keys::keygen(&a, json),
        Command::SignModel(a) => model_cmd::sign(&a, json),
        Command::VerifyModel(a) => model_cmd::verify(&a, json),
        Command::SignDataset(a) => dataset_cmd::sign(&a, json),
        Command::VerifyDataset(a) => dataset_cmd::verify(&a, json),
        Command::Bench(a) => bench::run(&a, json),
        Command::Inspect(a) => inspect::run(&a, json),
        Command::SynthModel(a) => synth::model(&a, json),
        Command::SynthDataset(a) => synth::dataset(&a, json),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::VerificationFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
