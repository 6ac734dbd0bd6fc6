use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use sentinel_core::dataset::DatasetManifest;
use sentinel_core::synthetic;
use serde_json::json;

use crate::Status;

#[derive(Args)]
pub struct SynthModelArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "model")]
    stem: String,
    /// Reference layer/size shape: resnet152, bert, gpt2, vgg19, gpt2-xl.
    #[arg(long, default_value = "resnet152")]
    shape: String,
    /// Fraction of the reference size to generate.
    #[arg(long, default_value_t = 1.0 / 64.0)]
    scale: f64,
    /// Override the layer count.
    #[arg(long)]
    layers: Option<usize>,
    /// Override the total size in MiB.
    #[arg(long)]
    size_mib: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

pub fn model(args: &SynthModelArgs, json: bool) -> Result<Status> {
    let Some(shape) = synthetic::shape_by_name(&args.shape) else {
        bail!("unknown shape `{}`", args.shape);
    };
    if !(args.scale > 0.0) {
        bail!("--scale must be positive");
    }
    let layers = args.layers.unwrap_or(shape.layers);
    let total = match args.size_mib {
        Some(m) if m > 0.0 => (m * 1048576.0).round() as usize,
        Some(_) => bail!("--size-mib must be positive"),
        None => shape.scaled_bytes(args.scale),
    };
    if layers == 0 || total < layers {
        bail!("need at least one layer and one byte per layer");
    }
    let m = synthetic::model_with_total(layers, total, args.seed);
    let path = m.save(&args.out, &args.stem)?;
    if json {
        println!("{}", json!({"manifest": path, "layers": m.len(), "bytes": m.total_size()}));
    } else {
        println!("{} ({} layers, {} bytes)", path.display(), m.len(), m.total_size());
    }
    Ok(Status::Success)
}

#[derive(Args)]
pub struct SynthDatasetArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "dataset")]
    stem: String,
    #[arg(long, default_value_t = 5000)]
    samples: usize,
    #[arg(long, default_value_t = 16)]
    sources: u32,
    #[arg(long, default_value_t = 3072)]
    min_len: usize,
    #[arg(long, default_value_t = 3072)]
    max_len: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

pub fn dataset(args: &SynthDatasetArgs, json: bool) -> Result<Status> {
    if args.sources == 0 && args.samples > 0 {
        bail!("samples need at least one source");
    }
    if args.min_len > args.max_len {
        bail!("--min-len exceeds --max-len");
    }
    let records = synthetic::dataset(args.samples, args.sources, args.min_len, args.max_len, args.seed);
    let declared: BTreeSet<u32> = (0..args.sources).collect();
    let path = DatasetManifest::write(&records, &declared, &args.out, &args.stem)?;
    if json {
        println!("{}", json!({"manifest": path, "samples": records.len(), "sources": args.sources}));
    } else {
        println!("{} ({} samples, {} sources)", path.display(), records.len(), args.sources);
    }
    Ok(Status::Success)
}
