//! Strategy benchmark. Every cell's digests are checked against a
//! single-worker run before any timing is reported.

use std::time::Instant;

use anyhow::{bail, Result};
use clap::Args;
use sentinel_core::compression::sequential_hash_slices;
use sentinel_core::model::{hash_model, Construction, HashConfig, TensorMap, DEFAULT_BLOCK_SIZE};
use sentinel_core::parallel::with_workers;
use sentinel_core::{synthetic, ArtifactDigest, CompressionAlg, Strategy};
use serde_json::{json, Value};

use crate::{workers, Status};

pub const MIN_REPEATS: usize = 5;

#[derive(Args)]
pub struct BenchArgs {
    /// Reference layer/size shape: resnet152, bert, gpt2, vgg19, gpt2-xl.
    #[arg(long, default_value = "resnet152")]
    shape: String,
    /// Fraction of the reference size, used when --sizes is absent.
    #[arg(long, default_value_t = 1.0 / 64.0)]
    scale: f64,
    /// Total model sizes in MiB (keeps the shape's layer count).
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<f64>,
    /// Override the layer count.
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    workers: Vec<usize>,
    #[arg(long, default_value_t = MIN_REPEATS)]
    repeats: usize,
    #[arg(long, value_delimiter = ',', default_value = "merkle,lattice")]
    constructions: Vec<Construction>,
    /// Merkle compression functions (lattice always uses blake2b).
    #[arg(long, value_delimiter = ',', default_value = "sha256,blake2b,sha3-256")]
    compressions: Vec<CompressionAlg>,
    #[arg(long, value_delimiter = ',', default_value = "coalesced,per-layer,in-place")]
    strategies: Vec<Strategy>,
    #[arg(long, default_value_t = DEFAULT_BLOCK_SIZE)]
    block_size: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn cells(args: &BenchArgs) -> Result<Vec<HashConfig>> {
    let mut out = Vec::new();
    for &c in &args.constructions {
        let algs: Vec<CompressionAlg> = match c {
            Construction::Merkle => args.compressions.clone(),
            Construction::Lattice => vec![CompressionAlg::Blake2b],
        };
        for alg in algs {
            for &s in &args.strategies {
                let base = HashConfig {
                    construction: c,
                    alg,
                    strategy: s,
                    block_size: args.block_size,
                    ordered_per_layer: false,
                };
                base.validate()?;
                out.push(base);
                if c == Construction::Lattice && s == Strategy::PerLayer {
                    out.push(base.ordered(true));
                }
            }
        }
    }
    if out.is_empty() {
        bail!("no benchmark cells selected");
    }
    Ok(out)
}

struct Row {
    cfg: HashConfig,
    workers: usize,
    median_ms: f64,
    consistent: bool,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64() * 1e3)
}

fn bench_model(args: &BenchArgs, model: &TensorMap, configs: &[HashConfig], worker_counts: &[usize]) -> Result<(Value, bool, Vec<String>)> {
    let total = model.total_size();
    let mib = total as f64 / 1048576.0;
    let mut baseline = Vec::new();
    let mut algs: Vec<CompressionAlg> = configs.iter().map(|c| c.alg).collect();
    algs.dedup();
    algs.sort_by_key(|a| a.name());
    algs.dedup();
    for alg in algs {
        let times: Vec<f64> = (0..args.repeats)
            .map(|_| timed(|| sequential_hash_slices(alg, model.tensors())).1)
            .collect();
        baseline.push((alg, median(times)));
    }
    let baseline_ms = |alg: CompressionAlg| baseline.iter().find(|(a, _)| *a == alg).map(|(_, ms)| *ms);

    let mut rows = Vec::new();
    let mut references: Vec<(HashConfig, ArtifactDigest)> = Vec::new();
    for cfg in configs {
        let reference = with_workers(1, || hash_model(cfg, model))?.model_digest;
        references.push((*cfg, reference));
        for &w in worker_counts {
            let runs = with_workers(w, || {
                (0..args.repeats)
                    .map(|_| {
                        let (r, ms) = timed(|| hash_model(cfg, model));
                        r.map(|r| (r.model_digest, ms))
                    })
                    .collect::<sentinel_core::Result<Vec<_>>>()
            })?;
            let consistent = runs.iter().all(|(d, _)| *d == reference);
            rows.push(Row {
                cfg: *cfg,
                workers: w,
                median_ms: median(runs.iter().map(|(_, ms)| *ms).collect()),
                consistent,
            });
        }
    }
    // The ordered schedule must reproduce the unordered lattice digest.
    let mut all_consistent = rows.iter().all(|r| r.consistent);
    for (cfg, d) in &references {
        if cfg.ordered_per_layer {
            let unordered = references.iter().find(|(c, _)| *c == cfg.ordered(false));
            if let Some((_, u)) = unordered {
                if u != d {
                    all_consistent = false;
                    for r in rows.iter_mut().filter(|r| r.cfg == *cfg) {
                        r.consistent = false;
                    }
                }
            }
        }
    }

    let one_worker_ms = |cfg: &HashConfig| rows.iter().find(|r| r.cfg == *cfg && r.workers == 1).map(|r| r.median_ms);
    let mut notes = Vec::new();
    let max_w = *worker_counts.iter().max().expect("non-empty");
    for cfg in configs.iter().filter(|c| c.strategy == Strategy::InPlace) {
        if let (Some(one), Some(r)) = (
            one_worker_ms(cfg),
            rows.iter().find(|r| r.cfg == *cfg && r.workers == max_w),
        ) {
            if max_w > 1 {
                notes.push(format!(
                    "{mib:.1} MiB {} {} in-place: {max_w} workers {:.2}x vs 1 worker",
                    cfg.construction,
                    cfg.alg,
                    one / r.median_ms
                ));
            }
        }
        let per_layer = cfg.with_strategy(Strategy::PerLayer);
        if let (Some(p), Some(i)) = (
            rows.iter().find(|r| r.cfg == per_layer && r.workers == max_w),
            rows.iter().find(|r| r.cfg == *cfg && r.workers == max_w),
        ) {
            notes.push(format!(
                "{mib:.1} MiB {} {} at {max_w} workers: per-layer {:.2} ms, in-place {:.2} ms ({})",
                cfg.construction,
                cfg.alg,
                p.median_ms,
                i.median_ms,
                if p.median_ms > i.median_ms { "per-layer slower" } else { "per-layer not slower" }
            ));
        }
    }

    let cell_json: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "construction": r.cfg.construction.name(),
                "compression": r.cfg.alg.name(),
                "strategy": r.cfg.strategy.name(),
                "ordered": r.cfg.ordered_per_layer,
                "workers": r.workers,
                "median_ms": r.median_ms,
                "mib_per_s": mib / (r.median_ms / 1e3),
                "speedup_vs_sequential": baseline_ms(r.cfg.alg).map(|b| b / r.median_ms),
                "speedup_vs_one_worker": one_worker_ms(&r.cfg).map(|o| o / r.median_ms),
                "digest_consistent": r.consistent,
            })
        })
        .collect();
    let value = json!({
        "size_bytes": total,
        "layers": model.len(),
        "repeats": args.repeats,
        "baseline": baseline.iter().map(|(a, ms)| json!({"compression": a.name(), "median_ms": ms})).collect::<Vec<_>>(),
        "cells": cell_json,
        "notes": notes,
    });
    Ok((value, all_consistent, notes))
}

fn print_table(v: &Value) {
    let mib = v["size_bytes"].as_u64().unwrap_or(0) as f64 / 1048576.0;
    println!("model: {mib:.2} MiB, {} layers, median of {} runs", v["layers"], v["repeats"]);
    println!(
        "{:<9} {:<9} {:<19} {:>7} {:>11} {:>9} {:>9} {:>8}  digests",
        "constr", "compress", "strategy", "workers", "median ms", "MiB/s", "vs seq", "vs 1w"
    );
    for b in v["baseline"].as_array().into_iter().flatten() {
        println!(
            "{:<9} {:<9} {:<19} {:>7} {:>11.2} {:>9.1} {:>9} {:>8}  -",
            "baseline",
            b["compression"].as_str().unwrap_or(""),
            "sequential",
            1,
            b["median_ms"].as_f64().unwrap_or(0.0),
            mib / (b["median_ms"].as_f64().unwrap_or(f64::NAN) / 1e3),
            "1.00x",
            "-"
        );
    }
    let fmt_x = |x: &Value| x.as_f64().map_or("-".to_string(), |x| format!("{x:.2}x"));
    for c in v["cells"].as_array().into_iter().flatten() {
        let strategy = if c["ordered"].as_bool() == Some(true) {
            format!("{}+ordered", c["strategy"].as_str().unwrap_or(""))
        } else {
            c["strategy"].as_str().unwrap_or("").to_string()
        };
        println!(
            "{:<9} {:<9} {:<19} {:>7} {:>11.2} {:>9.1} {:>9} {:>8}  {}",
            c["construction"].as_str().unwrap_or(""),
            c["compression"].as_str().unwrap_or(""),
            strategy,
            c["workers"],
            c["median_ms"].as_f64().unwrap_or(0.0),
            c["mib_per_s"].as_f64().unwrap_or(0.0),
            fmt_x(&c["speedup_vs_sequential"]),
            fmt_x(&c["speedup_vs_one_worker"]),
            if c["digest_consistent"].as_bool() == Some(true) { "ok" } else { "MISMATCH" }
        );
    }
}

pub fn run(args: &BenchArgs, json: bool) -> Result<Status> {
    if args.repeats < MIN_REPEATS {
        bail!("--repeats must be at least {MIN_REPEATS}");
    }
    let Some(shape) = synthetic::shape_by_name(&args.shape) else {
        bail!("unknown shape `{}`", args.shape);
    };
    let worker_counts = workers::resolve_list(&args.workers)?;
    let configs = cells(args)?;
    let layers = args.layers.unwrap_or(shape.layers);
    let totals: Vec<usize> = if args.sizes.is_empty() {
        vec![shape.scaled_bytes(args.scale)]
    } else {
        args.sizes.iter().map(|m| (m * 1048576.0).round() as usize).collect()
    };
    if layers == 0 || totals.iter().any(|&t| t < layers) {
        bail!("every model needs at least one byte per layer");
    }

    let mut models = Vec::new();
    let mut consistent = true;
    for (i, &total) in totals.iter().enumerate() {
        let model = synthetic::model_with_total(layers, total, args.seed + i as u64);
        let (value, ok, notes) = bench_model(args, &model, &configs, &worker_counts)?;
        consistent &= ok;
        if !json {
            print_table(&value);
            for n in &notes {
                println!("note: {n}");
            }
            println!();
        }
        models.push(value);
    }
    if json {
        println!("{}", json!({"models": models, "digests_consistent": consistent}));
    } else if consistent {
        println!("all digests consistent across worker counts");
    } else {
        println!("DIGEST MISMATCH across worker counts; timings above are not trustworthy");
    }
    Ok(if consistent { Status::Success } else { Status::VerificationFailed })
}
