use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use sentinel_core::attestation::{
    check_subjects, sign_bundle, verify_signature, KeyPair, PublicKey, Statement, Verdict, VerifyReport,
    BUNDLE_EXTENSION,
};
use sentinel_core::model::{hash_model, ModelManifest, TensorMap};
use sentinel_core::parallel::with_workers;
use serde_json::json;

use crate::{workers, SignModelArgs, Status, VerifyModelArgs};

/// The data file name recorded in the manifest.
fn default_subject(manifest_path: &Path) -> Result<String> {
    let manifest = ModelManifest::load(manifest_path)
        .with_context(|| format!("reading model manifest {}", manifest_path.display()))?;
    Ok(Path::new(&manifest.data)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or(manifest.data))
}

fn default_bundle_path(manifest_path: &Path) -> PathBuf {
    let stem = manifest_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    manifest_path.with_file_name(format!("{stem}{BUNDLE_EXTENSION}"))
}

fn load_model(path: &Path) -> Result<TensorMap> {
    TensorMap::load(path).with_context(|| format!("loading model {}", path.display()))
}

pub fn sign(args: &SignModelArgs, json: bool) -> Result<Status> {
    let cfg = args.hash.config()?;
    let workers = workers::resolve(args.workers)?;
    let key = KeyPair::load(&args.key).with_context(|| format!("loading key {}", args.key.display()))?;
    let name = match &args.name {
        Some(n) => n.clone(),
        None => default_subject(&args.model)?,
    };
    let model = load_model(&args.model)?;

    let start = Instant::now();
    let result = with_workers(workers, || hash_model(&cfg, &model))?;
    let hash_ms = start.elapsed().as_secs_f64() * 1e3;

    let stmt = Statement::for_model(&name, &result);
    let start = Instant::now();
    let bundle = sign_bundle(&stmt, &key)?;
    let sign_ms = start.elapsed().as_secs_f64() * 1e3;
    let payload_len = bundle.payload_bytes()?.len();
    let out = args.out.clone().unwrap_or_else(|| default_bundle_path(&args.model));
    fs::write(&out, bundle.to_json()?).with_context(|| format!("writing {}", out.display()))?;

    let digest = result.model_digest;
    if json {
        println!(
            "{}",
            json!({
                "subject": name,
                "alg": digest.alg_name(),
                "digest": digest.to_hex(),
                "construction": cfg.construction.name(),
                "strategy": cfg.strategy.name(),
                "block_size": cfg.block_size,
                "block_count": result.block_count,
                "layers": result.layer_digests.as_ref().map(Vec::len),
                "workers": workers,
                "hash_ms": hash_ms,
                "sign_ms": sign_ms,
                "payload_bytes": payload_len,
                "bundle": out,
            })
        );
    } else {
        println!("subject:  {name}");
        println!("digest:   {}:{}", digest.alg_name(), digest.to_hex());
        println!(
            "config:   {} {} block={} blocks={}{}",
            cfg.construction,
            cfg.strategy,
            cfg.block_size,
            result.block_count,
            if cfg.ordered_per_layer { " ordered" } else { "" }
        );
        if let Some(layers) = &result.layer_digests {
            println!("layers:   {}", layers.len());
        }
        println!("hashing:  {hash_ms:.2} ms on {workers} worker(s)");
        println!("signing:  {sign_ms:.2} ms, payload {payload_len} bytes");
        println!("bundle:   {}", out.display());
    }
    Ok(Status::Success)
}

pub fn print_line(label: &str, verdict: &str, detail: &str, json: bool) {
    if json {
        println!("{}", json!({"target": label, "verdict": verdict, "detail": detail}));
    } else {
        println!("{label}: {verdict} ({detail})");
    }
}

pub fn print_report(label: &str, report: &VerifyReport, json: bool) {
    print_line(label, report.verdict.as_str(), &report.detail, json);
}

pub fn load_trusted(path: Option<&Path>) -> Result<Option<PublicKey>> {
    path.map(|p| PublicKey::load(p).with_context(|| format!("loading public key {}", p.display())))
        .transpose()
}

pub fn verify(args: &VerifyModelArgs, json: bool) -> Result<Status> {
    let workers = workers::resolve(args.workers)?;
    let trusted = load_trusted(args.key.as_deref())?;
    let bytes = fs::read(&args.bundle).with_context(|| format!("reading {}", args.bundle.display()))?;
    let label = args.bundle.display().to_string();

    let stmt = match verify_signature(&bytes, trusted.as_ref()) {
        Ok(stmt) => stmt,
        Err(report) => {
            print_report(&label, &report, json);
            return Ok(Status::VerificationFailed);
        }
    };
    // Hashing parameters come from the signed predicate only.
    let cfg = match stmt.predicate.model_config() {
        Ok(cfg) => cfg,
        Err(e) => {
            let report = VerifyReport {
                verdict: Verdict::Malformed,
                detail: format!("predicate: {e}"),
                statement: Some(stmt),
            };
            print_report(&label, &report, json);
            return Ok(Status::VerificationFailed);
        }
    };
    let name = match &args.name {
        Some(n) => n.clone(),
        None => default_subject(&args.model)?,
    };
    let model = load_model(&args.model)?;
    let result = with_workers(workers, || hash_model(&cfg, &model))?;

    let recomputed = BTreeMap::from([(name, result.model_digest)]);
    let mut report = check_subjects(&stmt, &recomputed);
    if let (Some(signed), Some(layers)) = (&stmt.predicate.layer_digests, &result.layer_digests) {
        let changed: Vec<&str> = layers
            .iter()
            .filter(|(n, d)| signed.get(n) != Some(&d.to_hex()))
            .map(|(n, _)| n.as_str())
            .collect();
        if !changed.is_empty() {
            report.verdict = Verdict::DigestMismatch;
            report.detail = format!("{}; layers differing: {}", report.detail, changed.join(", "));
        }
    }
    print_report(&label, &report, json);
    Ok(if report.verdict.is_ok() {
        Status::Success
    } else {
        Status::VerificationFailed
    })
}
