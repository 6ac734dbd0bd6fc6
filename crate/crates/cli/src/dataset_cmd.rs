use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use sentinel_core::attestation::{
    check_subjects, sign_bundle, source_subject_name, verify_signature, KeyPair, Statement, Verdict,
    VerifyReport, BUNDLE_EXTENSION,
};
use sentinel_core::dataset::{
    iterate_batches, run_pipeline, source_digests_json, DatasetManifest, SampleCoverage, SourceDigest,
};
use sentinel_core::parallel::with_workers;
use sentinel_core::ArtifactDigest;
use serde_json::json;

use crate::model_cmd::{load_trusted, print_line, print_report};
use crate::{workers, DatasetStreamArgs, SignDatasetArgs, Status, VerifyDatasetArgs};

fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    DatasetManifest::load(path).with_context(|| format!("reading dataset manifest {}", path.display()))
}

fn digest_dataset(
    manifest: &DatasetManifest,
    stream: &DatasetStreamArgs,
    coverage: SampleCoverage,
    workers: usize,
) -> Result<BTreeMap<u32, SourceDigest>> {
    let batches = iterate_batches(manifest, stream.batch_size, stream.shuffle_seed)?;
    let declared = manifest.declared_sources();
    let acc = with_workers(workers, || run_pipeline(batches, &declared, coverage))?;
    Ok(acc.finalize())
}

pub fn bundle_file_name(source_id: u32) -> String {
    format!("source-{source_id}{BUNDLE_EXTENSION}")
}

pub fn sign(args: &SignDatasetArgs, json: bool) -> Result<Status> {
    let workers = workers::resolve(args.stream.workers)?;
    let manifest = load_manifest(&args.dataset)?;
    let declared = manifest.declared_sources();
    let selected: BTreeSet<u32> = if args.sources.is_empty() {
        declared.clone()
    } else {
        args.sources.iter().copied().collect()
    };
    if let Some(s) = selected.iter().find(|s| !declared.contains(s)) {
        bail!("source {s} is not declared in the manifest");
    }
    let key = KeyPair::load(&args.key).with_context(|| format!("loading key {}", args.key.display()))?;
    let coverage = SampleCoverage {
        include_label: args.include_labels,
    };

    let start = Instant::now();
    let digests = digest_dataset(&manifest, &args.stream, coverage, workers)?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;

    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let mut written = Vec::new();
    for source in &selected {
        let d = digests[source];
        let stmt = Statement::for_dataset_source(*source, &d.digest, d.count, coverage);
        let path = args.out_dir.join(bundle_file_name(*source));
        fs::write(&path, sign_bundle(&stmt, &key)?.to_json()?)
            .with_context(|| format!("writing {}", path.display()))?;
        written.push((*source, d, path));
    }
    let signed: BTreeMap<u32, SourceDigest> = written.iter().map(|(s, d, _)| (*s, *d)).collect();
    let digests_path = args.out_dir.join("digests.json");
    fs::write(&digests_path, serde_json::to_vec_pretty(&source_digests_json(&signed))?)?;

    if json {
        let rows: Vec<_> = written
            .iter()
            .map(|(s, d, p)| json!({"source_id": s, "count": d.count, "digest": d.digest.to_hex(), "bundle": p}))
            .collect();
        println!(
            "{}",
            json!({"samples": manifest.samples.len(), "elapsed_ms": elapsed_ms, "workers": workers, "sources": rows})
        );
    } else {
        for (s, d, p) in &written {
            println!("source {s:>5}  {:>7} samples  {}  {}", d.count, &d.digest.to_hex()[..16], p.display());
        }
        println!(
            "{} bundle(s), {} samples, {elapsed_ms:.2} ms on {workers} worker(s)",
            written.len(),
            manifest.samples.len()
        );
    }
    Ok(Status::Success)
}

fn collect_bundles(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<Vec<_>>>()?
                .into_iter()
                .filter(|f| f.file_name().is_some_and(|n| n.to_string_lossy().ends_with(BUNDLE_EXTENSION)))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

pub fn verify(args: &VerifyDatasetArgs, json: bool) -> Result<Status> {
    let workers = workers::resolve(args.stream.workers)?;
    let manifest = load_manifest(&args.dataset)?;
    let trusted = load_trusted(args.key.as_deref())?;
    let paths = collect_bundles(&args.bundles)?;

    let mut failures = 0usize;
    let mut statements = Vec::new();
    for path in &paths {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let label = path.display().to_string();
        let checked = verify_signature(&bytes, trusted.as_ref()).and_then(|stmt| {
            let parsed = stmt.predicate.dataset_coverage().and_then(|cov| {
                stmt.predicate
                    .source_id
                    .map(|s| (s, cov))
                    .ok_or_else(|| sentinel_core::Error::Format("predicate lacks source_id".into()))
            });
            match parsed {
                Ok((source, cov)) => Ok((stmt, source, cov)),
                Err(e) => Err(VerifyReport {
                    verdict: Verdict::Malformed,
                    detail: format!("predicate: {e}"),
                    statement: Some(stmt),
                }),
            }
        });
        match checked {
            Ok(entry) => statements.push((label, entry)),
            Err(report) => {
                failures += 1;
                print_report(&label, &report, json);
            }
        }
    }

    // One pass per label-coverage setting the bundles ask for.
    let coverages: BTreeSet<bool> = statements.iter().map(|(_, (_, _, c))| c.include_label).collect();
    let mut results: BTreeMap<bool, BTreeMap<u32, SourceDigest>> = BTreeMap::new();
    for include_label in coverages {
        let cov = SampleCoverage { include_label };
        results.insert(include_label, digest_dataset(&manifest, &args.stream, cov, workers)?);
    }

    let mut covered = BTreeSet::new();
    for (label, (stmt, source, cov)) in &statements {
        covered.insert(*source);
        let fin = &results[&cov.include_label];
        let mut recomputed = BTreeMap::new();
        if let Some(d) = fin.get(source) {
            recomputed.insert(source_subject_name(*source), ArtifactDigest::Lattice(d.digest));
        }
        let mut report = check_subjects(stmt, &recomputed);
        if let (Some(signed), Some(d)) = (stmt.predicate.sample_count, fin.get(source)) {
            if signed != d.count && report.verdict.is_ok() {
                report.verdict = Verdict::DigestMismatch;
                report.detail = format!("signed {signed} samples, found {}", d.count);
            }
        }
        if !report.verdict.is_ok() {
            failures += 1;
        }
        print_report(&format!("{label} [source {source}]"), &report, json);
    }

    let represented: BTreeSet<u32> = manifest.samples.iter().map(|s| s.source_id).collect();
    for missing in represented.difference(&covered) {
        failures += 1;
        print_line(&format!("source {missing}"), "MISSING_BUNDLE", "no bundle for this source", json);
    }

    if let Some(expected) = &manifest.expected_digests {
        let fin = match results.get(&false) {
            Some(fin) => fin.clone(),
            None => digest_dataset(&manifest, &args.stream, SampleCoverage::default(), workers)?,
        };
        for (source, hex_digest) in expected {
            let actual = source.parse::<u32>().ok().and_then(|s| fin.get(&s)).map(|d| d.digest.to_hex());
            if actual.as_deref() != Some(hex_digest.as_str()) {
                failures += 1;
                print_line(
                    &format!("source {source}"),
                    Verdict::DigestMismatch.as_str(),
                    "manifest expected digest differs",
                    json,
                );
            }
        }
    }

    if paths.is_empty() && represented.is_empty() {
        eprintln!("warning: dataset has no samples and no bundles were given; nothing to verify");
    }
    if !json {
        println!("{} bundle(s) checked, {failures} failure(s)", paths.len());
    }
    Ok(if failures == 0 {
        Status::Success
    } else {
        Status::VerificationFailed
    })
}
