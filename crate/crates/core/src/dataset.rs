//! Streaming dataset authentication with per-source running lattice sums.
//!
//! Each sample is lattice-hashed on its raw bytes, tagged with its stable
//! `sample_id` (never its shuffled position). A batch is split by source,
//! each source's sample hashes are reduced to a batch digest, and that
//! digest is added to the source's running sum. Because lattice addition is
//! associative and commutative, the final sums depend only on which samples
//! were seen, not on shuffle seed, batch size or worker count.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::{self, File};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{hash_tagged_into, lt_add, lt_reduce, lt_zero, LatticeDigest, LATTICE_DIGEST_LEN};
use crate::model::IndexEncoding;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleRecord {
    pub sample_id: u64,
    pub source_id: u32,
    pub label: Vec<u8>,
    pub data: Vec<u8>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Batch {
    pub samples: Vec<SampleRecord>,
}

impl Batch {
    pub fn size(&self) -> usize {
        self.samples.len()
    }
}

/// What a sample digest covers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SampleCoverage {
    /// Also bind the label: `LE64(id) || LE64(label len) || label || data`.
    pub include_label: bool,
}

impl SampleCoverage {
    pub fn index_encoding(&self) -> IndexEncoding {
        if self.include_label {
            IndexEncoding::SampleIdLabel
        } else {
            IndexEncoding::SampleId
        }
    }
}

/// `lt_hash_block(sample_id, data)`: the raw data only.
pub fn hash_sample(s: &SampleRecord) -> LatticeDigest {
    hash_sample_with(s, SampleCoverage::default())
}

pub fn hash_sample_with(s: &SampleRecord, coverage: SampleCoverage) -> LatticeDigest {
    let mut out = [0u8; LATTICE_DIGEST_LEN];
    if coverage.include_label {
        hash_tagged_into(
            &[s.sample_id, s.label.len() as u64],
            |h| {
                h.update(&s.label);
                h.update(&s.data);
            },
            &mut out,
        );
    } else {
        hash_tagged_into(&[s.sample_id], |h| h.update(&s.data), &mut out);
    }
    LatticeDigest::from_bytes(&out)
}

/// Final digest and sample count for one source.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SourceDigest {
    pub digest: LatticeDigest,
    pub count: u64,
}

/// Per-source running sums. Every declared source starts at the zero digest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceAccumulator {
    coverage: SampleCoverage,
    sums: BTreeMap<u32, LatticeDigest>,
    counts: BTreeMap<u32, u64>,
}

impl SourceAccumulator {
    pub fn new<I: IntoIterator<Item = u32>>(declared: I, coverage: SampleCoverage) -> Self {
        let sources: BTreeSet<u32> = declared.into_iter().collect();
        SourceAccumulator {
            coverage,
            sums: sources.iter().map(|&s| (s, lt_zero())).collect(),
            counts: sources.iter().map(|&s| (s, 0)).collect(),
        }
    }

    /// Same declared sources and coverage, all sums zero.
    pub fn empty_like(&self) -> Self {
        SourceAccumulator::new(self.sums.keys().copied(), self.coverage)
    }

    pub fn coverage(&self) -> SampleCoverage {
        self.coverage
    }

    pub fn sum(&self, source: u32) -> Option<&LatticeDigest> {
        self.sums.get(&source)
    }

    pub fn count(&self, source: u32) -> Option<u64> {
        self.counts.get(&source).copied()
    }

    /// Hashes every sample in parallel, reduces each source's hashes to a
    /// batch digest and adds it to that source's running sum. Rejects the
    /// whole batch, leaving the sums untouched, if any sample names an
    /// undeclared source.
    pub fn process_batch(&mut self, batch: &Batch) -> Result<()> {
        if let Some(s) = batch.samples.iter().find(|s| !self.sums.contains_key(&s.source_id)) {
            return Err(Error::Validation(format!(
                "sample {} references undeclared source {}",
                s.sample_id, s.source_id
            )));
        }
        let coverage = self.coverage;
        let hashes: Vec<LatticeDigest> = batch
            .samples
            .par_iter()
            .map(|s| hash_sample_with(s, coverage))
            .collect();
        let mut groups: BTreeMap<u32, Vec<LatticeDigest>> = BTreeMap::new();
        for (s, h) in batch.samples.iter().zip(hashes) {
            groups.entry(s.source_id).or_default().push(h);
        }
        let partials: Vec<(u32, LatticeDigest, u64)> = groups
            .into_par_iter()
            .map(|(source, hs)| (source, lt_reduce(&hs), hs.len() as u64))
            .collect();
        for (source, digest, n) in partials {
            let sum = self.sums.get_mut(&source).expect("validated above");
            *sum = lt_add(sum, &digest);
            *self.counts.get_mut(&source).expect("validated above") += n;
        }
        Ok(())
    }

    /// Folds another accumulator (e.g. a worker's partial) into this one.
    pub fn merge(&mut self, other: &SourceAccumulator) -> Result<()> {
        if other.coverage != self.coverage {
            return Err(Error::InvalidState("cannot merge accumulators with different coverage".into()));
        }
        for (source, digest) in &other.sums {
            let sum = self.sums.entry(*source).or_insert_with(lt_zero);
            *sum = lt_add(sum, digest);
            *self.counts.entry(*source).or_insert(0) += other.counts.get(source).copied().unwrap_or(0);
        }
        Ok(())
    }

    pub fn finalize(&self) -> BTreeMap<u32, SourceDigest> {
        self.sums
            .iter()
            .map(|(&source, &digest)| {
                let count = self.counts.get(&source).copied().unwrap_or(0);
                (source, SourceDigest { digest, count })
            })
            .collect()
    }
}

/// Runs the digest stage over a batch stream. Batches are processed
/// concurrently into per-worker partial accumulators that are merged at the
/// end.
pub fn run_pipeline<I>(batches: I, declared: &BTreeSet<u32>, coverage: SampleCoverage) -> Result<SourceAccumulator>
where
    I: Iterator<Item = Result<Batch>> + Send,
{
    let base = SourceAccumulator::new(declared.iter().copied(), coverage);
    batches
        .par_bridge()
        .try_fold(
            || base.empty_like(),
            |mut acc, batch| {
                acc.process_batch(&batch?)?;
                Ok::<_, Error>(acc)
            },
        )
        .try_reduce(
            || base.empty_like(),
            |mut a, b| {
                a.merge(&b)?;
                Ok(a)
            },
        )
}

/// Straight sequential fold, one sample at a time.
pub fn sequential_source_digests<'a, I>(samples: I, coverage: SampleCoverage) -> BTreeMap<u32, SourceDigest>
where
    I: IntoIterator<Item = &'a SampleRecord>,
{
    let mut out: BTreeMap<u32, SourceDigest> = BTreeMap::new();
    for s in samples {
        let e = out.entry(s.source_id).or_insert(SourceDigest {
            digest: lt_zero(),
            count: 0,
        });
        e.digest = lt_add(&e.digest, &hash_sample_with(s, coverage));
        e.count += 1;
    }
    out
}

/// `{source_id: hex128}` as emitted on disk.
pub fn source_digests_json(digests: &BTreeMap<u32, SourceDigest>) -> serde_json::Value {
    let map: serde_json::Map<String, serde_json::Value> = digests
        .iter()
        .map(|(s, d)| (s.to_string(), serde_json::Value::String(d.digest.to_hex())))
        .collect();
    serde_json::Value::Object(map)
}

/// Seed-determined permutation split into batches of at most `batch_size`.
fn shuffled_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Shuffles in-memory records into batches.
pub fn shuffle_into_batches(records: &[SampleRecord], batch_size: usize, seed: u64) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::InvalidInput("batch size must be at least 1".into()));
    }
    let order = shuffled_order(records.len(), seed);
    Ok(order
        .chunks(batch_size)
        .map(|idx| Batch {
            samples: idx.iter().map(|&i| records[i].clone()).collect(),
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub sample_id: u64,
    pub source_id: u32,
    /// Hex-encoded label bytes.
    #[serde(default)]
    pub label: String,
    pub offset: u64,
    pub length: u64,
}

/// Dataset description: sample ranges into one flat data shard.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub sources: Vec<u32>,
    pub samples: Vec<SampleEntry>,
    /// Shard path, relative to the manifest.
    pub data: String,
    /// Optional expected `{source_id: hex128}` digests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_digests: Option<BTreeMap<String, String>>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read(path)?;
        let mut m: DatasetManifest = serde_json::from_slice(&raw)?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate()?;
        Ok(m)
    }

    pub fn declared_sources(&self) -> BTreeSet<u32> {
        self.sources.iter().copied().collect()
    }

    pub fn data_path(&self) -> PathBuf {
        self.base_dir.join(&self.data)
    }

    /// Ids unique, sources declared, ranges tile `[0, total)` without gaps
    /// or overlap.
    pub fn validate(&self) -> Result<()> {
        let declared = self.declared_sources();
        let mut ids = HashSet::with_capacity(self.samples.len());
        for s in &self.samples {
            if !ids.insert(s.sample_id) {
                return Err(Error::format(format!("duplicate sample id {}", s.sample_id)));
            }
            if !declared.contains(&s.source_id) {
                return Err(Error::format(format!(
                    "sample {} references undeclared source {}",
                    s.sample_id, s.source_id
                )));
            }
            hex::decode(&s.label).map_err(|e| Error::format(format!("sample {} label: {e}", s.sample_id)))?;
        }
        self.tiled_length().map(|_| ())
    }

    fn tiled_length(&self) -> Result<u64> {
        let mut ranges: Vec<(u64, u64)> = self.samples.iter().map(|s| (s.offset, s.length)).collect();
        ranges.sort_unstable();
        let mut end = 0u64;
        for (offset, length) in ranges {
            if offset != end {
                return Err(Error::format(format!(
                    "sample ranges do not tile the shard: expected offset {end}, found {offset}"
                )));
            }
            end = offset.checked_add(length).ok_or_else(|| Error::format("sample range overflows"))?;
        }
        Ok(end)
    }

    /// Writes `<dir>/<stem>.json` plus the `<dir>/<stem>.bin` shard.
    pub fn write(records: &[SampleRecord], sources: &BTreeSet<u32>, dir: &Path, stem: &str) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let data_name = format!("{stem}.bin");
        let mut shard = std::io::BufWriter::new(File::create(dir.join(&data_name))?);
        let mut samples = Vec::with_capacity(records.len());
        let mut offset = 0u64;
        for r in records {
            shard.write_all(&r.data)?;
            samples.push(SampleEntry {
                sample_id: r.sample_id,
                source_id: r.source_id,
                label: hex::encode(&r.label),
                offset,
                length: r.data.len() as u64,
            });
            offset += r.data.len() as u64;
        }
        shard.flush()?;
        let manifest = DatasetManifest {
            sources: sources.iter().copied().collect(),
            samples,
            data: data_name,
            expected_digests: None,
            base_dir: PathBuf::new(),
        };
        manifest.validate()?;
        let path = dir.join(format!("{stem}.json"));
        fs::write(&path, serde_json::to_vec_pretty(&manifest)?)?;
        Ok(path)
    }
}

/// Streams a shuffled dataset from its shard. Every sample is yielded once.
pub struct BatchIter {
    manifest: DatasetManifest,
    file: File,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

pub fn iterate_batches(manifest: &DatasetManifest, batch_size: usize, shuffle_seed: u64) -> Result<BatchIter> {
    if batch_size == 0 {
        return Err(Error::InvalidInput("batch size must be at least 1".into()));
    }
    manifest.validate()?;
    let file = File::open(manifest.data_path())?;
    let expected = manifest.tiled_length()?;
    let actual = file.metadata()?.len();
    if actual != expected {
        return Err(Error::format(format!(
            "shard {} is {actual} bytes but the manifest describes {expected}",
            manifest.data_path().display()
        )));
    }
    Ok(BatchIter {
        order: shuffled_order(manifest.samples.len(), shuffle_seed),
        manifest: manifest.clone(),
        file,
        batch_size,
        pos: 0,
    })
}

impl BatchIter {
    fn read_sample(&mut self, i: usize) -> Result<SampleRecord> {
        let e = &self.manifest.samples[i];
        let mut data = vec![0u8; e.length as usize];
        self.file.seek(SeekFrom::Start(e.offset))?;
        self.file.read_exact(&mut data).map_err(|err| {
            Error::format(format!("reading sample {}: {err}", e.sample_id))
        })?;
        Ok(SampleRecord {
            sample_id: e.sample_id,
            source_id: e.source_id,
            label: hex::decode(&e.label).map_err(|err| Error::format(err.to_string()))?,
            data,
        })
    }
}

impl Iterator for BatchIter {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let idx: Vec<usize> = self.order[self.pos..end].to_vec();
        self.pos = end;
        let samples = idx.into_iter().map(|i| self.read_sample(i)).collect::<Result<Vec<_>>>();
        Some(samples.map(|samples| Batch { samples }))
    }
}
