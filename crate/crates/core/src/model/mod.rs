//! Whole-model and per-layer digests over fragmented tensor collections.
//!
//! Three strategies, each under either construction:
//!
//! * coalesced: copy all tensors into one buffer zero-padded to a multiple of
//!   the block size, then hash it block by block;
//! * per-layer: hash each tensor to a layer digest, then reduce the layer
//!   digests (Merkle: last block of each tensor zero-padded; lattice: blocks
//!   tagged `LE64(layer) || LE64(block)`, unpadded);
//! * in-place: hash blocks where they live via a [`BlockTable`], never
//!   copying or padding; a tensor's last block is hashed at its true length.
//!
//! The strategies intentionally disagree in general. Coalesced and in-place
//! agree exactly when every tensor size is a multiple of the block size.

mod block_table;
mod config;
mod tensor_map;

use std::sync::Mutex;

use rayon::prelude::*;

pub use block_table::{BlockRow, BlockTable};
pub use config::{Construction, HashConfig, IndexEncoding, Strategy, DEFAULT_BLOCK_SIZE, MIN_BLOCK_SIZE};
pub use tensor_map::{ModelManifest, TensorEntry, TensorMap};

use crate::artifact::ArtifactDigest;
use crate::compression::{compress_block, Digest};
use crate::error::{Error, Result};
use crate::lattice::{hash_tagged_into, lt_add, lt_zero, LatticeBuffer, LatticeDigest, LATTICE_DIGEST_LEN};
use crate::merkle::{hash_blocks_with, merkle_root_accounted, DigestBuffer};

/// Auxiliary memory a strategy allocated beyond the model itself.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AuxMemory {
    /// Contiguous copy of the model (coalesced only).
    pub staging_bytes: usize,
    /// Block digests, reduction scratch buffers and layer digests.
    pub digest_bytes: usize,
    /// Block lookup table (in-place only).
    pub table_bytes: usize,
}

impl AuxMemory {
    pub fn total(&self) -> usize {
        self.staging_bytes + self.digest_bytes + self.table_bytes
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelDigestResult {
    pub model_digest: ArtifactDigest,
    /// Present only for the per-layer strategy, in manifest order.
    pub layer_digests: Option<Vec<(String, ArtifactDigest)>>,
    pub config: HashConfig,
    pub block_count: u64,
    pub memory: AuxMemory,
}

/// Size of the coalesced buffer: total bytes rounded up to whole blocks.
pub fn padded_size(total: usize, block_size: usize) -> usize {
    total.div_ceil(block_size) * block_size
}

pub fn coalesced_block_count(total: u64, block_size: u64) -> u64 {
    total.div_ceil(block_size)
}

fn check_model(model: &TensorMap) -> Result<()> {
    if model.is_empty() {
        return Err(Error::InvalidInput("model has no tensors".into()));
    }
    if model.total_size() == 0 {
        return Err(Error::InvalidInput("model has no bytes to hash".into()));
    }
    Ok(())
}

fn merkle_leaf_feed<'a>(data: &'a [u8], block_size: usize, pad: bool) -> impl Fn(usize, &mut crate::compression::Hasher) + Sync + 'a {
    move |j, h| {
        let start = j * block_size;
        let end = (start + block_size).min(data.len());
        h.update(&data[start..end]);
        if pad {
            h.update_zeros(block_size - (end - start));
        }
    }
}

fn lattice_blocks(data: &[u8], block_size: usize, tag: impl Fn(usize) -> [u64; 2] + Sync, tags_used: usize) -> LatticeBuffer {
    let count = data.len().div_ceil(block_size);
    LatticeBuffer::build(count, |j, out| {
        let start = j * block_size;
        let end = (start + block_size).min(data.len());
        let t = tag(j);
        hash_tagged_into(&t[..tags_used], |h| h.update(&data[start..end]), out);
    })
}

/// Copy, pad, hash.
pub fn coalesce_hash(cfg: &HashConfig, model: &TensorMap) -> Result<ModelDigestResult> {
    cfg.validate()?;
    check_model(model)?;
    let bs = cfg.block_size;
    let padded = padded_size(model.total_size(), bs);
    let mut buffer = Vec::new();
    buffer
        .try_reserve_exact(padded)
        .map_err(|e| Error::Resource(format!("allocating {padded}-byte coalesced buffer: {e}")))?;
    for t in model.tensors() {
        buffer.extend_from_slice(t);
    }
    buffer.resize(padded, 0);
    let count = padded / bs;

    let (model_digest, digest_bytes) = match cfg.construction {
        Construction::Merkle => {
            let leaves = hash_blocks_with(cfg.alg, count, merkle_leaf_feed(&buffer, bs, false));
            let (root, bytes) = merkle_root_accounted(leaves)?;
            (ArtifactDigest::Merkle(root), bytes)
        }
        Construction::Lattice => {
            let blocks = lattice_blocks(&buffer, bs, |j| [j as u64, 0], 1);
            let (sum, bytes) = blocks.reduce_accounted();
            (ArtifactDigest::Lattice(sum), bytes)
        }
    };
    Ok(ModelDigestResult {
        model_digest,
        layer_digests: None,
        config: cfg.with_strategy(Strategy::Coalesced),
        block_count: count as u64,
        memory: AuxMemory {
            staging_bytes: buffer.capacity(),
            digest_bytes,
            table_bytes: 0,
        },
    })
}

struct LayerOutcome<D> {
    digest: D,
    blocks: usize,
    bytes: usize,
}

fn merkle_layer(cfg: &HashConfig, data: &[u8]) -> Result<LayerOutcome<Digest>> {
    let count = data.len().div_ceil(cfg.block_size);
    if count == 0 {
        return Ok(LayerOutcome {
            digest: compress_block(cfg.alg, b""),
            blocks: 0,
            bytes: 0,
        });
    }
    let leaves = hash_blocks_with(cfg.alg, count, merkle_leaf_feed(data, cfg.block_size, true));
    let (digest, bytes) = merkle_root_accounted(leaves)?;
    Ok(LayerOutcome {
        digest,
        blocks: count,
        bytes,
    })
}

fn lattice_layer(cfg: &HashConfig, layer: usize, data: &[u8]) -> LayerOutcome<LatticeDigest> {
    let blocks = lattice_blocks(data, cfg.block_size, |j| [layer as u64, j as u64], 2);
    let count = data.len().div_ceil(cfg.block_size);
    let (digest, bytes) = blocks.reduce_accounted();
    LayerOutcome {
        digest,
        blocks: count,
        bytes,
    }
}

fn named<D: Into<ArtifactDigest> + Copy>(model: &TensorMap, digests: &[D]) -> Vec<(String, ArtifactDigest)> {
    model
        .names()
        .zip(digests)
        .map(|(n, d)| (n.to_string(), (*d).into()))
        .collect()
}

/// A digest per tensor, layers hashed concurrently, then a final
/// reduction over the layer digests in manifest order.
pub fn per_layer_hash(cfg: &HashConfig, model: &TensorMap) -> Result<ModelDigestResult> {
    cfg.validate()?;
    check_model(model)?;
    let tensors: Vec<&[u8]> = model.tensors().collect();
    let config = cfg.with_strategy(Strategy::PerLayer).ordered(false);

    match cfg.construction {
        Construction::Merkle => {
            let layers = tensors
                .par_iter()
                .map(|t| merkle_layer(cfg, t))
                .collect::<Result<Vec<_>>>()?;
            let digests: Vec<Digest> = layers.iter().map(|l| l.digest).collect();
            let buffer = DigestBuffer::from_digests(cfg.alg, digests.iter().copied())?;
            let (root, final_bytes) = merkle_root_accounted(buffer)?;
            Ok(ModelDigestResult {
                model_digest: ArtifactDigest::Merkle(root),
                layer_digests: Some(named(model, &digests)),
                config,
                block_count: layers.iter().map(|l| l.blocks as u64).sum(),
                memory: AuxMemory {
                    staging_bytes: 0,
                    digest_bytes: layers.iter().map(|l| l.bytes).sum::<usize>() + final_bytes,
                    table_bytes: 0,
                },
            })
        }
        Construction::Lattice => {
            let layers: Vec<_> = tensors
                .par_iter()
                .enumerate()
                .map(|(i, t)| lattice_layer(cfg, i, t))
                .collect();
            let digests: Vec<LatticeDigest> = layers.iter().map(|l| l.digest).collect();
            let (sum, final_bytes) = LatticeBuffer::from_digests(&digests).reduce_accounted();
            Ok(ModelDigestResult {
                model_digest: ArtifactDigest::Lattice(sum),
                layer_digests: Some(named(model, &digests)),
                config,
                block_count: layers.iter().map(|l| l.blocks as u64).sum(),
                memory: AuxMemory {
                    staging_bytes: 0,
                    digest_bytes: layers.iter().map(|l| l.bytes).sum::<usize>() + final_bytes,
                    table_bytes: 0,
                },
            })
        }
    }
}

/// Layer indices sorted by tensor size, ties kept in manifest order.
pub fn size_order(model: &TensorMap) -> Vec<usize> {
    let sizes = model.sizes();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&i| sizes[i]);
    order
}

/// Lattice per-layer with layers launched smallest first. Each
/// finished layer digest is added to a shared running sum as soon as it is
/// ready, so small layers never wait on large ones. Byte-identical to the
/// unordered lattice per-layer result.
pub fn ordered_lattice_per_layer(cfg: &HashConfig, model: &TensorMap) -> Result<ModelDigestResult> {
    cfg.validate()?;
    if cfg.construction != Construction::Lattice || cfg.strategy != Strategy::PerLayer || !cfg.ordered_per_layer {
        return Err(Error::Config(
            "ordered per-layer hashing needs construction=lattice, strategy=per-layer, ordered".into(),
        ));
    }
    check_model(model)?;

    let running = Mutex::new(lt_zero());
    let slots: Vec<Mutex<Option<LayerOutcome<LatticeDigest>>>> = (0..model.len()).map(|_| Mutex::new(None)).collect();
    rayon::scope_fifo(|s| {
        for i in size_order(model) {
            let (running, slots) = (&running, &slots);
            let data = model.tensor(i);
            s.spawn_fifo(move |_| {
                let outcome = lattice_layer(cfg, i, data);
                {
                    let mut sum = running.lock().expect("running sum lock");
                    *sum = lt_add(&sum, &outcome.digest);
                }
                *slots[i].lock().expect("slot lock") = Some(outcome);
            });
        }
    });

    let layers: Vec<LayerOutcome<LatticeDigest>> = slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every layer ran"))
        .collect();
    let digests: Vec<LatticeDigest> = layers.iter().map(|l| l.digest).collect();
    Ok(ModelDigestResult {
        model_digest: ArtifactDigest::Lattice(running.into_inner().expect("running sum lock")),
        layer_digests: Some(named(model, &digests)),
        config: *cfg,
        block_count: layers.iter().map(|l| l.blocks as u64).sum(),
        memory: AuxMemory {
            staging_bytes: 0,
            digest_bytes: layers.iter().map(|l| l.bytes).sum::<usize>()
                + layers.len() * LATTICE_DIGEST_LEN
                + LATTICE_DIGEST_LEN,
            table_bytes: 0,
        },
    })
}

/// One global block counter across all tensors, blocks hashed at
/// their source location through the block table.
pub fn inplace_hash(cfg: &HashConfig, model: &TensorMap) -> Result<ModelDigestResult> {
    cfg.validate()?;
    check_model(model)?;
    let table = BlockTable::from_sizes(&model.sizes(), cfg.block_size);
    let tensors: Vec<&[u8]> = model.tensors().collect();
    let block = |k: usize| {
        let row = table.row(k);
        &tensors[row.tensor_index][row.offset_in_tensor..row.offset_in_tensor + row.length]
    };
    let count = table.len();

    let (model_digest, digest_bytes) = match cfg.construction {
        Construction::Merkle => {
            let leaves = hash_blocks_with(cfg.alg, count, |k, h| h.update(block(k)));
            let (root, bytes) = merkle_root_accounted(leaves)?;
            (ArtifactDigest::Merkle(root), bytes)
        }
        Construction::Lattice => {
            let blocks = LatticeBuffer::build(count, |k, out| {
                hash_tagged_into(&[k as u64], |h| h.update(block(k)), out)
            });
            let (sum, bytes) = blocks.reduce_accounted();
            (ArtifactDigest::Lattice(sum), bytes)
        }
    };
    Ok(ModelDigestResult {
        model_digest,
        layer_digests: None,
        config: cfg.with_strategy(Strategy::InPlace),
        block_count: count as u64,
        memory: AuxMemory {
            staging_bytes: 0,
            digest_bytes,
            table_bytes: table.allocated_bytes(),
        },
    })
}

/// Validates `cfg` and runs the strategy it names.
pub fn hash_model(cfg: &HashConfig, model: &TensorMap) -> Result<ModelDigestResult> {
    cfg.validate()?;
    match cfg.strategy {
        Strategy::Coalesced => coalesce_hash(cfg, model),
        Strategy::InPlace => inplace_hash(cfg, model),
        Strategy::PerLayer if cfg.ordered_per_layer => ordered_lattice_per_layer(cfg, model),
        Strategy::PerLayer => per_layer_hash(cfg, model),
    }
}
