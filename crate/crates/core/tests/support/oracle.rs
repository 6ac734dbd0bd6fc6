//! Straight-line re-derivations of model digests, written directly against
//! the hash crates: one hasher at a time, no thread pool, nothing shared
//! with the library under test.

#![allow(dead_code)]

use blake2::Blake2b512;
use sha2::{Digest, Sha256};
use sha3::Sha3_256;

pub const PARTS: usize = 32;

pub fn compress(alg: &str, data: &[u8]) -> Vec<u8> {
    match alg {
        "sha256" => Sha256::digest(data).to_vec(),
        "blake2b" => Blake2b512::digest(data).to_vec(),
        "sha3-256" => Sha3_256::digest(data).to_vec(),
        other => panic!("unknown algorithm {other}"),
    }
}

/// Bottom-up pairing; an unpaired last entry is hashed with a zero digest.
pub fn merkle_root(alg: &str, leaves: Vec<Vec<u8>>) -> Vec<u8> {
    assert!(!leaves.is_empty());
    let mut level = leaves;
    while level.len() > 1 {
        let zero = vec![0u8; level[0].len()];
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        for pair in level.chunks(2) {
            let mut buf = pair[0].clone();
            buf.extend_from_slice(pair.get(1).unwrap_or(&zero));
            next.push(compress(alg, &buf));
        }
        level = next;
    }
    level.pop().unwrap()
}

/// BLAKE2b-512 of the little-endian tags followed by the data, read as 32
/// little-endian 16-bit lanes.
pub fn lattice_block(tags: &[u64], data: &[u8]) -> [u16; PARTS] {
    let mut h = Blake2b512::new();
    for t in tags {
        h.update(t.to_le_bytes());
    }
    h.update(data);
    let out = h.finalize();
    let mut parts = [0u16; PARTS];
    for (i, p) in parts.iter_mut().enumerate() {
        *p = u16::from_le_bytes([out[2 * i], out[2 * i + 1]]);
    }
    parts
}

pub fn lattice_add(acc: &mut [u16; PARTS], x: &[u16; PARTS]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a = a.wrapping_add(*b);
    }
}

pub fn lattice_bytes(parts: &[u16; PARTS]) -> Vec<u8> {
    parts.iter().flat_map(|p| p.to_le_bytes()).collect()
}

fn blocks(data: &[u8], block_size: usize) -> Vec<&[u8]> {
    data.chunks(block_size).collect()
}

fn padded(block: &[u8], block_size: usize) -> Vec<u8> {
    let mut b = block.to_vec();
    b.resize(block_size, 0);
    b
}

/// `construction` is "merkle" or "lattice"; `strategy` is "coalesced",
/// "per-layer" or "in-place".
pub fn model_digest(construction: &str, alg: &str, strategy: &str, block_size: usize, tensors: &[Vec<u8>]) -> Vec<u8> {
    match (construction, strategy) {
        ("merkle", "coalesced") => {
            let mut all: Vec<u8> = tensors.concat();
            let len = all.len().div_ceil(block_size) * block_size;
            all.resize(len, 0);
            merkle_root(alg, blocks(&all, block_size).into_iter().map(|b| compress(alg, b)).collect())
        }
        ("merkle", "per-layer") => {
            let layers: Vec<Vec<u8>> = tensors
                .iter()
                .map(|t| {
                    if t.is_empty() {
                        compress(alg, b"")
                    } else {
                        let leaves = blocks(t, block_size)
                            .into_iter()
                            .map(|b| compress(alg, &padded(b, block_size)))
                            .collect();
                        merkle_root(alg, leaves)
                    }
                })
                .collect();
            merkle_root(alg, layers)
        }
        ("merkle", "in-place") => {
            let mut leaves = Vec::new();
            for t in tensors {
                for b in blocks(t, block_size) {
                    leaves.push(compress(alg, b));
                }
            }
            merkle_root(alg, leaves)
        }
        ("lattice", "coalesced") => {
            let mut all: Vec<u8> = tensors.concat();
            let len = all.len().div_ceil(block_size) * block_size;
            all.resize(len, 0);
            let mut acc = [0u16; PARTS];
            for (j, b) in blocks(&all, block_size).into_iter().enumerate() {
                lattice_add(&mut acc, &lattice_block(&[j as u64], b));
            }
            lattice_bytes(&acc)
        }
        ("lattice", "per-layer") => {
            let mut acc = [0u16; PARTS];
            for (i, t) in tensors.iter().enumerate() {
                for (j, b) in blocks(t, block_size).into_iter().enumerate() {
                    lattice_add(&mut acc, &lattice_block(&[i as u64, j as u64], b));
                }
            }
            lattice_bytes(&acc)
        }
        ("lattice", "in-place") => {
            let mut acc = [0u16; PARTS];
            let mut k = 0u64;
            for t in tensors {
                for b in blocks(t, block_size) {
                    lattice_add(&mut acc, &lattice_block(&[k], b));
                    k += 1;
                }
            }
            lattice_bytes(&acc)
        }
        other => panic!("unknown combination {other:?}"),
    }
}

/// Per-source sum of `lattice_block([sample_id], data)`.
pub fn dataset_digests<'a, I>(samples: I) -> std::collections::BTreeMap<u32, (Vec<u8>, u64)>
where
    I: IntoIterator<Item = (u64, u32, &'a [u8])>,
{
    let mut sums: std::collections::BTreeMap<u32, ([u16; PARTS], u64)> = Default::default();
    for (id, source, data) in samples {
        let e = sums.entry(source).or_insert(([0u16; PARTS], 0));
        lattice_add(&mut e.0, &lattice_block(&[id], data));
        e.1 += 1;
    }
    sums.into_iter().map(|(s, (p, n))| (s, (lattice_bytes(&p), n))).collect()
}
