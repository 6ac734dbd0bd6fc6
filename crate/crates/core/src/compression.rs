//! One-way compression primitives shared by the Merkle and lattice
//! constructions, plus the whole-input sequential hash used as a baseline.

use std::fmt;
use std::io::{self, Read};
use std::str::FromStr;

use blake2::Blake2b512;
use sha2::{Digest as _, Sha256};
use sha3::Sha3_256;

use crate::error::{Error, Result};

/// Widest digest produced by any supported algorithm (BLAKE2b-512).
pub const MAX_DIGEST_LEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CompressionAlg {
    Sha256,
    Blake2b,
    Sha3_256,
}

impl CompressionAlg {
    pub const ALL: [CompressionAlg; 3] = [
        CompressionAlg::Sha256,
        CompressionAlg::Blake2b,
        CompressionAlg::Sha3_256,
    ];

    pub const fn digest_len(self) -> usize {
        match self {
            CompressionAlg::Sha256 | CompressionAlg::Sha3_256 => 32,
            CompressionAlg::Blake2b => 64,
        }
    }

    /// Name used in attestation predicates and digest maps.
    pub const fn name(self) -> &'static str {
        match self {
            CompressionAlg::Sha256 => "sha256",
            CompressionAlg::Blake2b => "blake2b",
            CompressionAlg::Sha3_256 => "sha3-256",
        }
    }
}

impl fmt::Display for CompressionAlg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CompressionAlg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sha256" => Ok(CompressionAlg::Sha256),
            "blake2b" => Ok(CompressionAlg::Blake2b),
            "sha3-256" => Ok(CompressionAlg::Sha3_256),
            other => Err(Error::Config(format!("unknown compression algorithm `{other}`"))),
        }
    }
}

/// A compression-function output tagged with the algorithm that produced it.
///
/// Bytes past `alg.digest_len()` are always zero, so the derived equality
/// compares exactly the algorithm and the meaningful prefix.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Digest {
    alg: CompressionAlg,
    bytes: [u8; MAX_DIGEST_LEN],
}

impl Digest {
    pub fn from_slice(alg: CompressionAlg, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != alg.digest_len() {
            return Err(Error::InvalidInput(format!(
                "{alg} digest must be {} bytes, got {}",
                alg.digest_len(),
                bytes.len()
            )));
        }
        let mut buf = [0u8; MAX_DIGEST_LEN];
        buf[..bytes.len()].copy_from_slice(bytes);
        Ok(Digest { alg, bytes: buf })
    }

    pub fn from_hex(alg: CompressionAlg, s: &str) -> Result<Self> {
        let raw = hex::decode(s).map_err(|e| Error::format(format!("bad hex digest: {e}")))?;
        Digest::from_slice(alg, &raw)
    }

    /// The all-zero digest, used as the Merkle padding node.
    pub fn zero(alg: CompressionAlg) -> Self {
        Digest {
            alg,
            bytes: [0u8; MAX_DIGEST_LEN],
        }
    }

    pub fn alg(&self) -> CompressionAlg {
        self.alg
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes[..self.alg.digest_len()]
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.as_bytes())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({}:{})", self.alg, self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Incremental hasher over any supported algorithm.
#[derive(Clone)]
pub(crate) enum Hasher {
    Sha256(Sha256),
    Blake2b(Blake2b512),
    Sha3_256(Sha3_256),
}

impl Hasher {
    pub(crate) fn new(alg: CompressionAlg) -> Self {
        match alg {
            CompressionAlg::Sha256 => Hasher::Sha256(Sha256::new()),
            CompressionAlg::Blake2b => Hasher::Blake2b(Blake2b512::new()),
            CompressionAlg::Sha3_256 => Hasher::Sha3_256(Sha3_256::new()),
        }
    }

    pub(crate) fn update(&mut self, data: &[u8]) {
        match self {
            Hasher::Sha256(h) => h.update(data),
            Hasher::Blake2b(h) => h.update(data),
            Hasher::Sha3_256(h) => h.update(data),
        }
    }

    /// Feeds `n` zero bytes without allocating.
    pub(crate) fn update_zeros(&mut self, mut n: usize) {
        const ZEROS: [u8; 4096] = [0u8; 4096];
        while n > 0 {
            let take = n.min(ZEROS.len());
            self.update(&ZEROS[..take]);
            n -= take;
        }
    }

    pub(crate) fn finalize_into(self, out: &mut [u8]) {
        match self {
            Hasher::Sha256(h) => out.copy_from_slice(&h.finalize()),
            Hasher::Blake2b(h) => out.copy_from_slice(&h.finalize()),
            Hasher::Sha3_256(h) => out.copy_from_slice(&h.finalize()),
        }
    }

    pub(crate) fn finalize(self) -> Digest {
        let alg = match &self {
            Hasher::Sha256(_) => CompressionAlg::Sha256,
            Hasher::Blake2b(_) => CompressionAlg::Blake2b,
            Hasher::Sha3_256(_) => CompressionAlg::Sha3_256,
        };
        let mut d = Digest::zero(alg);
        self.finalize_into(&mut d.bytes[..alg.digest_len()]);
        d
    }
}

/// Standard digest of `data` under `alg`. Total over all inputs, including
/// the empty slice.
pub fn compress_block(alg: CompressionAlg, data: &[u8]) -> Digest {
    let mut h = Hasher::new(alg);
    h.update(data);
    h.finalize()
}

/// Writes the digest of `data` straight into `out`, which must be exactly
/// `alg.digest_len()` bytes.
pub(crate) fn compress_into(alg: CompressionAlg, data: &[u8], out: &mut [u8]) {
    let mut h = Hasher::new(alg);
    h.update(data);
    h.finalize_into(out);
}

/// Hashes a byte stream front to back with a single hasher.
///
/// The result equals `compress_block` over the concatenated stream; this is
/// the single-threaded baseline parallel constructions are measured against.
pub fn sequential_hash<R: Read>(alg: CompressionAlg, mut stream: R) -> io::Result<Digest> {
    let mut h = Hasher::new(alg);
    let mut buf = vec![0u8; 64 * 1024];
    loop {
        let n = match stream.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        h.update(&buf[..n]);
    }
    Ok(h.finalize())
}

/// Same as [`sequential_hash`] over an in-memory sequence of fragments.
pub fn sequential_hash_slices<'a, I>(alg: CompressionAlg, chunks: I) -> Digest
where
    I: IntoIterator<Item = &'a [u8]>,
{
    let mut h = Hasher::new(alg);
    for c in chunks {
        h.update(c);
    }
    h.finalize()
}
