use std::fmt;

use crate::compression::{CompressionAlg, Digest};
use crate::error::{Error, Result};
use crate::lattice::LatticeDigest;

/// Digest-map key for lattice digests.
pub const LATTICE_ALG_NAME: &str = "lthash";

/// Output of either construction, as recorded in attestation subjects.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArtifactDigest {
    Merkle(Digest),
    Lattice(LatticeDigest),
}

impl ArtifactDigest {
    pub fn alg_name(&self) -> &'static str {
        match self {
            ArtifactDigest::Merkle(d) => d.alg().name(),
            ArtifactDigest::Lattice(_) => LATTICE_ALG_NAME,
        }
    }

    pub fn to_hex(&self) -> String {
        match self {
            ArtifactDigest::Merkle(d) => d.to_hex(),
            ArtifactDigest::Lattice(d) => d.to_hex(),
        }
    }

    /// Parses a digest-map entry, checking the hex decodes to the length the
    /// algorithm declares.
    pub fn parse(alg_name: &str, hex_digest: &str) -> Result<Self> {
        if alg_name == LATTICE_ALG_NAME {
            return LatticeDigest::from_hex(hex_digest).map(ArtifactDigest::Lattice);
        }
        let alg: CompressionAlg = alg_name
            .parse()
            .map_err(|_| Error::format(format!("unknown digest algorithm `{alg_name}`")))?;
        Digest::from_hex(alg, hex_digest)
            .map(ArtifactDigest::Merkle)
            .map_err(|e| Error::format(e.to_string()))
    }

    pub fn as_merkle(&self) -> Option<&Digest> {
        match self {
            ArtifactDigest::Merkle(d) => Some(d),
            ArtifactDigest::Lattice(_) => None,
        }
    }

    pub fn as_lattice(&self) -> Option<&LatticeDigest> {
        match self {
            ArtifactDigest::Lattice(d) => Some(d),
            ArtifactDigest::Merkle(_) => None,
        }
    }
}

impl From<Digest> for ArtifactDigest {
    fn from(d: Digest) -> Self {
        ArtifactDigest::Merkle(d)
    }
}

impl From<LatticeDigest> for ArtifactDigest {
    fn from(d: LatticeDigest) -> Self {
        ArtifactDigest::Lattice(d)
    }
}

impl fmt::Debug for ArtifactDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.alg_name(), self.to_hex())
    }
}

impl fmt::Display for ArtifactDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.alg_name(), self.to_hex())
    }
}
