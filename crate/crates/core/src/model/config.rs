use std::fmt;
use std::str::FromStr;

use crate::compression::CompressionAlg;
use crate::error::{Error, Result};

pub const DEFAULT_BLOCK_SIZE: usize = 8192;
pub const MIN_BLOCK_SIZE: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Construction {
    Merkle,
    Lattice,
}

impl Construction {
    pub const fn name(self) -> &'static str {
        match self {
            Construction::Merkle => "merkle",
            Construction::Lattice => "lattice",
        }
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Construction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "merkle" => Ok(Construction::Merkle),
            "lattice" => Ok(Construction::Lattice),
            other => Err(Error::Config(format!("unknown construction `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Copy every tensor into one padded buffer, then hash it.
    Coalesced,
    /// Hash each tensor to a layer digest, then reduce the layer digests.
    PerLayer,
    /// Hash blocks where they live through a block table; no copies, no pad.
    InPlace,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Coalesced, Strategy::PerLayer, Strategy::InPlace];

    pub const fn name(self) -> &'static str {
        match self {
            Strategy::Coalesced => "coalesced",
            Strategy::PerLayer => "per-layer",
            Strategy::InPlace => "in-place",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coalesced" => Ok(Strategy::Coalesced),
            "per-layer" => Ok(Strategy::PerLayer),
            "in-place" => Ok(Strategy::InPlace),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

/// How lattice block hashes are tagged with their position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IndexEncoding {
    /// Merkle trees bind position structurally.
    None,
    /// `LE64(global block index) || block`.
    GlobalBlock,
    /// `LE64(layer index) || LE64(block index within layer) || block`.
    LayerBlock,
    /// `LE64(sample id) || data`.
    SampleId,
    /// `LE64(sample id) || LE64(label length) || label || data`.
    SampleIdLabel,
}

impl IndexEncoding {
    pub const fn name(self) -> &'static str {
        match self {
            IndexEncoding::None => "none",
            IndexEncoding::GlobalBlock => "le64-global-block-prefix",
            IndexEncoding::LayerBlock => "le64-layer-le64-block-prefix",
            IndexEncoding::SampleId => "le64-sample-id-prefix",
            IndexEncoding::SampleIdLabel => "le64-sample-id-le64-label-len-label-prefix",
        }
    }
}

impl FromStr for IndexEncoding {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            IndexEncoding::None,
            IndexEncoding::GlobalBlock,
            IndexEncoding::LayerBlock,
            IndexEncoding::SampleId,
            IndexEncoding::SampleIdLabel,
        ]
        .into_iter()
        .find(|e| e.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown index encoding `{s}`")))
    }
}

impl fmt::Display for IndexEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HashConfig {
    pub construction: Construction,
    /// Merkle compression function. Lattice hashing always uses BLAKE2b.
    pub alg: CompressionAlg,
    pub strategy: Strategy,
    pub block_size: usize,
    /// Lattice per-layer only: schedule layers smallest first and fold each
    /// finished layer into a running sum.
    pub ordered_per_layer: bool,
}

impl HashConfig {
    pub fn merkle(alg: CompressionAlg, strategy: Strategy) -> Self {
        HashConfig {
            construction: Construction::Merkle,
            alg,
            strategy,
            block_size: DEFAULT_BLOCK_SIZE,
            ordered_per_layer: false,
        }
    }

    pub fn lattice(strategy: Strategy) -> Self {
        HashConfig {
            construction: Construction::Lattice,
            alg: CompressionAlg::Blake2b,
            strategy,
            block_size: DEFAULT_BLOCK_SIZE,
            ordered_per_layer: false,
        }
    }

    pub fn with_block_size(mut self, block_size: usize) -> Self {
        self.block_size = block_size;
        self
    }

    pub fn ordered(mut self, ordered: bool) -> Self {
        self.ordered_per_layer = ordered;
        self
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_size < MIN_BLOCK_SIZE || !self.block_size.is_power_of_two() {
            return Err(Error::Config(format!(
                "block size must be a power of two >= {MIN_BLOCK_SIZE}, got {}",
                self.block_size
            )));
        }
        if self.construction == Construction::Lattice && self.alg != CompressionAlg::Blake2b {
            return Err(Error::Config(format!(
                "lattice hashing uses blake2b, not {}",
                self.alg
            )));
        }
        if self.ordered_per_layer
            && (self.construction != Construction::Lattice || self.strategy != Strategy::PerLayer)
        {
            return Err(Error::Config(
                "ordered per-layer scheduling requires the lattice per-layer strategy".into(),
            ));
        }
        Ok(())
    }

    pub fn index_encoding(&self) -> IndexEncoding {
        match (self.construction, self.strategy) {
            (Construction::Merkle, _) => IndexEncoding::None,
            (Construction::Lattice, Strategy::PerLayer) => IndexEncoding::LayerBlock,
            (Construction::Lattice, _) => IndexEncoding::GlobalBlock,
        }
    }
}
