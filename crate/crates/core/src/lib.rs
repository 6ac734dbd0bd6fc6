//! Parallel hashing, dataset digests and signed attestations for
//! machine-learning artifacts.

pub mod artifact;
pub mod attestation;
pub mod compression;
pub mod dataset;
pub mod error;
pub mod lattice;
pub mod merkle;
pub mod model;
pub mod parallel;
mod reduce;
pub mod synthetic;

pub use artifact::ArtifactDigest;
pub use compression::{compress_block, sequential_hash, CompressionAlg, Digest};
pub use error::{Error, Result};
pub use lattice::{lt_add, lt_hash_block, lt_reduce, lt_sub, lt_zero, BlockIndex, LatticeDigest};
pub use merkle::{hash_blocks, merkle_root, DigestBuffer, ReductionState};
pub use model::{hash_model, HashConfig, Strategy, TensorMap};
