//! Seeded synthetic models and datasets for tests and benchmarks.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::SampleRecord;
use crate::model::TensorMap;

/// Layer count and on-disk size of a reference model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelShape {
    pub name: &'static str,
    pub layers: usize,
    pub size_mb: u64,
}

pub const RESNET152: ModelShape = ModelShape { name: "resnet152", layers: 932, size_mb: 270 };
pub const BERT: ModelShape = ModelShape { name: "bert", layers: 199, size_mb: 538 };
pub const GPT2: ModelShape = ModelShape { name: "gpt2", layers: 149, size_mb: 1077 };
pub const VGG19: ModelShape = ModelShape { name: "vgg19", layers: 38, size_mb: 1077 };
pub const GPT2_XL: ModelShape = ModelShape { name: "gpt2-xl", layers: 581, size_mb: 8623 };

pub const SHAPES: [ModelShape; 5] = [RESNET152, BERT, GPT2, VGG19, GPT2_XL];

pub fn shape_by_name(name: &str) -> Option<ModelShape> {
    SHAPES.iter().copied().find(|s| s.name == name)
}

impl ModelShape {
    pub fn size_bytes(&self) -> u64 {
        self.size_mb << 20
    }

    /// Keeps the layer count, scales the total size.
    pub fn scaled_bytes(&self, scale: f64) -> usize {
        ((self.size_bytes() as f64 * scale).round() as usize).max(self.layers)
    }
}

fn random_bytes(rng: &mut ChaCha8Rng, len: usize) -> Vec<u8> {
    let mut v = vec![0u8; len];
    rng.fill_bytes(&mut v);
    v
}

/// `layers` tensors whose sizes sum to `total_bytes`, skewed so a few layers
/// dominate as in real checkpoints. Every layer gets at least one byte.
pub fn model_with_total(layers: usize, total_bytes: usize, seed: u64) -> TensorMap {
    assert!(layers >= 1 && total_bytes >= layers, "need at least one byte per layer");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..layers).map(|_| rng.gen_range(0.05f64..1.0).powi(3)).collect();
    let sum: f64 = weights.iter().sum();
    let spare = total_bytes - layers;
    let mut sizes: Vec<usize> = weights.iter().map(|w| 1 + (spare as f64 * w / sum) as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let largest = (0..layers).max_by_key(|&i| sizes[i]).expect("at least one layer");
    sizes[largest] += total_bytes - assigned;
    let mut map = TensorMap::new();
    for (i, size) in sizes.into_iter().enumerate() {
        map.insert(format!("layer{i}.weight"), random_bytes(&mut rng, size))
            .expect("generated names are unique");
    }
    map
}

/// A model with the layer count of `shape` and `scale` times its size.
pub fn shaped_model(shape: ModelShape, scale: f64, seed: u64) -> TensorMap {
    model_with_total(shape.layers, shape.scaled_bytes(scale), seed)
}

/// `layers` tensors with sizes drawn uniformly from `min..=max`.
pub fn random_model(layers: usize, min: usize, max: usize, seed: u64) -> TensorMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map = TensorMap::new();
    for i in 0..layers {
        let len = rng.gen_range(min..=max);
        map.insert(format!("t{i}"), random_bytes(&mut rng, len)).expect("unique names");
    }
    map
}

/// Tensors whose sizes are whole multiples of `block_size` (1 to
/// `max_blocks` blocks each).
pub fn block_multiple_model(layers: usize, block_size: usize, max_blocks: usize, seed: u64) -> TensorMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map = TensorMap::new();
    for i in 0..layers {
        let blocks = rng.gen_range(1..=max_blocks);
        map.insert(format!("t{i}"), random_bytes(&mut rng, blocks * block_size))
            .expect("unique names");
    }
    map
}

/// `samples` records assigned to `sources` providers at random, with data
/// lengths drawn from `min_len..=max_len` and one-byte labels.
pub fn dataset(samples: usize, sources: u32, min_len: usize, max_len: usize, seed: u64) -> Vec<SampleRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples as u64)
        .map(|id| {
            let len = rng.gen_range(min_len..=max_len);
            let label = vec![rng.gen_range(0u8..10)];
            SampleRecord {
                sample_id: id,
                source_id: rng.gen_range(0..sources),
                label,
                data: random_bytes(&mut rng, len),
            }
        })
        .collect()
}
