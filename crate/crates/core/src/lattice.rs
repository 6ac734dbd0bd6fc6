//! Lattice hashing (LtHash) with 64-byte digests: 8 little-endian 64-bit
//! words, each packing four 16-bit partitions, 32 partitions in total.
//! Digests combine by partition-wise addition modulo 2^16.
//!
//! Block digests are BLAKE2b-512 over the block tagged with its index, so the
//! order-invariant sum still binds each block to its position.

use std::fmt;
use std::ops::{Add, AddAssign, Sub, SubAssign};

use rayon::prelude::*;

use crate::compression::{CompressionAlg, Hasher};
use crate::error::{Error, Result};
use crate::reduce::{FlatBuffer, PairCombine, Reducer};

pub const LATTICE_DIGEST_LEN: usize = 64;
pub const LATTICE_WORDS: usize = 8;
pub const LATTICE_PARTITIONS: usize = 32;
pub const PARTITION_BITS: u32 = 16;

/// Partitions 0 and 2 of every word.
const EVEN_MASK: u64 = 0x0000_FFFF_0000_FFFF;
/// Partitions 1 and 3 of every word.
const ODD_MASK: u64 = 0xFFFF_0000_FFFF_0000;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LatticeDigest {
    words: [u64; LATTICE_WORDS],
}

/// Index of a block inside a lattice-hashed set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockIndex(pub u64);

impl LatticeDigest {
    pub const fn from_words(words: [u64; LATTICE_WORDS]) -> Self {
        LatticeDigest { words }
    }

    pub fn words(&self) -> &[u64; LATTICE_WORDS] {
        &self.words
    }

    pub fn from_bytes(bytes: &[u8; LATTICE_DIGEST_LEN]) -> Self {
        let mut words = [0u64; LATTICE_WORDS];
        for (w, chunk) in words.iter_mut().zip(bytes.chunks_exact(8)) {
            *w = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        LatticeDigest { words }
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        let arr: &[u8; LATTICE_DIGEST_LEN] = bytes.try_into().map_err(|_| {
            Error::InvalidInput(format!(
                "lattice digest must be {LATTICE_DIGEST_LEN} bytes, got {}",
                bytes.len()
            ))
        })?;
        Ok(LatticeDigest::from_bytes(arr))
    }

    pub fn to_bytes(&self) -> [u8; LATTICE_DIGEST_LEN] {
        let mut out = [0u8; LATTICE_DIGEST_LEN];
        for (chunk, w) in out.chunks_exact_mut(8).zip(self.words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        out
    }

    /// 128 lowercase hex characters.
    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let raw = hex::decode(s).map_err(|e| Error::format(format!("bad hex digest: {e}")))?;
        LatticeDigest::from_slice(&raw)
    }

    /// Bits `[16 i, 16 i + 16)` of the concatenated words.
    pub fn partition(&self, i: usize) -> u16 {
        assert!(i < LATTICE_PARTITIONS, "partition index {i} out of range");
        (self.words[i / 4] >> (16 * (i % 4))) as u16
    }

    pub fn from_partitions(parts: &[u16; LATTICE_PARTITIONS]) -> Self {
        let mut words = [0u64; LATTICE_WORDS];
        for (i, &p) in parts.iter().enumerate() {
            words[i / 4] |= u64::from(p) << (16 * (i % 4));
        }
        LatticeDigest { words }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }
}

impl fmt::Debug for LatticeDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LatticeDigest({})", self.to_hex())
    }
}

impl fmt::Display for LatticeDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Adds the four 16-bit partitions of two words, discarding each carry.
///
/// Even and odd partitions are summed separately with the other half masked
/// off, so a carry out of one partition lands in a masked gap and is cleared.
#[inline]
pub fn add_word(a: u64, b: u64) -> u64 {
    let even = (a & EVEN_MASK).wrapping_add(b & EVEN_MASK) & EVEN_MASK;
    let odd = (a & ODD_MASK).wrapping_add(b & ODD_MASK) & ODD_MASK;
    even | odd
}

/// Partition-wise subtraction. The masked gaps are pre-filled with ones so a
/// borrow out of one partition is absorbed before reaching the next.
#[inline]
pub fn sub_word(a: u64, b: u64) -> u64 {
    let even = ((a & EVEN_MASK) | ODD_MASK).wrapping_sub(b & EVEN_MASK) & EVEN_MASK;
    let odd = ((a & ODD_MASK) | EVEN_MASK).wrapping_sub(b & ODD_MASK) & ODD_MASK;
    even | odd
}

pub fn lt_zero() -> LatticeDigest {
    LatticeDigest::default()
}

pub fn lt_add(a: &LatticeDigest, b: &LatticeDigest) -> LatticeDigest {
    let mut words = [0u64; LATTICE_WORDS];
    for (i, w) in words.iter_mut().enumerate() {
        *w = add_word(a.words[i], b.words[i]);
    }
    LatticeDigest { words }
}

pub fn lt_sub(a: &LatticeDigest, b: &LatticeDigest) -> LatticeDigest {
    let mut words = [0u64; LATTICE_WORDS];
    for (i, w) in words.iter_mut().enumerate() {
        *w = sub_word(a.words[i], b.words[i]);
    }
    LatticeDigest { words }
}

impl Add for LatticeDigest {
    type Output = LatticeDigest;
    fn add(self, rhs: Self) -> Self {
        lt_add(&self, &rhs)
    }
}

impl AddAssign for LatticeDigest {
    fn add_assign(&mut self, rhs: Self) {
        *self = lt_add(self, &rhs);
    }
}

impl Sub for LatticeDigest {
    type Output = LatticeDigest;
    fn sub(self, rhs: Self) -> Self {
        lt_sub(&self, &rhs)
    }
}

impl SubAssign for LatticeDigest {
    fn sub_assign(&mut self, rhs: Self) {
        *self = lt_sub(self, &rhs);
    }
}

impl std::iter::Sum for LatticeDigest {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(lt_zero(), |acc, d| lt_add(&acc, &d))
    }
}

/// BLAKE2b-512 over `LE64(tag[0]) || LE64(tag[1]) || ... || data`, read back
/// as a lattice digest.
pub(crate) fn hash_tagged_into(tags: &[u64], feed: impl FnOnce(&mut Hasher), out: &mut [u8]) {
    let mut h = Hasher::new(CompressionAlg::Blake2b);
    for t in tags {
        h.update(&t.to_le_bytes());
    }
    feed(&mut h);
    h.finalize_into(out);
}

pub(crate) fn hash_tagged(tags: &[u64], data: &[u8]) -> LatticeDigest {
    let mut out = [0u8; LATTICE_DIGEST_LEN];
    hash_tagged_into(tags, |h| h.update(data), &mut out);
    LatticeDigest::from_bytes(&out)
}

/// `BLAKE2b(LE64(index) || data)` as a lattice digest.
pub fn lt_hash_block(index: BlockIndex, data: &[u8]) -> LatticeDigest {
    hash_tagged(&[index.0], data)
}

struct LatticeCombine;

impl PairCombine for LatticeCombine {
    fn combine(&self, left: &[u8], right: Option<&[u8]>, out: &mut [u8]) {
        match right {
            Some(r) => {
                for ((o, l), r) in out.chunks_exact_mut(8).zip(left.chunks_exact(8)).zip(r.chunks_exact(8)) {
                    let l = u64::from_le_bytes(l.try_into().expect("8 bytes"));
                    let r = u64::from_le_bytes(r.try_into().expect("8 bytes"));
                    o.copy_from_slice(&add_word(l, r).to_le_bytes());
                }
            }
            // the padding element is the additive identity
            None => out.copy_from_slice(left),
        }
    }
}

/// Lattice block digests stored back to back, ready for tree reduction.
#[derive(Clone, Debug)]
pub(crate) struct LatticeBuffer(FlatBuffer);

impl LatticeBuffer {
    /// Fills `count` entries in parallel; `fill(i, out)` writes entry `i`.
    pub(crate) fn build<F>(count: usize, fill: F) -> Self
    where
        F: Fn(usize, &mut [u8]) + Sync,
    {
        let mut buf = FlatBuffer::zeroed(LATTICE_DIGEST_LEN, count);
        buf.entries_mut().enumerate().for_each(|(i, out)| fill(i, out));
        LatticeBuffer(buf)
    }

    pub(crate) fn from_digests(digests: &[LatticeDigest]) -> Self {
        LatticeBuffer::build(digests.len(), |i, out| out.copy_from_slice(&digests[i].to_bytes()))
    }

    /// Binary-tree sum over the two-buffer reducer, plus the bytes it held.
    pub(crate) fn reduce_accounted(self) -> (LatticeDigest, usize) {
        match self.0.len() {
            0 => (lt_zero(), self.0.allocated_bytes()),
            1 => (
                LatticeDigest::from_slice(self.0.entry(0)).expect("64-byte entry"),
                self.0.allocated_bytes(),
            ),
            _ => {
                let mut reducer = Reducer::new(self.0);
                let bytes = reducer.allocated_bytes();
                let root = reducer.finish(&LatticeCombine).expect("non-empty reduction");
                (LatticeDigest::from_slice(&root).expect("64-byte entry"), bytes)
            }
        }
    }
}

/// Partition-wise sum of all inputs modulo 2^16, computed as a parallel
/// binary tree. The empty sum is [`lt_zero`].
pub fn lt_reduce(digests: &[LatticeDigest]) -> LatticeDigest {
    LatticeBuffer::from_digests(digests).reduce_accounted().0
}

/// Same sum via a parallel fold/reduce with no staging buffer; any split of
/// the input gives the same result because the combine is associative and
/// commutative.
pub fn lt_sum_par(digests: &[LatticeDigest]) -> LatticeDigest {
    digests
        .par_iter()
        .copied()
        .reduce(lt_zero, |a, b| lt_add(&a, &b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compression::compress_block;
    use crate::parallel::with_workers;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn splat(p: u16) -> LatticeDigest {
        LatticeDigest::from_partitions(&[p; LATTICE_PARTITIONS])
    }

    fn random(rng: &mut ChaCha8Rng) -> LatticeDigest {
        LatticeDigest::from_words(rng.gen())
    }

    #[test]
    fn zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&mut rng);
        assert_eq!(lt_add(&lt_zero(), &x), x);
        assert_eq!(lt_zero().to_bytes(), [0u8; 64]);
        assert_eq!(lt_sub(&x, &x), lt_zero());
        assert_eq!(lt_sub(&x, &lt_zero()), x);
    }

    #[test]
    fn wraparound() {
        assert_eq!(lt_add(&splat(0xFFFF), &splat(0x0001)), lt_zero());
        assert_eq!(lt_add(&splat(0x8000), &splat(0x8000)), lt_zero());
        assert_eq!(lt_sub(&lt_zero(), &splat(0x0001)), splat(0xFFFF));
    }

    #[test]
    fn byte_packing_is_little_endian() {
        let mut bytes = [0u8; 64];
        bytes[0] = 0x34;
        bytes[1] = 0x12;
        bytes[62] = 0xCD;
        bytes[63] = 0xAB;
        let d = LatticeDigest::from_bytes(&bytes);
        assert_eq!(d.partition(0), 0x1234);
        assert_eq!(d.partition(31), 0xABCD);
        assert_eq!(d.words()[0], 0x1234);
        assert_eq!(d.to_bytes(), bytes);
        assert_eq!(LatticeDigest::from_hex(&d.to_hex()).unwrap(), d);
        assert_eq!(d.to_hex().len(), 128);
    }

    #[test]
    fn single_partition_exhaustive_wrap() {
        // every (a, b) in one partition, other partitions held at zero
        for a in 0..=u16::MAX {
            let wa = u64::from(a) << 16;
            for b in (0..=u16::MAX).step_by(251) {
                let wb = u64::from(b) << 16;
                assert_eq!(add_word(wa, wb), u64::from(a.wrapping_add(b)) << 16);
                assert_eq!(sub_word(wa, wb), u64::from(a.wrapping_sub(b)) << 16);
            }
        }
    }

    #[test]
    fn top_partition_carry_is_dropped() {
        let w = 0xFFFF_0000_0000_0000u64;
        assert_eq!(add_word(w, 1 << 48), 0);
        assert_eq!(add_word(w, w), 0xFFFE_0000_0000_0000);
        assert_eq!(add_word(0xFFFF, 1), 0);
    }

    #[test]
    fn block_hash_is_index_tagged_blake2b() {
        let expected = compress_block(CompressionAlg::Blake2b, &[0u8; 8]);
        let got = lt_hash_block(BlockIndex(0), b"");
        assert_eq!(got.to_bytes().as_slice(), expected.as_bytes());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let len = rng.gen_range(0..300);
            let data: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            assert_ne!(lt_hash_block(BlockIndex(0), &data), lt_hash_block(BlockIndex(1), &data));
        }
    }

    #[test]
    fn reduce_empty_and_reversed() {
        assert_eq!(lt_reduce(&[]), lt_zero());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<_> = (0..33).map(|_| random(&mut rng)).collect();
        let mut rev = xs.clone();
        rev.reverse();
        assert_eq!(lt_reduce(&xs), lt_reduce(&rev));
    }

    #[test]
    fn tree_reduce_matches_left_fold() {
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        let xs: Vec<_> = (0..97).map(|_| random(&mut rng)).collect();
        let folded = xs.iter().fold(lt_zero(), |acc, x| lt_add(&acc, x));
        assert_eq!(lt_reduce(&xs), folded);
        assert_eq!(lt_sum_par(&xs), folded);
        assert_eq!(xs.iter().copied().sum::<LatticeDigest>(), folded);
    }

    #[test]
    fn reduce_is_worker_count_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<_> = (0..1001).map(|_| random(&mut rng)).collect();
        let one = with_workers(1, || lt_reduce(&xs));
        for w in [2, 4, 8] {
            assert_eq!(with_workers(w, || lt_reduce(&xs)), one);
            assert_eq!(with_workers(w, || lt_sum_par(&xs)), one);
        }
    }

    #[test]
    fn operators_match_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (a, b) = (random(&mut rng), random(&mut rng));
        assert_eq!(a + b, lt_add(&a, &b));
        assert_eq!(a - b, lt_sub(&a, &b));
        let mut c = a;
        c += b;
        c -= b;
        assert_eq!(c, a);
    }
}
