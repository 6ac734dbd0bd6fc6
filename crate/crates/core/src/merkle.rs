//! Two-stage Merkle construction: parallel block hashing into a leaf buffer,
//! then level-by-level pairwise reduction over two swapped buffers.
//!
//! Nodes are `h(left || right)`. A level with an odd number of entries gets
//! an all-zero digest appended before pairing. A single leaf is its own root.

use rayon::prelude::*;

use crate::compression::{compress_into, CompressionAlg, Digest, Hasher};
use crate::error::{Error, Result};
use crate::reduce::{FlatBuffer, PairCombine, Reducer};

/// Ordered digests of one algorithm, stored back to back.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigestBuffer {
    alg: CompressionAlg,
    entries: FlatBuffer,
}

impl DigestBuffer {
    pub fn new(alg: CompressionAlg) -> Self {
        DigestBuffer {
            alg,
            entries: FlatBuffer::zeroed(alg.digest_len(), 0),
        }
    }

    pub fn from_digests<I: IntoIterator<Item = Digest>>(alg: CompressionAlg, digests: I) -> Result<Self> {
        let mut buf = DigestBuffer::new(alg);
        for d in digests {
            buf.push(d)?;
        }
        Ok(buf)
    }

    pub(crate) fn zeroed(alg: CompressionAlg, count: usize) -> Self {
        DigestBuffer {
            alg,
            entries: FlatBuffer::zeroed(alg.digest_len(), count),
        }
    }

    pub fn push(&mut self, d: Digest) -> Result<()> {
        if d.alg() != self.alg {
            return Err(Error::InvalidInput(format!(
                "cannot store a {} digest in a {} buffer",
                d.alg(),
                self.alg
            )));
        }
        self.entries.push(d.as_bytes());
        Ok(())
    }

    pub fn alg(&self) -> CompressionAlg {
        self.alg
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Option<Digest> {
        (i < self.len()).then(|| {
            Digest::from_slice(self.alg, self.entries.entry(i)).expect("entry width matches alg")
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = Digest> + '_ {
        (0..self.len()).map(move |i| self.get(i).expect("in range"))
    }

    pub fn allocated_bytes(&self) -> usize {
        self.entries.allocated_bytes()
    }
}

/// Hashes `count` blocks in parallel. `feed(i, hasher)` supplies the bytes of
/// block `i`; entry `i` of the result is that block's digest regardless of
/// which worker ran it.
pub(crate) fn hash_blocks_with<F>(alg: CompressionAlg, count: usize, feed: F) -> DigestBuffer
where
    F: Fn(usize, &mut Hasher) + Sync,
{
    let mut buf = DigestBuffer::zeroed(alg, count);
    buf.entries.entries_mut().enumerate().for_each(|(i, out)| {
        let mut h = Hasher::new(alg);
        feed(i, &mut h);
        h.finalize_into(out);
    });
    buf
}

/// Block-hashing stage: `entries[i] == compress_block(alg, blocks[i])`.
pub fn hash_blocks<B: AsRef<[u8]> + Sync>(alg: CompressionAlg, blocks: &[B]) -> Result<DigestBuffer> {
    if blocks.is_empty() {
        return Err(Error::InvalidInput("hash_blocks needs at least one block".into()));
    }
    let mut buf = DigestBuffer::zeroed(alg, blocks.len());
    buf.entries
        .entries_mut()
        .zip(blocks.par_iter())
        .for_each(|(out, block)| compress_into(alg, block.as_ref(), out));
    Ok(buf)
}

struct MerkleCombine(CompressionAlg);

impl PairCombine for MerkleCombine {
    fn combine(&self, left: &[u8], right: Option<&[u8]>, out: &mut [u8]) {
        let mut h = Hasher::new(self.0);
        h.update(left);
        match right {
            Some(r) => h.update(r),
            None => h.update_zeros(self.0.digest_len()),
        }
        h.finalize_into(out);
    }
}

/// Tree-reduction stage state: the leaf buffer and two swapped scratch
/// buffers of `ceil(n / 2)` entries each. Not shareable mid-reduction.
#[derive(Debug)]
pub struct ReductionState {
    alg: CompressionAlg,
    reducer: Reducer,
}

impl ReductionState {
    pub fn new(leaves: DigestBuffer) -> Self {
        ReductionState {
            alg: leaves.alg,
            reducer: Reducer::new(leaves.entries),
        }
    }

    pub fn count(&self) -> usize {
        self.reducer.count()
    }

    /// Digests of the current level.
    pub fn current(&self) -> Vec<Digest> {
        self.reducer
            .current()
            .chunks_exact(self.alg.digest_len())
            .map(|c| Digest::from_slice(self.alg, c).expect("entry width matches alg"))
            .collect()
    }

    /// Reduces one level in parallel and swaps buffer roles. Returns the new
    /// entry count, `ceil(old / 2)`.
    pub fn reduce_level(&mut self) -> Result<usize> {
        self.reducer.reduce_level(&MerkleCombine(self.alg))
    }

    /// Bytes held by the leaf buffer plus both scratch buffers.
    pub fn allocated_bytes(&self) -> usize {
        self.reducer.allocated_bytes()
    }

    pub fn finish(mut self) -> Result<Digest> {
        let root = self.reducer.finish(&MerkleCombine(self.alg))?;
        Digest::from_slice(self.alg, &root)
    }
}

/// Root of the Merkle tree over `leaves`, plus the auxiliary bytes the
/// reduction held (leaves and both scratch buffers).
pub(crate) fn merkle_root_accounted(leaves: DigestBuffer) -> Result<(Digest, usize)> {
    match leaves.len() {
        0 => Err(Error::InvalidInput("merkle root of an empty buffer".into())),
        1 => {
            let bytes = leaves.allocated_bytes();
            Ok((leaves.get(0).expect("one entry"), bytes))
        }
        _ => {
            let state = ReductionState::new(leaves);
            let bytes = state.allocated_bytes();
            Ok((state.finish()?, bytes))
        }
    }
}

pub fn merkle_root(alg: CompressionAlg, leaves: DigestBuffer) -> Result<Digest> {
    if leaves.alg() != alg {
        return Err(Error::InvalidInput(format!(
            "leaf buffer holds {} digests, expected {alg}",
            leaves.alg()
        )));
    }
    merkle_root_accounted(leaves).map(|(d, _)| d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compression::compress_block;
    use crate::parallel::with_workers;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SHA: CompressionAlg = CompressionAlg::Sha256;

    fn node(l: &Digest, r: &Digest) -> Digest {
        let mut cat = l.as_bytes().to_vec();
        cat.extend_from_slice(r.as_bytes());
        compress_block(l.alg(), &cat)
    }

    #[test]
    fn single_block() {
        let buf = hash_blocks(SHA, &[b"abc"]).unwrap();
        assert_eq!(buf.len(), 1);
        assert_eq!(buf.get(0).unwrap(), compress_block(SHA, b"abc"));
    }

    #[test]
    fn equal_blocks_equal_entries() {
        let blocks = vec![vec![9u8; 100]; 4];
        let buf = hash_blocks(SHA, &blocks).unwrap();
        let first = buf.get(0).unwrap();
        assert!(buf.iter().all(|d| d == first));
    }

    #[test]
    fn zero_blocks_rejected() {
        let none: [&[u8]; 0] = [];
        assert!(matches!(hash_blocks(SHA, &none), Err(Error::InvalidInput(_))));
        assert!(matches!(merkle_root(SHA, DigestBuffer::new(SHA)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn worker_count_does_not_change_leaves() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let blocks: Vec<Vec<u8>> = (0..1000)
            .map(|_| (0..8192).map(|_| rng.gen()).collect())
            .collect();
        let one = with_workers(1, || hash_blocks(SHA, &blocks).unwrap());
        let eight = with_workers(8, || hash_blocks(SHA, &blocks).unwrap());
        assert_eq!(one, eight);
    }

    #[test]
    fn two_leaves_is_one_compression() {
        let d0 = compress_block(SHA, b"x");
        let d1 = compress_block(SHA, b"y");
        let mut st = ReductionState::new(DigestBuffer::from_digests(SHA, [d0, d1]).unwrap());
        assert_eq!(st.reduce_level().unwrap(), 1);
        assert_eq!(st.current(), vec![node(&d0, &d1)]);
    }

    #[test]
    fn odd_level_pads_with_zero_digest() {
        let ds: Vec<Digest> = [b"p", b"q", b"r"].iter().map(|b| compress_block(SHA, *b)).collect();
        let mut st = ReductionState::new(DigestBuffer::from_digests(SHA, ds.clone()).unwrap());
        assert_eq!(st.reduce_level().unwrap(), 2);
        assert_eq!(
            st.current(),
            vec![node(&ds[0], &ds[1]), node(&ds[2], &Digest::zero(SHA))]
        );
    }

    #[test]
    fn eight_entries_halve_to_one() {
        let ds: Vec<Digest> = (0u8..8).map(|i| compress_block(SHA, &[i])).collect();
        let mut st = ReductionState::new(DigestBuffer::from_digests(SHA, ds).unwrap());
        assert_eq!(st.reduce_level().unwrap(), 4);
        assert_eq!(st.reduce_level().unwrap(), 2);
        assert_eq!(st.reduce_level().unwrap(), 1);
        assert!(matches!(st.reduce_level(), Err(Error::InvalidState(_))));
    }

    #[test]
    fn level_recurrence_and_buffer_budget() {
        for n in 1usize..=70 {
            let ds: Vec<Digest> = (0..n).map(|i| compress_block(SHA, &i.to_le_bytes())).collect();
            let leaves = DigestBuffer::from_digests(SHA, ds).unwrap();
            let leaf_bytes = leaves.allocated_bytes();
            let mut st = ReductionState::new(leaves);
            let scratch = st.allocated_bytes() - leaf_bytes;
            assert!(scratch <= 2 * n.div_ceil(2) * 32);
            let mut k = 0u32;
            while st.count() > 1 {
                st.reduce_level().unwrap();
                k += 1;
                assert_eq!(st.count(), n.div_ceil(1 << k));
            }
        }
    }

    #[test]
    fn single_leaf_root_is_the_leaf() {
        let d = compress_block(SHA, b"only");
        assert_eq!(merkle_root(SHA, DigestBuffer::from_digests(SHA, [d]).unwrap()).unwrap(), d);
    }

    #[test]
    fn four_leaf_tree_by_hand() {
        for alg in CompressionAlg::ALL {
            let leaves = hash_blocks(alg, &[b"a", b"b", b"c", b"d"]).unwrap();
            let h = |b: &[u8]| compress_block(alg, b);
            let expected = node(&node(&h(b"a"), &h(b"b")), &node(&h(b"c"), &h(b"d")));
            assert_eq!(merkle_root(alg, leaves).unwrap(), expected);
        }
    }

    #[test]
    fn swapping_leaves_changes_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.gen_range(2..40);
            let blocks: Vec<[u8; 16]> = (0..n).map(|_| rng.gen()).collect();
            let mut swapped = blocks.clone();
            let i = rng.gen_range(0..n);
            let j = (i + rng.gen_range(1..n)) % n;
            swapped.swap(i, j);
            let a = merkle_root(SHA, hash_blocks(SHA, &blocks).unwrap()).unwrap();
            let b = merkle_root(SHA, hash_blocks(SHA, &swapped).unwrap()).unwrap();
            assert_ne!(a, b);
        }
    }

    #[test]
    fn mismatched_alg_rejected() {
        let buf = hash_blocks(SHA, &[b"a"]).unwrap();
        assert!(merkle_root(CompressionAlg::Blake2b, buf.clone()).is_err());
        let mut buf = buf;
        assert!(buf.push(compress_block(CompressionAlg::Sha3_256, b"")).is_err());
    }
}
