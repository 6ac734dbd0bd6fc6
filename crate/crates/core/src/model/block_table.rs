/// One block of a fragmented model: which tensor it lives in and where.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockRow {
    pub global_block_index: u64,
    pub tensor_index: usize,
    pub offset_in_tensor: usize,
    pub length: usize,
}

#[derive(Clone, Copy, Debug)]
struct TensorRange {
    first_block: usize,
    tensor_index: usize,
    tensor_size: usize,
}

/// Lookup table for in-place hashing.
///
/// Stores one row per tensor (first global block, tensor index, size); the
/// row for global block `k` is found by binary search, the way each hashing
/// worker locates its input. Every byte of every tensor falls in exactly one
/// block, and only a tensor's last block may be shorter than `block_size`.
#[derive(Clone, Debug)]
pub struct BlockTable {
    block_size: usize,
    ranges: Vec<TensorRange>,
    block_count: usize,
}

impl BlockTable {
    pub fn from_sizes(sizes: &[usize], block_size: usize) -> Self {
        assert!(block_size > 0, "block size must be positive");
        let mut ranges = Vec::with_capacity(sizes.len());
        let mut next = 0usize;
        for (tensor_index, &size) in sizes.iter().enumerate() {
            if size == 0 {
                continue;
            }
            ranges.push(TensorRange {
                first_block: next,
                tensor_index,
                tensor_size: size,
            });
            next += size.div_ceil(block_size);
        }
        BlockTable {
            block_size,
            ranges,
            block_count: next,
        }
    }

    pub fn len(&self) -> usize {
        self.block_count
    }

    pub fn is_empty(&self) -> bool {
        self.block_count == 0
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn row(&self, k: usize) -> BlockRow {
        assert!(k < self.block_count, "block {k} out of range");
        let r = self.ranges.partition_point(|r| r.first_block <= k) - 1;
        let range = self.ranges[r];
        let offset = (k - range.first_block) * self.block_size;
        BlockRow {
            global_block_index: k as u64,
            tensor_index: range.tensor_index,
            offset_in_tensor: offset,
            length: self.block_size.min(range.tensor_size - offset),
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = BlockRow> + '_ {
        (0..self.block_count).map(|k| self.row(k))
    }

    pub fn allocated_bytes(&self) -> usize {
        self.ranges.capacity() * std::mem::size_of::<TensorRange>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rows_for_small_layout() {
        let t = BlockTable::from_sizes(&[100, 0, 64, 130], 64);
        let rows: Vec<_> = t.rows().map(|r| (r.tensor_index, r.offset_in_tensor, r.length)).collect();
        assert_eq!(rows, [(0, 0, 64), (0, 64, 36), (2, 0, 64), (3, 0, 64), (3, 64, 64), (3, 128, 2)]);
        assert_eq!(t.len(), 6);
    }

    proptest! {
        #[test]
        fn rows_tile_every_tensor(sizes in prop::collection::vec(0usize..2000, 0..20), shift in 6u32..10) {
            let bs = 1usize << shift;
            let t = BlockTable::from_sizes(&sizes, bs);
            let mut covered = vec![0usize; sizes.len()];
            let mut last = None;
            for (k, row) in t.rows().enumerate() {
                prop_assert_eq!(row.global_block_index, k as u64);
                let key = (row.tensor_index, row.offset_in_tensor);
                if let Some(prev) = last {
                    prop_assert!(key > prev);
                }
                last = Some(key);
                prop_assert_eq!(row.offset_in_tensor, covered[row.tensor_index]);
                let size = sizes[row.tensor_index];
                let expected = if row.offset_in_tensor + bs <= size { bs } else { size % bs };
                prop_assert_eq!(row.length, expected);
                covered[row.tensor_index] += row.length;
            }
            prop_assert_eq!(covered, sizes);
        }
    }
}
