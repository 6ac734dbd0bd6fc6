//! Level-by-level pairwise reduction over two swapped scratch buffers.
//!
//! Both constructions reduce the same way: entry `j` of the next level is
//! `combine(in[2j], in[2j + 1])`, and an odd trailing entry is combined with
//! the construction's padding element. Only the pair combine differs.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Contiguous array of fixed-width entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct FlatBuffer {
    width: usize,
    data: Vec<u8>,
}

impl FlatBuffer {
    pub(crate) fn zeroed(width: usize, count: usize) -> Self {
        FlatBuffer {
            width,
            data: vec![0u8; width * count],
        }
    }

    pub(crate) fn width(&self) -> usize {
        self.width
    }

    pub(crate) fn len(&self) -> usize {
        self.data.len() / self.width
    }

    pub(crate) fn entry(&self, i: usize) -> &[u8] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub(crate) fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub(crate) fn entries_mut(&mut self) -> rayon::slice::ChunksExactMut<'_, u8> {
        self.data.par_chunks_exact_mut(self.width)
    }

    pub(crate) fn push(&mut self, entry: &[u8]) {
        debug_assert_eq!(entry.len(), self.width);
        self.data.extend_from_slice(entry);
    }

    pub(crate) fn allocated_bytes(&self) -> usize {
        self.data.capacity()
    }
}

pub(crate) trait PairCombine: Sync {
    /// Writes `combine(left, right)` into `out`. `right` is `None` for the
    /// odd trailing entry of a level.
    fn combine(&self, left: &[u8], right: Option<&[u8]>, out: &mut [u8]);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Active {
    Leaves,
    A,
    B,
}

/// Leaves plus two scratch buffers, each sized `ceil(leaves / 2)` once at
/// construction and never reallocated.
#[derive(Debug)]
pub(crate) struct Reducer {
    leaves: FlatBuffer,
    a: FlatBuffer,
    b: FlatBuffer,
    active: Active,
    count: usize,
}

impl Reducer {
    pub(crate) fn new(leaves: FlatBuffer) -> Self {
        let width = leaves.width();
        let count = leaves.len();
        let half = count.div_ceil(2);
        Reducer {
            leaves,
            a: FlatBuffer::zeroed(width, half),
            b: FlatBuffer::zeroed(width, half),
            active: Active::Leaves,
            count,
        }
    }

    pub(crate) fn count(&self) -> usize {
        self.count
    }

    pub(crate) fn current(&self) -> &[u8] {
        let buf = match self.active {
            Active::Leaves => &self.leaves,
            Active::A => &self.a,
            Active::B => &self.b,
        };
        &buf.as_bytes()[..self.count * buf.width()]
    }

    /// Leaf storage plus both scratch buffers.
    pub(crate) fn allocated_bytes(&self) -> usize {
        self.leaves.allocated_bytes() + self.a.allocated_bytes() + self.b.allocated_bytes()
    }

    pub(crate) fn reduce_level<C: PairCombine>(&mut self, combine: &C) -> Result<usize> {
        if self.count < 2 {
            return Err(Error::InvalidState(format!(
                "cannot reduce a level of {} entries",
                self.count
            )));
        }
        let width = self.leaves.width();
        let next = self.count.div_ceil(2);
        let (input, output, next_active) = match self.active {
            Active::Leaves => (&self.leaves, &mut self.a, Active::A),
            Active::A => (&self.a, &mut self.b, Active::B),
            Active::B => (&self.b, &mut self.a, Active::A),
        };
        let count = self.count;
        let input = &input.as_bytes()[..count * width];
        output
            .entries_mut()
            .take(next)
            .enumerate()
            .for_each(|(j, out)| {
                let left = &input[2 * j * width..(2 * j + 1) * width];
                let right = (2 * j + 1 < count).then(|| &input[(2 * j + 1) * width..(2 * j + 2) * width]);
                combine.combine(left, right, out);
            });
        self.active = next_active;
        self.count = next;
        Ok(next)
    }

    /// Reduces until one entry remains and returns it.
    pub(crate) fn finish<C: PairCombine>(&mut self, combine: &C) -> Result<Vec<u8>> {
        if self.count == 0 {
            return Err(Error::InvalidInput("nothing to reduce".into()));
        }
        while self.count > 1 {
            self.reduce_level(combine)?;
        }
        Ok(self.current().to_vec())
    }
}
