//! Blocked sparse matrices: an `nb x nb` grid of optionally-allocated
//! `bs x bs` single-precision blocks, plus the deterministic generator that
//! fills them.
//!
//! Generation is fixed by contract: blocks are allocated according to
//! [`structure_predicate`], scanned in row-major block order, and filled
//! element-row-major from one shared [`GenState`] stream. Two calls to
//! [`BlockedSparseMatrix::generate`] with the same dimensions produce
//! bit-identical matrices.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::dense::DenseMatrix;

/// Multiplicative congruential generator over 16-bit states.
///
/// `state <- (3125 * state) mod 65536`, emitted as
/// `(state - 32768) / 16384` in f32, so every value lies in `[-2.0, 2.0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenState {
    state: u32,
}

impl GenState {
    const MULTIPLIER: u32 = 3125;
    const MODULUS: u32 = 65536;
    const DEFAULT_SEED: u32 = 1325;

    /// Generator positioned at the canonical seed used for matrix generation.
    pub fn new() -> Self {
        Self::with_seed(Self::DEFAULT_SEED)
    }

    /// Generator with an explicit seed (reduced mod 65536).
    pub fn with_seed(seed: u32) -> Self {
        Self {
            state: seed % Self::MODULUS,
        }
    }

    /// Advance the state and emit the next value.
    pub fn next_f32(&mut self) -> f32 {
        self.state = (Self::MULTIPLIER * self.state) % Self::MODULUS;
        (self.state as f32 - 32768.0) / 16384.0
    }
}

impl Default for GenState {
    fn default() -> Self {
        Self::new()
    }
}

/// Whether block `(ii, jj)` is allocated at generation time.
///
/// The diagonal and both first off-diagonals are always allocated, so the
/// block grid has a full tridiagonal band; away from the band, blocks with an
/// odd coordinate are empty, and the rest are kept only where the smaller
/// coordinate is a multiple of 3.
pub fn structure_predicate(ii: usize, jj: usize) -> bool {
    if ii == jj || ii + 1 == jj || ii == jj + 1 {
        return true;
    }
    if !ii.is_multiple_of(2) || !jj.is_multiple_of(2) {
        return false;
    }
    if ii < jj && !ii.is_multiple_of(3) {
        return false;
    }
    if ii > jj && !jj.is_multiple_of(3) {
        return false;
    }
    true
}

/// An `nb x nb` grid of optional `bs x bs` row-major f32 blocks.
///
/// The block grid itself is stored row-major (`blocks[ii * nb + jj]`).
#[derive(Clone, Debug)]
pub struct BlockedSparseMatrix {
    nb: usize,
    bs: usize,
    blocks: Vec<Option<Box<[f32]>>>,
}

impl BlockedSparseMatrix {
    /// Empty matrix with no blocks allocated.
    pub fn empty(nb: usize, bs: usize) -> Self {
        assert!(nb >= 1 && bs >= 1, "matrix dimensions must be at least 1");
        Self {
            nb,
            bs,
            blocks: vec![None; nb * nb],
        }
    }

    /// Generate the canonical sparse matrix for the given dimensions.
    pub fn generate(nb: usize, bs: usize) -> Self {
        let mut m = Self::empty(nb, bs);
        let mut gen = GenState::new();
        for ii in 0..nb {
            for jj in 0..nb {
                if structure_predicate(ii, jj) {
                    let mut block = vec![0.0f32; bs * bs].into_boxed_slice();
                    for v in block.iter_mut() {
                        *v = gen.next_f32();
                    }
                    m.blocks[ii * nb + jj] = Some(block);
                }
            }
        }
        m
    }

    pub fn nb(&self) -> usize {
        self.nb
    }

    pub fn bs(&self) -> usize {
        self.bs
    }

    /// Side length of the densified matrix.
    pub fn dense_side(&self) -> usize {
        self.nb * self.bs
    }

    pub fn block(&self, ii: usize, jj: usize) -> Option<&[f32]> {
        self.blocks[ii * self.nb + jj].as_deref()
    }

    pub fn block_mut(&mut self, ii: usize, jj: usize) -> Option<&mut [f32]> {
        self.blocks[ii * self.nb + jj].as_deref_mut()
    }

    pub fn is_allocated(&self, ii: usize, jj: usize) -> bool {
        self.blocks[ii * self.nb + jj].is_some()
    }

    /// Allocate block `(ii, jj)` zero-filled if absent, returning it.
    pub fn alloc_zeroed(&mut self, ii: usize, jj: usize) -> &mut [f32] {
        let slot = &mut self.blocks[ii * self.nb + jj];
        slot.get_or_insert_with(|| vec![0.0f32; self.bs * self.bs].into_boxed_slice())
    }

    /// Distinct mutable borrows of three blocks (used by the update kernels).
    ///
    /// Panics if any requested block is unallocated or the coordinates
    /// collide.
    pub fn three_blocks_mut(
        &mut self,
        a: (usize, usize),
        b: (usize, usize),
        c: (usize, usize),
    ) -> (&mut [f32], &mut [f32], &mut [f32]) {
        let nb = self.nb;
        let idx = [a.0 * nb + a.1, b.0 * nb + b.1, c.0 * nb + c.1];
        let [x, y, z] = self
            .blocks
            .get_disjoint_mut(idx)
            .expect("block coordinates must be distinct and in range");
        (
            x.as_deref_mut().expect("block not allocated"),
            y.as_deref_mut().expect("block not allocated"),
            z.as_deref_mut().expect("block not allocated"),
        )
    }

    /// Distinct mutable borrows of two blocks.
    pub fn two_blocks_mut(
        &mut self,
        a: (usize, usize),
        b: (usize, usize),
    ) -> (&mut [f32], &mut [f32]) {
        let nb = self.nb;
        let [x, y] = self
            .blocks
            .get_disjoint_mut([a.0 * nb + a.1, b.0 * nb + b.1])
            .expect("block coordinates must be distinct and in range");
        (
            x.as_deref_mut().expect("block not allocated"),
            y.as_deref_mut().expect("block not allocated"),
        )
    }

    /// Number of allocated blocks.
    pub fn allocated_blocks(&self) -> usize {
        self.blocks.iter().filter(|b| b.is_some()).count()
    }

    /// Fraction of unallocated blocks.
    pub fn sparsity(&self) -> f64 {
        let total = self.nb * self.nb;
        (total - self.allocated_blocks()) as f64 / total as f64
    }

    /// Densify: unallocated blocks contribute zeros.
    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.dense_side();
        let mut dense = DenseMatrix::zeros(n);
        for ii in 0..self.nb {
            for jj in 0..self.nb {
                if let Some(block) = self.block(ii, jj) {
                    for i in 0..self.bs {
                        let row = &mut dense.row_mut(ii * self.bs + i)
                            [jj * self.bs..(jj + 1) * self.bs];
                        row.copy_from_slice(&block[i * self.bs..(i + 1) * self.bs]);
                    }
                }
            }
        }
        dense
    }

    /// Re-block a dense matrix given an allocation structure.
    ///
    /// Panics if the dense side is not `nb * bs`.
    pub fn from_dense_with_structure(
        dense: &DenseMatrix,
        nb: usize,
        bs: usize,
        allocated: impl Fn(usize, usize) -> bool,
    ) -> Self {
        assert_eq!(dense.side(), nb * bs, "dense side must equal nb * bs");
        let mut m = Self::empty(nb, bs);
        for ii in 0..nb {
            for jj in 0..nb {
                if allocated(ii, jj) {
                    let block = m.alloc_zeroed(ii, jj);
                    for i in 0..bs {
                        let src = &dense.row(ii * bs + i)[jj * bs..(jj + 1) * bs];
                        block[i * bs..(i + 1) * bs].copy_from_slice(src);
                    }
                }
            }
        }
        m
    }

    /// Bitwise equality: same dimensions, same allocation pattern, and every
    /// element identical by its bit pattern (distinguishes -0.0 from 0.0).
    pub fn bit_identical(&self, other: &Self) -> bool {
        if self.nb != other.nb || self.bs != other.bs {
            return false;
        }
        self.blocks
            .iter()
            .zip(other.blocks.iter())
            .all(|(a, b)| match (a, b) {
                (None, None) => true,
                (Some(x), Some(y)) => x
                    .iter()
                    .zip(y.iter())
                    .all(|(p, q)| p.to_bits() == q.to_bits()),
                _ => false,
            })
    }

    /// Tear the matrix into its raw block storage (row-major block grid).
    pub fn into_raw_blocks(self) -> (usize, usize, Vec<Option<Box<[f32]>>>) {
        (self.nb, self.bs, self.blocks)
    }

    /// Rebuild from raw block storage. The vector must hold `nb * nb` slots
    /// and every allocated block must have `bs * bs` elements.
    pub fn from_raw_blocks(nb: usize, bs: usize, blocks: Vec<Option<Box<[f32]>>>) -> Self {
        assert_eq!(blocks.len(), nb * nb);
        debug_assert!(blocks
            .iter()
            .flatten()
            .all(|b| b.len() == bs * bs));
        Self { nb, bs, blocks }
    }
}
