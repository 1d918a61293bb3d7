//! Shared-memory views with caller-enforced disjoint ownership.
//!
//! Matrix blocks and output rows are shared across tiles by reference, in the
//! spirit of a flat shared address space. Safety rests on the partition
//! discipline of the drivers: within one phase, no two concurrently-runnable
//! tasks touch the same block (or row) mutably. The accessors are `unsafe`
//! and every call site states which partition argument guarantees
//! disjointness.

use std::cell::UnsafeCell;

use taskred_core::BlockedSparseMatrix;

type BlockCell = UnsafeCell<Option<Box<[f32]>>>;

/// A blocked sparse matrix whose blocks can be mutated from worker tiles.
pub struct SharedMatrix {
    nb: usize,
    bs: usize,
    cells: Box<[BlockCell]>,
}

// One writer per block at a time, by the drivers' partition disjointness.
unsafe impl Sync for SharedMatrix {}
unsafe impl Send for SharedMatrix {}

impl SharedMatrix {
    pub fn from_matrix(m: BlockedSparseMatrix) -> Self {
        let (nb, bs, blocks) = m.into_raw_blocks();
        Self {
            nb,
            bs,
            cells: blocks.into_iter().map(UnsafeCell::new).collect(),
        }
    }

    pub fn into_matrix(self) -> BlockedSparseMatrix {
        let blocks = self
            .cells
            .into_vec()
            .into_iter()
            .map(UnsafeCell::into_inner)
            .collect();
        BlockedSparseMatrix::from_raw_blocks(self.nb, self.bs, blocks)
    }

    pub fn nb(&self) -> usize {
        self.nb
    }

    pub fn bs(&self) -> usize {
        self.bs
    }

    /// Whether block `(ii, jj)` is currently allocated.
    ///
    /// # Safety
    /// No concurrent allocation of the same block (allocation happens only
    /// inside the phase that owns `(ii, jj)`).
    pub unsafe fn is_allocated(&self, ii: usize, jj: usize) -> bool {
        (*self.cells[ii * self.nb + jj].get()).is_some()
    }

    /// Shared view of a block.
    ///
    /// # Safety
    /// No concurrent writer of block `(ii, jj)` in this phase.
    pub unsafe fn block(&self, ii: usize, jj: usize) -> Option<&[f32]> {
        (*self.cells[ii * self.nb + jj].get()).as_deref()
    }

    /// Exclusive view of a block.
    ///
    /// # Safety
    /// The caller is the unique task touching block `(ii, jj)` in this phase.
    #[allow(clippy::mut_from_ref)]
    pub unsafe fn block_mut(&self, ii: usize, jj: usize) -> Option<&mut [f32]> {
        (*self.cells[ii * self.nb + jj].get()).as_deref_mut()
    }

    /// Exclusive view of a block, allocating it zero-filled if absent.
    ///
    /// # Safety
    /// As for [`Self::block_mut`]; the owning task also owns fill-in
    /// allocation for `(ii, jj)`.
    #[allow(clippy::mut_from_ref)]
    pub unsafe fn alloc_zeroed(&self, ii: usize, jj: usize) -> &mut [f32] {
        let slot = &mut *self.cells[ii * self.nb + jj].get();
        slot.get_or_insert_with(|| vec![0.0f32; self.bs * self.bs].into_boxed_slice())
    }
}

/// A row-major f32 buffer whose rows can be written from worker tiles.
pub struct SharedRows {
    rows: usize,
    cols: usize,
    cells: Box<[UnsafeCell<f32>]>,
}

// One writer per row at a time, by the drivers' partition disjointness.
unsafe impl Sync for SharedRows {}
unsafe impl Send for SharedRows {}

impl SharedRows {
    pub fn from_slice(data: &[f32], rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self {
            rows,
            cols,
            cells: data.iter().map(|&v| UnsafeCell::new(v)).collect(),
        }
    }

    pub fn copy_into(&mut self, out: &mut [f32]) {
        assert_eq!(out.len(), self.rows * self.cols);
        for (dst, cell) in out.iter_mut().zip(self.cells.iter_mut()) {
            *dst = *cell.get_mut();
        }
    }

    /// Exclusive view of row `i`.
    ///
    /// # Safety
    /// The caller is the unique task writing row `i` during this run.
    #[allow(clippy::mut_from_ref)]
    pub unsafe fn row_mut(&self, i: usize) -> &mut [f32] {
        debug_assert!(i < self.rows);
        let start = self.cells[i * self.cols..].as_ptr() as *mut f32;
        std::slice::from_raw_parts_mut(start, self.cols)
    }
}
