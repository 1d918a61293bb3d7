//! Deterministic core of the task-reduction benchmark suite.
//!
//! Everything in this crate is single-threaded and reproducible bit-for-bit:
//! static loop partitioning (round-robin and contiguous, single and nested
//! loops), the blocked sparse matrix generator, the four blocked-LU kernels
//! with the sequential factorization driver, the naive matrix-multiply
//! kernel, and a dense LU oracle used to verify the blocked results.
//!
//! The crate is `no_std` (alloc only); the threaded runtime, drivers and CLI
//! live in the companion `taskred` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod blocked;
pub mod dense;
pub mod matmul;
pub mod sparselu;
pub mod worksharing;

pub use blocked::{structure_predicate, BlockedSparseMatrix, GenState};
pub use dense::{compare, CompareReport, DenseMatrix};
pub use sparselu::{factorize_sequential, LuError};
pub use worksharing::Strategy;
