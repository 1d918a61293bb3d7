//! Task-parallel runtime and benchmark harness.
//!
//! Builds on [`taskred_core`]: this crate adds the event-driven runtime
//! (worker tiles with FIFO mailboxes evaluating task expression trees), the
//! parallel factorization and matrix-multiply drivers, a dynamic task pool
//! used as the comparison baseline, benchmark reporting, and the `taskred`
//! CLI.

pub mod cli;
pub mod dump;
pub mod matmul;
pub mod pool;
pub mod report;
pub mod runtime;
pub mod shared;
pub mod sparselu;

pub use runtime::{Program, Runtime, RuntimeConfig};
