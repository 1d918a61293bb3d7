//! Parallel drivers for the naive matrix-multiply micro-benchmark.
//!
//! `A: m x n`, `B: n x n`, `C: m x n` (the inner and right dimensions are
//! kept equal). The first loop is the parallel axis: `m` is the number of
//! jobs and each job is one accumulator row (`n * n` multiply-adds). Rows are
//! disjoint, and each is computed by [`taskred_core::matmul::matmul_row`] in
//! every strategy, so all strategies return bit-identical results.

use std::sync::Arc;

use taskred_core::matmul::matmul_row;
use taskred_core::Strategy;
use taskred_core::worksharing::par_for;

use crate::pool::TaskPool;
use crate::runtime::{
    literal, spawn_n, EvalError, EvalMode, KernelRegistry, Program, Runtime, Value,
};
use crate::shared::SharedRows;

/// Canonical seeds for the deterministic input fill.
pub const LEFT_SEED: u32 = 1325;
pub const RIGHT_SEED: u32 = 3407;

/// One benchmark configuration: `m` jobs of `n x n` multiply-adds each,
/// aggregated `cutoff` rows per task under the task-pool strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JobSpec {
    pub m: usize,
    pub n: usize,
    pub cutoff: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum JobSpecError {
    #[error("matrix dimensions must be at least 1")]
    EmptyMatrix,
    #[error("cutoff must satisfy 1 <= cutoff <= m (got cutoff {cutoff}, m {m})")]
    BadCutoff { cutoff: usize, m: usize },
}

impl JobSpec {
    pub fn validate(&self) -> Result<(), JobSpecError> {
        if self.m == 0 || self.n == 0 {
            return Err(JobSpecError::EmptyMatrix);
        }
        if self.cutoff == 0 || self.cutoff > self.m {
            return Err(JobSpecError::BadCutoff {
                cutoff: self.cutoff,
                m: self.m,
            });
        }
        Ok(())
    }

    /// Number of pool tasks: `ceil(m / cutoff)`; the last task may be short.
    pub fn task_count(&self) -> usize {
        self.m.div_ceil(self.cutoff)
    }
}

/// Deterministic input pair (left `m x n`, right `n x n`).
pub fn generate_inputs(m: usize, n: usize) -> (Vec<f32>, Vec<f32>) {
    let mut a = vec![0.0f32; m * n];
    let mut b = vec![0.0f32; n * n];
    taskred_core::matmul::fill_pseudo_random(&mut a, LEFT_SEED);
    taskred_core::matmul::fill_pseudo_random(&mut b, RIGHT_SEED);
    (a, b)
}

/// Static worksharing driver: `cl` runtime workers, worker `k` computing the
/// rows the partition assigns it.
pub fn matmul_parfor(
    a: &[f32],
    b: &[f32],
    c: &mut [f32],
    m: usize,
    n: usize,
    rt: &mut Runtime,
    strategy: Strategy,
) -> Result<(), EvalError> {
    assert_eq!(a.len(), m * n);
    assert_eq!(b.len(), n * n);
    assert_eq!(c.len(), m * n);
    let cl = rt.config().concurrency_level;

    let shared_c = Arc::new(SharedRows::from_slice(c, m, n));
    let a: Arc<[f32]> = Arc::from(a);
    let b: Arc<[f32]> = Arc::from(b);

    let mut reg = KernelRegistry::new();
    let rows_k = {
        let shared_c = shared_c.clone();
        reg.register("matmul_rows", 1, move |_, args| {
            let worker = args[0].as_int().expect("worker index") as usize;
            par_for(strategy, 0, m, worker, cl, |i| unsafe {
                // Safety: the row partition gives each row to exactly one
                // worker; A and B are read-only.
                let c_row = shared_c.row_mut(i);
                matmul_row(&a[i * n..(i + 1) * n], &b, c_row, n, n);
            });
            Ok(Value::Unit)
        })
    };
    let group = spawn_n(cl, |k| {
        reg.call(rows_k, vec![literal(k)], EvalMode::Parallel)
            .expect("arity")
    })
    .expect("cl >= 1");
    let program = Program::new(Arc::new(reg), group);

    let outcome = rt.evaluate(&program);
    drop(program);
    let mut shared_c = Arc::try_unwrap(shared_c)
        .ok()
        .expect("program dropped; no task holds the accumulator");
    shared_c.copy_into(c);
    outcome.map(|_| ())
}

/// Dynamic task-pool driver with a cutoff: `ceil(m / cutoff)` tasks, task
/// `t` computing rows `[t * cutoff, min((t+1) * cutoff, m))`.
///
/// Returns the number of dispatched tasks.
pub fn matmul_taskpool(
    a: &[f32],
    b: &[f32],
    c: &mut [f32],
    spec: JobSpec,
    num_threads: usize,
) -> Result<usize, JobSpecError> {
    spec.validate()?;
    let (m, n) = (spec.m, spec.n);
    assert_eq!(a.len(), m * n);
    assert_eq!(b.len(), n * n);
    assert_eq!(c.len(), m * n);

    let shared_c = Arc::new(SharedRows::from_slice(c, m, n));
    let a: Arc<[f32]> = Arc::from(a);
    let b: Arc<[f32]> = Arc::from(b);

    let pool = TaskPool::new(num_threads);
    for t in 0..spec.task_count() {
        let lo = t * spec.cutoff;
        let hi = m.min(lo + spec.cutoff);
        let shared_c = shared_c.clone();
        let a = a.clone();
        let b = b.clone();
        pool.submit(move || {
            for i in lo..hi {
                unsafe {
                    // Safety: row ranges of distinct tasks are disjoint.
                    let c_row = shared_c.row_mut(i);
                    matmul_row(&a[i * n..(i + 1) * n], &b, c_row, n, n);
                }
            }
        });
    }
    pool.wait_idle();
    let dispatched = pool.dispatched();
    drop(pool);

    let mut shared_c = Arc::try_unwrap(shared_c)
        .ok()
        .expect("pool joined; no task holds the accumulator");
    shared_c.copy_into(c);
    Ok(dispatched)
}
