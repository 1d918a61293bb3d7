//! Parallel drivers for the blocked sparse LU factorization.
//!
//! Both drivers compute bit-identical results to
//! [`taskred_core::factorize_sequential`]: within each phase distinct blocks
//! are written by distinct tasks, and every block's arithmetic goes through
//! the same core kernels in the same per-element order.
//!
//! - [`factorize_gprm`] builds one task expression for the whole
//!   factorization, a sequential chain of per-step phases, each phase an
//!   unrolled group of statically-indexed workers partitioning its loop with
//!   the worksharing constructs, and evaluates it on the tile runtime.
//! - [`factorize_taskpool`] is the dynamic comparison baseline: a
//!   single-threaded scan creates one pool task per eligible block per phase,
//!   with a barrier between phases and master-side fill-in allocation.

use std::mem;
use std::sync::{Arc, Mutex};

use taskred_core::sparselu as kernels;
use taskred_core::worksharing::{par_for, par_nested_for};
use taskred_core::{BlockedSparseMatrix, LuError, Strategy};

use crate::pool::TaskPool;
use crate::runtime::{
    literal, seq, spawn_n, EvalMode, EvalError, KernelFailure, KernelRegistry, Program, Runtime,
    Value,
};
use crate::shared::SharedMatrix;

/// Driver failure: a factorization error with location, or a runtime fault.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DriverError {
    #[error("concurrency level must be at least 2, got {0}")]
    ConcurrencyTooLow(usize),
    #[error(transparent)]
    Lu(#[from] LuError),
    #[error("evaluation failed: {0}")]
    Eval(EvalError),
}

fn record(slot: &Mutex<Option<LuError>>, e: LuError) {
    let mut guard = slot.lock().expect("error slot");
    if guard.is_none() {
        *guard = Some(e);
    }
}

/// Per-step task counts of the task-pool driver.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepTaskCounts {
    pub fwd: usize,
    pub bdiv: usize,
    pub bmod: usize,
}

/// Task-pool driver statistics.
#[derive(Clone, Debug, Default)]
pub struct LuTaskpoolStats {
    pub steps: Vec<StepTaskCounts>,
}

impl LuTaskpoolStats {
    pub fn total_tasks(&self) -> usize {
        self.steps.iter().map(|s| s.fwd + s.bdiv + s.bmod).sum()
    }
}

/// Factorize in place on the tile runtime with static worksharing.
///
/// Per step `kk`, a sequential chain of: one diagonal task; one unrolled
/// group of `cl/2` forward-solve and `cl/2` right-solve workers (spawned
/// alternating), each partitioning `[kk+1, nb)` at concurrency `cl/2`; then
/// one group of `cl` update workers partitioning the nested
/// `[kk+1, nb)^2` loop at concurrency `cl`, skipping pairs whose row or
/// column block is unallocated and allocating their own fill-in.
pub fn factorize_gprm(
    m: &mut BlockedSparseMatrix,
    rt: &mut Runtime,
    strategy: Strategy,
) -> Result<(), DriverError> {
    let cl = rt.config().concurrency_level;
    if cl < 2 {
        return Err(DriverError::ConcurrencyTooLow(cl));
    }
    let nb = m.nb();
    let bs = m.bs();
    let half = cl / 2;

    let taken = mem::replace(m, BlockedSparseMatrix::empty(1, 1));
    let shared = Arc::new(SharedMatrix::from_matrix(taken));
    let lu_error = Arc::new(Mutex::new(None::<LuError>));

    let mut reg = KernelRegistry::new();

    let lu0_k = {
        let shared = shared.clone();
        let errors = lu_error.clone();
        reg.register("lu0", 1, move |_, args| {
            let kk = args[0].as_int().expect("step index") as usize;
            // Safety: the per-step sequential chain makes this the only task
            // touching any block while it runs.
            let diag = unsafe { shared.block_mut(kk, kk) };
            let result = match diag {
                None => Err(LuError::MissingDiagonal { step: kk }),
                Some(diag) => kernels::lu0(diag, bs).map_err(|zp| LuError::SingularBlock {
                    step: kk,
                    elem: zp.elem,
                }),
            };
            result.map(|()| Value::Unit).map_err(|e| {
                record(&errors, e);
                KernelFailure::msg(e.to_string())
            })
        })
    };

    let fwd_k = {
        let shared = shared.clone();
        reg.register("fwd_worker", 2, move |_, args| {
            let kk = args[0].as_int().expect("step index") as usize;
            let ind = args[1].as_int().expect("worker index") as usize;
            par_for(strategy, kk + 1, nb, ind, half, |jj| unsafe {
                // Safety: jj comes from this worker's disjoint partition;
                // the diagonal is read-only during this phase.
                if let Some(col) = shared.block_mut(kk, jj) {
                    let diag = shared.block(kk, kk).expect("factored diagonal");
                    kernels::fwd(diag, col, bs);
                }
            });
            Ok(Value::Unit)
        })
    };

    let bdiv_k = {
        let shared = shared.clone();
        let errors = lu_error.clone();
        reg.register("bdiv_worker", 2, move |_, args| {
            let kk = args[0].as_int().expect("step index") as usize;
            let ind = args[1].as_int().expect("worker index") as usize;
            let mut failed = None;
            par_for(strategy, kk + 1, nb, ind, half, |ii| unsafe {
                // Safety: ii comes from this worker's disjoint partition.
                if let Some(row) = shared.block_mut(ii, kk) {
                    let diag = shared.block(kk, kk).expect("factored diagonal");
                    if let Err(zp) = kernels::bdiv(diag, row, bs) {
                        failed.get_or_insert(LuError::SingularBlock {
                            step: kk,
                            elem: zp.elem,
                        });
                    }
                }
            });
            match failed {
                None => Ok(Value::Unit),
                Some(e) => {
                    record(&errors, e);
                    Err(KernelFailure::msg(e.to_string()))
                }
            }
        })
    };

    let bmod_k = {
        let shared = shared.clone();
        reg.register("bmod_worker", 2, move |_, args| {
            let kk = args[0].as_int().expect("step index") as usize;
            let ind = args[1].as_int().expect("worker index") as usize;
            par_nested_for(strategy, kk + 1, nb, kk + 1, nb, ind, cl, |ii, jj| unsafe {
                // Safety: (ii, jj) comes from this worker's disjoint
                // partition, which also makes the fill-in allocation its own;
                // row and column blocks are read-only during this phase.
                if shared.is_allocated(ii, kk) && shared.is_allocated(kk, jj) {
                    let row = shared.block(ii, kk).expect("allocated");
                    let col = shared.block(kk, jj).expect("allocated");
                    let inner = shared.alloc_zeroed(ii, jj);
                    kernels::bmod(row, col, inner, bs);
                }
            });
            Ok(Value::Unit)
        })
    };

    let mut steps = Vec::with_capacity(nb);
    for kk in 0..nb {
        let diag_task = reg
            .call(lu0_k, vec![literal(kk)], EvalMode::Parallel)
            .expect("arity");
        let solves = spawn_n(2 * half, |child| {
            let kernel = if child % 2 == 0 { fwd_k } else { bdiv_k };
            reg.call(
                kernel,
                vec![literal(kk), literal(child / 2)],
                EvalMode::Parallel,
            )
            .expect("arity")
        })
        .expect("cl >= 2");
        let updates = spawn_n(cl, |ind| {
            reg.call(bmod_k, vec![literal(kk), literal(ind)], EvalMode::Parallel)
                .expect("arity")
        })
        .expect("cl >= 1");
        steps.push(seq(vec![diag_task, solves, updates]).expect("nonempty"));
    }
    let program = Program::new(Arc::new(reg), seq(steps).expect("nb >= 1"));

    let outcome = rt.evaluate(&program);
    drop(program);

    let shared = Arc::try_unwrap(shared)
        .ok()
        .expect("program dropped; no task holds the matrix");
    *m = shared.into_matrix();

    match outcome {
        Ok(_) => Ok(()),
        Err(eval) => {
            let typed = lu_error.lock().expect("error slot").take();
            Err(typed.map_or(DriverError::Eval(eval), DriverError::Lu))
        }
    }
}

/// Factorize in place on a dynamic task pool (one task per eligible block
/// per phase, created by a single-threaded scan).
pub fn factorize_taskpool(
    m: &mut BlockedSparseMatrix,
    num_threads: usize,
) -> Result<LuTaskpoolStats, DriverError> {
    let nb = m.nb();
    let bs = m.bs();
    let taken = mem::replace(m, BlockedSparseMatrix::empty(1, 1));
    let shared = Arc::new(SharedMatrix::from_matrix(taken));
    let lu_error = Arc::new(Mutex::new(None::<LuError>));
    let pool = TaskPool::new(num_threads);
    let mut stats = LuTaskpoolStats::default();

    for kk in 0..nb {
        // Safety: workers are idle between phases; the master is alone here.
        let diag_result = match unsafe { shared.block_mut(kk, kk) } {
            None => Err(LuError::MissingDiagonal { step: kk }),
            Some(diag) => kernels::lu0(diag, bs).map_err(|zp| LuError::SingularBlock {
                step: kk,
                elem: zp.elem,
            }),
        };
        if let Err(e) = diag_result {
            record(&lu_error, e);
            break;
        }

        let mut counts = StepTaskCounts::default();
        for jj in kk + 1..nb {
            // Safety: master-only scan between phases.
            if unsafe { shared.is_allocated(kk, jj) } {
                counts.fwd += 1;
                let shared = shared.clone();
                pool.submit(move || unsafe {
                    // Safety: this task is the phase's only writer of (kk, jj).
                    let diag = shared.block(kk, kk).expect("factored diagonal");
                    let col = shared.block_mut(kk, jj).expect("allocated");
                    kernels::fwd(diag, col, bs);
                });
            }
        }
        for ii in kk + 1..nb {
            if unsafe { shared.is_allocated(ii, kk) } {
                counts.bdiv += 1;
                let shared = shared.clone();
                let errors = lu_error.clone();
                pool.submit(move || unsafe {
                    // Safety: this task is the phase's only writer of (ii, kk).
                    let diag = shared.block(kk, kk).expect("factored diagonal");
                    let row = shared.block_mut(ii, kk).expect("allocated");
                    if let Err(zp) = kernels::bdiv(diag, row, bs) {
                        record(
                            &errors,
                            LuError::SingularBlock {
                                step: kk,
                                elem: zp.elem,
                            },
                        );
                    }
                });
            }
        }
        pool.wait_idle();
        if lu_error.lock().expect("error slot").is_some() {
            break;
        }

        for ii in kk + 1..nb {
            // Safety: master-only scan between phases; fill-in is allocated
            // here, before any update task runs.
            if !unsafe { shared.is_allocated(ii, kk) } {
                continue;
            }
            for jj in kk + 1..nb {
                if !unsafe { shared.is_allocated(kk, jj) } {
                    continue;
                }
                unsafe {
                    shared.alloc_zeroed(ii, jj);
                }
                counts.bmod += 1;
                let shared = shared.clone();
                pool.submit(move || unsafe {
                    // Safety: this task is the phase's only writer of (ii, jj).
                    let row = shared.block(ii, kk).expect("allocated");
                    let col = shared.block(kk, jj).expect("allocated");
                    let inner = shared.block_mut(ii, jj).expect("just allocated");
                    kernels::bmod(row, col, inner, bs);
                });
            }
        }
        pool.wait_idle();
        stats.steps.push(counts);
        if lu_error.lock().expect("error slot").is_some() {
            break;
        }
    }

    drop(pool);
    let shared = Arc::try_unwrap(shared)
        .ok()
        .expect("pool joined; no task holds the matrix");
    *m = shared.into_matrix();

    let failure = lu_error.lock().expect("error slot").take();
    match failure {
        None => Ok(stats),
        Some(e) => Err(DriverError::Lu(e)),
    }
}
