//! Schedule independence of the parallel factorization drivers: every
//! driver, at every concurrency level and strategy, leaves the matrix
//! bit-identical to the sequential factorization, including the halt state
//! on singular inputs.

use std::sync::{Arc, Mutex};
use std::time::Instant;

use taskred::runtime::{
    literal, seq, spawn_n, EvalMode, KernelRegistry, Program, Runtime, RuntimeConfig, Value,
};
use taskred::sparselu::{factorize_gprm, factorize_taskpool, DriverError};
use taskred_core::{factorize_sequential, structure_predicate, BlockedSparseMatrix, LuError, Strategy};

fn sequential_reference(nb: usize, bs: usize) -> (BlockedSparseMatrix, Result<(), LuError>) {
    let mut m = BlockedSparseMatrix::generate(nb, bs);
    let outcome = factorize_sequential(&mut m);
    (m, outcome)
}

#[test]
fn gprm_matches_sequential_across_cl_and_strategy() {
    for (nb, bs) in [(10, 8), (25, 4)] {
        let (reference, outcome) = sequential_reference(nb, bs);
        outcome.expect("reference factorization succeeds");
        for cl in [2, 4, 8, 63] {
            for strategy in [Strategy::RoundRobin, Strategy::Contiguous] {
                let mut m = BlockedSparseMatrix::generate(nb, bs);
                let mut rt = Runtime::new(RuntimeConfig {
                    num_threads: 2,
                    concurrency_level: cl,
                    steal_enabled: false,
                });
                factorize_gprm(&mut m, &mut rt, strategy).expect("factorization succeeds");
                assert!(
                    m.bit_identical(&reference),
                    "nb={nb} bs={bs} cl={cl} {strategy:?} diverged"
                );
                assert!(rt.quiescence().is_quiescent());
            }
        }
    }
}

#[test]
fn taskpool_matches_sequential_across_thread_counts() {
    let (reference, outcome) = sequential_reference(10, 8);
    outcome.expect("reference factorization succeeds");
    for threads in [1, 2, 4, 8] {
        let mut m = BlockedSparseMatrix::generate(10, 8);
        factorize_taskpool(&mut m, threads).expect("factorization succeeds");
        assert!(m.bit_identical(&reference), "threads={threads} diverged");
    }
}

#[test]
fn concurrency_level_below_two_is_rejected() {
    let mut m = BlockedSparseMatrix::generate(4, 2);
    let mut rt = Runtime::new(RuntimeConfig {
        num_threads: 1,
        concurrency_level: 1,
        steal_enabled: false,
    });
    assert_eq!(
        factorize_gprm(&mut m, &mut rt, Strategy::RoundRobin),
        Err(DriverError::ConcurrencyTooLow(1))
    );
}

#[test]
fn singular_input_halts_every_driver_identically() {
    // the generated 25x8 matrix is exactly singular at step 2, element 0;
    // every driver must stop there with the same partial matrix
    let (reference, outcome) = sequential_reference(25, 8);
    let expected = LuError::SingularBlock { step: 2, elem: 0 };
    assert_eq!(outcome, Err(expected));

    for cl in [2, 4, 63] {
        let mut m = BlockedSparseMatrix::generate(25, 8);
        let mut rt = Runtime::new(RuntimeConfig {
            num_threads: 2,
            concurrency_level: cl,
            steal_enabled: false,
        });
        let err = factorize_gprm(&mut m, &mut rt, Strategy::RoundRobin).unwrap_err();
        assert_eq!(err, DriverError::Lu(expected));
        assert!(m.bit_identical(&reference), "partial state diverged at cl={cl}");
    }

    for threads in [1, 4] {
        let mut m = BlockedSparseMatrix::generate(25, 8);
        let err = factorize_taskpool(&mut m, threads).unwrap_err();
        assert_eq!(err, DriverError::Lu(expected));
        assert!(m.bit_identical(&reference), "partial state diverged at {threads} threads");
    }
}

#[test]
fn taskpool_task_counts_match_structure_enumeration() {
    let nb = 50;
    let mut m = BlockedSparseMatrix::generate(nb, 1);
    let stats = factorize_taskpool(&mut m, 2).expect("factorization succeeds");

    // step 0 eligibility is exactly the generated structure
    let fwd0 = (1..nb).filter(|&jj| structure_predicate(0, jj)).count();
    let bdiv0 = (1..nb).filter(|&ii| structure_predicate(ii, 0)).count();
    let bmod0 = (1..nb)
        .filter(|&ii| structure_predicate(ii, 0))
        .map(|_| (1..nb).filter(|&jj| structure_predicate(0, jj)).count())
        .sum::<usize>();
    assert_eq!(stats.steps[0].fwd, fwd0);
    assert_eq!(stats.steps[0].bdiv, bdiv0);
    assert_eq!(stats.steps[0].bmod, bmod0);
    assert_eq!(stats.steps.len(), nb);
}

#[test]
fn fill_in_only_grows_under_parallel_drivers() {
    let nb = 10;
    let generated: Vec<(usize, usize)> = (0..nb)
        .flat_map(|i| (0..nb).map(move |j| (i, j)))
        .filter(|&(i, j)| structure_predicate(i, j))
        .collect();
    let mut m = BlockedSparseMatrix::generate(nb, 4);
    let mut rt = Runtime::new(RuntimeConfig::with_threads(2));
    factorize_gprm(&mut m, &mut rt, Strategy::RoundRobin).expect("factorization succeeds");
    for (ii, jj) in generated {
        assert!(m.is_allocated(ii, jj), "generated block ({ii},{jj}) vanished");
    }
}

/// The phase-barrier shape the factorization program relies on: within one
/// step, no second-phase kernel starts before every first-phase kernel has
/// finished, enforced purely by the sequential combinator.
#[test]
fn phase_groups_are_separated_by_the_sequential_combinator() {
    type Stamp = (usize, usize, Instant, Instant); // (step, phase, start, end)
    let log: Arc<Mutex<Vec<Stamp>>> = Arc::new(Mutex::new(Vec::new()));

    let mut reg = KernelRegistry::new();
    let probe = {
        let log = log.clone();
        reg.register("phase_probe", 2, move |_, args| {
            let step = args[0].as_int().unwrap() as usize;
            let phase = args[1].as_int().unwrap() as usize;
            let start = Instant::now();
            std::thread::sleep(std::time::Duration::from_micros(200));
            log.lock().unwrap().push((step, phase, start, Instant::now()));
            Ok(Value::Unit)
        })
    };
    let reg = Arc::new(reg);

    let steps: Vec<_> = (0..4usize)
        .map(|step| {
            let phases: Vec<_> = (0..3usize)
                .map(|phase| {
                    spawn_n(4, |_| {
                        reg.call(
                            probe,
                            vec![literal(step), literal(phase)],
                            EvalMode::Parallel,
                        )
                        .unwrap()
                    })
                    .unwrap()
                })
                .collect();
            seq(phases).unwrap()
        })
        .collect();
    let program = Program::new(reg, seq(steps).unwrap());

    let mut rt = Runtime::new(RuntimeConfig::with_threads(4));
    rt.evaluate(&program).unwrap();

    let log = log.lock().unwrap();
    assert_eq!(log.len(), 4 * 3 * 4);
    for step in 0..4 {
        for phase in 0..2 {
            let end_of_phase = log
                .iter()
                .filter(|s| s.0 == step && s.1 == phase)
                .map(|s| s.3)
                .max()
                .unwrap();
            let start_of_next = log
                .iter()
                .filter(|s| s.0 == step && s.1 == phase + 1)
                .map(|s| s.2)
                .min()
                .unwrap();
            assert!(
                end_of_phase <= start_of_next,
                "phase {phase} of step {step} overlapped its successor"
            );
        }
    }
}
