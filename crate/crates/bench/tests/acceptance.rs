//! Acceptance suite: one test per criterion, each printing one PASS/FAIL
//! line (run with `-- --nocapture` to see the lines as they happen).
//!
//! Criterion 7 is expected to fail: its sparse workload (nb=50, bs=32) is
//! exactly singular under the pinned generator: the first diagonal block
//! hits a zero pivot at elimination step 4 in exact arithmetic, so a
//! non-pivoting factorization can never time it, on any host. The failure
//! message carries the analysis; schedule-independence and scaling substance
//! is covered at non-singular sizes by this suite and the driver tests.

use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use taskred::matmul::{generate_inputs, matmul_parfor, matmul_taskpool, JobSpec};
use taskred::runtime::{
    literal, seq, EvalMode, KernelRegistry, Program, Runtime, RuntimeConfig, TaskExpr, Value,
};
use taskred::sparselu::{factorize_gprm, factorize_taskpool, DriverError};
use taskred_core::dense::{compare, lu_inplace_f32, DenseZeroPivot};
use taskred_core::matmul::matmul_seq;
use taskred_core::worksharing::{
    contiguous_indices, contiguous_nested_indices, par_for_indices, par_nested_for_indices,
};
use taskred_core::{
    factorize_sequential, structure_predicate, BlockedSparseMatrix, LuError, Strategy,
};

fn pass(criterion: u32, detail: &str) {
    println!("[PASS] criterion {criterion}: {detail}");
}

// ---------------------------------------------------------------------------
// 1. exhaustive partition properties
// ---------------------------------------------------------------------------

fn check_partition(sets: &[Vec<usize>], total: usize, contiguous: bool) {
    let mut union: Vec<usize> = sets.iter().flatten().copied().collect();
    union.sort_unstable();
    assert!(union.iter().enumerate().all(|(i, &v)| i == v), "cover/disjoint violated");
    assert_eq!(union.len(), total);
    let max = sets.iter().map(Vec::len).max().unwrap_or(0);
    let min = sets.iter().map(Vec::len).min().unwrap_or(0);
    assert!(max - min <= 1, "balance violated: max {max} min {min}");
    if contiguous {
        for s in sets {
            assert!(s.windows(2).all(|w| w[1] == w[0] + 1), "contiguity violated");
        }
    }
}

#[test]
fn criterion_1_partition_exhaustive() {
    let started = Instant::now();

    for m in 0..=200usize {
        for cl in 1..=64usize {
            let rr: Vec<Vec<usize>> = (0..cl)
                .map(|w| par_for_indices(0, m, w, cl).collect())
                .collect();
            check_partition(&rr, m, false);
            let cont: Vec<Vec<usize>> = (0..cl)
                .map(|w| contiguous_indices(0, m, w, cl).collect())
                .collect();
            check_partition(&cont, m, true);
        }
    }

    for outer in 0..=15usize {
        for inner in 0..=15usize {
            for cl in 1..=64usize {
                let flat = |pairs: Vec<(usize, usize)>| -> Vec<usize> {
                    pairs.into_iter().map(|(i, j)| i * inner + j).collect()
                };
                let rr: Vec<Vec<usize>> = (0..cl)
                    .map(|w| flat(par_nested_for_indices(0, outer, 0, inner, w, cl).collect()))
                    .collect();
                check_partition(&rr, outer * inner, false);
                let cont: Vec<Vec<usize>> = (0..cl)
                    .map(|w| flat(contiguous_nested_indices(0, outer, 0, inner, w, cl).collect()))
                    .collect();
                check_partition(&cont, outer * inner, true);
            }
        }
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(5),
        "partition sweep took {elapsed:?}, budget is 5 s"
    );
    pass(1, &format!(
        "cover/disjoint/balance/contiguity hold for m in [0,200], CL in [1,64], nested up to 15x15 ({elapsed:?})"
    ));
}

// ---------------------------------------------------------------------------
// 2. sparsity anchors
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_sparsity_anchors() {
    let enumerated = |nb: usize| -> usize {
        (0..nb)
            .flat_map(|i| (0..nb).map(move |j| (i, j)))
            .filter(|&(i, j)| structure_predicate(i, j))
            .count()
    };
    assert_eq!(enumerated(50), 364);
    assert_eq!(enumerated(100), 1148);

    let m50 = BlockedSparseMatrix::generate(50, 1);
    assert_eq!(m50.allocated_blocks(), 364);
    assert!((m50.sparsity() - 0.8544).abs() < 5e-5);
    assert!((m50.sparsity() - 0.85).abs() <= 0.01, "more than 1pp from the nominal 85%");

    let m100 = BlockedSparseMatrix::generate(100, 1);
    assert_eq!(m100.allocated_blocks(), 1148);
    assert!((m100.sparsity() - 0.8852).abs() < 5e-5);
    assert!((m100.sparsity() - 0.89).abs() <= 0.01, "more than 1pp from the nominal 89%");

    pass(2, "block counts 364/1148, sparsity 85.44%/88.52% within 1pp of 85%/89%");
}

// ---------------------------------------------------------------------------
// 3. LU oracle equivalence
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_lu_oracle_equivalence() {
    let started = Instant::now();
    let mut worst = 0.0f64;
    for nb in [5usize, 10, 25] {
        for bs in [4usize, 8, 16] {
            let mut blocked = BlockedSparseMatrix::generate(nb, bs);
            let mut oracle = blocked.to_dense();
            let blocked_outcome = factorize_sequential(&mut blocked);
            let oracle_outcome = lu_inplace_f32(&mut oracle);

            if (nb, bs) == (25, 8) {
                // this input is exactly singular; both routes must agree on
                // the failing pivot (block step 2 element 0 == dense index 16)
                assert_eq!(
                    blocked_outcome,
                    Err(LuError::SingularBlock { step: 2, elem: 0 })
                );
                assert_eq!(oracle_outcome, Err(DenseZeroPivot { elem: 16 }));
                continue;
            }

            blocked_outcome.expect("factorization succeeds");
            oracle_outcome.expect("oracle succeeds");
            let report = compare(&blocked.to_dense(), &oracle, 1e-3).expect("same shape");
            assert!(
                report.passed,
                "nb={nb} bs={bs}: max rel error {}",
                report.max_rel_error
            );
            worst = worst.max(report.max_rel_error);
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(30), "LU grid took {elapsed:?}, budget is 30 s");
    pass(3, &format!(
        "blocked == dense oracle within 1e-3 on the non-singular grid (worst {worst:.2e}); \
         at nb=25 bs=8 both routes diagnose the same exact zero pivot (dense index 16)"
    ));
}

// ---------------------------------------------------------------------------
// 4. schedule independence
// ---------------------------------------------------------------------------

fn gprm_grid(nb: usize, bs: usize, reference: &BlockedSparseMatrix, expect: Result<(), LuError>) {
    for cl in [2usize, 4, 8, 63] {
        for strategy in [Strategy::RoundRobin, Strategy::Contiguous] {
            let mut m = BlockedSparseMatrix::generate(nb, bs);
            let mut rt = Runtime::new(RuntimeConfig {
                num_threads: 4,
                concurrency_level: cl,
                steal_enabled: false,
            });
            let outcome = factorize_gprm(&mut m, &mut rt, strategy);
            match &expect {
                Ok(()) => assert_eq!(outcome, Ok(()), "cl={cl} {strategy:?}"),
                Err(e) => assert_eq!(outcome, Err(DriverError::Lu(*e)), "cl={cl} {strategy:?}"),
            }
            assert!(
                m.bit_identical(reference),
                "nb={nb} bs={bs} cl={cl} {strategy:?}: matrix state diverged"
            );
        }
    }
    for threads in [1usize, 2, 4, 8] {
        let mut m = BlockedSparseMatrix::generate(nb, bs);
        let outcome = factorize_taskpool(&mut m, threads);
        match &expect {
            Ok(()) => assert!(outcome.is_ok(), "threads={threads}"),
            Err(e) => assert_eq!(outcome.unwrap_err(), DriverError::Lu(*e), "threads={threads}"),
        }
        assert!(
            m.bit_identical(reference),
            "nb={nb} bs={bs} taskpool threads={threads}: matrix state diverged"
        );
    }
}

#[test]
fn criterion_4_schedule_independence() {
    // the stated size: exactly singular input; all drivers must halt at the
    // same pivot with bit-identical matrix state
    let mut reference = BlockedSparseMatrix::generate(25, 8);
    let outcome = factorize_sequential(&mut reference);
    let singular = LuError::SingularBlock { step: 2, elem: 0 };
    assert_eq!(outcome, Err(singular));
    gprm_grid(25, 8, &reference, Err(singular));

    // success-path bit-exactness over the same grids at non-singular sizes
    for (nb, bs) in [(25usize, 4usize), (10, 8), (25, 16)] {
        let mut reference = BlockedSparseMatrix::generate(nb, bs);
        factorize_sequential(&mut reference).expect("factorization succeeds");
        gprm_grid(nb, bs, &reference, Ok(()));
    }

    pass(4, "all drivers bit-identical to sequential: halt state at the singular nb=25 bs=8 \
          (zero pivot, step 2 elem 0), full factorizations at nb=25/bs=4, nb=10/bs=8, nb=25/bs=16; \
          CL in {2,4,8,63}, both strategies, pool threads in {1,2,4,8}");
}

// ---------------------------------------------------------------------------
// 5. matmul equivalence
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_matmul_equivalence() {
    for (m, n) in [(9usize, 3usize), (500, 500)] {
        let (a, b) = generate_inputs(m, n);
        let mut expected = vec![0.0f32; m * n];
        matmul_seq(&a, &b, &mut expected, m, n, n);
        let expected_bits: Vec<u32> = expected.iter().map(|v| v.to_bits()).collect();

        for workers in [1usize, 2, 4] {
            for strategy in [Strategy::RoundRobin, Strategy::Contiguous] {
                let mut c = vec![0.0f32; m * n];
                let mut rt = Runtime::new(RuntimeConfig::with_threads(workers));
                matmul_parfor(&a, &b, &mut c, m, n, &mut rt, strategy).expect("evaluation");
                let bits: Vec<u32> = c.iter().map(|v| v.to_bits()).collect();
                assert_eq!(bits, expected_bits, "m={m} cl={workers} {strategy:?}");
            }
            for cutoff in [1usize, 7, m] {
                let mut c = vec![0.0f32; m * n];
                let dispatched =
                    matmul_taskpool(&a, &b, &mut c, JobSpec { m, n, cutoff }, workers)
                        .expect("valid spec");
                assert_eq!(dispatched, m.div_ceil(cutoff));
                let bits: Vec<u32> = c.iter().map(|v| v.to_bits()).collect();
                assert_eq!(bits, expected_bits, "m={m} threads={workers} cutoff={cutoff}");
            }
        }
    }
    pass(5, "par_for and taskpool bit-identical to sequential for (9,3) and (500,500), \
          CL/threads in {1,2,4}, cutoff in {1,7,m}");
}

// ---------------------------------------------------------------------------
// 6. runtime correctness on randomized trees
// ---------------------------------------------------------------------------

#[derive(Clone)]
enum RefNode {
    Lit(i64),
    Op {
        kind: OpKind,
        mode: EvalMode,
        children: Vec<RefNode>,
    },
}

#[derive(Clone, Copy, PartialEq)]
enum OpKind {
    Sum,
    Product,
    Max,
    Chain,
}

fn gen_tree(rng: &mut ChaCha8Rng, depth: usize, budget: &mut usize) -> RefNode {
    if depth == 0 || *budget == 0 || rng.random_bool(0.35) {
        return RefNode::Lit(rng.random_range(-9..=9));
    }
    *budget -= 1;
    let fanout = rng.random_range(1..=4usize);
    let children = (0..fanout)
        .map(|_| gen_tree(rng, depth - 1, budget))
        .collect();
    let kind = match rng.random_range(0..4u8) {
        0 => OpKind::Sum,
        1 => OpKind::Product,
        2 => OpKind::Max,
        _ => OpKind::Chain,
    };
    let mode = if rng.random_bool(0.5) {
        EvalMode::Parallel
    } else {
        EvalMode::Sequential
    };
    RefNode::Op {
        kind,
        mode,
        children,
    }
}

/// Sequential recursive oracle, independent of the runtime.
fn reference_eval(node: &RefNode) -> i64 {
    match node {
        RefNode::Lit(v) => *v,
        RefNode::Op { kind, children, .. } => {
            let vals: Vec<i64> = children.iter().map(reference_eval).collect();
            match kind {
                OpKind::Sum => vals.iter().fold(0i64, |a, &b| a.wrapping_add(b)),
                OpKind::Product => vals.iter().fold(1i64, |a, &b| a.wrapping_mul(b)),
                OpKind::Max => *vals.iter().max().expect("fanout >= 1"),
                OpKind::Chain => *vals.last().expect("fanout >= 1"),
            }
        }
    }
}

struct TreeKernels {
    registry: Arc<KernelRegistry>,
    sum: taskred::runtime::KernelId,
    product: taskred::runtime::KernelId,
    max: taskred::runtime::KernelId,
}

fn tree_kernels() -> TreeKernels {
    let mut reg = KernelRegistry::new();
    let ints = |args: &[Value]| -> Vec<i64> {
        args.iter().map(|v| v.as_int().expect("int tree")).collect()
    };
    let sum = reg.register_variadic("sum", move |_, args| {
        Ok(Value::Int(ints(args).iter().fold(0i64, |a, &b| a.wrapping_add(b))))
    });
    let product = reg.register_variadic("product", move |_, args| {
        Ok(Value::Int(ints(args).iter().fold(1i64, |a, &b| a.wrapping_mul(b))))
    });
    let max = reg.register_variadic("max", move |_, args| {
        Ok(Value::Int(*ints(args).iter().max().expect("nonempty")))
    });
    TreeKernels {
        registry: Arc::new(reg),
        sum,
        product,
        max,
    }
}

fn to_expr(node: &RefNode, k: &TreeKernels) -> TaskExpr {
    match node {
        RefNode::Lit(v) => literal(*v),
        RefNode::Op {
            kind,
            mode,
            children,
        } => {
            let args: Vec<TaskExpr> = children.iter().map(|c| to_expr(c, k)).collect();
            match kind {
                OpKind::Chain => seq(args).expect("fanout >= 1"),
                OpKind::Sum => k.registry.call(k.sum, args, *mode).expect("variadic"),
                OpKind::Product => k.registry.call(k.product, args, *mode).expect("variadic"),
                OpKind::Max => k.registry.call(k.max, args, *mode).expect("variadic"),
            }
        }
    }
}

#[test]
fn criterion_6_runtime_correctness() {
    const TRIALS: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let kernels = tree_kernels();

    let trees: Vec<(RefNode, i64)> = (0..TRIALS)
        .map(|_| {
            let mut budget = 40;
            let tree = gen_tree(&mut rng, 10, &mut budget);
            let expected = reference_eval(&tree);
            (tree, expected)
        })
        .collect();

    for threads in [1usize, 2, 4, 8] {
        let mut rt = Runtime::new(RuntimeConfig::with_threads(threads));
        for (i, (tree, expected)) in trees.iter().enumerate() {
            let program = Program::new(kernels.registry.clone(), to_expr(tree, &kernels));
            let got = rt.evaluate(&program).expect("pure kernels never fail");
            assert_eq!(
                got,
                Value::Int(*expected),
                "trial {i} diverged at {threads} threads"
            );
            let q = rt.quiescence();
            assert!(
                q.is_quiescent(),
                "trial {i} at {threads} threads left outstanding={} depths={:?}",
                q.outstanding_requests,
                q.mailbox_depths
            );
        }
        for tile in rt.stats().per_tile {
            assert!(tile.max_nesting <= 1, "run-to-completion violated");
        }
    }

    // seq-combinator ordering, verified by timestamps
    for threads in [1usize, 2, 4, 8] {
        let stamps: Arc<Mutex<Vec<(i64, Instant, Instant)>>> = Arc::new(Mutex::new(Vec::new()));
        let mut reg = KernelRegistry::new();
        let stamp = {
            let stamps = stamps.clone();
            reg.register("stamp", 1, move |_, args| {
                let id = args[0].as_int().expect("stamp id");
                let start = Instant::now();
                std::thread::sleep(Duration::from_micros(200));
                stamps.lock().unwrap().push((id, start, Instant::now()));
                Ok(Value::Unit)
            })
        };
        let reg = Arc::new(reg);
        let chain: Vec<TaskExpr> = (0..6i64)
            .map(|i| reg.call(stamp, vec![literal(i)], EvalMode::Parallel).expect("arity"))
            .collect();
        let program = Program::new(reg, seq(chain).expect("nonempty"));
        let mut rt = Runtime::new(RuntimeConfig::with_threads(threads));
        rt.evaluate(&program).expect("stamps never fail");
        let stamps = stamps.lock().unwrap();
        assert_eq!(stamps.len(), 6);
        for pair in stamps.windows(2) {
            assert_eq!(pair[1].0, pair[0].0 + 1, "children ran out of order");
            assert!(pair[0].2 <= pair[1].1, "child overlapped its successor");
        }
    }

    pass(6, &format!(
        "{TRIALS} random trees (depth<=10, fanout<=4) match the recursive oracle for threads in \
         {{1,2,4,8}} with quiescence after every trial; seq ordering verified by timestamps"
    ));
}

// ---------------------------------------------------------------------------
// 7. soft scaling
// ---------------------------------------------------------------------------

fn time_parfor_512(threads: usize) -> f64 {
    let (m, n) = (512usize, 512usize);
    let (a, b) = generate_inputs(m, n);
    let mut best = f64::INFINITY;
    for _ in 0..3 {
        let mut c = vec![0.0f32; m * n];
        let mut rt = Runtime::new(RuntimeConfig {
            num_threads: threads,
            concurrency_level: 4,
            steal_enabled: false,
        });
        let started = Instant::now();
        matmul_parfor(&a, &b, &mut c, m, n, &mut rt, Strategy::RoundRobin).expect("evaluation");
        best = best.min(started.elapsed().as_secs_f64());
    }
    best
}

#[test]
fn criterion_7_soft_scaling() {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());

    let matmul_line = if cores >= 4 {
        let t1 = time_parfor_512(1);
        let t4 = time_parfor_512(4);
        let speedup = t1 / t4;
        assert!(
            speedup >= 2.5,
            "matmul 512x512 par_for speedup {speedup:.2} < 2.5 at 4 threads"
        );
        format!("matmul par_for speedup {speedup:.2} >= 2.5 at 4 threads")
    } else {
        format!("matmul speedup check skipped: host has {cores} cores, criterion requires >= 4")
    };

    // the stated sparse workload cannot run: nb=50, bs=32 is exactly singular
    // under the pinned generator (zero pivot in the very first diagonal
    // block, element 4; exact in rational arithmetic, not a rounding
    // artifact), so no non-pivoting factorization of it can be timed
    let mut m = BlockedSparseMatrix::generate(50, 32);
    let mut rt = Runtime::new(RuntimeConfig {
        num_threads: cores.clamp(2, 4),
        concurrency_level: 4,
        steal_enabled: false,
    });
    let outcome = factorize_gprm(&mut m, &mut rt, Strategy::RoundRobin);
    assert_eq!(
        outcome,
        Err(DriverError::Lu(LuError::SingularBlock { step: 0, elem: 4 })),
        "expected the known exact singularity of the generated 50x32 matrix"
    );

    println!(
        "[FAIL] criterion 7: sparselu nb=50 bs=32 cannot be timed: the generated matrix is \
         exactly singular (zero pivot at step 0, element 4; exact in rational arithmetic). \
         {matmul_line}. Scaling substance at a factorizable size is reported by the \
         soft_scaling_supplement test."
    );
    panic!(
        "criterion 7 unattainable as stated: the nb=50 bs=32 input is exactly singular under \
         the pinned generator; a non-pivoting LU must fail fast on it ({matmul_line})"
    );
}

/// Supplementary (not a stated criterion): the sparselu scaling shape at the
/// nearest factorizable size.
#[test]
fn soft_scaling_supplement() {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    if cores < 4 {
        println!(
            "[SKIP] supplement: sparselu scaling needs >= 4 cores, host has {cores}"
        );
        return;
    }
    let time_gprm = |threads: usize| -> f64 {
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let mut m = BlockedSparseMatrix::generate(40, 25);
            let mut rt = Runtime::new(RuntimeConfig {
                num_threads: threads,
                concurrency_level: 4,
                steal_enabled: false,
            });
            let started = Instant::now();
            factorize_gprm(&mut m, &mut rt, Strategy::RoundRobin).expect("factorizable size");
            best = best.min(started.elapsed().as_secs_f64());
        }
        best
    };
    let speedup = time_gprm(1) / time_gprm(4);
    println!("[INFO] supplement: sparselu nb=40 bs=25 gprm speedup {speedup:.2} at 4 threads vs 1");
    assert!(
        speedup >= 2.0,
        "sparselu nb=40 bs=25 speedup {speedup:.2} < 2.0 at 4 threads"
    );
}

// ---------------------------------------------------------------------------
// 8. cutoff effect
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_cutoff_effect() {
    let (m, n) = (5000usize, 50usize);
    let (a, b) = generate_inputs(m, n);

    let time_with = |cutoff: usize| -> (f64, usize) {
        let mut best = f64::INFINITY;
        let mut dispatched = 0;
        for _ in 0..3 {
            let mut c = vec![0.0f32; m * n];
            let started = Instant::now();
            dispatched = matmul_taskpool(&a, &b, &mut c, JobSpec { m, n, cutoff }, 4)
                .expect("valid spec");
            best = best.min(started.elapsed().as_secs_f64());
        }
        (best, dispatched)
    };

    let (fine_time, fine_tasks) = time_with(1);
    let (coarse_time, coarse_tasks) = time_with(100);

    assert_eq!(fine_tasks, 5000);
    assert_eq!(coarse_tasks, 50);
    assert_eq!(fine_tasks / coarse_tasks, 100, "dispatch-counter ratio must be exactly 100:1");

    let ratio = fine_time / coarse_time;
    assert!(
        ratio >= 1.5,
        "cutoff=100 only {ratio:.2}x faster than cutoff=1 (need >= 1.5x)"
    );
    pass(8, &format!(
        "taskpool matmul m=5000 n=50 at 4 threads: cutoff=100 is {ratio:.1}x faster than \
         cutoff=1, dispatch counters 5000:50 (exactly 100:1)"
    ));
}
