//! Benchmark command-line harness.
//!
//! Two subcommands (`sparselu`, `matmul`), four strategies (`seq`, `gprm`,
//! `gprm-contiguous`, `taskpool`). Each run times the factorization or
//! multiplication only (input generation and verification sit outside the
//! timed window), takes the median over `--repeats`, optionally verifies
//! against the oracle, and emits CSV or JSON on stdout. `--stats` adds run
//! statistics on stderr. Repeated `--sweep param=v1,v2,...` flags are zipped
//! into one run per position.

use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use taskred_core::dense::{compare, compare_slices, lu_inplace_f32};
use taskred_core::matmul::matmul_seq;
use taskred_core::{factorize_sequential, BlockedSparseMatrix, Strategy};

use crate::matmul::{self, JobSpec};
use crate::report::{
    emit_csv, emit_json, fill_speedups, median_ms, BenchReport, StrategyName, Workload,
};
use crate::runtime::{Runtime, RuntimeConfig, RuntimeStats};
use crate::sparselu::{factorize_gprm, factorize_taskpool};

const LU_VERIFY_TOL: f64 = 1e-3;

#[derive(Parser)]
#[command(
    name = "taskred",
    about = "Blocked sparse LU and naive matmul benchmarks over a task-parallel runtime",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Blocked sparse LU factorization
    Sparselu(SparseluArgs),
    /// Naive matrix multiplication (m jobs of n*n multiply-adds)
    Matmul(MatmulArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Execution strategy: seq, gprm, gprm-contiguous or taskpool
    #[arg(long, default_value = "seq")]
    strategy: StrategyName,

    /// Worker thread count (default: available cores)
    #[arg(long, env = "TASKRED_THREADS")]
    threads: Option<usize>,

    /// Concurrency level for the gprm strategies (default: thread count)
    #[arg(long)]
    cl: Option<usize>,

    /// Timed repetitions; the report carries their median
    #[arg(long, default_value_t = 5)]
    repeats: usize,

    /// Verify the result against the oracle; nonzero exit on failure
    #[arg(long)]
    verify: bool,

    /// Print run statistics on stderr
    #[arg(long)]
    stats: bool,

    /// Report format on stdout
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,

    /// Sweep a parameter: param=v1,v2,... (repeatable; sweeps are zipped)
    #[arg(long)]
    sweep: Vec<String>,
}

#[derive(Args)]
struct SparseluArgs {
    /// Blocks per dimension
    #[arg(long, default_value_t = 50)]
    nb: usize,

    /// Block edge length
    #[arg(long, default_value_t = 16)]
    bs: usize,

    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct MatmulArgs {
    /// Rows of the left operand (number of jobs)
    #[arg(long, default_value_t = 512)]
    m: usize,

    /// Inner and right dimension (one job is n*n multiply-adds)
    #[arg(long, default_value_t = 512)]
    n: usize,

    /// Rows aggregated into one task (taskpool strategy)
    #[arg(long, default_value_t = 1)]
    cutoff: usize,

    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

/// One fully-resolved benchmark configuration.
#[derive(Clone)]
struct RunPlan {
    workload: Workload,
    strategy: StrategyName,
    nb: usize,
    bs: usize,
    m: usize,
    n: usize,
    cutoff: usize,
    threads: Option<usize>,
    cl: Option<usize>,
    repeats: usize,
    verify: bool,
    stats: bool,
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    let (common, plans) = match build_plans(&cli.command) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("run with --help for usage");
            return e.exit_code();
        }
    };

    let mut reports = Vec::with_capacity(plans.len());
    for plan in &plans {
        match execute(plan) {
            Ok(report) => reports.push(report),
            Err(e) => {
                eprintln!("error: {e}");
                return e.exit_code();
            }
        }
    }
    fill_speedups(&mut reports);

    match common.format.as_str() {
        "json" => println!("{}", emit_json(&reports)),
        _ => print!("{}", emit_csv(&reports)),
    }

    let failed = reports.iter().any(|r| r.verified == Some(false));
    if failed {
        eprintln!("error: verification failed");
        1
    } else {
        0
    }
}

fn build_plans(command: &Command) -> Result<(CommonArgs, Vec<RunPlan>), CliError> {
    let (base, common) = match command {
        Command::Sparselu(args) => {
            if args.nb == 0 || args.bs == 0 {
                return Err(CliError::Usage("--nb and --bs must be at least 1".into()));
            }
            (
                RunPlan {
                    workload: Workload::Sparselu,
                    strategy: args.common.strategy,
                    nb: args.nb,
                    bs: args.bs,
                    m: 0,
                    n: 0,
                    cutoff: 0,
                    threads: args.common.threads,
                    cl: args.common.cl,
                    repeats: args.common.repeats,
                    verify: args.common.verify,
                    stats: args.common.stats,
                },
                args.common.clone(),
            )
        }
        Command::Matmul(args) => (
            RunPlan {
                workload: Workload::Matmul,
                strategy: args.common.strategy,
                nb: 0,
                bs: 0,
                m: args.m,
                n: args.n,
                cutoff: args.cutoff,
                threads: args.common.threads,
                cl: args.common.cl,
                repeats: args.common.repeats,
                verify: args.common.verify,
                stats: args.common.stats,
            },
            args.common.clone(),
        ),
    };
    if base.repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }

    let sweeps = common
        .sweep
        .iter()
        .map(|s| parse_sweep(s))
        .collect::<Result<Vec<_>, _>>()?;
    if sweeps.is_empty() {
        return Ok((common, vec![base]));
    }

    let len = sweeps[0].1.len();
    if sweeps.iter().any(|(_, vs)| vs.len() != len) {
        return Err(CliError::Usage(
            "zipped sweeps need equal value counts".into(),
        ));
    }
    let mut plans = Vec::with_capacity(len);
    for i in 0..len {
        let mut plan = base.clone();
        for (param, values) in &sweeps {
            apply_sweep(&mut plan, param, &values[i])?;
        }
        plans.push(plan);
    }
    Ok((common, plans))
}

fn parse_sweep(spec: &str) -> Result<(String, Vec<String>), CliError> {
    let (param, values) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("bad sweep `{spec}`, expected param=v1,v2,...")))?;
    let values: Vec<String> = values.split(',').map(str::to_owned).collect();
    if values.is_empty() || values.iter().any(|v| v.is_empty()) {
        return Err(CliError::Usage(format!("bad sweep `{spec}`: empty value")));
    }
    Ok((param.to_owned(), values))
}

fn apply_sweep(plan: &mut RunPlan, param: &str, value: &str) -> Result<(), CliError> {
    let parse_usize = |value: &str| -> Result<usize, CliError> {
        value
            .parse()
            .map_err(|_| CliError::Usage(format!("bad sweep value `{value}` for `{param}`")))
    };
    match (param, plan.workload) {
        ("nb", Workload::Sparselu) => plan.nb = parse_usize(value)?,
        ("bs", Workload::Sparselu) => plan.bs = parse_usize(value)?,
        ("m", Workload::Matmul) => plan.m = parse_usize(value)?,
        ("n", Workload::Matmul) => plan.n = parse_usize(value)?,
        ("cutoff", Workload::Matmul) => plan.cutoff = parse_usize(value)?,
        ("threads", _) => plan.threads = Some(parse_usize(value)?),
        ("cl", _) => plan.cl = Some(parse_usize(value)?),
        ("strategy", _) => {
            plan.strategy = value.parse().map_err(CliError::Usage)?;
        }
        (other, workload) => {
            return Err(CliError::Usage(format!(
                "parameter `{other}` cannot be swept for the {workload} workload"
            )));
        }
    }
    Ok(())
}

fn resolved_threads(plan: &RunPlan) -> usize {
    plan.threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn execute(plan: &RunPlan) -> Result<BenchReport, CliError> {
    match plan.workload {
        Workload::Sparselu => run_sparselu(plan),
        Workload::Matmul => run_matmul(plan),
    }
}

fn runtime_for(plan: &RunPlan) -> Result<(Runtime, usize, usize), CliError> {
    let threads = resolved_threads(plan);
    let cl = plan.cl.unwrap_or(threads);
    if cl < 2 {
        return Err(CliError::Usage(format!(
            "the gprm strategies need --cl of at least 2, got {cl}"
        )));
    }
    let cfg = RuntimeConfig {
        num_threads: threads,
        concurrency_level: cl,
        steal_enabled: false,
    };
    Ok((Runtime::new(cfg), threads, cl))
}

fn run_sparselu(plan: &RunPlan) -> Result<BenchReport, CliError> {
    let (nb, bs) = (plan.nb, plan.bs);
    let mut times_ms = Vec::with_capacity(plan.repeats);
    let mut last = None;
    let mut report_threads = None;
    let mut report_cl = None;
    let mut pool_stats = None;
    let mut runtime = None;

    if matches!(plan.strategy, StrategyName::Gprm | StrategyName::GprmContiguous) {
        let (rt, threads, cl) = runtime_for(plan)?;
        runtime = Some(rt);
        report_threads = Some(threads);
        report_cl = Some(cl);
    } else if plan.strategy == StrategyName::Taskpool {
        report_threads = Some(resolved_threads(plan));
    }

    for _ in 0..plan.repeats {
        let mut matrix = BlockedSparseMatrix::generate(nb, bs);
        let started = Instant::now();
        let outcome = match plan.strategy {
            StrategyName::Seq => factorize_sequential(&mut matrix).map_err(|e| e.to_string()),
            StrategyName::Gprm => {
                factorize_gprm(&mut matrix, runtime.as_mut().expect("created"), Strategy::RoundRobin)
                    .map_err(|e| e.to_string())
            }
            StrategyName::GprmContiguous => {
                factorize_gprm(&mut matrix, runtime.as_mut().expect("created"), Strategy::Contiguous)
                    .map_err(|e| e.to_string())
            }
            StrategyName::Taskpool => {
                factorize_taskpool(&mut matrix, report_threads.expect("resolved"))
                    .map(|stats| pool_stats = Some(stats))
                    .map_err(|e| e.to_string())
            }
        };
        times_ms.push(started.elapsed().as_secs_f64() * 1e3);
        outcome.map_err(CliError::Run)?;
        last = Some(matrix);
    }
    let factored = last.expect("at least one repeat");

    let mut verified = None;
    if plan.verify {
        let mut oracle = BlockedSparseMatrix::generate(nb, bs).to_dense();
        lu_inplace_f32(&mut oracle)
            .map_err(|e| CliError::Run(format!("dense oracle failed: {e}")))?;
        let outcome = compare(&factored.to_dense(), &oracle, LU_VERIFY_TOL)
            .map_err(|e| CliError::Run(e.to_string()))?;
        if plan.stats {
            eprintln!(
                "# verify: max_rel_error={:.3e} tol={LU_VERIFY_TOL:.0e}",
                outcome.max_rel_error
            );
        }
        verified = Some(outcome.passed);
    }

    if plan.stats {
        eprintln!("# sparsity={:.4}", BlockedSparseMatrix::generate(nb, 1).sparsity());
        eprintln!("# fill_in_blocks={}", factored.allocated_blocks());
        if let Some(rt) = &runtime {
            print_runtime_stats(&rt.stats());
        }
        if let Some(stats) = &pool_stats {
            eprintln!("# pool_tasks_total={}", stats.total_tasks());
            if let Some(first) = stats.steps.first() {
                eprintln!(
                    "# pool_tasks_step0: fwd={} bdiv={} bmod={}",
                    first.fwd, first.bdiv, first.bmod
                );
            }
        }
    }

    Ok(BenchReport {
        workload: Workload::Sparselu,
        strategy: plan.strategy,
        nb: Some(nb),
        bs: Some(bs),
        m: None,
        n: None,
        cutoff: None,
        threads: report_threads,
        cl: report_cl,
        repeats: plan.repeats,
        median_ms: median_ms(&times_ms),
        times_ms,
        verified,
        speedup_vs_seq: None,
    })
}

fn run_matmul(plan: &RunPlan) -> Result<BenchReport, CliError> {
    let (m, n) = (plan.m, plan.n);
    if m == 0 || n == 0 {
        return Err(CliError::Usage("--m and --n must be at least 1".into()));
    }
    let spec = JobSpec {
        m,
        n,
        cutoff: plan.cutoff,
    };
    if plan.strategy == StrategyName::Taskpool {
        spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    }

    let (a, b) = matmul::generate_inputs(m, n);
    let mut times_ms = Vec::with_capacity(plan.repeats);
    let mut last = vec![0.0f32; m * n];
    let mut report_threads = None;
    let mut report_cl = None;
    let mut report_cutoff = None;
    let mut dispatched = None;
    let mut runtime = None;

    if matches!(plan.strategy, StrategyName::Gprm | StrategyName::GprmContiguous) {
        let (rt, threads, cl) = runtime_for(plan)?;
        runtime = Some(rt);
        report_threads = Some(threads);
        report_cl = Some(cl);
    } else if plan.strategy == StrategyName::Taskpool {
        report_threads = Some(resolved_threads(plan));
        report_cutoff = Some(plan.cutoff);
    }

    for _ in 0..plan.repeats {
        let mut c = vec![0.0f32; m * n];
        let started = Instant::now();
        let outcome: Result<(), String> = match plan.strategy {
            StrategyName::Seq => {
                matmul_seq(&a, &b, &mut c, m, n, n);
                Ok(())
            }
            StrategyName::Gprm => {
                matmul::matmul_parfor(
                    &a,
                    &b,
                    &mut c,
                    m,
                    n,
                    runtime.as_mut().expect("created"),
                    Strategy::RoundRobin,
                )
                .map_err(|e| e.to_string())
            }
            StrategyName::GprmContiguous => {
                matmul::matmul_parfor(
                    &a,
                    &b,
                    &mut c,
                    m,
                    n,
                    runtime.as_mut().expect("created"),
                    Strategy::Contiguous,
                )
                .map_err(|e| e.to_string())
            }
            StrategyName::Taskpool => {
                matmul::matmul_taskpool(&a, &b, &mut c, spec, report_threads.expect("resolved"))
                    .map(|count| dispatched = Some(count))
                    .map_err(|e| e.to_string())
            }
        };
        times_ms.push(started.elapsed().as_secs_f64() * 1e3);
        outcome.map_err(CliError::Run)?;
        last = c;
    }

    let mut verified = None;
    if plan.verify {
        let mut expected = vec![0.0f32; m * n];
        matmul_seq(&a, &b, &mut expected, m, n, n);
        let outcome =
            compare_slices(&last, &expected, 0.0).map_err(|e| CliError::Run(e.to_string()))?;
        if plan.stats {
            eprintln!("# verify: max_rel_error={:.3e} (bit-exact required)", outcome.max_rel_error);
        }
        verified = Some(outcome.passed);
    }

    if plan.stats {
        if let Some(rt) = &runtime {
            print_runtime_stats(&rt.stats());
        }
        if let Some(count) = dispatched {
            eprintln!("# pool_tasks_dispatched={count}");
        }
    }

    Ok(BenchReport {
        workload: Workload::Matmul,
        strategy: plan.strategy,
        nb: None,
        bs: None,
        m: Some(m),
        n: Some(n),
        cutoff: report_cutoff,
        threads: report_threads,
        cl: report_cl,
        repeats: plan.repeats,
        median_ms: median_ms(&times_ms),
        times_ms,
        verified,
        speedup_vs_seq: None,
    })
}

fn print_runtime_stats(stats: &RuntimeStats) {
    for (tile, t) in stats.per_tile.iter().enumerate() {
        eprintln!(
            "# tile {tile}: packets={} tasks={} busy_ms={:.3}",
            t.packets,
            t.kernel_invocations,
            t.busy.as_secs_f64() * 1e3
        );
    }
    eprintln!(
        "# totals: packets={} tasks={} busy_ms={:.3}",
        stats.total_packets(),
        stats.total_kernel_invocations(),
        stats.total_busy().as_secs_f64() * 1e3
    );
}

// clap needs FromStr-compatible parsing for StrategyName flags
impl clap::builder::ValueParserFactory for StrategyName {
    type Parser = clap::builder::ValueParser;

    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<StrategyName>())
    }
}
