//! Benchmark reports and their CSV/JSON encodings.
//!
//! One [`BenchReport`] describes one benchmark run: configuration, wall-clock
//! times over the repeats, verification status, and the speedup against the
//! sequential baseline when one with identical parameters exists in the same
//! session. Both encodings use the same thirteen fields in the same order;
//! non-applicable parameters are empty (CSV) or null (JSON).

use std::fmt;
use std::str::FromStr;

/// Benchmark workload.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Workload {
    Sparselu,
    Matmul,
}

impl fmt::Display for Workload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Workload::Sparselu => "sparselu",
            Workload::Matmul => "matmul",
        })
    }
}

/// Execution strategy selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategyName {
    Seq,
    Gprm,
    GprmContiguous,
    Taskpool,
}

impl fmt::Display for StrategyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyName::Seq => "seq",
            StrategyName::Gprm => "gprm",
            StrategyName::GprmContiguous => "gprm-contiguous",
            StrategyName::Taskpool => "taskpool",
        })
    }
}

impl FromStr for StrategyName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "seq" => Ok(StrategyName::Seq),
            "gprm" => Ok(StrategyName::Gprm),
            "gprm-contiguous" => Ok(StrategyName::GprmContiguous),
            "taskpool" => Ok(StrategyName::Taskpool),
            other => Err(format!(
                "unknown strategy `{other}` (expected seq, gprm, gprm-contiguous or taskpool)"
            )),
        }
    }
}

/// One benchmark run's record.
#[derive(Clone, Debug)]
pub struct BenchReport {
    pub workload: Workload,
    pub strategy: StrategyName,
    pub nb: Option<usize>,
    pub bs: Option<usize>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub cutoff: Option<usize>,
    pub threads: Option<usize>,
    pub cl: Option<usize>,
    pub repeats: usize,
    pub times_ms: Vec<f64>,
    pub median_ms: f64,
    pub verified: Option<bool>,
    pub speedup_vs_seq: Option<f64>,
}

/// Median of the recorded times (mean of the middle two for even counts).
pub fn median_ms(times: &[f64]) -> f64 {
    assert!(!times.is_empty());
    let mut sorted = times.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

type ParamKey = (Workload, Option<usize>, Option<usize>, Option<usize>, Option<usize>);

fn param_key(r: &BenchReport) -> ParamKey {
    (r.workload, r.nb, r.bs, r.m, r.n)
}

/// Fill `speedup_vs_seq` wherever a sequential baseline with identical
/// workload parameters exists among `reports`.
pub fn fill_speedups(reports: &mut [BenchReport]) {
    let baselines: Vec<(ParamKey, f64)> = reports
        .iter()
        .filter(|r| r.strategy == StrategyName::Seq)
        .map(|r| (param_key(r), r.median_ms))
        .collect();
    for report in reports.iter_mut() {
        let key = param_key(report);
        if let Some((_, base)) = baselines.iter().find(|(k, _)| *k == key) {
            report.speedup_vs_seq = Some(base / report.median_ms);
        }
    }
}

pub const CSV_HEADER: &str =
    "workload,strategy,nb,bs,m,n,cutoff,threads,cl,repeats,median_ms,verified,speedup";

fn opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// Encode reports as CSV with the pinned header.
pub fn emit_csv(reports: &[BenchReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.workload,
            r.strategy,
            opt(&r.nb),
            opt(&r.bs),
            opt(&r.m),
            opt(&r.n),
            opt(&r.cutoff),
            opt(&r.threads),
            opt(&r.cl),
            r.repeats,
            r.median_ms,
            opt(&r.verified),
            opt(&r.speedup_vs_seq),
        ));
    }
    out
}

/// Encode reports as a JSON array with the same field names as the CSV
/// columns.
pub fn emit_json(reports: &[BenchReport]) -> String {
    let rows: Vec<serde_json::Value> = reports
        .iter()
        .map(|r| {
            serde_json::json!({
                "workload": r.workload.to_string(),
                "strategy": r.strategy.to_string(),
                "nb": r.nb,
                "bs": r.bs,
                "m": r.m,
                "n": r.n,
                "cutoff": r.cutoff,
                "threads": r.threads,
                "cl": r.cl,
                "repeats": r.repeats,
                "median_ms": r.median_ms,
                "verified": r.verified,
                "speedup": r.speedup_vs_seq,
            })
        })
        .collect();
    serde_json::to_string_pretty(&rows).expect("reports serialize")
}
