//! Static worksharing: assign loop iterations to worker indices.
//!
//! A loop (single or nested) is split among `concurrency` workers. Each
//! worker is identified by an index `worker` in `[0, concurrency)` and asks
//! for *its* iterations; no scheduler is involved. Two strategies:
//!
//! - [`Strategy::RoundRobin`]: flattened iteration `k` belongs to worker
//!   `k % concurrency`. A nested loop is flattened row-major and treated as a
//!   single loop, so the round-robin pattern carries across row boundaries.
//! - [`Strategy::Contiguous`]: every worker gets a `total / concurrency`
//!   chunk and the remainder `total % concurrency` is given one-by-one to the
//!   foremost workers.
//!
//! Both strategies cover the range exactly once across all workers, are
//! pairwise disjoint, and balance within one iteration.

/// How iterations are assigned to workers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    RoundRobin,
    Contiguous,
}

#[inline]
fn check_worker(worker: usize, concurrency: usize) {
    assert!(concurrency >= 1, "concurrency must be at least 1");
    assert!(
        worker < concurrency,
        "worker index {worker} out of range for concurrency {concurrency}"
    );
}

/// Round-robin indices of `[start, end)` owned by `worker`, ascending.
///
/// Empty ranges (`end <= start`) yield nothing.
pub fn par_for_indices(
    start: usize,
    end: usize,
    worker: usize,
    concurrency: usize,
) -> impl Iterator<Item = usize> {
    check_worker(worker, concurrency);
    let len = end.saturating_sub(start);
    (worker..len).step_by(concurrency).map(move |p| start + p)
}

/// Round-robin `(i, j)` pairs of the nested loop
/// `i in [outer_start, outer_end) x j in [inner_start, inner_end)` owned by
/// `worker`, in row-major order.
///
/// The nested loop is flattened row-major; worker `w` owns flattened
/// positions `w, w + concurrency, w + 2*concurrency, ...`.
pub fn par_nested_for_indices(
    outer_start: usize,
    outer_end: usize,
    inner_start: usize,
    inner_end: usize,
    worker: usize,
    concurrency: usize,
) -> impl Iterator<Item = (usize, usize)> {
    check_worker(worker, concurrency);
    let inner_len = inner_end.saturating_sub(inner_start);
    let len = outer_end.saturating_sub(outer_start).saturating_mul(inner_len);
    (worker..len)
        .step_by(concurrency)
        .map(move |p| (outer_start + p / inner_len, inner_start + p % inner_len))
}

/// Contiguous split of `total` items over `workers` workers: the chunk of
/// worker `worker` as `(offset, length)`.
///
/// Every worker gets `total / workers` items; the first `total % workers`
/// workers get one extra.
pub fn contiguous_range(total: usize, workers: usize, worker: usize) -> (usize, usize) {
    check_worker(worker, workers);
    let base = total / workers;
    let extra = total % workers;
    let length = base + usize::from(worker < extra);
    let offset = worker * base + worker.min(extra);
    (offset, length)
}

/// Contiguous indices of `[start, end)` owned by `worker`, ascending.
pub fn contiguous_indices(
    start: usize,
    end: usize,
    worker: usize,
    concurrency: usize,
) -> impl Iterator<Item = usize> {
    let len = end.saturating_sub(start);
    let (offset, length) = contiguous_range(len, concurrency, worker);
    (start + offset..start + offset + length).step_by(1)
}

/// Contiguous `(i, j)` pairs of a nested loop: flatten row-major, take the
/// worker's contiguous slice of the flattening.
pub fn contiguous_nested_indices(
    outer_start: usize,
    outer_end: usize,
    inner_start: usize,
    inner_end: usize,
    worker: usize,
    concurrency: usize,
) -> impl Iterator<Item = (usize, usize)> {
    let inner_len = inner_end.saturating_sub(inner_start);
    let len = outer_end.saturating_sub(outer_start).saturating_mul(inner_len);
    let (offset, length) = contiguous_range(len, concurrency, worker);
    (offset..offset + length)
        .map(move |p| (outer_start + p / inner_len, inner_start + p % inner_len))
}

/// Run `work` over every index of `[start, end)` assigned to `worker`,
/// ascending, on the calling thread.
pub fn par_for(
    strategy: Strategy,
    start: usize,
    end: usize,
    worker: usize,
    concurrency: usize,
    mut work: impl FnMut(usize),
) {
    match strategy {
        Strategy::RoundRobin => par_for_indices(start, end, worker, concurrency).for_each(&mut work),
        Strategy::Contiguous => {
            contiguous_indices(start, end, worker, concurrency).for_each(&mut work)
        }
    }
}

/// Run `work` over every `(i, j)` pair assigned to `worker`, row-major,
/// on the calling thread.
#[allow(clippy::too_many_arguments)]
pub fn par_nested_for(
    strategy: Strategy,
    outer_start: usize,
    outer_end: usize,
    inner_start: usize,
    inner_end: usize,
    worker: usize,
    concurrency: usize,
    mut work: impl FnMut(usize, usize),
) {
    match strategy {
        Strategy::RoundRobin => {
            par_nested_for_indices(outer_start, outer_end, inner_start, inner_end, worker, concurrency)
                .for_each(|(i, j)| work(i, j));
        }
        Strategy::Contiguous => {
            contiguous_nested_indices(outer_start, outer_end, inner_start, inner_end, worker, concurrency)
                .for_each(|(i, j)| work(i, j));
        }
    }
}
