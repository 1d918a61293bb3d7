//! Event-driven task runtime: a fixed pool of worker tiles, each
//! single-threadedly draining its own FIFO mailbox, cooperatively evaluating
//! task expression trees with parallel-by-default argument dispatch.
//!
//! For any expression whose kernels are pure functions of their arguments,
//! [`Runtime::evaluate`] returns the value sequential recursive evaluation
//! would produce, for every tile count and any scheduling interleaving.
//! After it returns, every mailbox is empty and no request is outstanding.

mod engine;
mod expr;

pub use expr::{
    literal, parallel_group, seq, spawn_n, EvalMode, ExprError, KernelCtx, KernelFailure,
    KernelId, KernelRegistry, TaskExpr, TileId, Value,
};

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use engine::{Packet, ReplyTo, Shared, TileCounters, Worker};

/// Evaluation failure, attributed to the failing kernel.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("kernel `{kernel}` failed: {message}")]
    Kernel { kernel: String, message: String },
    #[error("kernel `{kernel}` panicked")]
    KernelPanic { kernel: String },
    #[error("unknown kernel id {id}")]
    UnknownKernel { id: usize },
}

/// Runtime configuration.
#[derive(Clone, Copy, Debug)]
pub struct RuntimeConfig {
    /// Worker tile count; defaults to the number of available cores.
    pub num_threads: usize,
    /// Concurrency level: how many worker tasks parallel constructs spawn.
    /// Defaults to `num_threads`.
    pub concurrency_level: usize,
    /// Dynamic re-hosting of hint-less tasks onto the least-loaded tile.
    pub steal_enabled: bool,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        let threads = thread::available_parallelism().map_or(1, |n| n.get());
        Self {
            num_threads: threads,
            concurrency_level: threads,
            steal_enabled: false,
        }
    }
}

impl RuntimeConfig {
    /// Config with `n` tiles and a matching concurrency level.
    pub fn with_threads(n: usize) -> Self {
        Self {
            num_threads: n,
            concurrency_level: n,
            steal_enabled: false,
        }
    }
}

/// Static round-robin placement: task `task_index` initially runs on tile
/// `task_index % num_tiles`.
pub fn default_placement(task_index: usize, num_tiles: usize) -> TileId {
    assert!(num_tiles >= 1);
    TileId(task_index % num_tiles)
}

/// An expression tree together with the registry its kernel ids refer to.
pub struct Program {
    pub registry: Arc<KernelRegistry>,
    pub root: TaskExpr,
}

impl Program {
    pub fn new(registry: Arc<KernelRegistry>, root: TaskExpr) -> Self {
        Self { registry, root }
    }
}

/// Per-tile execution statistics.
#[derive(Clone, Debug, Default)]
pub struct TileStats {
    pub packets: u64,
    pub requests: u64,
    pub responses: u64,
    pub kernel_invocations: u64,
    pub busy: Duration,
    pub max_nesting: u64,
}

/// Snapshot of runtime statistics.
#[derive(Clone, Debug, Default)]
pub struct RuntimeStats {
    pub per_tile: Vec<TileStats>,
}

impl RuntimeStats {
    pub fn total_packets(&self) -> u64 {
        self.per_tile.iter().map(|t| t.packets).sum()
    }

    pub fn total_kernel_invocations(&self) -> u64 {
        self.per_tile.iter().map(|t| t.kernel_invocations).sum()
    }

    pub fn total_busy(&self) -> Duration {
        self.per_tile.iter().map(|t| t.busy).sum()
    }
}

/// Mailbox and request bookkeeping at one instant.
#[derive(Clone, Debug)]
pub struct Quiescence {
    pub outstanding_requests: usize,
    pub mailbox_depths: Vec<usize>,
}

impl Quiescence {
    pub fn is_quiescent(&self) -> bool {
        self.outstanding_requests == 0 && self.mailbox_depths.iter().all(|&d| d == 0)
    }
}

/// A running pool of worker tiles.
///
/// `evaluate` takes `&mut self`: one controlling context at a time.
pub struct Runtime {
    shared: Arc<Shared>,
    handles: Vec<JoinHandle<()>>,
    config: RuntimeConfig,
}

impl Runtime {
    pub fn new(config: RuntimeConfig) -> Self {
        assert!(config.num_threads >= 1, "need at least one tile");
        assert!(config.concurrency_level >= 1, "concurrency level must be at least 1");
        let tiles = config.num_threads;

        let mut senders = Vec::with_capacity(tiles);
        let mut receivers = Vec::with_capacity(tiles);
        for _ in 0..tiles {
            let (tx, rx) = mpsc::channel();
            senders.push(tx);
            receivers.push(rx);
        }
        let shared = Arc::new(Shared {
            senders,
            depths: (0..tiles).map(|_| AtomicUsize::new(0)).collect(),
            outstanding: AtomicUsize::new(0),
            root: Mutex::new(None),
            counters: (0..tiles).map(|_| TileCounters::default()).collect(),
            steal_enabled: config.steal_enabled,
        });

        let handles = receivers
            .into_iter()
            .enumerate()
            .map(|(tile, rx)| {
                let shared = shared.clone();
                thread::Builder::new()
                    .name(format!("tile-{tile}"))
                    .spawn(move || Worker::new(tile, shared, rx).run())
                    .expect("spawn worker tile")
            })
            .collect();

        Self {
            shared,
            handles,
            config,
        }
    }

    pub fn config(&self) -> &RuntimeConfig {
        &self.config
    }

    pub fn num_tiles(&self) -> usize {
        self.config.num_threads
    }

    /// Evaluate an expression tree to its value.
    ///
    /// Kernel failures and panics surface as [`EvalError`] naming the kernel.
    pub fn evaluate(&mut self, program: &Program) -> Result<Value, EvalError> {
        let (tx, rx) = mpsc::channel();
        *self.shared.root.lock().expect("root channel lock") = Some(tx);

        let dest = self.shared.route(&program.root, 0);
        self.shared.outstanding.fetch_add(1, Ordering::Relaxed);
        self.shared.send(
            dest,
            Packet::Request {
                expr: program.root.clone(),
                registry: program.registry.clone(),
                reply: ReplyTo::Root,
            },
        );

        let result = rx.recv().expect("worker tiles deliver the root result");
        self.shared.outstanding.fetch_sub(1, Ordering::Relaxed);
        *self.shared.root.lock().expect("root channel lock") = None;
        result
    }

    pub fn stats(&self) -> RuntimeStats {
        RuntimeStats {
            per_tile: self
                .shared
                .counters
                .iter()
                .map(|c| TileStats {
                    packets: c.packets.load(Ordering::Relaxed),
                    requests: c.requests.load(Ordering::Relaxed),
                    responses: c.responses.load(Ordering::Relaxed),
                    kernel_invocations: c.kernel_invocations.load(Ordering::Relaxed),
                    busy: Duration::from_nanos(c.busy_nanos.load(Ordering::Relaxed)),
                    max_nesting: c.max_nesting.load(Ordering::Relaxed),
                })
                .collect(),
        }
    }

    pub fn quiescence(&self) -> Quiescence {
        Quiescence {
            outstanding_requests: self.shared.outstanding.load(Ordering::Relaxed),
            mailbox_depths: self
                .shared
                .depths
                .iter()
                .map(|d| d.load(Ordering::Relaxed))
                .collect(),
        }
    }
}

impl Drop for Runtime {
    fn drop(&mut self) {
        for tile in 0..self.shared.num_tiles() {
            self.shared.send(tile, Packet::Shutdown);
        }
        for handle in self.handles.drain(..) {
            let _ = handle.join();
        }
    }
}
