//! The per-tile reduction engine.
//!
//! Each tile is one OS thread draining one many-producer/single-consumer
//! FIFO mailbox. Handling a packet never blocks: a call whose arguments are
//! still being computed lives as a heap frame, so a tile waiting on child
//! results keeps draining its mailbox (child work may well be addressed to
//! the waiting tile itself). Kernels run to completion on their host tile.
//! Deadlock is impossible by construction: the expression is a finite tree
//! and no handler ever waits.

use std::any::Any;
use std::collections::HashMap;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc::{Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use super::expr::{
    EvalMode, KernelCtx, KernelId, KernelKind, KernelRegistry, Node, TaskExpr, TileId, Value,
};
use super::EvalError;

pub(crate) enum Packet {
    Request {
        expr: TaskExpr,
        registry: Arc<KernelRegistry>,
        reply: ReplyTo,
    },
    Response {
        frame: usize,
        slot: usize,
        value: Result<Value, EvalError>,
    },
    Shutdown,
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum ReplyTo {
    Frame {
        tile: usize,
        frame: usize,
        slot: usize,
    },
    Root,
}

#[derive(Default)]
pub(crate) struct TileCounters {
    pub packets: AtomicU64,
    pub requests: AtomicU64,
    pub responses: AtomicU64,
    pub kernel_invocations: AtomicU64,
    pub busy_nanos: AtomicU64,
    pub max_nesting: AtomicU64,
}

pub(crate) struct Shared {
    pub senders: Vec<Sender<Packet>>,
    pub depths: Vec<AtomicUsize>,
    pub outstanding: AtomicUsize,
    pub root: Mutex<Option<Sender<Result<Value, EvalError>>>>,
    pub counters: Vec<TileCounters>,
    pub steal_enabled: bool,
}

impl Shared {
    pub fn send(&self, dest: usize, packet: Packet) {
        self.depths[dest].fetch_add(1, Ordering::Relaxed);
        self.senders[dest]
            .send(packet)
            .expect("worker tiles outlive in-flight packets");
    }

    pub fn num_tiles(&self) -> usize {
        self.senders.len()
    }

    /// Tile with the currently shortest mailbox (dynamic re-hosting).
    fn least_loaded(&self) -> usize {
        let mut best = 0;
        let mut best_depth = usize::MAX;
        for (t, d) in self.depths.iter().enumerate() {
            let depth = d.load(Ordering::Relaxed);
            if depth < best_depth {
                best = t;
                best_depth = depth;
            }
        }
        best
    }

    /// Destination of a dispatched task: its placement hint if present,
    /// otherwise the static round-robin tile for its index within the
    /// creating construct (or the least-loaded tile when stealing is on).
    pub fn route(&self, expr: &TaskExpr, task_index: usize) -> usize {
        if let Some(TileId(t)) = expr.placement_hint() {
            return t % self.num_tiles();
        }
        if self.steal_enabled {
            return self.least_loaded();
        }
        task_index % self.num_tiles()
    }
}

struct Frame {
    kernel: KernelId,
    mode: EvalMode,
    reply: ReplyTo,
    registry: Arc<KernelRegistry>,
    args: Vec<TaskExpr>,
    slots: Vec<Option<Result<Value, EvalError>>>,
    remaining: usize,
    cursor: usize,
}

pub(crate) struct Worker {
    tile: usize,
    shared: Arc<Shared>,
    rx: Receiver<Packet>,
    frames: Vec<Option<Frame>>,
    free: Vec<usize>,
    kernel_state: HashMap<usize, Option<Box<dyn Any + Send>>>,
    nesting: u64,
}

impl Worker {
    pub fn new(tile: usize, shared: Arc<Shared>, rx: Receiver<Packet>) -> Self {
        Self {
            tile,
            shared,
            rx,
            frames: Vec::new(),
            free: Vec::new(),
            kernel_state: HashMap::new(),
            nesting: 0,
        }
    }

    pub fn run(mut self) {
        while let Ok(packet) = self.rx.recv() {
            self.shared.depths[self.tile].fetch_sub(1, Ordering::Relaxed);
            let counters = &self.shared.counters[self.tile];
            counters.packets.fetch_add(1, Ordering::Relaxed);
            let started = Instant::now();
            match packet {
                Packet::Shutdown => break,
                Packet::Request {
                    expr,
                    registry,
                    reply,
                } => {
                    counters.requests.fetch_add(1, Ordering::Relaxed);
                    self.handle_request(expr, registry, reply);
                }
                Packet::Response { frame, slot, value } => {
                    counters.responses.fetch_add(1, Ordering::Relaxed);
                    self.handle_response(frame, slot, value);
                }
            }
            self.shared.counters[self.tile]
                .busy_nanos
                .fetch_add(started.elapsed().as_nanos() as u64, Ordering::Relaxed);
        }
    }

    // Before any result is delivered, every reference this tile holds into
    // the program (expression nodes, registry, kernel closures) is dropped:
    // the evaluator reclaims program-owned shared data via Arc unwrapping as
    // soon as the root result arrives.
    fn handle_request(&mut self, expr: TaskExpr, registry: Arc<KernelRegistry>, reply: ReplyTo) {
        match &*expr.node {
            Node::Literal(v) => {
                let result = Ok(v.clone());
                drop(expr);
                drop(registry);
                self.deliver(reply, result);
            }
            Node::Call {
                kernel,
                args,
                mode,
                hint: _,
            } => {
                if args.is_empty() {
                    let result = self.invoke(&registry, *kernel, &[]);
                    drop(expr);
                    drop(registry);
                    self.deliver(reply, result);
                    return;
                }
                let frame = Frame {
                    kernel: *kernel,
                    mode: *mode,
                    reply,
                    registry,
                    args: args.clone(),
                    slots: (0..args.len()).map(|_| None).collect(),
                    remaining: args.len(),
                    cursor: 0,
                };
                let id = self.alloc_frame(frame);
                match mode {
                    EvalMode::Parallel => {
                        // literals are filled in place; only calls travel
                        let mut completed = false;
                        for k in 0..args.len() {
                            let child = self.frames[id].as_ref().expect("live frame").args[k].clone();
                            if let Node::Literal(v) = &*child.node {
                                completed = self.fill_slot(id, k, Ok(v.clone()));
                            } else {
                                self.dispatch_child(id, k, child);
                            }
                        }
                        if completed {
                            self.complete(id);
                        }
                    }
                    EvalMode::Sequential => {
                        if self.step_sequential(id) {
                            self.complete(id);
                        }
                    }
                }
            }
        }
    }

    /// Advance a sequential frame: fill literal children, dispatch the next
    /// call child. Returns true once every slot is filled.
    fn step_sequential(&mut self, id: usize) -> bool {
        loop {
            let frame = self.frames[id].as_mut().expect("live frame");
            if frame.cursor == frame.args.len() {
                return frame.remaining == 0;
            }
            let k = frame.cursor;
            frame.cursor += 1;
            let child = frame.args[k].clone();
            if let Node::Literal(v) = &*child.node {
                let v = v.clone();
                if self.fill_slot(id, k, Ok(v)) {
                    return true;
                }
            } else {
                self.dispatch_child(id, k, child);
                return false;
            }
        }
    }

    fn dispatch_child(&mut self, frame_id: usize, slot: usize, child: TaskExpr) {
        let registry = self.frames[frame_id]
            .as_ref()
            .expect("live frame")
            .registry
            .clone();
        let dest = self.shared.route(&child, slot);
        self.shared.outstanding.fetch_add(1, Ordering::Relaxed);
        self.shared.send(
            dest,
            Packet::Request {
                expr: child,
                registry,
                reply: ReplyTo::Frame {
                    tile: self.tile,
                    frame: frame_id,
                    slot,
                },
            },
        );
    }

    /// Store a child result; true when the frame has no unfilled slots left.
    fn fill_slot(&mut self, id: usize, slot: usize, value: Result<Value, EvalError>) -> bool {
        let frame = self.frames[id].as_mut().expect("live frame");
        debug_assert!(frame.slots[slot].is_none(), "slot filled twice");
        frame.slots[slot] = Some(value);
        frame.remaining -= 1;
        frame.remaining == 0
    }

    fn handle_response(&mut self, frame_id: usize, slot: usize, value: Result<Value, EvalError>) {
        self.shared.outstanding.fetch_sub(1, Ordering::Relaxed);
        let errored = value.is_err();
        let full = self.fill_slot(frame_id, slot, value);
        let mode = self.frames[frame_id].as_ref().expect("live frame").mode;
        match mode {
            EvalMode::Parallel => {
                if full {
                    self.complete(frame_id);
                }
            }
            EvalMode::Sequential => {
                // a failed child aborts the chain; nothing else is in flight
                if errored || self.step_sequential(frame_id) {
                    self.complete(frame_id);
                }
            }
        }
    }

    fn complete(&mut self, frame_id: usize) {
        let Frame {
            kernel,
            reply,
            registry,
            args,
            slots,
            ..
        } = self.frames[frame_id].take().expect("live frame");
        self.free.push(frame_id);
        drop(args);

        // first error (lowest argument position) wins, deterministically
        let mut failure = None;
        let mut values = Vec::with_capacity(slots.len());
        for slot in slots {
            match slot {
                Some(Ok(v)) => values.push(v),
                Some(Err(e)) => {
                    failure = Some(e);
                    break;
                }
                // only reachable past the error of an aborted sequential chain
                None => break,
            }
        }

        let result = match failure {
            Some(e) => Err(e),
            None => match registry.entry(kernel).map(|e| &e.kind) {
                Some(KernelKind::SeqCombine) => Ok(values.pop().expect("seq has children")),
                Some(KernelKind::Gather) => Ok(Value::List(values)),
                Some(KernelKind::User(_)) => self.invoke(&registry, kernel, &values),
                None => Err(EvalError::UnknownKernel { id: kernel.0 }),
            },
        };
        drop(registry);
        self.deliver(reply, result);
    }

    fn invoke(
        &mut self,
        registry: &Arc<KernelRegistry>,
        kernel: KernelId,
        args: &[Value],
    ) -> Result<Value, EvalError> {
        let entry = match registry.entry(kernel) {
            Some(e) => e,
            None => return Err(EvalError::UnknownKernel { id: kernel.0 }),
        };
        let f = match &entry.kind {
            KernelKind::User(f) => f.clone(),
            // built-ins with no arguments never get here via normal builders
            KernelKind::SeqCombine => return Err(EvalError::UnknownKernel { id: kernel.0 }),
            KernelKind::Gather => return Ok(Value::List(Vec::new())),
        };

        let counters = &self.shared.counters[self.tile];
        counters.kernel_invocations.fetch_add(1, Ordering::Relaxed);
        self.nesting += 1;
        debug_assert_eq!(self.nesting, 1, "kernels run to completion");
        counters.max_nesting.fetch_max(self.nesting, Ordering::Relaxed);

        let state = self.kernel_state.entry(kernel.0).or_insert(None);
        let mut ctx = KernelCtx {
            tile: TileId(self.tile),
            state,
        };
        let outcome = panic::catch_unwind(AssertUnwindSafe(|| f(&mut ctx, args)));
        self.nesting -= 1;

        match outcome {
            Ok(Ok(v)) => Ok(v),
            Ok(Err(failure)) => Err(EvalError::Kernel {
                kernel: entry.name.clone(),
                message: failure.message,
            }),
            Err(_) => Err(EvalError::KernelPanic {
                kernel: entry.name.clone(),
            }),
        }
    }

    fn deliver(&mut self, reply: ReplyTo, result: Result<Value, EvalError>) {
        match reply {
            ReplyTo::Root => {
                let guard = self.shared.root.lock().expect("root channel lock");
                guard
                    .as_ref()
                    .expect("an evaluation is in progress")
                    .send(result)
                    .expect("evaluator waits for the root result");
            }
            ReplyTo::Frame { tile, frame, slot } => {
                self.shared.send(
                    tile,
                    Packet::Response {
                        frame,
                        slot,
                        value: result,
                    },
                );
            }
        }
    }

    fn alloc_frame(&mut self, frame: Frame) -> usize {
        if let Some(id) = self.free.pop() {
            self.frames[id] = Some(frame);
            id
        } else {
            self.frames.push(Some(frame));
            self.frames.len() - 1
        }
    }
}
