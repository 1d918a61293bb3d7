//! Dynamic task pool: a single shared queue drained by a fixed set of
//! worker threads.
//!
//! This is the task-per-item comparison baseline. Every submitted task is a
//! separate heap job going through the shared queue, so the dispatch cost per
//! task is real and measurable; [`TaskPool::dispatched`] exposes the count.
//! `wait_idle` is the phase barrier: it returns once every submitted task has
//! finished.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;

type Job = Box<dyn FnOnce() + Send + 'static>;

struct PoolShared {
    queue: Mutex<VecDeque<Job>>,
    work_ready: Condvar,
    outstanding: Mutex<usize>,
    idle: Condvar,
    shutdown: Mutex<bool>,
    dispatched: AtomicUsize,
}

/// Fixed-size dynamic pool with a shared FIFO queue.
pub struct TaskPool {
    shared: Arc<PoolShared>,
    workers: Vec<JoinHandle<()>>,
}

impl TaskPool {
    pub fn new(threads: usize) -> Self {
        assert!(threads >= 1, "need at least one worker");
        let shared = Arc::new(PoolShared {
            queue: Mutex::new(VecDeque::new()),
            work_ready: Condvar::new(),
            outstanding: Mutex::new(0),
            idle: Condvar::new(),
            shutdown: Mutex::new(false),
            dispatched: AtomicUsize::new(0),
        });
        let workers = (0..threads)
            .map(|w| {
                let shared = shared.clone();
                std::thread::Builder::new()
                    .name(format!("pool-{w}"))
                    .spawn(move || worker_loop(&shared))
                    .expect("spawn pool worker")
            })
            .collect();
        Self { shared, workers }
    }

    /// Enqueue one task. Workers may start it before this call returns.
    pub fn submit(&self, job: impl FnOnce() + Send + 'static) {
        self.shared.dispatched.fetch_add(1, Ordering::Relaxed);
        {
            let mut pending = self.shared.outstanding.lock().expect("pool counters");
            *pending += 1;
        }
        {
            let mut queue = self.shared.queue.lock().expect("pool queue");
            queue.push_back(Box::new(job));
        }
        self.shared.work_ready.notify_one();
    }

    /// Block until every submitted task has completed.
    pub fn wait_idle(&self) {
        let mut pending = self.shared.outstanding.lock().expect("pool counters");
        while *pending > 0 {
            pending = self.shared.idle.wait(pending).expect("pool counters");
        }
    }

    /// Number of tasks submitted over the pool's lifetime.
    pub fn dispatched(&self) -> usize {
        self.shared.dispatched.load(Ordering::Relaxed)
    }
}

impl Drop for TaskPool {
    fn drop(&mut self) {
        *self.shared.shutdown.lock().expect("pool queue") = true;
        self.shared.work_ready.notify_all();
        for handle in self.workers.drain(..) {
            let _ = handle.join();
        }
    }
}

fn worker_loop(shared: &PoolShared) {
    loop {
        let job = {
            let mut queue = shared.queue.lock().expect("pool queue");
            loop {
                if let Some(job) = queue.pop_front() {
                    break job;
                }
                if *shared.shutdown.lock().expect("pool queue") {
                    return;
                }
                queue = shared.work_ready.wait(queue).expect("pool queue");
            }
        };
        job();
        let mut pending = shared.outstanding.lock().expect("pool counters");
        *pending -= 1;
        if *pending == 0 {
            shared.idle.notify_all();
        }
    }
}
