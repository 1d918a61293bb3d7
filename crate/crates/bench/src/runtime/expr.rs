//! Task expressions and the kernel registry.
//!
//! A [`TaskExpr`] is a finite tree: leaves are [`Value`] literals, interior
//! nodes are calls to registered kernels whose arguments evaluate either in
//! parallel (the default) or strictly left-to-right. Two built-in combinators
//! are always present: [`seq`] (evaluate children in order, yield the last
//! value) and [`spawn_n`]/[`parallel_group`] (evaluate children concurrently,
//! gather their values into a list).

use std::any::Any;
use std::fmt;
use std::sync::Arc;

/// Index of a worker tile, in `[0, num_tiles)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TileId(pub usize);

/// Handle to a registered kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct KernelId(pub(crate) usize);

/// Argument evaluation discipline of a call node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    /// Arguments may be dispatched simultaneously.
    Parallel,
    /// Each argument completes before the next is dispatched.
    Sequential,
}

/// Value flowing between tiles. Large data is shared by reference
/// ([`Value::Handle`]); the runtime never inspects it.
#[derive(Clone, Debug)]
pub enum Value {
    Unit,
    Int(i64),
    F32(f32),
    List(Vec<Value>),
    Handle(Arc<dyn Any + Send + Sync>),
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(v) => Some(v),
            _ => None,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Unit, Value::Unit) => true,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::F32(a), Value::F32(b)) => a.to_bits() == b.to_bits(),
            (Value::List(a), Value::List(b)) => a == b,
            (Value::Handle(a), Value::Handle(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<f32> for Value {
    fn from(v: f32) -> Self {
        Value::F32(v)
    }
}

impl From<()> for Value {
    fn from(_: ()) -> Self {
        Value::Unit
    }
}

/// One node of a task expression tree.
#[derive(Clone, Debug)]
pub struct TaskExpr {
    pub(crate) node: Arc<Node>,
}

#[derive(Debug)]
pub(crate) enum Node {
    Literal(Value),
    Call {
        kernel: KernelId,
        args: Vec<TaskExpr>,
        mode: EvalMode,
        hint: Option<TileId>,
    },
}

impl TaskExpr {
    pub(crate) fn from_node(node: Node) -> Self {
        Self {
            node: Arc::new(node),
        }
    }

    /// Placement hint carried by this node, if any.
    pub fn placement_hint(&self) -> Option<TileId> {
        match &*self.node {
            Node::Call { hint, .. } => *hint,
            Node::Literal(_) => None,
        }
    }
}

/// Wrap a value as a literal leaf.
pub fn literal(v: impl Into<Value>) -> TaskExpr {
    TaskExpr::from_node(Node::Literal(v.into()))
}

/// Evaluate children strictly in list order; the value is the last child's.
pub fn seq(children: Vec<TaskExpr>) -> Result<TaskExpr, ExprError> {
    if children.is_empty() {
        return Err(ExprError::EmptySeq);
    }
    Ok(TaskExpr::from_node(Node::Call {
        kernel: KernelRegistry::SEQ,
        args: children,
        mode: EvalMode::Sequential,
        hint: None,
    }))
}

/// Evaluate children concurrently; the value gathers the children's values
/// in order.
pub fn parallel_group(children: Vec<TaskExpr>) -> Result<TaskExpr, ExprError> {
    if children.is_empty() {
        return Err(ExprError::EmptySpawn);
    }
    Ok(TaskExpr::from_node(Node::Call {
        kernel: KernelRegistry::GATHER,
        args: children,
        mode: EvalMode::Parallel,
        hint: None,
    }))
}

/// Unrolled parallel group: `n` children, child `k` built by `factory(k)`.
pub fn spawn_n(n: usize, mut factory: impl FnMut(usize) -> TaskExpr) -> Result<TaskExpr, ExprError> {
    if n == 0 {
        return Err(ExprError::EmptySpawn);
    }
    parallel_group((0..n).map(&mut factory).collect())
}

/// Expression construction error.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExprError {
    #[error("kernel `{kernel}` expects {expected} arguments, got {got}")]
    ArityMismatch {
        kernel: String,
        expected: usize,
        got: usize,
    },
    #[error("sequential block needs at least one expression")]
    EmptySeq,
    #[error("parallel group needs at least one task")]
    EmptySpawn,
}

/// Failure reported by a kernel body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelFailure {
    pub message: String,
}

impl KernelFailure {
    pub fn msg(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
        }
    }
}

/// Per-invocation context handed to kernels: the executing tile and the
/// kernel's per-tile local state slot.
pub struct KernelCtx<'a> {
    pub tile: TileId,
    pub(crate) state: &'a mut Option<Box<dyn Any + Send>>,
}

impl KernelCtx<'_> {
    /// Typed access to this kernel's state on this tile, initializing it on
    /// first use.
    pub fn state_or_init<T: Any + Send>(&mut self, init: impl FnOnce() -> T) -> &mut T {
        if self.state.as_ref().is_none_or(|s| !s.is::<T>()) {
            *self.state = Some(Box::new(init()));
        }
        self.state
            .as_mut()
            .expect("state just initialized")
            .downcast_mut::<T>()
            .expect("state type just checked")
    }
}

pub(crate) type KernelFn =
    Arc<dyn Fn(&mut KernelCtx<'_>, &[Value]) -> Result<Value, KernelFailure> + Send + Sync>;

pub(crate) enum KernelKind {
    /// Built-in: value of the last child.
    SeqCombine,
    /// Built-in: children's values gathered into a list.
    Gather,
    User(KernelFn),
}

pub(crate) struct KernelEntry {
    pub name: String,
    pub arity: Option<usize>,
    pub kind: KernelKind,
}

/// Registered kernels. Kernel ids are indices into one registry; expressions
/// built against a registry must be evaluated with that registry.
pub struct KernelRegistry {
    entries: Vec<KernelEntry>,
}

impl fmt::Debug for KernelRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelRegistry")
            .field(
                "kernels",
                &self.entries.iter().map(|e| &e.name).collect::<Vec<_>>(),
            )
            .finish()
    }
}

impl Default for KernelRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl KernelRegistry {
    pub(crate) const SEQ: KernelId = KernelId(0);
    pub(crate) const GATHER: KernelId = KernelId(1);

    pub fn new() -> Self {
        Self {
            entries: vec![
                KernelEntry {
                    name: "seq".into(),
                    arity: None,
                    kind: KernelKind::SeqCombine,
                },
                KernelEntry {
                    name: "gather".into(),
                    arity: None,
                    kind: KernelKind::Gather,
                },
            ],
        }
    }

    /// Register a kernel with a fixed arity.
    pub fn register(
        &mut self,
        name: impl Into<String>,
        arity: usize,
        f: impl Fn(&mut KernelCtx<'_>, &[Value]) -> Result<Value, KernelFailure> + Send + Sync + 'static,
    ) -> KernelId {
        self.entries.push(KernelEntry {
            name: name.into(),
            arity: Some(arity),
            kind: KernelKind::User(Arc::new(f)),
        });
        KernelId(self.entries.len() - 1)
    }

    /// Register a kernel accepting any number of arguments.
    pub fn register_variadic(
        &mut self,
        name: impl Into<String>,
        f: impl Fn(&mut KernelCtx<'_>, &[Value]) -> Result<Value, KernelFailure> + Send + Sync + 'static,
    ) -> KernelId {
        self.entries.push(KernelEntry {
            name: name.into(),
            arity: None,
            kind: KernelKind::User(Arc::new(f)),
        });
        KernelId(self.entries.len() - 1)
    }

    pub(crate) fn entry(&self, id: KernelId) -> Option<&KernelEntry> {
        self.entries.get(id.0)
    }

    pub fn kernel_name(&self, id: KernelId) -> Option<&str> {
        self.entries.get(id.0).map(|e| e.name.as_str())
    }

    /// Build a call node, checking arity.
    pub fn call(
        &self,
        kernel: KernelId,
        args: Vec<TaskExpr>,
        mode: EvalMode,
    ) -> Result<TaskExpr, ExprError> {
        self.call_hinted(kernel, args, mode, None)
    }

    /// Build a call node with an explicit placement hint.
    pub fn call_hinted(
        &self,
        kernel: KernelId,
        args: Vec<TaskExpr>,
        mode: EvalMode,
        hint: Option<TileId>,
    ) -> Result<TaskExpr, ExprError> {
        let entry = self.entries.get(kernel.0).expect("kernel id from this registry");
        if let Some(expected) = entry.arity {
            if args.len() != expected {
                return Err(ExprError::ArityMismatch {
                    kernel: entry.name.clone(),
                    expected,
                    got: args.len(),
                });
            }
        }
        if matches!(entry.kind, KernelKind::SeqCombine) && args.is_empty() {
            return Err(ExprError::EmptySeq);
        }
        Ok(TaskExpr::from_node(Node::Call {
            kernel,
            args,
            mode,
            hint,
        }))
    }
}
