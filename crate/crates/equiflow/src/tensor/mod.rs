//! Minimal dense-tensor engine with reverse-mode gradient accumulation.
//!
//! Tensors are immutable row-major buffers tied into a dynamically built
//! graph; `backward` on a scalar loss walks the graph once in reverse
//! topological order. Heavy kernels (matmuls, pair products, softmax rows)
//! parallelize over independent output slices, so results are bitwise
//! identical for any worker count. Precision is selectable through the
//! [`Real`] trait (f32 for training, f64 for property tests).

mod backward;
mod gradcheck;
pub mod ops;

pub use gradcheck::{grad_check, GradReport};

use std::cell::Cell;
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {a:?} vs {b:?}")]
    ShapeMismatch { op: &'static str, a: Vec<usize>, b: Vec<usize> },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("backward needs a scalar loss, got {numel} elements")]
    NotScalarLoss { numel: usize },
}

pub type TensorResult<T> = Result<Tensor<T>, TensorError>;

/// Floating-point scalar usable by the engine.
pub trait Real:
    num_traits::Float
    + num_traits::NumAssign
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Send
    + Sync
    + 'static
{
    const PRECISION: &'static str;
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
    fn erf(self) -> Self;
}

impl Real for f64 {
    const PRECISION: &'static str = "double";
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
    fn erf(self) -> Self {
        statrs::function::erf::erf(self)
    }
}

impl Real for f32 {
    const PRECISION: &'static str = "single";
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
    fn erf(self) -> Self {
        statrs::function::erf::erf(self as f64) as f32
    }
}

/// Sparse bilinear pair table: out[k] += sign * a[i] * b[j] on the last axis.
#[derive(Debug)]
pub struct PairTable {
    pub lane: usize,
    pub entries: Vec<(u8, u8, u8, i8)>,
}

pub(crate) enum Op<T: Real> {
    Leaf,
    Add(Tensor<T>, Tensor<T>),
    Sub(Tensor<T>, Tensor<T>),
    Mul(Tensor<T>, Tensor<T>),
    Div(Tensor<T>, Tensor<T>),
    AddScalar(Tensor<T>, T),
    MulScalar(Tensor<T>, T),
    Exp(Tensor<T>),
    Ln(Tensor<T>),
    Tanh(Tensor<T>),
    Gelu(Tensor<T>),
    Sqrt(Tensor<T>),
    Power(Tensor<T>, T),
    SignStopGrad(Tensor<T>),
    Sum(Tensor<T>),
    Mean(Tensor<T>),
    Max(Tensor<T>),
    SumAxis(Tensor<T>, usize),
    Softmax(Tensor<T>, usize),
    Gather(Tensor<T>, Arc<Vec<usize>>),
    ScatterAdd(Tensor<T>, Tensor<T>, Arc<Vec<usize>>),
    Concat(Vec<Tensor<T>>, usize),
    Slice(Tensor<T>, usize, usize, usize),
    Reshape(Tensor<T>),
    Permute(Tensor<T>, Vec<usize>),
    MatmulNN(Tensor<T>, Tensor<T>),
    MatmulNT(Tensor<T>, Tensor<T>),
    MatmulTN(Tensor<T>, Tensor<T>),
    BmmLeft(Tensor<T>, Tensor<T>),
    PairProduct(Tensor<T>, Tensor<T>, Arc<PairTable>),
    EquiBasis(Tensor<T>),
}

pub(crate) struct Node<T: Real> {
    pub id: u64,
    pub shape: Vec<usize>,
    pub data: Arc<Vec<T>>,
    pub op: Op<T>,
    pub requires_grad: bool,
}

/// Handle to an immutable tensor in the current graph.
pub struct Tensor<T: Real>(pub(crate) Rc<Node<T>>);

impl<T: Real> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor(Rc::clone(&self.0))
    }
}

impl<T: Real> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tensor(id={}, shape={:?}, grad={})", self.0.id, self.0.shape, self.0.requires_grad)
    }
}

thread_local! {
    static NEXT_ID: Cell<u64> = const { Cell::new(1) };
}

fn next_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<T: Real> Tensor<T> {
    pub(crate) fn make(shape: Vec<usize>, data: Vec<T>, op: Op<T>, requires_grad: bool) -> Self {
        debug_assert_eq!(numel(&shape), data.len());
        Tensor(Rc::new(Node { id: next_id(), shape, data: Arc::new(data), op, requires_grad }))
    }

    pub(crate) fn make_shared(
        shape: Vec<usize>,
        data: Arc<Vec<T>>,
        op: Op<T>,
        requires_grad: bool,
    ) -> Self {
        debug_assert_eq!(numel(&shape), data.len());
        Tensor(Rc::new(Node { id: next_id(), shape, data, op, requires_grad }))
    }

    /// Leaf tensor sharing an existing buffer (no copy).
    pub fn leaf_shared(shape: &[usize], data: Arc<Vec<T>>, requires_grad: bool) -> Self {
        assert_eq!(numel(shape), data.len());
        Tensor::make_shared(shape.to_vec(), data, Op::Leaf, requires_grad)
    }

    /// Leaf tensor; set `requires_grad` to collect a gradient for it.
    pub fn from_vec(shape: &[usize], data: Vec<T>, requires_grad: bool) -> Self {
        assert_eq!(
            numel(shape),
            data.len(),
            "from_vec: shape {:?} does not match data length {}",
            shape,
            data.len()
        );
        Tensor::make(shape.to_vec(), data, Op::Leaf, requires_grad)
    }

    pub fn scalar(v: T) -> Self {
        Tensor::from_vec(&[1], vec![v], false)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor::from_vec(shape, vec![T::zero(); numel(shape)], false)
    }

    pub fn full(shape: &[usize], v: T) -> Self {
        Tensor::from_vec(shape, vec![v; numel(shape)], false)
    }

    pub fn from_f64_slice(shape: &[usize], data: &[f64], requires_grad: bool) -> Self {
        Tensor::from_vec(shape, data.iter().map(|&v| T::from_f64(v)).collect(), requires_grad)
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.0.data
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.0.data.iter().map(|v| v.as_f64()).collect()
    }

    pub fn item(&self) -> T {
        debug_assert_eq!(self.numel(), 1);
        self.0.data[0]
    }
}

/// Gradients keyed by tensor id, produced by [`Tensor::backward`].
pub struct GradStore<T: Real> {
    grads: HashMap<u64, Vec<T>>,
}

impl<T: Real> GradStore<T> {
    pub fn grad(&self, t: &Tensor<T>) -> Option<&[T]> {
        self.grads.get(&t.id()).map(|v| v.as_slice())
    }

    /// Gradient of a leaf, zeros if it never entered the graph.
    pub fn grad_or_zero(&self, t: &Tensor<T>) -> Vec<T> {
        match self.grads.get(&t.id()) {
            Some(g) => g.clone(),
            None => vec![T::zero(); t.numel()],
        }
    }
}

impl<T: Real> Tensor<T> {
    /// Reverse-mode sweep from a scalar loss. Gradients accumulate for every
    /// tensor on a `requires_grad` path; leaves untouched by the graph simply
    /// stay absent (read them with [`GradStore::grad_or_zero`]).
    pub fn backward(&self) -> Result<GradStore<T>, TensorError> {
        if self.numel() != 1 {
            return Err(TensorError::NotScalarLoss { numel: self.numel() });
        }
        let order = topo_order(self);
        let mut grads: HashMap<u64, Vec<T>> = HashMap::new();
        grads.insert(self.id(), vec![T::one()]);
        for node in order.iter().rev() {
            let Some(gout) = grads.get(&node.id()).cloned() else { continue };
            backward::accumulate(node, &gout, &mut grads);
        }
        Ok(GradStore { grads })
    }
}

/// Post-order DFS over the requires_grad subgraph; each node appears once,
/// inputs before consumers.
fn topo_order<T: Real>(root: &Tensor<T>) -> Vec<Tensor<T>> {
    let mut order: Vec<Tensor<T>> = Vec::new();
    let mut state: HashMap<u64, bool> = HashMap::new(); // false = open, true = done
    let mut stack: Vec<(Tensor<T>, usize)> = Vec::new();
    if root.requires_grad() {
        stack.push((root.clone(), 0));
        state.insert(root.id(), false);
    }
    while let Some((node, child_idx)) = stack.pop() {
        let inputs = backward::inputs(&node);
        if child_idx < inputs.len() {
            stack.push((node.clone(), child_idx + 1));
            let child = inputs[child_idx].clone();
            if child.requires_grad() && !state.contains_key(&child.id()) {
                state.insert(child.id(), false);
                stack.push((child, 0));
            }
        } else {
            state.insert(node.id(), true);
            order.push(node);
        }
    }
    order
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// numpy-style broadcast of two shapes (suffix-aligned).
pub(crate) fn broadcast_shape(
    op: &'static str,
    a: &[usize],
    b: &[usize],
) -> Result<Vec<usize>, TensorError> {
    let n = a.len().max(b.len());
    let mut out = vec![0; n];
    for i in 0..n {
        let da = if i < n - a.len() { 1 } else { a[i - (n - a.len())] };
        let db = if i < n - b.len() { 1 } else { b[i - (n - b.len())] };
        if da == db || da == 1 || db == 1 {
            out[i] = da.max(db);
        } else {
            return Err(TensorError::ShapeMismatch { op, a: a.to_vec(), b: b.to_vec() });
        }
    }
    Ok(out)
}

/// Precomputed index map from a broadcast output position to a source offset.
pub(crate) struct BroadcastMap {
    pub out_shape: Vec<usize>,
    strides_a: Vec<usize>,
    strides_b: Vec<usize>,
    out_strides: Vec<usize>,
}

impl BroadcastMap {
    pub(crate) fn new(
        op: &'static str,
        a: &[usize],
        b: &[usize],
    ) -> Result<BroadcastMap, TensorError> {
        let out_shape = broadcast_shape(op, a, b)?;
        let n = out_shape.len();
        let pad = |s: &[usize]| -> Vec<usize> {
            let mut v = vec![1; n - s.len()];
            v.extend_from_slice(s);
            v
        };
        let (pa, pb) = (pad(a), pad(b));
        let (sa, sb) = (strides(&pa), strides(&pb));
        let mut strides_a = vec![0; n];
        let mut strides_b = vec![0; n];
        for i in 0..n {
            strides_a[i] = if pa[i] == 1 { 0 } else { sa[i] };
            strides_b[i] = if pb[i] == 1 { 0 } else { sb[i] };
        }
        let out_strides = strides(&out_shape);
        Ok(BroadcastMap { out_shape, strides_a, strides_b, out_strides })
    }

    pub(crate) fn identical(&self) -> bool {
        self.strides_a == self.out_strides && self.strides_b == self.out_strides
    }

    #[inline]
    pub(crate) fn offsets(&self, flat: usize) -> (usize, usize) {
        let mut rem = flat;
        let (mut oa, mut ob) = (0, 0);
        for i in 0..self.out_strides.len() {
            let idx = rem / self.out_strides[i];
            rem %= self.out_strides[i];
            oa += idx * self.strides_a[i];
            ob += idx * self.strides_b[i];
        }
        (oa, ob)
    }

    /// Sum a broadcast-shaped gradient back down to the source shape.
    pub(crate) fn reduce_to<T: Real>(&self, grad: &[T], src_shape: &[usize], side_a: bool) -> Vec<T> {
        let mut out = vec![T::zero(); numel(src_shape)];
        let strides_src = if side_a { &self.strides_a } else { &self.strides_b };
        for (flat, g) in grad.iter().enumerate() {
            let mut rem = flat;
            let mut off = 0;
            for i in 0..self.out_strides.len() {
                let idx = rem / self.out_strides[i];
                rem %= self.out_strides[i];
                off += idx * strides_src[i];
            }
            out[off] += *g;
        }
        out
    }
}

#[cfg(test)]
mod tests;
