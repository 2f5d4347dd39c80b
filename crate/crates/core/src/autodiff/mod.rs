//! Reverse-mode differentiation over [`ScalarField`]s.
//!
//! A [`Tape`] records every operation applied to its [`Var`]s in evaluation
//! order. Scalars are 1x1 fields. Calling [`Tape::backward`] on a scalar node
//! walks the tape once in reverse and returns the gradient of that scalar
//! with respect to every leaf created with [`Tape::leaf`]. Nodes built only
//! from [`Tape::constant`]s are skipped entirely.
//!
//! ```
//! use skil_core::autodiff::Tape;
//! use skil_core::grid::ScalarField;
//!
//! let tape = Tape::new();
//! let p = tape.leaf(ScalarField::new(1, 2, vec![1.0, 3.0]).unwrap());
//! let loss = p.mul(p).unwrap().sum().unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(p).unwrap().as_slice(), &[2.0, 6.0]);
//! ```

mod gradcheck;
mod pool;

pub use gradcheck::{central_differences, compare_gradients, GradientComparison};
pub use pool::{pool, Kernel, PoolMode};

use std::cell::{Ref, RefCell};

use crate::error::{Error, Result};
use crate::grid::{ensure_same_shape, ScalarField};

#[derive(Debug)]
enum Op {
    Leaf,
    Constant,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Affine(usize, f64),
    Sum(usize),
    Exp(usize),
    Sigmoid(usize),
    Relu(usize),
    Sqrt(usize),
    Clamp01(usize),
    Pool(usize, Vec<u32>),
}

#[derive(Debug)]
struct Node {
    value: ScalarField,
    op: Op,
    requires_grad: bool,
}

/// Append-only record of a computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

/// Gradients of one scalar root with respect to the tape's leaves.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<ScalarField>>,
}

impl Gradients {
    /// Gradient for `var`, present only for leaves the root depends on.
    pub fn get(&self, var: Var<'_>) -> Option<&ScalarField> {
        self.grads.get(var.id).and_then(Option::as_ref)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    /// A differentiable input.
    pub fn leaf(&self, value: ScalarField) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// A constant input; no gradient flows into it.
    pub fn constant(&self, value: ScalarField) -> Var<'_> {
        self.push(value, Op::Constant, false)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(ScalarField::scalar(value))
    }

    fn push(&self, value: ScalarField, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn requires_grad(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    fn record(&self, op_name: &'static str, value: ScalarField, op: Op) -> Result<Var<'_>> {
        if value.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: op_name });
        }
        let requires_grad = match &op {
            Op::Leaf => true,
            Op::Constant => false,
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => {
                self.requires_grad(*a) || self.requires_grad(*b)
            }
            Op::Affine(a, _)
            | Op::Sum(a)
            | Op::Exp(a)
            | Op::Sigmoid(a)
            | Op::Relu(a)
            | Op::Sqrt(a)
            | Op::Clamp01(a)
            | Op::Pool(a, _) => self.requires_grad(*a),
        };
        Ok(self.push(value, op, requires_grad))
    }

    /// Propagates `d root / d node` back to every leaf.
    pub fn backward(&self, root: Var<'_>) -> Result<Gradients> {
        assert!(
            std::ptr::eq(root.tape, self),
            "root belongs to a different tape"
        );
        let nodes = self.nodes.borrow();
        let root_value = &nodes[root.id].value;
        if !root_value.is_scalar() {
            return Err(Error::NonScalarRoot {
                height: root_value.height(),
                width: root_value.width(),
            });
        }

        let mut pending: Vec<Option<Vec<f64>>> = vec![None; root.id + 1];
        let mut leaves: Vec<Option<ScalarField>> = (0..nodes.len()).map(|_| None).collect();
        pending[root.id] = Some(vec![1.0]);

        for id in (0..=root.id).rev() {
            let Some(g) = pending[id].take() else {
                continue;
            };
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let mut acc = |target: usize, f: &dyn Fn(usize) -> f64| {
                if !nodes[target].requires_grad {
                    return;
                }
                let len = nodes[target].value.len();
                let slot = pending[target].get_or_insert_with(|| vec![0.0; len]);
                for (i, s) in slot.iter_mut().enumerate() {
                    *s += f(i);
                }
            };
            match &node.op {
                Op::Leaf => {
                    let (h, w) = node.value.shape();
                    leaves[id] = Some(ScalarField::new(h, w, g).expect("grad shape"));
                }
                Op::Constant => {}
                Op::Add(a, b) => {
                    acc(*a, &|i| g[i]);
                    acc(*b, &|i| g[i]);
                }
                Op::Sub(a, b) => {
                    acc(*a, &|i| g[i]);
                    acc(*b, &|i| -g[i]);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (nodes[*a].value.as_slice(), nodes[*b].value.as_slice());
                    acc(*a, &|i| g[i] * vb[i]);
                    acc(*b, &|i| g[i] * va[i]);
                }
                Op::Div(a, b) => {
                    let (va, vb) = (nodes[*a].value.as_slice(), nodes[*b].value.as_slice());
                    acc(*a, &|i| g[i] / vb[i]);
                    acc(*b, &|i| -g[i] * va[i] / (vb[i] * vb[i]));
                }
                Op::Affine(a, scale) => acc(*a, &|i| g[i] * scale),
                Op::Sum(a) => acc(*a, &|_| g[0]),
                Op::Exp(a) => {
                    let out = node.value.as_slice();
                    acc(*a, &|i| g[i] * out[i]);
                }
                Op::Sigmoid(a) => {
                    let out = node.value.as_slice();
                    acc(*a, &|i| g[i] * out[i] * (1.0 - out[i]));
                }
                Op::Relu(a) => {
                    let x = nodes[*a].value.as_slice();
                    acc(*a, &|i| if x[i] > 0.0 { g[i] } else { 0.0 });
                }
                Op::Sqrt(a) => {
                    let out = node.value.as_slice();
                    if out.iter().zip(&g).any(|(&o, &gi)| o == 0.0 && gi != 0.0) {
                        return Err(Error::NonFinite { op: "sqrt backward" });
                    }
                    acc(*a, &|i| if g[i] == 0.0 { 0.0 } else { g[i] * 0.5 / out[i] });
                }
                Op::Clamp01(a) => {
                    let x = nodes[*a].value.as_slice();
                    acc(*a, &|i| if x[i] > 0.0 && x[i] < 1.0 { g[i] } else { 0.0 });
                }
                Op::Pool(a, selected) => {
                    if nodes[*a].requires_grad {
                        let len = nodes[*a].value.len();
                        let slot = pending[*a].get_or_insert_with(|| vec![0.0; len]);
                        for (i, &src) in selected.iter().enumerate() {
                            slot[src as usize] += g[i];
                        }
                    }
                }
            }
        }

        Ok(Gradients { grads: leaves })
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Ref<'t, ScalarField> {
        Ref::map(self.tape.nodes.borrow(), |n| &n[self.id].value)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value().shape()
    }

    /// The value of a 1x1 node.
    pub fn scalar(&self) -> Option<f64> {
        self.value().value()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.requires_grad(self.id)
    }

    pub fn backward(&self) -> Result<Gradients> {
        self.tape.backward(*self)
    }

    fn same_tape(&self, other: &Var<'_>) {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "operands belong to different tapes"
        );
    }

    fn binary(
        self,
        other: Var<'t>,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var<'t>> {
        self.same_tape(&other);
        let value = {
            let (a, b) = (self.value(), other.value());
            ensure_same_shape(a.shape(), b.shape())?;
            a.zip_map(&b, f)?
        };
        self.tape.record(name, value, op)
    }

    fn unary(self, name: &'static str, f: impl Fn(f64) -> f64, op: Op) -> Result<Var<'t>> {
        let value = self.value().map(f);
        self.tape.record(name, value, op)
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "add", |a, b| a + b, Op::Add(self.id, other.id))
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "sub", |a, b| a - b, Op::Sub(self.id, other.id))
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "mul", |a, b| a * b, Op::Mul(self.id, other.id))
    }

    /// Elementwise quotient. Callers guard denominators away from zero.
    pub fn div(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "div", |a, b| a / b, Op::Div(self.id, other.id))
    }

    /// `scale * x + offset`, elementwise.
    pub fn affine(self, scale: f64, offset: f64) -> Result<Var<'t>> {
        self.unary("affine", |x| scale * x + offset, Op::Affine(self.id, scale))
    }

    pub fn scale(self, k: f64) -> Result<Var<'t>> {
        self.affine(k, 0.0)
    }

    pub fn add_scalar(self, c: f64) -> Result<Var<'t>> {
        self.affine(1.0, c)
    }

    /// `1 - x`.
    pub fn one_minus(self) -> Result<Var<'t>> {
        self.affine(-1.0, 1.0)
    }

    /// Sum of all elements, as a 1x1 node.
    pub fn sum(self) -> Result<Var<'t>> {
        let value = ScalarField::scalar(self.value().sum());
        self.tape.record("sum", value, Op::Sum(self.id))
    }

    pub fn exp(self) -> Result<Var<'t>> {
        self.unary("exp", f64::exp, Op::Exp(self.id))
    }

    pub fn sigmoid(self) -> Result<Var<'t>> {
        self.unary("sigmoid", sigmoid, Op::Sigmoid(self.id))
    }

    pub fn relu(self) -> Result<Var<'t>> {
        self.unary("relu", |x| x.max(0.0), Op::Relu(self.id))
    }

    pub fn sqrt(self) -> Result<Var<'t>> {
        self.unary("sqrt", f64::sqrt, Op::Sqrt(self.id))
    }

    pub fn clamp01(self) -> Result<Var<'t>> {
        self.unary("clamp01", |x| x.clamp(0.0, 1.0), Op::Clamp01(self.id))
    }

    /// Max over `kernel`; the gradient goes to the selected element.
    pub fn max_pool(self, kernel: Kernel) -> Result<Var<'t>> {
        let (value, selected) = pool(&self.value(), kernel, PoolMode::Max);
        self.tape
            .record("max_pool", value, Op::Pool(self.id, selected))
    }

    /// Min over `kernel`; the gradient goes to the selected element.
    pub fn min_pool(self, kernel: Kernel) -> Result<Var<'t>> {
        let (value, selected) = pool(&self.value(), kernel, PoolMode::Min);
        self.tape
            .record("min_pool", value, Op::Pool(self.id, selected))
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
