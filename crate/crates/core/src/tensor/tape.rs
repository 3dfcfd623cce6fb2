//! Operation tape for reverse-mode differentiation.
//!
//! Every forward call appends a node holding its value and the operation that
//! produced it. [`Tape::backward`] walks the nodes in reverse and applies the
//! per-op rules from [`super::backward`], accumulating parameter gradients into
//! a [`GradStore`].

use std::borrow::Cow;

use super::{backward, Matrix};
use crate::error::{Error, Result, Shape};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Stable identity of a trainable tensor; index into the model's canonical parameter order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRowBroadcast(Var, Var),
    Hadamard(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    Tanh(Var),
    Sigmoid(Var),
    Transpose(Var),
    SoftmaxRows(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    Sum(Var),
    SoftmaxCrossEntropy {
        logits: Var,
        probs: Matrix,
        labels: Vec<usize>,
        denom: f64,
    },
}

struct Node<'a> {
    value: Cow<'a, Matrix>,
    op: Op,
    needs_grad: bool,
}

/// Gradients keyed by [`ParamId`], each with its parameter's shape.
#[derive(Debug, Clone, PartialEq)]
pub struct GradStore {
    grads: Vec<Matrix>,
}

impl GradStore {
    pub fn zeros_like<'m>(params: impl IntoIterator<Item = &'m Matrix>) -> Self {
        GradStore {
            grads: params
                .into_iter()
                .map(|p| Matrix::zeros(p.rows(), p.cols()))
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.grads[id.0]
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Matrix> {
        self.grads.iter()
    }

    pub fn as_slice(&self) -> &[Matrix] {
        &self.grads
    }

    pub fn accumulate(&mut self, id: ParamId, grad: &Matrix) -> Result<()> {
        let slot = self.grads.get_mut(id.0).ok_or_else(|| {
            Error::InvalidMatrix(format!("parameter id {} outside gradient store", id.0))
        })?;
        slot.add_assign(grad)
    }

    /// Adds another store into this one, parameter by parameter.
    pub fn merge(&mut self, other: &GradStore) -> Result<()> {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn reset(&mut self) {
        for g in &mut self.grads {
            g.data_mut().fill(0.0);
        }
    }
}

/// Append-only record of a forward computation.
#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.value(v).shape()
    }

    fn push(&mut self, value: Matrix, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn grad_of(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn constant_ref(&mut self, value: &'a Matrix) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(value),
            op: Op::Constant,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Registers a trainable leaf; its gradient lands in `GradStore[id]`.
    pub fn param(&mut self, id: ParamId, value: &'a Matrix) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(value),
            op: Op::Param(id),
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let g = self.grad_of(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), g))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        let g = self.grad_of(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), g))
    }

    /// `m + 1·biasᵀ`-style broadcast: adds the `1×cols` row `bias` to every row of `m`.
    pub fn add_row_broadcast(&mut self, m: Var, bias: Var) -> Result<Var> {
        let out = self.value(m).add_row_broadcast(self.value(bias))?;
        let g = self.grad_of(&[m, bias]);
        Ok(self.push(out, Op::AddRowBroadcast(m, bias), g))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).hadamard(self.value(b))?;
        let g = self.grad_of(&[a, b]);
        Ok(self.push(out, Op::Hadamard(a, b), g))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).scale(c);
        let g = self.grad_of(&[a]);
        self.push(out, Op::Scale(a, c), g)
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let out = self.value(a).one_minus();
        let g = self.grad_of(&[a]);
        self.push(out, Op::OneMinus(a), g)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).tanh_ew();
        let g = self.grad_of(&[a]);
        self.push(out, Op::Tanh(a), g)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).sigmoid_ew();
        let g = self.grad_of(&[a]);
        self.push(out, Op::Sigmoid(a), g)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        let g = self.grad_of(&[a]);
        self.push(out, Op::Transpose(a), g)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let out = self.value(a).softmax_rows();
        let g = self.grad_of(&[a]);
        self.push(out, Op::SoftmaxRows(a), g)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let mats: Vec<&Matrix> = parts.iter().map(|&v| self.value(v)).collect();
        let out = Matrix::concat_cols(&mats)?;
        let g = self.grad_of(parts);
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), g))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let mats: Vec<&Matrix> = parts.iter().map(|&v| self.value(v)).collect();
        let out = Matrix::concat_rows(&mats)?;
        let g = self.grad_of(parts);
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), g))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let out = self.value(a).slice_cols(start, len)?;
        let g = self.grad_of(&[a]);
        Ok(self.push(out, Op::SliceCols(a, start), g))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let out = self.value(a).slice_rows(start, len)?;
        let g = self.grad_of(&[a]);
        Ok(self.push(out, Op::SliceRows(a, start), g))
    }

    /// Sum of all entries as a 1×1 node.
    pub fn sum(&mut self, a: Var) -> Var {
        let out = Matrix::filled(1, 1, self.value(a).sum());
        let g = self.grad_of(&[a]);
        self.push(out, Op::Sum(a), g)
    }

    /// `Σ_t −log softmax(logits_t)[labels_t] / denom` as a 1×1 node.
    ///
    /// Probabilities are clamped at `1e-12` before the log; the returned count
    /// says how many rows hit the clamp.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: Var,
        labels: &[usize],
        denom: f64,
    ) -> Result<(Var, usize)> {
        let z = self.value(logits);
        if z.rows() != labels.len() {
            return Err(Error::shape(
                "softmax_cross_entropy",
                z.shape(),
                Shape(labels.len(), 1),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= z.cols()) {
            return Err(Error::InvalidMatrix(format!(
                "label {bad} out of range for {} classes",
                z.cols()
            )));
        }
        let probs = z.softmax_rows();
        let (loss, clamped) = super::cross_entropy_sum(&probs, labels);
        let g = self.grad_of(&[logits]);
        let var = self.push(
            Matrix::filled(1, 1, loss / denom),
            Op::SoftmaxCrossEntropy {
                logits,
                probs,
                labels: labels.to_vec(),
                denom,
            },
            g,
        );
        Ok((var, clamped))
    }

    /// Back-propagates from the 1×1 node `root`, adding parameter gradients into `grads`.
    pub fn backward(&self, root: Var, grads: &mut GradStore) -> Result<()> {
        let root_shape = self.shape(root);
        if root_shape != Shape(1, 1) {
            return Err(Error::shape("backward root", root_shape, Shape(1, 1)));
        }
        let mut adj: Vec<Option<Matrix>> = Vec::with_capacity(root.0 + 1);
        adj.resize_with(root.0 + 1, || None);
        adj[root.0] = Some(Matrix::filled(1, 1, 1.0));

        for idx in (0..=root.0).rev() {
            let Some(d_out) = adj[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let mut send = |v: Var, g: Matrix| -> Result<()> {
                if !self.nodes[v.0].needs_grad {
                    return Ok(());
                }
                match &mut adj[v.0] {
                    Some(acc) => acc.add_assign(&g),
                    slot @ None => {
                        *slot = Some(g);
                        Ok(())
                    }
                }
            };
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => grads.accumulate(*id, &d_out)?,
                Op::MatMul(a, b) => {
                    if self.nodes[a.0].needs_grad {
                        send(*a, backward::matmul_lhs(self.value(*b), &d_out)?)?;
                    }
                    if self.nodes[b.0].needs_grad {
                        send(*b, backward::matmul_rhs(self.value(*a), &d_out)?)?;
                    }
                }
                Op::Add(a, b) => {
                    send(*a, d_out.clone())?;
                    send(*b, d_out)?;
                }
                Op::AddRowBroadcast(m, bias) => {
                    send(*bias, backward::row_broadcast_bias(&d_out))?;
                    send(*m, d_out)?;
                }
                Op::Hadamard(a, b) => {
                    let (da, db) = backward::hadamard(self.value(*a), self.value(*b), &d_out)?;
                    send(*a, da)?;
                    send(*b, db)?;
                }
                Op::Scale(a, c) => send(*a, backward::scale(*c, &d_out))?,
                Op::OneMinus(a) => send(*a, backward::scale(-1.0, &d_out))?,
                Op::Tanh(a) => send(*a, backward::tanh(&node.value, &d_out)?)?,
                Op::Sigmoid(a) => send(*a, backward::sigmoid(&node.value, &d_out)?)?,
                Op::Transpose(a) => send(*a, backward::transpose(&d_out))?,
                Op::SoftmaxRows(a) => send(*a, backward::softmax_rows(&node.value, &d_out))?,
                Op::ConcatCols(parts) => {
                    let widths: Vec<usize> = parts.iter().map(|v| self.value(*v).cols()).collect();
                    for (v, g) in parts.iter().zip(backward::concat_cols(&widths, &d_out)?) {
                        send(*v, g)?;
                    }
                }
                Op::ConcatRows(parts) => {
                    let heights: Vec<usize> = parts.iter().map(|v| self.value(*v).rows()).collect();
                    for (v, g) in parts.iter().zip(backward::concat_rows(&heights, &d_out)?) {
                        send(*v, g)?;
                    }
                }
                Op::SliceCols(a, start) => {
                    let cols = self.value(*a).cols();
                    send(*a, backward::slice_cols(cols, *start, &d_out))?;
                }
                Op::SliceRows(a, start) => {
                    let rows = self.value(*a).rows();
                    send(*a, backward::slice_rows(rows, *start, &d_out))?;
                }
                Op::Sum(a) => {
                    let s = self.shape(*a);
                    send(*a, Matrix::filled(s.0, s.1, d_out.get(0, 0)))?;
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    probs,
                    labels,
                    denom,
                } => {
                    let dz = backward::softmax_cross_entropy(probs, labels, *denom);
                    send(*logits, dz.scale(d_out.get(0, 0)))?;
                }
            }
        }
        Ok(())
    }
}
