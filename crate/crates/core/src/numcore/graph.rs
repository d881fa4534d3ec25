// Copyright 2026 The semloss Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation as a node appended to a tape. Nodes
//! only ever reference earlier nodes, so the tape order is already a
//! topological order and the backward pass is a single reverse sweep that
//! visits each node once. Gradients of nodes used more than once are summed.
//!
//! Parameters are borrowed from a [`ParamStore`] rather than copied; each
//! parameter gets at most one leaf node per graph so its gradient
//! accumulates in one place. Graphs are cheap and meant to be rebuilt for
//! every training step.

use std::fmt;

use super::tensor::{masked_logsumexp, masked_softmax, matmul_into, sigmoid};
use super::{NumError, ParamGrads, ParamId, ParamStore, Tensor};

/// Handle to a node on a [`Graph`] tape.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum OpKind {
    Leaf,
    MatMul,
    Add,
    Mul,
    Concat,
    Tanh,
    Sigmoid,
    Softmax,
    Log,
    EmbeddingGather,
    Sum,
    Mean,
    ScalarScale,
    SliceCols,
    Pick,
    LogSoftmaxPick,
    AddMany,
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            OpKind::Leaf => "leaf",
            OpKind::MatMul => "matmul",
            OpKind::Add => "add",
            OpKind::Mul => "mul",
            OpKind::Concat => "concat",
            OpKind::Tanh => "tanh",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Softmax => "softmax",
            OpKind::Log => "log",
            OpKind::EmbeddingGather => "embedding-gather",
            OpKind::Sum => "sum",
            OpKind::Mean => "mean",
            OpKind::ScalarScale => "scalar-scale",
            OpKind::SliceCols => "slice-cols",
            OpKind::Pick => "pick",
            OpKind::LogSoftmaxPick => "log-softmax-pick",
            OpKind::AddMany => "add-many",
        };
        f.write_str(name)
    }
}

enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Concat(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    Log(Var),
    Gather { table: Var, ids: Vec<usize> },
    Sum(Var),
    Mean(Var),
    Scale(Var, f64),
    SliceCols { input: Var, start: usize },
    Pick { input: Var, index: usize },
    LogSoftmaxPick { logits: Var, index: usize, probs: Vec<f64> },
    AddMany(Vec<Var>),
}

struct Node {
    op: Op,
    // `None` for parameter leaves, whose value lives in the store.
    value: Option<Tensor>,
}

pub struct Graph<'p> {
    params: Option<&'p ParamStore>,
    param_nodes: Vec<Option<Var>>,
    nodes: Vec<Node>,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p> Graph<'p> {
    /// A graph with no parameter store; use [`Graph::leaf`] for inputs.
    pub fn new() -> Self {
        Self {
            params: None,
            param_nodes: Vec::new(),
            nodes: Vec::new(),
        }
    }

    pub fn with_params(params: &'p ParamStore) -> Self {
        Self {
            params: Some(params),
            param_nodes: vec![None; params.len()],
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.expect("param node without store").get(*id),
            (None, _) => unreachable!("node without value"),
        }
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<Var, NumError> {
        if !value.is_finite() {
            return Err(NumError::NonFinite { op: self.kind_of(&op) });
        }
        self.nodes.push(Node { op, value: Some(value) });
        Ok(Var(self.nodes.len() - 1))
    }

    fn kind_of(&self, op: &Op) -> OpKind {
        match op {
            Op::Leaf | Op::Param(_) => OpKind::Leaf,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::Mul(..) => OpKind::Mul,
            Op::Concat(..) => OpKind::Concat,
            Op::Tanh(_) => OpKind::Tanh,
            Op::Sigmoid(_) => OpKind::Sigmoid,
            Op::Softmax(_) => OpKind::Softmax,
            Op::Log(_) => OpKind::Log,
            Op::Gather { .. } => OpKind::EmbeddingGather,
            Op::Sum(_) => OpKind::Sum,
            Op::Mean(_) => OpKind::Mean,
            Op::Scale(..) => OpKind::ScalarScale,
            Op::SliceCols { .. } => OpKind::SliceCols,
            Op::Pick { .. } => OpKind::Pick,
            Op::LogSoftmaxPick { .. } => OpKind::LogSoftmaxPick,
            Op::AddMany(_) => OpKind::AddMany,
        }
    }

    fn mismatch(&self, op: OpKind, inputs: &[Var]) -> NumError {
        NumError::ShapeMismatch {
            op,
            shapes: inputs.iter().map(|&v| self.value(v).shape().to_vec()).collect(),
        }
    }

    /// A differentiable input that is not part of any parameter store.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            op: Op::Leaf,
            value: Some(value),
        });
        Var(self.nodes.len() - 1)
    }

    /// A constant input; identical to [`Graph::leaf`] but reads better at call sites.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value)
    }

    /// Leaf node for a stored parameter, created on first use.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(self.mismatch(OpKind::MatMul, &[a, b]));
        }
        let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let mut out = vec![0.0; m * n];
        matmul_into(ta.data(), tb.data(), m, k, n, &mut out);
        self.push(Op::MatMul(a, b), Tensor::new(vec![m, n], out)?)
    }

    fn elementwise2(&mut self, a: Var, b: Var, kind: OpKind, f: impl Fn(f64, f64) -> f64) -> Result<Tensor, NumError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !ta.same_shape(tb) {
            return Err(self.mismatch(kind, &[a, b]));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let t = self.elementwise2(a, b, OpKind::Add, |x, y| x + y)?;
        self.push(Op::Add(a, b), t)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let t = self.elementwise2(a, b, OpKind::Mul, |x, y| x * y)?;
        self.push(Op::Mul(a, b), t)
    }

    /// Concatenate two `r × c` tensors along the column axis.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.shape()[0] != tb.shape()[0] {
            return Err(self.mismatch(OpKind::Concat, &[a, b]));
        }
        let (rows, ca, cb) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let mut data = Vec::with_capacity(rows * (ca + cb));
        for r in 0..rows {
            data.extend_from_slice(ta.row_slice(r));
            data.extend_from_slice(tb.row_slice(r));
        }
        let t = Tensor::new(vec![rows, ca + cb], data)?;
        self.push(Op::Concat(a, b), t)
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64) -> Result<Tensor, NumError> {
        let ta = self.value(a);
        Tensor::new(ta.shape().to_vec(), ta.data().iter().map(|&x| f(x)).collect())
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, NumError> {
        let t = self.map(a, f64::tanh)?;
        self.push(Op::Tanh(a), t)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, NumError> {
        let t = self.map(a, sigmoid)?;
        self.push(Op::Sigmoid(a), t)
    }

    /// Row-wise softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var, NumError> {
        let ta = self.value(a);
        let (rows, cols) = ta.dims2();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            data.extend(masked_softmax(&ta.data()[r * cols..(r + 1) * cols], None).expect("unmasked"));
        }
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(Op::Softmax(a), t)
    }

    pub fn log(&mut self, a: Var) -> Result<Var, NumError> {
        let t = self.map(a, f64::ln)?;
        self.push(Op::Log(a), t)
    }

    /// Rows of a `V × d` table selected by `ids`, giving `len(ids) × d`.
    pub fn embedding_gather(&mut self, table: Var, ids: &[usize]) -> Result<Var, NumError> {
        let tt = self.value(table);
        if tt.shape().len() != 2 || ids.is_empty() || ids.iter().any(|&i| i >= tt.shape()[0]) {
            return Err(NumError::IndexOutOfRange {
                op: OpKind::EmbeddingGather,
                index: ids.iter().copied().max().unwrap_or(0),
                shape: tt.shape().to_vec(),
            });
        }
        let d = tt.shape()[1];
        let mut data = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            data.extend_from_slice(tt.row_slice(i));
        }
        let t = Tensor::new(vec![ids.len(), d], data)?;
        self.push(
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
            t,
        )
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, NumError> {
        let s = self.value(a).data().iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(s))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, NumError> {
        let ta = self.value(a);
        let s = ta.data().iter().sum::<f64>() / ta.len() as f64;
        self.push(Op::Mean(a), Tensor::scalar(s))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var, NumError> {
        let t = self.map(a, |x| x * factor)?;
        self.push(Op::Scale(a, factor), t)
    }

    /// Columns `start..end` of an `r × c` tensor.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var, NumError> {
        let ta = self.value(a);
        let (rows, cols) = ta.dims2();
        if ta.shape().len() != 2 || start >= end || end > cols {
            return Err(self.mismatch(OpKind::SliceCols, &[a]));
        }
        let mut data = Vec::with_capacity(rows * (end - start));
        for r in 0..rows {
            data.extend_from_slice(&ta.row_slice(r)[start..end]);
        }
        let t = Tensor::new(vec![rows, end - start], data)?;
        self.push(Op::SliceCols { input: a, start }, t)
    }

    /// Single element at flat index `index`, as a scalar node.
    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var, NumError> {
        let ta = self.value(a);
        if index >= ta.len() {
            return Err(NumError::IndexOutOfRange {
                op: OpKind::Pick,
                index,
                shape: ta.shape().to_vec(),
            });
        }
        let v = ta.data()[index];
        self.push(Op::Pick { input: a, index }, Tensor::scalar(v))
    }

    /// `log softmax(logits)[index]` over a single row, with masked entries
    /// excluded from the normaliser. Equivalent to `pick(log(softmax(x)), k)`
    /// but without materialising the full log-distribution.
    pub fn log_softmax_pick(&mut self, logits: Var, mask: Option<&[bool]>, index: usize) -> Result<Var, NumError> {
        let tl = self.value(logits);
        let n = tl.len();
        if tl.dims2().0 != 1 || index >= n || mask.is_some_and(|m| m.len() != n) {
            return Err(NumError::IndexOutOfRange {
                op: OpKind::LogSoftmaxPick,
                index,
                shape: tl.shape().to_vec(),
            });
        }
        if mask.is_some_and(|m| m[index]) {
            return Err(NumError::MaskedTarget { index });
        }
        let lse = masked_logsumexp(tl.data(), mask).ok_or(NumError::EmptyMask)?;
        let value = tl.data()[index] - lse;
        let probs = masked_softmax(tl.data(), mask).ok_or(NumError::EmptyMask)?;
        self.push(Op::LogSoftmaxPick { logits, index, probs }, Tensor::scalar(value))
    }

    /// Sum of equally shaped nodes.
    pub fn add_many(&mut self, terms: &[Var]) -> Result<Var, NumError> {
        let Some(&first) = terms.first() else {
            return Err(NumError::ShapeMismatch {
                op: OpKind::AddMany,
                shapes: Vec::new(),
            });
        };
        let mut acc = self.value(first).clone();
        for &t in &terms[1..] {
            let tv = self.value(t);
            if !tv.same_shape(&acc) {
                return Err(self.mismatch(OpKind::AddMany, terms));
            }
            acc.add_assign(tv);
        }
        self.push(Op::AddMany(terms.to_vec()), acc)
    }

    /// Reverse sweep from a scalar `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients, NumError> {
        let root_value = self.value(root);
        if root_value.len() != 1 {
            return Err(NumError::NonScalarRoot(root_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(root.0 + 1);
        grads.resize_with(root.0 + 1, || None);
        grads[root.0] = Some(Tensor::filled(root_value.shape(), 1.0));

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let out = self.nodes[i].value.as_ref();
        match &self.nodes[i].op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                let gd = g.data();
                {
                    // dA = dC · Bᵀ
                    let ga = grad_slot(grads, *a, ta.shape());
                    let gad = ga.data_mut();
                    let bd = tb.data();
                    for r in 0..m {
                        let grow = &gd[r * n..(r + 1) * n];
                        for p in 0..k {
                            let brow = &bd[p * n..(p + 1) * n];
                            let dot: f64 = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                            gad[r * k + p] += dot;
                        }
                    }
                }
                {
                    // dB = Aᵀ · dC
                    let gb = grad_slot(grads, *b, tb.shape());
                    let gbd = gb.data_mut();
                    let ad = ta.data();
                    for r in 0..m {
                        let grow = &gd[r * n..(r + 1) * n];
                        for p in 0..k {
                            let a_rp = ad[r * k + p];
                            if a_rp == 0.0 {
                                continue;
                            }
                            for (o, &gv) in gbd[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *o += a_rp * gv;
                            }
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                add_into(grad_slot(grads, *a, g.shape()), g.data(), |x| x);
                add_into(grad_slot(grads, *b, g.shape()), g.data(), |x| x);
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let ga = grad_slot(grads, *a, ta.shape());
                for ((o, &gv), &y) in ga.data_mut().iter_mut().zip(g.data()).zip(tb.data()) {
                    *o += gv * y;
                }
                let gb = grad_slot(grads, *b, tb.shape());
                for ((o, &gv), &x) in gb.data_mut().iter_mut().zip(g.data()).zip(ta.data()) {
                    *o += gv * x;
                }
            }
            Op::Concat(a, b) => {
                let (sa, sb) = (self.value(*a).shape().to_vec(), self.value(*b).shape().to_vec());
                let (rows, ca, cb) = (sa[0], sa[1], sb[1]);
                let gd = g.data();
                let ga = grad_slot(grads, *a, &sa).data_mut();
                for r in 0..rows {
                    for c in 0..ca {
                        ga[r * ca + c] += gd[r * (ca + cb) + c];
                    }
                }
                let gb = grad_slot(grads, *b, &sb).data_mut();
                for r in 0..rows {
                    for c in 0..cb {
                        gb[r * cb + c] += gd[r * (ca + cb) + ca + c];
                    }
                }
            }
            Op::Tanh(a) => {
                let y = out.expect("owned");
                let ga = grad_slot(grads, *a, y.shape());
                for ((o, &gv), &yv) in ga.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                    *o += gv * (1.0 - yv * yv);
                }
            }
            Op::Sigmoid(a) => {
                let y = out.expect("owned");
                let ga = grad_slot(grads, *a, y.shape());
                for ((o, &gv), &yv) in ga.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                    *o += gv * yv * (1.0 - yv);
                }
            }
            Op::Softmax(a) => {
                let y = out.expect("owned");
                let (rows, cols) = y.dims2();
                let ga = grad_slot(grads, *a, y.shape()).data_mut();
                for r in 0..rows {
                    let ys = &y.data()[r * cols..(r + 1) * cols];
                    let gs = &g.data()[r * cols..(r + 1) * cols];
                    let dot: f64 = ys.iter().zip(gs).map(|(a, b)| a * b).sum();
                    for c in 0..cols {
                        ga[r * cols + c] += ys[c] * (gs[c] - dot);
                    }
                }
            }
            Op::Log(a) => {
                let x = self.value(*a);
                let ga = grad_slot(grads, *a, x.shape());
                for ((o, &gv), &xv) in ga.data_mut().iter_mut().zip(g.data()).zip(x.data()) {
                    *o += gv / xv;
                }
            }
            Op::Gather { table, ids } => {
                let shape = self.value(*table).shape().to_vec();
                let d = shape[1];
                let gt = grad_slot(grads, *table, &shape).data_mut();
                for (row, &id) in ids.iter().enumerate() {
                    for c in 0..d {
                        gt[id * d + c] += g.data()[row * d + c];
                    }
                }
            }
            Op::Sum(a) => {
                let shape = self.value(*a).shape().to_vec();
                let gv = g.item();
                add_into(grad_slot(grads, *a, &shape), &[], |_| gv);
            }
            Op::Mean(a) => {
                let t = self.value(*a);
                let shape = t.shape().to_vec();
                let gv = g.item() / t.len() as f64;
                add_into(grad_slot(grads, *a, &shape), &[], |_| gv);
            }
            Op::Scale(a, factor) => {
                let f = *factor;
                add_into(grad_slot(grads, *a, g.shape()), g.data(), |x| x * f);
            }
            Op::SliceCols { input, start } => {
                let shape = self.value(*input).shape().to_vec();
                let (rows, cols) = (shape[0], shape[1]);
                let width = g.shape()[1];
                let gi = grad_slot(grads, *input, &shape).data_mut();
                for r in 0..rows {
                    for c in 0..width {
                        gi[r * cols + start + c] += g.data()[r * width + c];
                    }
                }
            }
            Op::Pick { input, index } => {
                let shape = self.value(*input).shape().to_vec();
                grad_slot(grads, *input, &shape).data_mut()[*index] += g.item();
            }
            Op::LogSoftmaxPick { logits, index, probs } => {
                let shape = self.value(*logits).shape().to_vec();
                let gv = g.item();
                let gl = grad_slot(grads, *logits, &shape).data_mut();
                for (o, &p) in gl.iter_mut().zip(probs) {
                    *o -= gv * p;
                }
                gl[*index] += gv;
            }
            Op::AddMany(terms) => {
                for &t in terms {
                    add_into(grad_slot(grads, t, g.shape()), g.data(), |x| x);
                }
            }
        }
    }

    /// Add the gradients of every parameter leaf into `acc`.
    pub fn accumulate_param_grads(&self, grads: &Gradients, acc: &mut ParamGrads) {
        for (idx, node) in self.param_nodes.iter().enumerate() {
            if let Some(v) = node {
                if let Some(g) = grads.wrt(*v) {
                    acc.get_mut(ParamId(idx)).add_assign(g);
                }
            }
        }
    }
}

fn grad_slot<'g>(grads: &'g mut [Option<Tensor>], v: Var, shape: &[usize]) -> &'g mut Tensor {
    grads[v.0].get_or_insert_with(|| Tensor::zeros(shape))
}

/// `dst[i] += f(src[i])`, or `dst[i] += f(0)` for every `i` when `src` is empty.
fn add_into(dst: &mut Tensor, src: &[f64], f: impl Fn(f64) -> f64) {
    if src.is_empty() {
        for o in dst.data_mut() {
            *o += f(0.0);
        }
    } else {
        for (o, &s) in dst.data_mut().iter_mut().zip(src) {
            *o += f(s);
        }
    }
}

/// Result of [`Graph::backward`]: one optional gradient per tape node.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the root with respect to `v`; `None` if `v` does not
    /// influence the root.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn row(v: &[f64]) -> Tensor {
        Tensor::row(v.to_vec())
    }

    #[test]
    fn softmax_of_uniform_logits_is_uniform() {
        let mut g = Graph::new();
        let x = g.leaf(row(&[0.0, 0.0, 0.0]));
        let s = g.softmax(x).unwrap();
        for &p in g.value(s).data() {
            assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn add_is_elementwise() {
        let mut g = Graph::new();
        let a = g.leaf(row(&[1.0, 2.0]));
        let b = g.leaf(row(&[3.0, 4.0]));
        let c = g.add(a, b).unwrap();
        assert_eq!(g.value(c).data(), &[4.0, 6.0]);
    }

    #[test]
    fn matmul_row_by_column() {
        let mut g = Graph::new();
        let a = g.leaf(row(&[1.0, 2.0]));
        let b = g.leaf(Tensor::matrix(2, 1, vec![3.0, 4.0]).unwrap());
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).data(), &[11.0]);
    }

    #[test]
    fn shape_mismatch_names_op_and_shapes() {
        let mut g = Graph::new();
        let a = g.leaf(row(&[1.0, 2.0]));
        let b = g.leaf(row(&[1.0, 2.0, 3.0]));
        let err = g.add(a, b).unwrap_err();
        assert_eq!(
            err,
            NumError::ShapeMismatch {
                op: OpKind::Add,
                shapes: vec![vec![1, 2], vec![1, 3]]
            }
        );
        assert!(err.to_string().contains("add"));
        assert!(g.matmul(a, b).is_err());
    }

    #[test]
    fn sum_gradient_is_all_ones() {
        let mut g = Graph::new();
        let p = g.leaf(row(&[0.3, -1.2, 4.0]));
        let s = g.sum(p).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(p).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn log_softmax_gradient_is_onehot_minus_softmax() {
        let logits = [0.5, -0.3, 1.7, 0.0];
        let k = 2;
        let mut g = Graph::new();
        let p = g.leaf(row(&logits));
        let s = g.softmax(p).unwrap();
        let l = g.log(s).unwrap();
        let root = g.pick(l, k).unwrap();
        let grads = g.backward(root).unwrap();
        let probs = masked_softmax(&logits, None).unwrap();
        for (i, &gi) in grads.wrt(p).unwrap().data().iter().enumerate() {
            let expected = if i == k { 1.0 } else { 0.0 } - probs[i];
            assert_abs_diff_eq!(gi, expected, epsilon = 1e-12);
        }

        // The fused op gives the same value and gradient.
        let mut g2 = Graph::new();
        let p2 = g2.leaf(row(&logits));
        let root2 = g2.log_softmax_pick(p2, None, k).unwrap();
        assert_abs_diff_eq!(g2.value(root2).item(), g.value(root).item(), epsilon = 1e-12);
        let grads2 = g2.backward(root2).unwrap();
        for (a, b) in grads2.wrt(p2).unwrap().data().iter().zip(grads.wrt(p).unwrap().data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn tanh_gradient_at_zero_is_one() {
        let mut g = Graph::new();
        let p = g.leaf(Tensor::scalar(0.0));
        let t = g.tanh(p).unwrap();
        let grads = g.backward(t).unwrap();
        assert_eq!(grads.wrt(p).unwrap().item(), 1.0);
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let mut g = Graph::new();
        let p = g.leaf(row(&[1.0, 2.0]));
        assert!(matches!(g.backward(p), Err(NumError::NonScalarRoot(_))));
    }

    #[test]
    fn shared_subexpressions_accumulate() {
        // root = sum(x*x + x*x) built once via a shared node and once duplicated.
        let x0 = row(&[0.7, -2.0]);
        let mut g = Graph::new();
        let x = g.leaf(x0.clone());
        let sq = g.mul(x, x).unwrap();
        let twice = g.add(sq, sq).unwrap();
        let root = g.sum(twice).unwrap();
        let shared = g.backward(root).unwrap().wrt(x).unwrap().clone();

        let mut h = Graph::new();
        let y = h.leaf(x0);
        let a = h.mul(y, y).unwrap();
        let b = h.mul(y, y).unwrap();
        let s = h.add(a, b).unwrap();
        let root = h.sum(s).unwrap();
        let dup = h.backward(root).unwrap().wrt(y).unwrap().clone();
        assert_eq!(shared, dup);
        assert_eq!(shared.data(), &[4.0 * 0.7, -8.0]);
    }

    #[test]
    fn log_of_zero_is_rejected_as_non_finite() {
        let mut g = Graph::new();
        let p = g.leaf(row(&[0.0, 1.0]));
        assert!(matches!(g.log(p), Err(NumError::NonFinite { op: OpKind::Log })));
    }

    #[test]
    fn masked_pick_of_masked_index_fails() {
        let mut g = Graph::new();
        let p = g.leaf(row(&[0.0, 1.0]));
        assert!(g.log_softmax_pick(p, Some(&[true, false]), 0).is_err());
        let v = g.log_softmax_pick(p, Some(&[true, false]), 1).unwrap();
        assert_eq!(g.value(v).item(), 0.0);
    }

    #[test]
    fn param_leaves_are_shared_within_a_graph() {
        let mut store = ParamStore::new();
        let w = store.insert("w", row(&[1.0, 2.0]));
        let mut g = Graph::with_params(&store);
        let a = g.param(w);
        let b = g.param(w);
        assert_eq!(a, b);
        let s = g.add(a, b).unwrap();
        let root = g.sum(s).unwrap();
        let grads = g.backward(root).unwrap();
        let mut acc = ParamGrads::zeros_like(&store);
        g.accumulate_param_grads(&grads, &mut acc);
        assert_eq!(acc.get(w).data(), &[2.0, 2.0]);
    }
}
