//! Define-by-run computation graph with reverse-mode differentiation.
//!
//! Every op evaluates eagerly and appends a node whose inputs are earlier
//! nodes, so the node list is a topological order by construction. Parameter
//! leaves borrow their tensors instead of copying them; the graph is rebuilt
//! for every training example.
//!
//! All ops work on 2-D tensors. Vectors are `[1, n]` rows.

use std::borrow::Cow;
use std::collections::BTreeMap;

use super::kernels::{matmul, matmul_at_acc, matmul_bt_acc, sigmoid};
use super::tensor::{softmax_f64, Real, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Caller-assigned identity of a trainable leaf.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Input,
    Param,
    MatMul,
    Add,
    Mul,
    Scale,
    Concat,
    Slice,
    Transpose,
    Mean,
    Sum,
    Tanh,
    Sigmoid,
    Relu,
    Softmax,
    Embedding,
    CrossEntropy,
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Concat(Vec<NodeId>, Axis),
    Slice { input: NodeId, axis: Axis, start: usize },
    Transpose(NodeId),
    Mean(NodeId),
    Sum(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    Softmax(NodeId),
    Embedding { table: NodeId, ids: Vec<usize> },
    CrossEntropy { logits: NodeId, targets: Vec<usize> },
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Input => OpKind::Input,
            Op::Param(_) => OpKind::Param,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::Mul(..) => OpKind::Mul,
            Op::Scale(..) => OpKind::Scale,
            Op::Concat(..) => OpKind::Concat,
            Op::Slice { .. } => OpKind::Slice,
            Op::Transpose(_) => OpKind::Transpose,
            Op::Mean(_) => OpKind::Mean,
            Op::Sum(_) => OpKind::Sum,
            Op::Tanh(_) => OpKind::Tanh,
            Op::Sigmoid(_) => OpKind::Sigmoid,
            Op::Relu(_) => OpKind::Relu,
            Op::Softmax(_) => OpKind::Softmax,
            Op::Embedding { .. } => OpKind::Embedding,
            Op::CrossEntropy { .. } => OpKind::CrossEntropy,
        }
    }

    fn inputs(&self) -> Vec<NodeId> {
        match self {
            Op::Input | Op::Param(_) => Vec::new(),
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Concat(xs, _) => xs.clone(),
            Op::Scale(a, _)
            | Op::Transpose(a)
            | Op::Mean(a)
            | Op::Sum(a)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::Relu(a)
            | Op::Softmax(a) => vec![*a],
            Op::Slice { input, .. } => vec![*input],
            Op::Embedding { table, .. } => vec![*table],
            Op::CrossEntropy { logits, .. } => vec![*logits],
        }
    }
}

struct Node<'p, T: Real> {
    op: Op,
    value: Cow<'p, Tensor<T>>,
}

/// Gradients of a scalar root with respect to every parameter leaf.
#[derive(Debug, Clone)]
pub struct Gradients<T = f32> {
    by_param: BTreeMap<ParamId, Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, id: ParamId) -> Option<&[T]> {
        self.by_param.get(&id).map(|g| g.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &[T])> {
        self.by_param.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.by_param.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_param.is_empty()
    }

    /// Adds `scale * grad` into `params[id].grad` for every parameter id.
    pub fn accumulate_into(&self, params: &mut [Tensor<T>], scale: T) -> Result<()> {
        for (id, g) in &self.by_param {
            let p = params
                .get_mut(id.0)
                .ok_or_else(|| Error::invalid(format!("no parameter with id {}", id.0)))?;
            p.accumulate_grad(g, scale)?;
        }
        Ok(())
    }
}

pub struct Graph<'p, T: Real = f32> {
    nodes: Vec<Node<'p, T>>,
}

impl<'p, T: Real> Default for Graph<'p, T> {
    fn default() -> Self {
        Self::new()
    }
}

fn require_2d<T: Real>(op: &'static str, t: &Tensor<T>) -> Result<(usize, usize)> {
    if t.ndim() != 2 {
        return Err(Error::shape(op, format!("expected a 2-D tensor, got {:?}", t.shape())));
    }
    Ok((t.shape()[0], t.shape()[1]))
}

impl<'p, T: Real> Graph<'p, T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn op_kind(&self, id: NodeId) -> OpKind {
        self.nodes[id.0].op.kind()
    }

    fn push(&mut self, op: Op, value: Tensor<T>, name: &'static str) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
        self.nodes.push(Node {
            op,
            value: Cow::Owned(value),
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// A constant leaf; receives no gradient.
    pub fn input(&mut self, value: Tensor<T>) -> Result<NodeId> {
        require_2d("input", &value)?;
        self.push(Op::Input, value, "input")
    }

    /// A trainable leaf borrowing its tensor.
    pub fn param(&mut self, id: ParamId, value: &'p Tensor<T>) -> Result<NodeId> {
        require_2d("param", value)?;
        self.nodes.push(Node {
            op: Op::Param(id),
            value: Cow::Borrowed(value),
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = require_2d("matmul", self.value(a))?;
        let (k2, n) = require_2d("matmul", self.value(b))?;
        if k != k2 {
            return Err(Error::shape("matmul", format!("[{m}, {k}] x [{k2}, {n}]")));
        }
        let out = matmul(self.value(a).data(), self.value(b).data(), m, k, n);
        self.push(Op::MatMul(a, b), Tensor::from_parts(vec![m, n], out), "matmul")
    }

    /// Elementwise sum; a `[1, n]` operand is broadcast over rows.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ra, ca) = require_2d("add", self.value(a))?;
        let (rb, cb) = require_2d("add", self.value(b))?;
        if ca != cb || !(ra == rb || ra == 1 || rb == 1) {
            return Err(Error::shape("add", format!("[{ra}, {ca}] + [{rb}, {cb}]")));
        }
        let rows = ra.max(rb);
        let (va, vb) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(rows * ca);
        for r in 0..rows {
            let ar = if ra == 1 { 0 } else { r };
            let br = if rb == 1 { 0 } else { r };
            for c in 0..ca {
                out.push(va[ar * ca + c] + vb[br * ca + c]);
            }
        }
        self.push(Op::Add(a, b), Tensor::from_parts(vec![rows, ca], out), "add")
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let sa = self.value(a).shape().to_vec();
        if sa != self.value(b).shape() {
            return Err(Error::shape("mul", format!("{:?} * {:?}", sa, self.value(b).shape())));
        }
        let out = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x * y)
            .collect();
        self.push(Op::Mul(a, b), Tensor::from_parts(sa, out), "mul")
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId> {
        let f = T::from_f64(factor);
        let t = self.value(a);
        let out = t.data().iter().map(|&x| x * f).collect();
        let shape = t.shape().to_vec();
        self.push(Op::Scale(a, factor), Tensor::from_parts(shape, out), "scale")
    }

    pub fn concat(&mut self, parts: &[NodeId], axis: Axis) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::invalid("concat of zero tensors"));
        }
        let dims: Vec<(usize, usize)> = parts
            .iter()
            .map(|&p| require_2d("concat", self.value(p)))
            .collect::<Result<_>>()?;
        let (out_shape, out) = match axis {
            Axis::Rows => {
                let cols = dims[0].1;
                if dims.iter().any(|d| d.1 != cols) {
                    return Err(Error::shape("concat", format!("row concat of {dims:?}")));
                }
                let rows = dims.iter().map(|d| d.0).sum();
                let mut out = Vec::with_capacity(rows * cols);
                for &p in parts {
                    out.extend_from_slice(self.value(p).data());
                }
                (vec![rows, cols], out)
            }
            Axis::Cols => {
                let rows = dims[0].0;
                if dims.iter().any(|d| d.0 != rows) {
                    return Err(Error::shape("concat", format!("column concat of {dims:?}")));
                }
                let cols = dims.iter().map(|d| d.1).sum();
                let mut out = Vec::with_capacity(rows * cols);
                for r in 0..rows {
                    for &p in parts {
                        out.extend_from_slice(self.value(p).row_slice(r));
                    }
                }
                (vec![rows, cols], out)
            }
        };
        self.push(
            Op::Concat(parts.to_vec(), axis),
            Tensor::from_parts(out_shape, out),
            "concat",
        )
    }

    pub fn slice(&mut self, input: NodeId, axis: Axis, start: usize, len: usize) -> Result<NodeId> {
        let (rows, cols) = require_2d("slice", self.value(input))?;
        let extent = match axis {
            Axis::Rows => rows,
            Axis::Cols => cols,
        };
        if len == 0 || start + len > extent {
            return Err(Error::shape(
                "slice",
                format!("{start}..{} out of {extent} along {axis:?}", start + len),
            ));
        }
        let v = self.value(input).data();
        let (shape, out) = match axis {
            Axis::Rows => (vec![len, cols], v[start * cols..(start + len) * cols].to_vec()),
            Axis::Cols => {
                let mut out = Vec::with_capacity(rows * len);
                for r in 0..rows {
                    out.extend_from_slice(&v[r * cols + start..r * cols + start + len]);
                }
                (vec![rows, len], out)
            }
        };
        self.push(
            Op::Slice { input, axis, start },
            Tensor::from_parts(shape, out),
            "slice",
        )
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let (r, c) = require_2d("transpose", self.value(a))?;
        let v = self.value(a).data();
        let mut out = vec![T::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = v[i * c + j];
            }
        }
        self.push(Op::Transpose(a), Tensor::from_parts(vec![c, r], out), "transpose")
    }

    /// Mean of all elements, as a `[1, 1]` scalar.
    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a).data();
        let m = v.iter().copied().sum::<T>() / T::from_f64(v.len() as f64);
        self.push(Op::Mean(a), Tensor::from_parts(vec![1, 1], vec![m]), "mean")
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let s = self.value(a).data().iter().copied().sum::<T>();
        self.push(Op::Sum(a), Tensor::from_parts(vec![1, 1], vec![s]), "sum")
    }

    fn unary(&mut self, a: NodeId, op: Op, name: &'static str, f: impl Fn(T) -> T) -> Result<NodeId> {
        let t = self.value(a);
        let out = t.data().iter().map(|&x| f(x)).collect();
        let shape = t.shape().to_vec();
        self.push(op, Tensor::from_parts(shape, out), name)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Tanh(a), "tanh", |x| x.tanh())
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Sigmoid(a), "sigmoid", sigmoid)
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Relu(a), "relu", |x| if x > T::zero() { x } else { T::zero() })
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let (rows, cols) = require_2d("softmax", self.value(a))?;
        if cols == 0 {
            return Err(Error::invalid("softmax over zero columns"));
        }
        let t = self.value(a);
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            out.extend(softmax_f64(t.row_slice(r)).into_iter().map(T::from_f64));
        }
        self.push(Op::Softmax(a), Tensor::from_parts(vec![rows, cols], out), "softmax")
    }

    /// Gathers rows of `table` (`[vocab, dim]`) into a `[ids.len(), dim]` tensor.
    pub fn embedding(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        let (vocab, dim) = require_2d("embedding", self.value(table))?;
        if ids.is_empty() {
            return Err(Error::invalid("embedding lookup with no ids"));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab) {
            return Err(Error::invalid(format!("token id {bad} outside vocabulary of {vocab}")));
        }
        let t = self.value(table);
        let mut out = Vec::with_capacity(ids.len() * dim);
        for &i in ids {
            out.extend_from_slice(t.row_slice(i));
        }
        self.push(
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            Tensor::from_parts(vec![ids.len(), dim], out),
            "embedding",
        )
    }

    /// Mean over rows of `-log softmax(logits[r])[targets[r]]`.
    pub fn cross_entropy(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
        let (rows, cols) = require_2d("cross_entropy", self.value(logits))?;
        if rows != targets.len() || rows == 0 {
            return Err(Error::shape(
                "cross_entropy",
                format!("{rows} logit rows for {} targets", targets.len()),
            ));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= cols) {
            return Err(Error::invalid(format!("target {bad} outside {cols} classes")));
        }
        let t = self.value(logits);
        let mut total = 0.0f64;
        for (r, &target) in targets.iter().enumerate() {
            let row = t.row_slice(r);
            let max = row.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x.to_f64()));
            let lse = row.iter().map(|&x| (x.to_f64() - max).exp()).sum::<f64>().ln() + max;
            total += lse - row[target].to_f64();
        }
        let loss = T::from_f64(total / rows as f64);
        self.push(
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
            },
            Tensor::from_parts(vec![1, 1], vec![loss]),
            "cross_entropy",
        )
    }

    /// Reverse sweep from a scalar root.
    ///
    /// Gradients sum over fan-out. Every parameter leaf in the graph gets an
    /// entry; leaves with no path to the root get zeros.
    pub fn backward(&self, root: NodeId) -> Result<Gradients<T>> {
        if root.0 >= self.nodes.len() {
            return Err(Error::invalid(format!("root node {} does not exist", root.0)));
        }
        if self.value(root).numel() != 1 {
            return Err(Error::shape(
                "backward",
                format!("root must be scalar, got shape {:?}", self.value(root).shape()),
            ));
        }
        for (id, node) in self.nodes.iter().enumerate() {
            if node.op.inputs().iter().any(|inp| inp.0 >= id) {
                return Err(Error::invalid(format!("graph cycle detected at node {id}")));
            }
        }

        let mut grads: Vec<Option<Vec<T>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(vec![T::one()]);

        for id in (0..=root.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if let Op::Param(_) = node.op {
                grads[id] = Some(g);
                continue;
            }
            self.propagate(id, &g, &mut grads);
        }

        let mut by_param: BTreeMap<ParamId, Vec<T>> = BTreeMap::new();
        for (id, node) in self.nodes.iter().enumerate() {
            if let Op::Param(pid) = node.op {
                let n = node.value.numel();
                let entry = by_param.entry(pid).or_insert_with(|| vec![T::zero(); n]);
                if entry.len() != n {
                    return Err(Error::shape(
                        "backward",
                        format!("parameter {} registered with two shapes", pid.0),
                    ));
                }
                if let Some(Some(g)) = grads.get(id) {
                    for (e, &x) in entry.iter_mut().zip(g) {
                        *e += x;
                    }
                }
            }
        }
        Ok(Gradients { by_param })
    }

    fn propagate(&self, id: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[id];
        let out = &node.value;
        let mut acc = |target: NodeId, f: &mut dyn FnMut(&mut [T])| {
            let n = self.nodes[target.0].value.numel();
            let buf = grads[target.0].get_or_insert_with(|| vec![T::zero(); n]);
            f(buf);
        };
        match &node.op {
            Op::Input | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (m, k) = (self.value(*a).rows(), self.value(*a).cols());
                let n = self.value(*b).cols();
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |buf| matmul_bt_acc(buf, g, vb, m, k, n));
                acc(*b, &mut |buf| matmul_at_acc(buf, va, g, m, k, n));
            }
            Op::Add(a, b) => {
                let cols = out.cols();
                for &src in [a, b] {
                    let broadcast = self.value(src).rows() == 1 && out.rows() > 1;
                    acc(src, &mut |buf| {
                        if broadcast {
                            for (i, &x) in g.iter().enumerate() {
                                buf[i % cols] += x;
                            }
                        } else {
                            for (bv, &x) in buf.iter_mut().zip(g) {
                                *bv += x;
                            }
                        }
                    });
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |buf| {
                    for ((bv, &x), &y) in buf.iter_mut().zip(g).zip(vb) {
                        *bv += x * y;
                    }
                });
                acc(*b, &mut |buf| {
                    for ((bv, &x), &y) in buf.iter_mut().zip(g).zip(va) {
                        *bv += x * y;
                    }
                });
            }
            Op::Scale(a, f) => {
                let f = T::from_f64(*f);
                acc(*a, &mut |buf| {
                    for (bv, &x) in buf.iter_mut().zip(g) {
                        *bv += x * f;
                    }
                });
            }
            Op::Concat(parts, axis) => {
                let out_cols = out.cols();
                let mut offset = 0;
                for &p in parts {
                    let (pr, pc) = (self.value(p).rows(), self.value(p).cols());
                    match axis {
                        Axis::Rows => {
                            let start = offset * out_cols;
                            acc(p, &mut |buf| {
                                for (bv, &x) in buf.iter_mut().zip(&g[start..start + pr * pc]) {
                                    *bv += x;
                                }
                            });
                            offset += pr;
                        }
                        Axis::Cols => {
                            let off = offset;
                            acc(p, &mut |buf| {
                                for r in 0..pr {
                                    for c in 0..pc {
                                        buf[r * pc + c] += g[r * out_cols + off + c];
                                    }
                                }
                            });
                            offset += pc;
                        }
                    }
                }
            }
            Op::Slice { input, axis, start } => {
                let in_cols = self.value(*input).cols();
                let (rows, len) = (out.rows(), out.cols());
                let start = *start;
                acc(*input, &mut |buf| match axis {
                    Axis::Rows => {
                        for (bv, &x) in buf[start * in_cols..].iter_mut().zip(g) {
                            *bv += x;
                        }
                    }
                    Axis::Cols => {
                        for r in 0..rows {
                            for c in 0..len {
                                buf[r * in_cols + start + c] += g[r * len + c];
                            }
                        }
                    }
                });
            }
            Op::Transpose(a) => {
                let (r, c) = (self.value(*a).rows(), self.value(*a).cols());
                acc(*a, &mut |buf| {
                    for i in 0..r {
                        for j in 0..c {
                            buf[i * c + j] += g[j * r + i];
                        }
                    }
                });
            }
            Op::Mean(a) => {
                let n = T::from_f64(self.value(*a).numel() as f64);
                let d = g[0] / n;
                acc(*a, &mut |buf| buf.iter_mut().for_each(|bv| *bv += d));
            }
            Op::Sum(a) => {
                let d = g[0];
                acc(*a, &mut |buf| buf.iter_mut().for_each(|bv| *bv += d));
            }
            Op::Tanh(a) => {
                let y = out.data();
                acc(*a, &mut |buf| {
                    for ((bv, &x), &yv) in buf.iter_mut().zip(g).zip(y) {
                        *bv += x * (T::one() - yv * yv);
                    }
                });
            }
            Op::Sigmoid(a) => {
                let y = out.data();
                acc(*a, &mut |buf| {
                    for ((bv, &x), &yv) in buf.iter_mut().zip(g).zip(y) {
                        *bv += x * yv * (T::one() - yv);
                    }
                });
            }
            Op::Relu(a) => {
                let y = out.data();
                acc(*a, &mut |buf| {
                    for ((bv, &x), &yv) in buf.iter_mut().zip(g).zip(y) {
                        if yv > T::zero() {
                            *bv += x;
                        }
                    }
                });
            }
            Op::Softmax(a) => {
                let cols = out.cols();
                let y = out.data();
                acc(*a, &mut |buf| {
                    for r in 0..out.rows() {
                        let yr = &y[r * cols..(r + 1) * cols];
                        let gr = &g[r * cols..(r + 1) * cols];
                        let dot: T = yr.iter().zip(gr).map(|(&p, &q)| p * q).sum();
                        for c in 0..cols {
                            buf[r * cols + c] += yr[c] * (gr[c] - dot);
                        }
                    }
                });
            }
            Op::Embedding { table, ids } => {
                let dim = out.cols();
                acc(*table, &mut |buf| {
                    for (row, &i) in ids.iter().enumerate() {
                        for c in 0..dim {
                            buf[i * dim + c] += g[row * dim + c];
                        }
                    }
                });
            }
            Op::CrossEntropy { logits, targets } => {
                let t = self.value(*logits);
                let cols = t.cols();
                let scale = g[0].to_f64() / targets.len() as f64;
                acc(*logits, &mut |buf| {
                    for (r, &target) in targets.iter().enumerate() {
                        let p = softmax_f64(t.row_slice(r));
                        for c in 0..cols {
                            let onehot = if c == target { 1.0 } else { 0.0 };
                            buf[r * cols + c] += T::from_f64(scale * (p[c] - onehot));
                        }
                    }
                });
            }
        }
    }
}
