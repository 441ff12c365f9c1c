//! Reverse-mode differentiation over a linear tape of primitive operations.
//!
//! A [`Graph`] owns every intermediate value. Operations append nodes and
//! return [`NodeId`] handles; [`Graph::backward`] walks the tape in reverse
//! and accumulates gradients for every leaf flagged as requiring them.
//! Tape order is construction order, which is topological by construction.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul,
    Add,
    Sub,
    Mul,
    AddVec,
    Sigmoid,
    Tanh,
    Exp,
    Log,
    /// y = a*x + b, elementwise with constant coefficients.
    Affine { a: T },
    MeanAxis { axis: usize },
    MaxAxis { axis: usize, arg: Vec<usize> },
    Stack0,
    Index0 { index: usize },
    /// Mean over the batch of softmax cross-entropy from raw logits.
    /// Forward caches the softmax probabilities for the backward pass.
    XentMean { labels: Vec<usize>, probs: Tensor<T> },
    /// Fused elementwise recurrence over `[T, B, H]` gate tensors:
    /// `c_t = f_t*c_{t-1} + (1-f_t)*x̃_t`, `h_t = r_t*tanh(c_t) + (1-r_t)*hw_t`.
    /// Forward caches the cell states and their tanh for the backward scan.
    SruScan { c: Tensor<T>, th: Tensor<T> },
}

struct Node<T> {
    op: Op<T>,
    inputs: Vec<NodeId>,
    value: Tensor<T>,
    requires_grad: bool,
}

/// The primitive vocabulary, for callers that drive the engine generically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    MatMul,
    Add,
    Sub,
    Mul,
    AddVec,
    Sigmoid,
    Tanh,
    Exp,
    Log,
    MeanAxis(usize),
    MaxAxis(usize),
    Concat,
}

pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
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

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> NodeId {
        self.push_unchecked(Op::Leaf, vec![], value, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> NodeId {
        self.leaf(value, false)
    }

    fn push_unchecked(
        &mut self,
        op: Op<T>,
        inputs: Vec<NodeId>,
        value: Tensor<T>,
        requires_grad: bool,
    ) -> NodeId {
        self.nodes.push(Node {
            op,
            inputs,
            value,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn push(&mut self, name: &'static str, op: Op<T>, inputs: Vec<NodeId>, value: Tensor<T>) -> Result<NodeId> {
        if !value.all_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let requires_grad = inputs.iter().any(|&i| self.nodes[i.0].requires_grad);
        Ok(self.push_unchecked(op, inputs, value, requires_grad))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul(self.value(b))?;
        self.push("matmul", Op::MatMul, vec![a, b], v)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).add(self.value(b))?;
        self.push("add", Op::Add, vec![a, b], v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).sub(self.value(b))?;
        self.push("sub", Op::Sub, vec![a, b], v)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).mul(self.value(b))?;
        self.push("mul", Op::Mul, vec![a, b], v)
    }

    pub fn add_vec(&mut self, x: NodeId, v: NodeId) -> Result<NodeId> {
        let val = self.value(x).add_vec(self.value(v))?;
        self.push("add_vec", Op::AddVec, vec![x, v], val)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        let half = T::from_f64(0.5);
        // tanh-based form is stable for large |x| of either sign
        let v = self.value(x).map(|v| half * ((v * half).fast_tanh() + T::one()));
        self.push("sigmoid", Op::Sigmoid, vec![x], v)
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x).map(|v| v.fast_tanh());
        self.push("tanh", Op::Tanh, vec![x], v)
    }

    pub fn exp(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x).map(|v| v.exp());
        self.push("exp", Op::Exp, vec![x], v)
    }

    pub fn log(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x).map(|v| v.ln());
        self.push("log", Op::Log, vec![x], v)
    }

    pub fn affine(&mut self, x: NodeId, a: T, b: T) -> Result<NodeId> {
        let v = self.value(x).map(|v| a * v + b);
        self.push("affine", Op::Affine { a }, vec![x], v)
    }

    pub fn scale(&mut self, x: NodeId, k: T) -> Result<NodeId> {
        self.affine(x, k, T::zero())
    }

    /// 1 - x, elementwise. The gate complement of the SRU/LSTM updates.
    pub fn one_minus(&mut self, x: NodeId) -> Result<NodeId> {
        self.affine(x, -T::one(), T::one())
    }

    pub fn mean_axis(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        let v = self.value(x).mean_axis(axis)?;
        self.push("mean_axis", Op::MeanAxis { axis }, vec![x], v)
    }

    pub fn max_axis(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        let (v, arg) = self.value(x).max_axis(axis)?;
        self.push("max_axis", Op::MaxAxis { axis, arg }, vec![x], v)
    }

    pub fn stack0(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let tensors: Vec<&Tensor<T>> = parts.iter().map(|&p| self.value(p)).collect();
        let v = Tensor::stack0(&tensors)?;
        self.push("stack0", Op::Stack0, parts.to_vec(), v)
    }

    pub fn index0(&mut self, x: NodeId, index: usize) -> Result<NodeId> {
        let v = self.value(x).index0(index)?;
        self.push("index0", Op::Index0 { index }, vec![x], v)
    }

    /// Fused SRU state recurrence from zero initial state. All four inputs
    /// are `[T, B, H]`: forget gate, reset gate, transformed input, and the
    /// highway path. Equivalent to the per-timestep formulation but runs the
    /// whole scan in two passes instead of ~10 tape nodes per step.
    pub fn sru_scan(&mut self, f: NodeId, r: NodeId, x_tilde: NodeId, hw: NodeId) -> Result<NodeId> {
        let shape = self.value(f).shape().to_vec();
        if shape.len() != 3 {
            return Err(Error::invalid(format!(
                "sru_scan expects [time, batch, hidden] gates, got {shape:?}"
            )));
        }
        for &id in &[r, x_tilde, hw] {
            if self.value(id).shape() != shape {
                return Err(Error::ShapeMismatch {
                    op: "sru_scan",
                    lhs: shape,
                    rhs: self.value(id).shape().to_vec(),
                });
            }
        }
        let (t_len, chunk) = (shape[0], shape[1] * shape[2]);
        let one = T::one();
        let fd = self.value(f).data();
        let rd = self.value(r).data();
        let xd = self.value(x_tilde).data();
        let hd = self.value(hw).data();
        let mut c = vec![T::zero(); t_len * chunk];
        let mut th = vec![T::zero(); t_len * chunk];
        let mut out = vec![T::zero(); t_len * chunk];
        for t in 0..t_len {
            let base = t * chunk;
            for i in 0..chunk {
                let j = base + i;
                let ci = if t == 0 {
                    (one - fd[j]) * xd[j]
                } else {
                    fd[j] * c[j - chunk] + (one - fd[j]) * xd[j]
                };
                let t_ci = ci.fast_tanh();
                c[j] = ci;
                th[j] = t_ci;
                out[j] = rd[j] * t_ci + (one - rd[j]) * hd[j];
            }
        }
        let op = Op::SruScan {
            c: Tensor::from_vec(shape.clone(), c)?,
            th: Tensor::from_vec(shape.clone(), th)?,
        };
        let value = Tensor::from_vec(shape, out)?;
        self.push("sru_scan", op, vec![f, r, x_tilde, hw], value)
    }

    /// Mean softmax cross-entropy over a batch of logit rows `[B, C]`.
    pub fn xent_mean(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let lv = self.value(logits);
        if lv.ndim() != 2 {
            return Err(Error::invalid(format!(
                "xent_mean expects [batch, classes] logits, got shape {:?}",
                lv.shape()
            )));
        }
        let (b, c) = (lv.shape()[0], lv.shape()[1]);
        if labels.len() != b {
            return Err(Error::invalid(format!(
                "xent_mean: {} labels for batch of {b}",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {c} classes"
            )));
        }
        let mut probs = vec![T::zero(); b * c];
        let mut total = T::zero();
        for (bi, (row, &label)) in lv.data().chunks(c).zip(labels).enumerate() {
            let m = row.iter().cloned().fold(T::neg_infinity(), T::max);
            let mut z = T::zero();
            for &v in row {
                z = z + (v - m).exp();
            }
            let lse = m + z.ln();
            total = total + lse - row[label];
            for (ci, &v) in row.iter().enumerate() {
                probs[bi * c + ci] = (v - m).exp() / z;
            }
        }
        let loss = total / T::from_f64(b as f64);
        let probs = Tensor::from_vec(vec![b, c], probs)?;
        self.push(
            "xent_mean",
            Op::XentMean {
                labels: labels.to_vec(),
                probs,
            },
            vec![logits],
            Tensor::scalar(loss),
        )
    }

    /// Generic dispatcher over the primitive vocabulary.
    pub fn apply(&mut self, p: Primitive, inputs: &[NodeId]) -> Result<NodeId> {
        let want = |n: usize| -> Result<()> {
            if inputs.len() != n {
                Err(Error::invalid(format!(
                    "{p:?} takes {n} inputs, got {}",
                    inputs.len()
                )))
            } else {
                Ok(())
            }
        };
        match p {
            Primitive::MatMul => {
                want(2)?;
                self.matmul(inputs[0], inputs[1])
            }
            Primitive::Add => {
                want(2)?;
                self.add(inputs[0], inputs[1])
            }
            Primitive::Sub => {
                want(2)?;
                self.sub(inputs[0], inputs[1])
            }
            Primitive::Mul => {
                want(2)?;
                self.mul(inputs[0], inputs[1])
            }
            Primitive::AddVec => {
                want(2)?;
                self.add_vec(inputs[0], inputs[1])
            }
            Primitive::Sigmoid => {
                want(1)?;
                self.sigmoid(inputs[0])
            }
            Primitive::Tanh => {
                want(1)?;
                self.tanh(inputs[0])
            }
            Primitive::Exp => {
                want(1)?;
                self.exp(inputs[0])
            }
            Primitive::Log => {
                want(1)?;
                self.log(inputs[0])
            }
            Primitive::MeanAxis(ax) => {
                want(1)?;
                self.mean_axis(inputs[0], ax)
            }
            Primitive::MaxAxis(ax) => {
                want(1)?;
                self.max_axis(inputs[0], ax)
            }
            Primitive::Concat => self.stack0(inputs),
        }
    }

    /// Reverse pass from a scalar loss. Flagged leaves unreachable from the
    /// loss receive zero gradients.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<T>> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::invalid(format!(
                "backward requires a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(T::one()));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(dy) = grads[idx].take() else { continue };
            self.propagate(idx, &dy, &mut grads)?;
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(dy);
            }
        }

        // zero-fill unreached grad-requiring leaves
        for (idx, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) && node.requires_grad && grads[idx].is_none() {
                grads[idx] = Some(Tensor::zeros(node.value.shape()));
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(
        &self,
        grads: &mut [Option<Tensor<T>>],
        target: NodeId,
        delta: Tensor<T>,
    ) -> Result<()> {
        if !self.nodes[target.0].requires_grad {
            return Ok(());
        }
        match grads[target.0].take() {
            Some(existing) => grads[target.0] = Some(existing.add(&delta)?),
            None => grads[target.0] = Some(delta),
        }
        Ok(())
    }

    fn propagate(
        &self,
        idx: usize,
        dy: &Tensor<T>,
        grads: &mut [Option<Tensor<T>>],
    ) -> Result<()> {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul => {
                let (a, b) = (node.inputs[0], node.inputs[1]);
                let av = self.value(a);
                let bv = self.value(b);
                let k = *av.shape().last().unwrap();
                let m = av.numel() / k;
                let n = bv.shape()[1];
                if self.nodes[a.0].requires_grad {
                    // dA = dY * B^T   (M x n) * (n x k)
                    let mut da = vec![T::zero(); m * k];
                    unsafe {
                        T::gemm(
                            m,
                            n,
                            k,
                            T::one(),
                            dy.data().as_ptr(),
                            n as isize,
                            1,
                            bv.data().as_ptr(),
                            1,
                            n as isize,
                            T::zero(),
                            da.as_mut_ptr(),
                            k as isize,
                            1,
                        );
                    }
                    self.accumulate(grads, a, Tensor::from_vec(av.shape().to_vec(), da)?)?;
                }
                if self.nodes[b.0].requires_grad {
                    // dB = A^T * dY   (k x M) * (M x n)
                    let mut db = vec![T::zero(); k * n];
                    unsafe {
                        T::gemm(
                            k,
                            m,
                            n,
                            T::one(),
                            av.data().as_ptr(),
                            1,
                            k as isize,
                            dy.data().as_ptr(),
                            n as isize,
                            1,
                            T::zero(),
                            db.as_mut_ptr(),
                            n as isize,
                            1,
                        );
                    }
                    self.accumulate(grads, b, Tensor::from_vec(bv.shape().to_vec(), db)?)?;
                }
            }
            Op::Add => {
                self.accumulate(grads, node.inputs[0], dy.clone())?;
                self.accumulate(grads, node.inputs[1], dy.clone())?;
            }
            Op::Sub => {
                self.accumulate(grads, node.inputs[0], dy.clone())?;
                self.accumulate(grads, node.inputs[1], dy.scale(-T::one()))?;
            }
            Op::Mul => {
                let (a, b) = (node.inputs[0], node.inputs[1]);
                if self.nodes[a.0].requires_grad {
                    self.accumulate(grads, a, dy.mul(self.value(b))?)?;
                }
                if self.nodes[b.0].requires_grad {
                    self.accumulate(grads, b, dy.mul(self.value(a))?)?;
                }
            }
            Op::AddVec => {
                let (x, v) = (node.inputs[0], node.inputs[1]);
                self.accumulate(grads, x, dy.clone())?;
                if self.nodes[v.0].requires_grad {
                    let d = *self.value(v).shape().last().unwrap();
                    let mut dv = vec![T::zero(); d];
                    for row in dy.data().chunks(d) {
                        for (o, &g) in dv.iter_mut().zip(row) {
                            *o = *o + g;
                        }
                    }
                    self.accumulate(grads, v, Tensor::from_vec(vec![d], dv)?)?;
                }
            }
            Op::Sigmoid => {
                let y = &node.value;
                let dx = dy.zip(y, "sigmoid_bwd", |g, s| g * s * (T::one() - s))?;
                self.accumulate(grads, node.inputs[0], dx)?;
            }
            Op::Tanh => {
                let y = &node.value;
                let dx = dy.zip(y, "tanh_bwd", |g, t| g * (T::one() - t * t))?;
                self.accumulate(grads, node.inputs[0], dx)?;
            }
            Op::Exp => {
                let dx = dy.mul(&node.value)?;
                self.accumulate(grads, node.inputs[0], dx)?;
            }
            Op::Log => {
                let x = self.value(node.inputs[0]);
                let dx = dy.zip(x, "log_bwd", |g, v| g / v)?;
                self.accumulate(grads, node.inputs[0], dx)?;
            }
            Op::Affine { a } => {
                self.accumulate(grads, node.inputs[0], dy.scale(*a))?;
            }
            Op::MeanAxis { axis } => {
                let x = self.value(node.inputs[0]);
                let shape = x.shape();
                let outer: usize = shape[..*axis].iter().product();
                let len = shape[*axis];
                let inner: usize = shape[*axis + 1..].iter().product();
                let inv = T::one() / T::from_f64(len as f64);
                let mut dx = vec![T::zero(); x.numel()];
                for o in 0..outer {
                    for l in 0..len {
                        let base = (o * len + l) * inner;
                        for i in 0..inner {
                            dx[base + i] = dy.data()[o * inner + i] * inv;
                        }
                    }
                }
                self.accumulate(grads, node.inputs[0], Tensor::from_vec(shape.to_vec(), dx)?)?;
            }
            Op::MaxAxis { axis, arg } => {
                let x = self.value(node.inputs[0]);
                let shape = x.shape();
                let len = shape[*axis];
                let inner: usize = shape[*axis + 1..].iter().product();
                let mut dx = vec![T::zero(); x.numel()];
                for (oi, &winner) in arg.iter().enumerate() {
                    let o = oi / inner;
                    let i = oi % inner;
                    dx[(o * len + winner) * inner + i] = dy.data()[oi];
                }
                self.accumulate(grads, node.inputs[0], Tensor::from_vec(shape.to_vec(), dx)?)?;
            }
            Op::Stack0 => {
                let chunk = node.value.numel() / node.inputs.len();
                for (pi, &inp) in node.inputs.iter().enumerate() {
                    if !self.nodes[inp.0].requires_grad {
                        continue;
                    }
                    let part = Tensor::from_vec(
                        self.value(inp).shape().to_vec(),
                        dy.data()[pi * chunk..(pi + 1) * chunk].to_vec(),
                    )?;
                    self.accumulate(grads, inp, part)?;
                }
            }
            Op::Index0 { index } => {
                let x = self.value(node.inputs[0]);
                let chunk = dy.numel();
                let mut dx = vec![T::zero(); x.numel()];
                dx[index * chunk..(index + 1) * chunk].copy_from_slice(dy.data());
                self.accumulate(
                    grads,
                    node.inputs[0],
                    Tensor::from_vec(x.shape().to_vec(), dx)?,
                )?;
            }
            Op::SruScan { c, th } => {
                let (f, r, x_tilde, hw) =
                    (node.inputs[0], node.inputs[1], node.inputs[2], node.inputs[3]);
                let shape = c.shape();
                let (t_len, chunk) = (shape[0], shape[1] * shape[2]);
                let one = T::one();
                let fd = self.value(f).data();
                let rd = self.value(r).data();
                let xd = self.value(x_tilde).data();
                let hd = self.value(hw).data();
                let cd = c.data();
                let thd = th.data();
                let gd = dy.data();
                let mut df = vec![T::zero(); t_len * chunk];
                let mut dr = vec![T::zero(); t_len * chunk];
                let mut dxt = vec![T::zero(); t_len * chunk];
                let mut dhw = vec![T::zero(); t_len * chunk];
                // reverse scan: `acc` carries dL/dc_t contributions from t+1
                let mut acc = vec![T::zero(); chunk];
                for t in (0..t_len).rev() {
                    let base = t * chunk;
                    for i in 0..chunk {
                        let j = base + i;
                        let g = gd[j];
                        dr[j] = g * (thd[j] - hd[j]);
                        dhw[j] = g * (one - rd[j]);
                        let dc = g * rd[j] * (one - thd[j] * thd[j]) + acc[i];
                        let c_prev = if t == 0 { T::zero() } else { cd[j - chunk] };
                        df[j] = dc * (c_prev - xd[j]);
                        dxt[j] = dc * (one - fd[j]);
                        acc[i] = dc * fd[j];
                    }
                }
                let shape = shape.to_vec();
                for (target, data) in [(f, df), (r, dr), (x_tilde, dxt), (hw, dhw)] {
                    if self.nodes[target.0].requires_grad {
                        self.accumulate(grads, target, Tensor::from_vec(shape.clone(), data)?)?;
                    }
                }
            }
            Op::XentMean { labels, probs } => {
                let b = labels.len();
                let c = probs.shape()[1];
                let scale = dy.item() / T::from_f64(b as f64);
                let mut dx = probs.data().to_vec();
                for (bi, &label) in labels.iter().enumerate() {
                    dx[bi * c + label] = dx[bi * c + label] - T::one();
                }
                for v in &mut dx {
                    *v = *v * scale;
                }
                self.accumulate(
                    grads,
                    node.inputs[0],
                    Tensor::from_vec(vec![b, c], dx)?,
                )?;
            }
        }
        Ok(())
    }
}

pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, id: NodeId) -> Option<&Tensor<T>> {
        self.grads[id.0].as_ref()
    }
}
