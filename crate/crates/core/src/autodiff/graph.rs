use super::tensor::{matmul, matmul_at, matmul_bt, transpose, Tensor};
use super::{Result, TensorError};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// `ε` added to the variance in [`Graph::layernorm`].
pub const LAYERNORM_EPS: f64 = 1e-5;

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
/// Cubic coefficient of the tanh GELU approximation.
const GELU_CUBIC: f64 = 0.044_715;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ScaleBy(Var, Var),
    Transpose(Var),
    Reshape(Var),
    Concat { inputs: Vec<Var>, axis: usize },
    Slice { input: Var, axis: usize, start: usize },
    Relu(Var),
    Gelu(Var),
    Softmax(Var),
    LayerNorm { x: Var, gain: Var, bias: Var, normalized: Vec<f64>, inv_std: Vec<f64> },
    SoftThreshold { x: Var, theta: Var },
    Sum(Var),
    Mean(Var),
    CrossEntropy { logits: Var, label: usize, probs: Vec<f64> },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Reverse-mode computation graph.
///
/// Nodes are appended in creation order, which is a topological order, so
/// [`Graph::backward`] is a single reverse sweep. A graph is built for one
/// forward pass and discarded afterwards.
#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

fn mismatch(op: &'static str, lhs: &Tensor, rhs: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        lhs: lhs.shape().to_vec(),
        rhs: rhs.shape().to_vec(),
    }
}

/// Splits a shape around `axis` into (outer, axis extent, inner).
fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn soft_threshold_value(v: f64, theta: f64) -> f64 {
    if v > theta {
        v - theta
    } else if v < -theta {
        v + theta
    } else {
        0.0
    }
}

fn gelu(x: f64) -> f64 {
    let u = SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

fn gelu_derivative(x: f64) -> f64 {
    let u = SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_CUBIC * x * x)
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Input that gradients are not tracked for.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Trainable input; its gradient is available after [`Graph::backward`].
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` loss with respect to `v`, if `v`
    /// participates in it.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        self.grads
            .get(v.0)
            .and_then(|g| g.as_ref())
            .map(|g| Tensor::with_shape(self.nodes[v.0].value.shape().to_vec(), g.clone()))
    }

    /// Like [`Graph::grad`] but zeros when `v` did not influence the loss.
    pub fn grad_or_zeros(&self, v: Var) -> Tensor {
        self.grad(v)
            .unwrap_or_else(|| Tensor::zeros(self.nodes[v.0].value.shape()))
    }

    /// 2-D matrix product.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.cols() != tb.rows() {
            return Err(mismatch("matmul", ta, tb));
        }
        let (r, k, c) = (ta.rows(), ta.cols(), tb.cols());
        let out = Tensor::with_shape(vec![r, c], matmul(ta.data(), tb.data(), r, k, c));
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    fn elementwise(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(name, ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Ok(Tensor::with_shape(ta.shape().to_vec(), data))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.elementwise(a, b, "add", |x, y| x + y)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.elementwise(a, b, "sub", |x, y| x - y)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.elementwise(a, b, "mul", |x, y| x * y)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    /// Adds a last-axis bias vector to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(bias));
        let d = tx.last_dim();
        if tb.len() != d || tb.shape().len() != 1 {
            return Err(mismatch("add_bias", tx, tb));
        }
        let data = tx
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v + tb.data()[i % d])
            .collect();
        let out = Tensor::with_shape(tx.shape().to_vec(), data);
        let rg = self.needs(&[x, bias]);
        Ok(self.push(out, Op::AddBias(x, bias), rg))
    }

    /// Multiplies by a constant.
    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let out = self.value(x).map(|v| v * factor);
        let rg = self.needs(&[x]);
        self.push(out, Op::Scale(x, factor), rg)
    }

    /// Multiplies by a one-element tensor that may itself be trainable.
    pub fn scale_by(&mut self, x: Var, factor: Var) -> Result<Var> {
        let tf = self.value(factor);
        if tf.len() != 1 {
            return Err(mismatch("scale_by", self.value(x), tf));
        }
        let s = tf.item();
        let out = self.value(x).map(|v| v * s);
        let rg = self.needs(&[x, factor]);
        Ok(self.push(out, Op::ScaleBy(x, factor), rg))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let tx = self.value(x);
        if tx.shape().len() != 2 {
            return Err(TensorError::RankMismatch {
                op: "transpose",
                expected: 2,
                shape: tx.shape().to_vec(),
            });
        }
        let out = tx.transposed();
        let rg = self.needs(&[x]);
        Ok(self.push(out, Op::Transpose(x), rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let tx = self.value(x);
        let out = Tensor::new(shape.to_vec(), tx.data().to_vec())?;
        let rg = self.needs(&[x]);
        Ok(self.push(out, Op::Reshape(x), rg))
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = self.value(*inputs.first().ok_or(TensorError::EmptyConcat)?);
        let rank = first.shape().len();
        if axis >= rank {
            return Err(TensorError::InvalidAxis { axis, rank });
        }
        let mut shape = first.shape().to_vec();
        shape[axis] = 0;
        for &v in inputs {
            let t = self.value(v);
            let same_rest = t.shape().len() == rank
                && (0..rank).all(|d| d == axis || t.shape()[d] == first.shape()[d]);
            if !same_rest {
                return Err(mismatch("concat", first, t));
            }
            shape[axis] += t.shape()[axis];
        }
        let (outer, _, inner) = axis_split(&shape, axis);
        let mut data = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            for &v in inputs {
                let t = self.value(v);
                let chunk = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let out = Tensor::with_shape(shape, data);
        let rg = self.needs(inputs);
        Ok(self.push(
            out,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Indices `start..end` along `axis`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        let tx = self.value(x);
        let rank = tx.shape().len();
        if axis >= rank {
            return Err(TensorError::InvalidAxis { axis, rank });
        }
        if start >= end || end > tx.shape()[axis] {
            return Err(TensorError::SliceOutOfRange {
                start,
                end,
                extent: tx.shape()[axis],
            });
        }
        let (outer, extent, inner) = axis_split(tx.shape(), axis);
        let width = (end - start) * inner;
        let mut data = Vec::with_capacity(outer * width);
        for o in 0..outer {
            let base = o * extent * inner + start * inner;
            data.extend_from_slice(&tx.data()[base..base + width]);
        }
        let mut shape = tx.shape().to_vec();
        shape[axis] = end - start;
        let out = Tensor::with_shape(shape, data);
        let rg = self.needs(&[x]);
        Ok(self.push(out, Op::Slice { input: x, axis, start }, rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.max(0.0));
        let rg = self.needs(&[x]);
        self.push(out, Op::Relu(x), rg)
    }

    /// GELU, tanh approximation `0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³)))`.
    pub fn gelu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(gelu);
        let rg = self.needs(&[x]);
        self.push(out, Op::Gelu(x), rg)
    }

    /// Softmax over the last axis, max-shifted.
    pub fn softmax(&mut self, x: Var) -> Var {
        let tx = self.value(x);
        let d = tx.last_dim();
        let mut data = tx.data().to_vec();
        for row in data.chunks_mut(d) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        let out = Tensor::with_shape(tx.shape().to_vec(), data);
        let rg = self.needs(&[x]);
        self.push(out, Op::Softmax(x), rg)
    }

    /// Layer normalization over the last axis with learnable gain and bias.
    pub fn layernorm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let (tx, tg, tb) = (self.value(x), self.value(gain), self.value(bias));
        let d = tx.last_dim();
        if tg.shape() != [d] {
            return Err(mismatch("layernorm gain", tx, tg));
        }
        if tb.shape() != [d] {
            return Err(mismatch("layernorm bias", tx, tb));
        }
        let rows = tx.outer_len();
        let mut normalized = Vec::with_capacity(tx.len());
        let mut inv_std = Vec::with_capacity(rows);
        for row in tx.data().chunks(d) {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
            let s = 1.0 / (var + LAYERNORM_EPS).sqrt();
            inv_std.push(s);
            normalized.extend(row.iter().map(|v| (v - mean) * s));
        }
        let data = normalized
            .iter()
            .enumerate()
            .map(|(i, &n)| n * tg.data()[i % d] + tb.data()[i % d])
            .collect();
        let out = Tensor::with_shape(tx.shape().to_vec(), data);
        let rg = self.needs(&[x, gain, bias]);
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                normalized,
                inv_std,
            },
            rg,
        ))
    }

    /// `sign(v)·max(|v| − θ, 0)` with a per-feature (last axis) threshold.
    ///
    /// The derivative is taken as 1 outside the dead zone `|v| ≤ θ` and 0
    /// inside it, including at the kink; `∂/∂θ = −sign(v)` outside.
    pub fn soft_threshold(&mut self, x: Var, theta: Var) -> Result<Var> {
        let (tx, tt) = (self.value(x), self.value(theta));
        let d = tx.last_dim();
        if tt.shape() != [d] {
            return Err(mismatch("soft_threshold", tx, tt));
        }
        let data = tx
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| soft_threshold_value(v, tt.data()[i % d]))
            .collect();
        let out = Tensor::with_shape(tx.shape().to_vec(), data);
        let rg = self.needs(&[x, theta]);
        Ok(self.push(out, Op::SoftThreshold { x, theta }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).data().iter().sum());
        let rg = self.needs(&[x]);
        self.push(out, Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let out = Tensor::scalar(t.data().iter().sum::<f64>() / t.len() as f64);
        let rg = self.needs(&[x]);
        self.push(out, Op::Mean(x), rg)
    }

    /// `−log softmax(logits)[label]` for a single logit vector.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var> {
        let t = self.value(logits);
        let classes = t.last_dim();
        if t.outer_len() != 1 {
            return Err(TensorError::RankMismatch {
                op: "cross_entropy",
                expected: 1,
                shape: t.shape().to_vec(),
            });
        }
        if label >= classes {
            return Err(TensorError::LabelOutOfRange { label, classes });
        }
        let max = t.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = t.data().iter().map(|v| (v - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let loss = sum.ln() + max - t.data()[label];
        let probs = exps.iter().map(|e| e / sum).collect();
        let rg = self.needs(&[logits]);
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy { logits, label, probs }, rg))
    }

    /// Gradients of the scalar `loss` with respect to every node that
    /// requires them. Fan-out contributions accumulate.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.value(loss).shape().to_vec();
        if self.value(loss).len() != 1 {
            return Err(TensorError::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for id in (0..=loss.0).rev() {
            if !self.nodes[id].requires_grad {
                continue;
            }
            let Some(upstream) = grads[id].take() else { continue };
            self.propagate(id, &upstream, &mut grads);
            grads[id] = Some(upstream);
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let mut send = |v: Var, contribution: Vec<f64>| {
            if !nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => {
                    for (a, c) in acc.iter_mut().zip(&contribution) {
                        *a += c;
                    }
                }
                slot @ None => *slot = Some(contribution),
            }
        };
        let val = |v: Var| &nodes[v.0].value;
        let out = &nodes[id].value;

        match &nodes[id].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let (r, k, c) = (ta.rows(), ta.cols(), tb.cols());
                if nodes[a.0].requires_grad {
                    send(*a, matmul_bt(g, tb.data(), r, c, k));
                }
                if nodes[b.0].requires_grad {
                    send(*b, matmul_at(ta.data(), g, r, k, c));
                }
            }
            Op::Add(a, b) => {
                send(*a, g.to_vec());
                send(*b, g.to_vec());
            }
            Op::Sub(a, b) => {
                send(*a, g.to_vec());
                send(*b, g.iter().map(|v| -v).collect());
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                send(*a, g.iter().zip(tb.data()).map(|(x, y)| x * y).collect());
                send(*b, g.iter().zip(ta.data()).map(|(x, y)| x * y).collect());
            }
            Op::AddBias(x, bias) => {
                let d = val(*bias).len();
                let mut gb = vec![0.0; d];
                for row in g.chunks(d) {
                    for (acc, v) in gb.iter_mut().zip(row) {
                        *acc += v;
                    }
                }
                send(*x, g.to_vec());
                send(*bias, gb);
            }
            Op::Scale(x, factor) => send(*x, g.iter().map(|v| v * factor).collect()),
            Op::ScaleBy(x, factor) => {
                let s = val(*factor).item();
                let tx = val(*x);
                send(*x, g.iter().map(|v| v * s).collect());
                send(*factor, vec![g.iter().zip(tx.data()).map(|(a, b)| a * b).sum()]);
            }
            Op::Transpose(x) => {
                // `out` is c×r; the gradient goes back to r×c.
                send(*x, transpose(g, out.rows(), out.cols()));
            }
            Op::Reshape(x) => send(*x, g.to_vec()),
            Op::Concat { inputs, axis } => {
                let (outer, _, inner) = axis_split(out.shape(), *axis);
                let total = out.shape()[*axis] * inner;
                let mut offset = 0;
                for &v in inputs {
                    let chunk = val(v).shape()[*axis] * inner;
                    let mut part = Vec::with_capacity(val(v).len());
                    for o in 0..outer {
                        let base = o * total + offset;
                        part.extend_from_slice(&g[base..base + chunk]);
                    }
                    offset += chunk;
                    send(v, part);
                }
            }
            Op::Slice { input, axis, start } => {
                let tx = val(*input);
                let (outer, extent, inner) = axis_split(tx.shape(), *axis);
                let width = out.shape()[*axis] * inner;
                let mut full = vec![0.0; tx.len()];
                for o in 0..outer {
                    let base = o * extent * inner + start * inner;
                    full[base..base + width].copy_from_slice(&g[o * width..(o + 1) * width]);
                }
                send(*input, full);
            }
            Op::Relu(x) => send(
                *x,
                g.iter()
                    .zip(val(*x).data())
                    .map(|(gv, &xv)| if xv > 0.0 { *gv } else { 0.0 })
                    .collect(),
            ),
            Op::Gelu(x) => send(
                *x,
                g.iter()
                    .zip(val(*x).data())
                    .map(|(gv, &xv)| gv * gelu_derivative(xv))
                    .collect(),
            ),
            Op::Softmax(x) => {
                let d = out.last_dim();
                let mut gx = Vec::with_capacity(out.len());
                for (y, gy) in out.data().chunks(d).zip(g.chunks(d)) {
                    let dot: f64 = y.iter().zip(gy).map(|(a, b)| a * b).sum();
                    gx.extend(y.iter().zip(gy).map(|(yi, gi)| yi * (gi - dot)));
                }
                send(*x, gx);
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                normalized,
                inv_std,
            } => {
                let tg = val(*gain);
                let d = tg.len();
                let mut g_gain = vec![0.0; d];
                let mut g_bias = vec![0.0; d];
                let mut gx = Vec::with_capacity(g.len());
                for ((gy, xhat), &s) in g.chunks(d).zip(normalized.chunks(d)).zip(inv_std) {
                    let mut mean_dxhat = 0.0;
                    let mut mean_dxhat_xhat = 0.0;
                    for j in 0..d {
                        g_gain[j] += gy[j] * xhat[j];
                        g_bias[j] += gy[j];
                        let dxhat = gy[j] * tg.data()[j];
                        mean_dxhat += dxhat;
                        mean_dxhat_xhat += dxhat * xhat[j];
                    }
                    mean_dxhat /= d as f64;
                    mean_dxhat_xhat /= d as f64;
                    for j in 0..d {
                        let dxhat = gy[j] * tg.data()[j];
                        gx.push(s * (dxhat - mean_dxhat - xhat[j] * mean_dxhat_xhat));
                    }
                }
                send(*x, gx);
                send(*gain, g_gain);
                send(*bias, g_bias);
            }
            Op::SoftThreshold { x, theta } => {
                let (tx, tt) = (val(*x), val(*theta));
                let d = tt.len();
                let mut gx = Vec::with_capacity(g.len());
                let mut g_theta = vec![0.0; d];
                for (i, (&gv, &xv)) in g.iter().zip(tx.data()).enumerate() {
                    let th = tt.data()[i % d];
                    if xv.abs() > th {
                        gx.push(gv);
                        g_theta[i % d] -= xv.signum() * gv;
                    } else {
                        gx.push(0.0);
                    }
                }
                send(*x, gx);
                send(*theta, g_theta);
            }
            Op::Sum(x) => send(*x, vec![g[0]; val(*x).len()]),
            Op::Mean(x) => {
                let n = val(*x).len();
                send(*x, vec![g[0] / n as f64; n]);
            }
            Op::CrossEntropy { logits, label, probs } => {
                let mut gl: Vec<f64> = probs.iter().map(|p| p * g[0]).collect();
                gl[*label] -= g[0];
                send(*logits, gl);
            }
        }
    }
}
