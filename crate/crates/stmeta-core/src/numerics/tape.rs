//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every forward operation as a node; [`Tape::backward`]
//! walks the record once in reverse, accumulating the total derivative for
//! every gradient-tracked leaf, and then resets the tape for the next step.
//!
//! Binary elementwise operations require equal shapes; the only implicit
//! broadcast is a one-element (scalar) operand. Structured broadcasts exist
//! as explicit operations (`add_bias`, `scale_rows`, `block_apply`) so that
//! shape mistakes in model wiring fail loudly.

use super::tensor::{matmul_raw, Tensor};
use super::NumericsError;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Elementwise binary operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryKind {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Binary(BinaryKind, Var, Var),
    /// x: m×n plus a length-n bias replicated over rows.
    AddBias(Var, Var),
    /// x: m×n scaled per row by s: m×1.
    ScaleRows(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    LeakyRelu(Var, f64),
    SoftmaxRows(Var),
    Concat(Vec<Var>, usize),
    ReduceMean(Var, usize),
    MeanAll(Var),
    SliceCol(Var, usize),
    /// t (b×b) applied to each b-row block of x ((B·b)×n).
    BlockApply(Var, Var),
}

struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

/// Gradients produced by one backward pass, keyed by the node indices the
/// tape assigned before it was reset.
pub struct Gradients {
    slots: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. the tensor behind `var`, if tracked.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.slots.get(var.0).and_then(|s| s.as_ref())
    }

    /// Like [`Gradients::get`] but falls back to a zero tensor of the given
    /// shape for leaves the loss never touched.
    pub fn get_or_zeros(&self, var: Var, shape: &[usize]) -> Tensor {
        match self.get(var) {
            Some(t) => t.clone(),
            None => Tensor::zeros(shape.to_vec()),
        }
    }
}

/// Recording tape. Confined to one worker; reset by `backward`.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Inserts a constant (non-differentiated) leaf.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, false)
    }

    /// Inserts a gradient-tracked leaf.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, true)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> Var {
        self.nodes.push(Node { op, value, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn push_derived(&mut self, op: Op, value: Tensor, inputs: &[Var]) -> Var {
        let needs = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.push(op, value, needs)
    }

    fn shape_of(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    // ── Forward operations ──────────────────────────────────────────────

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (sa, sb) = (self.shape_of(a).to_vec(), self.shape_of(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(NumericsError::ShapeMismatch {
                op: "matmul",
                lhs: sa,
                rhs: sb,
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let values = matmul_raw(
            self.nodes[a.0].value.values(),
            self.nodes[b.0].value.values(),
            m,
            k,
            n,
        );
        let out = Tensor::from_vec(vec![m, n], values)?;
        Ok(self.push_derived(Op::MatMul(a, b), out, &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.binary(BinaryKind::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.binary(BinaryKind::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.binary(BinaryKind::Mul, a, b)
    }

    /// Elementwise binary op; operands must have equal shapes, except that
    /// either side may be a single-element scalar.
    pub fn binary(&mut self, kind: BinaryKind, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let compatible = ta.shape() == tb.shape() || ta.is_scalar() || tb.is_scalar();
        if !compatible {
            return Err(NumericsError::ShapeMismatch {
                op: match kind {
                    BinaryKind::Add => "add",
                    BinaryKind::Sub => "sub",
                    BinaryKind::Mul => "mul",
                },
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let (out_shape, numel) = if ta.is_scalar() && !tb.is_scalar() {
            (tb.shape().to_vec(), tb.numel())
        } else {
            (ta.shape().to_vec(), ta.numel())
        };
        let f = |x: f64, y: f64| match kind {
            BinaryKind::Add => x + y,
            BinaryKind::Sub => x - y,
            BinaryKind::Mul => x * y,
        };
        let mut values = Vec::with_capacity(numel);
        for i in 0..numel {
            let x = if ta.is_scalar() { ta.values()[0] } else { ta.values()[i] };
            let y = if tb.is_scalar() { tb.values()[0] } else { tb.values()[i] };
            values.push(f(x, y));
        }
        let out = Tensor::from_vec(out_shape, values)?;
        Ok(self.push_derived(Op::Binary(kind, a, b), out, &[a, b]))
    }

    /// Adds a length-n (or 1×n) bias to every row of an m×n tensor.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var, NumericsError> {
        let (tx, tb) = (&self.nodes[x.0].value, &self.nodes[bias.0].value);
        let n = tx.cols();
        if tx.shape().len() != 2 || tb.numel() != n {
            return Err(NumericsError::ShapeMismatch {
                op: "add_bias",
                lhs: tx.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let m = tx.rows();
        let mut values = Vec::with_capacity(m * n);
        for i in 0..m {
            for j in 0..n {
                values.push(tx.values()[i * n + j] + tb.values()[j]);
            }
        }
        let out = Tensor::from_vec(vec![m, n], values)?;
        Ok(self.push_derived(Op::AddBias(x, bias), out, &[x, bias]))
    }

    /// Multiplies row i of an m×n tensor by element i of an m×1 column.
    pub fn scale_rows(&mut self, x: Var, scale: Var) -> Result<Var, NumericsError> {
        let (tx, ts) = (&self.nodes[x.0].value, &self.nodes[scale.0].value);
        let m = tx.rows();
        if tx.shape().len() != 2 || ts.numel() != m {
            return Err(NumericsError::ShapeMismatch {
                op: "scale_rows",
                lhs: tx.shape().to_vec(),
                rhs: ts.shape().to_vec(),
            });
        }
        let n = tx.cols();
        let mut values = Vec::with_capacity(m * n);
        for i in 0..m {
            let s = ts.values()[i];
            for j in 0..n {
                values.push(tx.values()[i * n + j] * s);
            }
        }
        let out = Tensor::from_vec(vec![m, n], values)?;
        Ok(self.push_derived(Op::ScaleRows(x, scale), out, &[x, scale]))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let values = self.nodes[x.0]
            .value
            .values()
            .iter()
            .map(|&v| sigmoid(v))
            .collect();
        let out = Tensor::from_vec(self.shape_of(x).to_vec(), values).expect("same shape");
        self.push_derived(Op::Sigmoid(x), out, &[x])
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let values = self.nodes[x.0].value.values().iter().map(|v| v.tanh()).collect();
        let out = Tensor::from_vec(self.shape_of(x).to_vec(), values).expect("same shape");
        self.push_derived(Op::Tanh(x), out, &[x])
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let values = self.nodes[x.0]
            .value
            .values()
            .iter()
            .map(|&v| if v >= 0.0 { v } else { slope * v })
            .collect();
        let out = Tensor::from_vec(self.shape_of(x).to_vec(), values).expect("same shape");
        self.push_derived(Op::LeakyRelu(x, slope), out, &[x])
    }

    /// Row-wise softmax of an m×n tensor, computed with max subtraction.
    pub fn softmax_rows(&mut self, x: Var) -> Result<Var, NumericsError> {
        let tx = &self.nodes[x.0].value;
        if tx.shape().len() != 2 {
            return Err(NumericsError::BadShape {
                what: format!("softmax_rows needs a 2-D tensor, got {:?}", tx.shape()),
            });
        }
        let (m, n) = (tx.rows(), tx.cols());
        let mut values = vec![0.0; m * n];
        for i in 0..m {
            let row = &tx.values()[i * n..(i + 1) * n];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..n {
                let e = (row[j] - max).exp();
                values[i * n + j] = e;
                sum += e;
            }
            for j in 0..n {
                values[i * n + j] /= sum;
            }
        }
        let out = Tensor::from_vec(vec![m, n], values)?;
        Ok(self.push_derived(Op::SoftmaxRows(x), out, &[x]))
    }

    /// Concatenates 2-D tensors along `axis` (0 = rows, 1 = columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, NumericsError> {
        if parts.is_empty() || axis > 1 {
            return Err(NumericsError::BadShape {
                what: format!("concat of {} tensors along axis {axis}", parts.len()),
            });
        }
        let first = self.shape_of(parts[0]).to_vec();
        if first.len() != 2 {
            return Err(NumericsError::BadShape {
                what: format!("concat needs 2-D tensors, got {first:?}"),
            });
        }
        let other_axis = 1 - axis;
        for p in parts {
            let s = self.shape_of(*p);
            if s.len() != 2 || s[other_axis] != first[other_axis] {
                return Err(NumericsError::ShapeMismatch {
                    op: "concat",
                    lhs: first,
                    rhs: s.to_vec(),
                });
            }
        }
        let concat_len: usize = parts.iter().map(|p| self.shape_of(*p)[axis]).sum();
        let mut shape = first.clone();
        shape[axis] = concat_len;
        let (m, n) = (shape[0], shape[1]);
        let mut values = vec![0.0; m * n];
        if axis == 0 {
            let mut row0 = 0;
            for p in parts {
                let t = &self.nodes[p.0].value;
                let rows = t.rows();
                values[row0 * n..(row0 + rows) * n].copy_from_slice(t.values());
                row0 += rows;
            }
        } else {
            let mut col0 = 0;
            for p in parts {
                let t = &self.nodes[p.0].value;
                let cols = t.cols();
                for i in 0..m {
                    values[i * n + col0..i * n + col0 + cols]
                        .copy_from_slice(&t.values()[i * cols..(i + 1) * cols]);
                }
                col0 += cols;
            }
        }
        let out = Tensor::from_vec(shape, values)?;
        let inputs = parts.to_vec();
        Ok(self.push_derived(Op::Concat(inputs.clone(), axis), out, &inputs))
    }

    /// Mean along one axis of a 2-D tensor: axis 0 gives 1×n, axis 1 gives m×1.
    pub fn reduce_mean(&mut self, x: Var, axis: usize) -> Result<Var, NumericsError> {
        let tx = &self.nodes[x.0].value;
        if tx.shape().len() != 2 || axis > 1 {
            return Err(NumericsError::BadShape {
                what: format!("reduce_mean axis {axis} on {:?}", tx.shape()),
            });
        }
        let (m, n) = (tx.rows(), tx.cols());
        let out = if axis == 0 {
            let mut values = vec![0.0; n];
            for i in 0..m {
                for j in 0..n {
                    values[j] += tx.values()[i * n + j];
                }
            }
            for v in &mut values {
                *v /= m as f64;
            }
            Tensor::from_vec(vec![1, n], values)?
        } else {
            let mut values = vec![0.0; m];
            for i in 0..m {
                values[i] = tx.values()[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64;
            }
            Tensor::from_vec(vec![m, 1], values)?
        };
        Ok(self.push_derived(Op::ReduceMean(x, axis), out, &[x]))
    }

    /// Mean over every element, yielding a scalar node.
    pub fn mean_all(&mut self, x: Var) -> Var {
        let tx = &self.nodes[x.0].value;
        let mean = tx.values().iter().sum::<f64>() / tx.numel() as f64;
        self.push_derived(Op::MeanAll(x), Tensor::scalar(mean), &[x])
    }

    /// Extracts column j of an m×n tensor as m×1.
    pub fn slice_col(&mut self, x: Var, col: usize) -> Result<Var, NumericsError> {
        let tx = &self.nodes[x.0].value;
        let (m, n) = (tx.rows(), tx.cols());
        if tx.shape().len() != 2 || col >= n {
            return Err(NumericsError::BadShape {
                what: format!("slice_col {col} of {:?}", tx.shape()),
            });
        }
        let values = (0..m).map(|i| tx.values()[i * n + col]).collect();
        let out = Tensor::from_vec(vec![m, 1], values)?;
        Ok(self.push_derived(Op::SliceCol(x, col), out, &[x]))
    }

    /// Applies a b×b operator to every b-row block of a (B·b)×n tensor.
    ///
    /// Used to run one graph operator over a whole mini-batch stacked along
    /// the row axis.
    pub fn block_apply(&mut self, t: Var, x: Var) -> Result<Var, NumericsError> {
        let (tt, tx) = (&self.nodes[t.0].value, &self.nodes[x.0].value);
        let b = tt.rows();
        if tt.shape().len() != 2 || tt.cols() != b || tx.shape().len() != 2 || tx.rows() % b != 0 {
            return Err(NumericsError::ShapeMismatch {
                op: "block_apply",
                lhs: tt.shape().to_vec(),
                rhs: tx.shape().to_vec(),
            });
        }
        let n = tx.cols();
        let blocks = tx.rows() / b;
        let mut values = vec![0.0; tx.numel()];
        for blk in 0..blocks {
            let xb = &tx.values()[blk * b * n..(blk + 1) * b * n];
            let yb = matmul_raw(tt.values(), xb, b, b, n);
            values[blk * b * n..(blk + 1) * b * n].copy_from_slice(&yb);
        }
        let out = Tensor::from_vec(tx.shape().to_vec(), values)?;
        Ok(self.push_derived(Op::BlockApply(t, x), out, &[t, x]))
    }

    // ── Backward ────────────────────────────────────────────────────────

    /// Runs one reverse pass from a scalar loss, returning the gradient for
    /// every gradient-tracked node the loss depends on. The tape is reset
    /// afterwards; previously issued [`Var`]s become invalid.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients, NumericsError> {
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(NumericsError::NonScalarLoss {
                shape: self.nodes[loss.0].value.shape().to_vec(),
            });
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let grad = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let op = self.nodes[idx].op.clone();
            match op {
                Op::Leaf => {
                    grads[idx] = Some(grad);
                }
                Op::MatMul(a, b) => {
                    let sa = self.shape_of(a).to_vec();
                    let sb = self.shape_of(b).to_vec();
                    let (m, k, nn) = (sa[0], sa[1], sb[1]);
                    if self.nodes[a.0].needs_grad {
                        // dA = dC · Bᵀ
                        let bt = self.nodes[b.0].value.transposed_2d()?;
                        let da = matmul_raw(&grad, bt.values(), m, nn, k);
                        accumulate(&mut grads[a.0], &da);
                    }
                    if self.nodes[b.0].needs_grad {
                        // dB = Aᵀ · dC
                        let at = self.nodes[a.0].value.transposed_2d()?;
                        let db = matmul_raw(at.values(), &grad, k, m, nn);
                        accumulate(&mut grads[b.0], &db);
                    }
                }
                Op::Binary(kind, a, b) => {
                    let scalar_a = self.nodes[a.0].value.is_scalar();
                    let scalar_b = self.nodes[b.0].value.is_scalar();
                    if self.nodes[a.0].needs_grad {
                        let da: Vec<f64> = match kind {
                            BinaryKind::Add => grad.clone(),
                            BinaryKind::Sub => grad.clone(),
                            BinaryKind::Mul => {
                                let vb = self.nodes[b.0].value.values();
                                grad.iter()
                                    .enumerate()
                                    .map(|(i, g)| g * if scalar_b { vb[0] } else { vb[i] })
                                    .collect()
                            }
                        };
                        let da = if scalar_a && grad.len() > 1 {
                            vec![da.iter().sum::<f64>()]
                        } else {
                            da
                        };
                        accumulate(&mut grads[a.0], &da);
                    }
                    if self.nodes[b.0].needs_grad {
                        let db: Vec<f64> = match kind {
                            BinaryKind::Add => grad.clone(),
                            BinaryKind::Sub => grad.iter().map(|g| -g).collect(),
                            BinaryKind::Mul => {
                                let va = self.nodes[a.0].value.values();
                                grad.iter()
                                    .enumerate()
                                    .map(|(i, g)| g * if scalar_a { va[0] } else { va[i] })
                                    .collect()
                            }
                        };
                        let db = if scalar_b && grad.len() > 1 {
                            vec![db.iter().sum::<f64>()]
                        } else {
                            db
                        };
                        accumulate(&mut grads[b.0], &db);
                    }
                }
                Op::AddBias(x, bias) => {
                    let (m, nn) = {
                        let t = &self.nodes[x.0].value;
                        (t.rows(), t.cols())
                    };
                    if self.nodes[x.0].needs_grad {
                        accumulate(&mut grads[x.0], &grad);
                    }
                    if self.nodes[bias.0].needs_grad {
                        let mut db = vec![0.0; nn];
                        for i in 0..m {
                            for j in 0..nn {
                                db[j] += grad[i * nn + j];
                            }
                        }
                        accumulate(&mut grads[bias.0], &db);
                    }
                }
                Op::ScaleRows(x, scale) => {
                    let (m, nn) = {
                        let t = &self.nodes[x.0].value;
                        (t.rows(), t.cols())
                    };
                    if self.nodes[x.0].needs_grad {
                        let s = self.nodes[scale.0].value.values();
                        let dx: Vec<f64> = grad
                            .iter()
                            .enumerate()
                            .map(|(i, g)| g * s[i / nn])
                            .collect();
                        accumulate(&mut grads[x.0], &dx);
                    }
                    if self.nodes[scale.0].needs_grad {
                        let vx = self.nodes[x.0].value.values();
                        let mut ds = vec![0.0; m];
                        for i in 0..m {
                            for j in 0..nn {
                                ds[i] += grad[i * nn + j] * vx[i * nn + j];
                            }
                        }
                        accumulate(&mut grads[scale.0], &ds);
                    }
                }
                Op::Sigmoid(x) => {
                    if self.nodes[x.0].needs_grad {
                        let out = self.nodes[idx].value.values();
                        let dx: Vec<f64> = grad
                            .iter()
                            .zip(out)
                            .map(|(g, s)| g * s * (1.0 - s))
                            .collect();
                        accumulate(&mut grads[x.0], &dx);
                    }
                }
                Op::Tanh(x) => {
                    if self.nodes[x.0].needs_grad {
                        let out = self.nodes[idx].value.values();
                        let dx: Vec<f64> = grad
                            .iter()
                            .zip(out)
                            .map(|(g, t)| g * (1.0 - t * t))
                            .collect();
                        accumulate(&mut grads[x.0], &dx);
                    }
                }
                Op::LeakyRelu(x, slope) => {
                    if self.nodes[x.0].needs_grad {
                        let input = self.nodes[x.0].value.values();
                        let dx: Vec<f64> = grad
                            .iter()
                            .zip(input)
                            .map(|(g, &v)| if v >= 0.0 { *g } else { g * slope })
                            .collect();
                        accumulate(&mut grads[x.0], &dx);
                    }
                }
                Op::SoftmaxRows(x) => {
                    if self.nodes[x.0].needs_grad {
                        let out = self.nodes[idx].value.values();
                        let (m, nn) = {
                            let t = &self.nodes[idx].value;
                            (t.rows(), t.cols())
                        };
                        let mut dx = vec![0.0; m * nn];
                        for i in 0..m {
                            let row = &out[i * nn..(i + 1) * nn];
                            let grow = &grad[i * nn..(i + 1) * nn];
                            let dot: f64 = row.iter().zip(grow).map(|(s, g)| s * g).sum();
                            for j in 0..nn {
                                dx[i * nn + j] = row[j] * (grow[j] - dot);
                            }
                        }
                        accumulate(&mut grads[x.0], &dx);
                    }
                }
                Op::Concat(parts, axis) => {
                    let n_out = self.nodes[idx].value.cols();
                    let mut offset = 0;
                    for p in parts {
                        let t = &self.nodes[p.0].value;
                        let (pm, pn) = (t.rows(), t.cols());
                        if self.nodes[p.0].needs_grad {
                            let mut dp = vec![0.0; pm * pn];
                            if axis == 0 {
                                dp.copy_from_slice(&grad[offset * pn..(offset + pm) * pn]);
                            } else {
                                for i in 0..pm {
                                    dp[i * pn..(i + 1) * pn].copy_from_slice(
                                        &grad[i * n_out + offset..i * n_out + offset + pn],
                                    );
                                }
                            }
                            accumulate(&mut grads[p.0], &dp);
                        }
                        offset += if axis == 0 { pm } else { pn };
                    }
                }
                Op::ReduceMean(x, axis) => {
                    if self.nodes[x.0].needs_grad {
                        let (m, nn) = {
                            let t = &self.nodes[x.0].value;
                            (t.rows(), t.cols())
                        };
                        let mut dx = vec![0.0; m * nn];
                        if axis == 0 {
                            for i in 0..m {
                                for j in 0..nn {
                                    dx[i * nn + j] = grad[j] / m as f64;
                                }
                            }
                        } else {
                            for i in 0..m {
                                for j in 0..nn {
                                    dx[i * nn + j] = grad[i] / nn as f64;
                                }
                            }
                        }
                        accumulate(&mut grads[x.0], &dx);
                    }
                }
                Op::MeanAll(x) => {
                    if self.nodes[x.0].needs_grad {
                        let numel = self.nodes[x.0].value.numel();
                        let dx = vec![grad[0] / numel as f64; numel];
                        accumulate(&mut grads[x.0], &dx);
                    }
                }
                Op::SliceCol(x, col) => {
                    if self.nodes[x.0].needs_grad {
                        let (m, nn) = {
                            let t = &self.nodes[x.0].value;
                            (t.rows(), t.cols())
                        };
                        let mut dx = vec![0.0; m * nn];
                        for i in 0..m {
                            dx[i * nn + col] = grad[i];
                        }
                        accumulate(&mut grads[x.0], &dx);
                    }
                }
                Op::BlockApply(t, x) => {
                    let b = self.nodes[t.0].value.rows();
                    let nn = self.nodes[x.0].value.cols();
                    let blocks = self.nodes[x.0].value.rows() / b;
                    if self.nodes[x.0].needs_grad {
                        // dX block = Tᵀ · dY block
                        let tt = self.nodes[t.0].value.transposed_2d()?;
                        let mut dx = vec![0.0; blocks * b * nn];
                        for blk in 0..blocks {
                            let gb = &grad[blk * b * nn..(blk + 1) * b * nn];
                            let d = matmul_raw(tt.values(), gb, b, b, nn);
                            dx[blk * b * nn..(blk + 1) * b * nn].copy_from_slice(&d);
                        }
                        accumulate(&mut grads[x.0], &dx);
                    }
                    if self.nodes[t.0].needs_grad {
                        // dT = Σ_blk dY_blk · X_blkᵀ
                        let vx = self.nodes[x.0].value.values();
                        let mut dt = vec![0.0; b * b];
                        for blk in 0..blocks {
                            let gb = &grad[blk * b * nn..(blk + 1) * b * nn];
                            let xb = &vx[blk * b * nn..(blk + 1) * b * nn];
                            for i in 0..b {
                                for j in 0..b {
                                    let mut s = 0.0;
                                    for c in 0..nn {
                                        s += gb[i * nn + c] * xb[j * nn + c];
                                    }
                                    dt[i * b + j] += s;
                                }
                            }
                        }
                        accumulate(&mut grads[t.0], &dt);
                    }
                }
            }
        }

        let mut slots: Vec<Option<Tensor>> = Vec::with_capacity(n);
        for (i, g) in grads.into_iter().enumerate() {
            match g {
                Some(values) if matches!(self.nodes[i].op, Op::Leaf) && self.nodes[i].needs_grad => {
                    slots.push(Some(
                        Tensor::from_vec(self.nodes[i].value.shape().to_vec(), values)
                            .expect("gradient shape matches node shape"),
                    ));
                }
                _ => slots.push(None),
            }
        }
        self.nodes.clear();
        Ok(Gradients { slots })
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, add: &[f64]) {
    match slot {
        Some(g) => {
            for (a, b) in g.iter_mut().zip(add) {
                *a += b;
            }
        }
        None => *slot = Some(add.to_vec()),
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
