//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every primitive as a node holding its forward value
//! and whatever it needs for the backward pass. Nodes are appended in
//! evaluation order, so a reverse sweep over the node list is a valid
//! topological order and visits each node exactly once.

use rand::Rng as _;

use super::gemm::gemm;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::seed;

/// Variance floor inside layer normalization.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    Transpose(Var),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        rstd: Vec<f64>,
    },
    Relu(Var),
    Dropout {
        x: Var,
        scale: Vec<f64>,
    },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    Sum(Var),
    ReconLoss {
        pred: Var,
        truth: Tensor,
        weight: ReconWeights,
    },
}

#[derive(Debug, Clone)]
struct ReconWeights {
    smooth_weight: f64,
    mse_mask: Option<Vec<bool>>,
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// A single forward pass and its tape.
pub struct Graph {
    nodes: Vec<Node>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros of `shape` when `v` did not influence the output.
    pub fn take_or_zeros(&mut self, v: Var, shape: &[usize]) -> Tensor {
        self.grads
            .get_mut(v.0)
            .and_then(Option::take)
            .unwrap_or_else(|| Tensor::zeros(shape))
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        a: a.shape().to_vec(),
        b: b.shape().to_vec(),
    }
}

fn is_2d(t: &Tensor) -> bool {
    t.shape().len() == 2
}

impl Graph {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Constant input; no gradient is tracked.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Trainable input; its gradient is available after [`Graph::backward`].
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !is_2d(ta) || !is_2d(tb) || ta.cols() != tb.rows() {
            return Err(shape_err("matmul", ta, tb));
        }
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, ta.data(), false, tb.data(), false, 0.0, &mut out);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Tensor::from_vec(&[m, n], out)?, Op::MatMul(a, b), ng))
    }

    fn zip_same(&mut self, a: Var, b: Var, op: &'static str, f: fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(op, ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| f(*x, *y)).collect();
        Tensor::from_vec(ta.shape(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same(a, b, "add", |x, y| x + y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same(a, b, "sub", |x, y| x - y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Sub(a, b), ng))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same(a, b, "mul", |x, y| x * y)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Mul(a, b), ng))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let t = self.value(a);
        let out = Tensor::from_vec(t.shape(), t.data().iter().map(|v| v * s).collect()).expect("same shape");
        let ng = self.ng(a);
        self.push(out, Op::Scale(a, s), ng)
    }

    /// Adds a length-`C` vector to every row of an `R x C` matrix.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(bias));
        if !is_2d(tx) || tb.len() != tx.cols() {
            return Err(shape_err("add_row", tx, tb));
        }
        let c = tx.cols();
        let b = tb.data();
        let data = tx.data().iter().enumerate().map(|(i, v)| v + b[i % c]).collect();
        let out = Tensor::from_vec(tx.shape(), data)?;
        let ng = self.ng(x) || self.ng(bias);
        Ok(self.push(out, Op::AddRow(x, bias), ng))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if !is_2d(t) {
            return Err(shape_err("transpose", t, t));
        }
        let out = transpose_data(t);
        let ng = self.ng(a);
        Ok(self.push(out, Op::Transpose(a), ng))
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if !is_2d(t) {
            return Err(shape_err("softmax_rows", t, t));
        }
        let c = t.cols();
        let mut out = t.data().to_vec();
        for row in out.chunks_mut(c.max(1)) {
            softmax_in_place(row);
        }
        let out = Tensor::from_vec(t.shape(), out)?;
        let ng = self.ng(a);
        Ok(self.push(out, Op::SoftmaxRows(a), ng))
    }

    /// Normalize each row to zero mean and unit variance, then apply
    /// per-column gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let (tx, tg, tb) = (self.value(x), self.value(gain), self.value(bias));
        if !is_2d(tx) || tg.len() != tx.cols() || tb.len() != tx.cols() {
            return Err(shape_err("layer_norm", tx, tg));
        }
        let (r, c) = (tx.rows(), tx.cols());
        let mut xhat = vec![0.0; r * c];
        let mut rstd = vec![0.0; r];
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &tx.data()[i * c..(i + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            rstd[i] = s;
            for j in 0..c {
                let h = (row[j] - mean) * s;
                xhat[i * c + j] = h;
                out[i * c + j] = h * tg.data()[j] + tb.data()[j];
            }
        }
        let out = Tensor::from_vec(&[r, c], out)?;
        let ng = self.ng(x) || self.ng(gain) || self.ng(bias);
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            },
            ng,
        ))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let out = Tensor::from_vec(t.shape(), t.data().iter().map(|v| v.max(0.0)).collect()).expect("same shape");
        let ng = self.ng(a);
        self.push(out, Op::Relu(a), ng)
    }

    /// Inverted dropout: in training mode each element is zeroed with
    /// probability `p` and survivors are scaled by `1 / (1 - p)`. Outside
    /// training, or with `p == 0`, the input is returned unchanged.
    pub fn dropout(&mut self, a: Var, p: f64, seed: u64, training: bool) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Invalid(format!("dropout probability {p} not in [0, 1)")));
        }
        if !training || p == 0.0 {
            return Ok(a);
        }
        let mut rng = seed::rng(seed);
        let keep = 1.0 / (1.0 - p);
        let t = self.value(a);
        let scale: Vec<f64> = (0..t.len())
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        let data = t.data().iter().zip(&scale).map(|(v, s)| v * s).collect();
        let out = Tensor::from_vec(t.shape(), data)?;
        let ng = self.ng(a);
        Ok(self.push(out, Op::Dropout { x: a, scale }, ng))
    }

    /// Horizontal concatenation of matrices sharing a row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = self.value(parts[0]);
        let r = first.rows();
        for &p in parts {
            let t = self.value(p);
            if !is_2d(t) || t.rows() != r {
                return Err(shape_err("concat_cols", first, t));
            }
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = vec![0.0; r * total];
        let mut off = 0;
        for &p in parts {
            let t = self.value(p);
            let c = t.cols();
            for i in 0..r {
                out[i * total + off..i * total + off + c].copy_from_slice(&t.data()[i * c..(i + 1) * c]);
            }
            off += c;
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(Tensor::from_vec(&[r, total], out)?, Op::ConcatCols(parts.to_vec()), ng))
    }

    /// Vertical concatenation of matrices sharing a column count.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = self.value(parts[0]);
        let c = first.cols();
        let mut out = Vec::new();
        let mut r = 0;
        for &p in parts {
            let t = self.value(p);
            if !is_2d(t) || t.cols() != c {
                return Err(shape_err("concat_rows", self.value(parts[0]), t));
            }
            out.extend_from_slice(t.data());
            r += t.rows();
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(Tensor::from_vec(&[r, c], out)?, Op::ConcatRows(parts.to_vec()), ng))
    }

    /// Rows `start..start + len` of a matrix.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(a);
        if !is_2d(t) || start + len > t.rows() || len == 0 {
            return Err(shape_err("slice_rows", t, &Tensor::zeros(&[start, len])));
        }
        let c = t.cols();
        let out = Tensor::from_vec(&[len, c], t.data()[start * c..(start + len) * c].to_vec())?;
        let ng = self.ng(a);
        Ok(self.push(out, Op::SliceRows(a, start), ng))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let ng = self.ng(a);
        self.push(Tensor::scalar(s), Op::Sum(a), ng)
    }

    /// Reconstruction loss `MSE + w (laplacian + tv)` of an `L x D`
    /// prediction against `truth`; see [`recon_loss_terms`]. When
    /// `mse_mask` is given, the MSE term averages only over entries marked
    /// `true`.
    pub fn recon_loss(
        &mut self,
        pred: Var,
        truth: &Tensor,
        smooth_weight: f64,
        mse_mask: Option<Vec<bool>>,
    ) -> Result<Var> {
        let tp = self.value(pred);
        if tp.shape() != truth.shape() || !is_2d(tp) {
            return Err(shape_err("recon_loss", tp, truth));
        }
        if let Some(m) = &mse_mask {
            if m.len() != tp.len() {
                return Err(shape_err("recon_loss mask", tp, &Tensor::zeros(&[m.len()])));
            }
        }
        let terms = recon_loss_terms(tp.data(), truth.data(), tp.rows(), tp.cols(), mse_mask.as_deref());
        let total = terms.mse + smooth_weight * (terms.laplacian + terms.tv);
        let ng = self.ng(pred);
        Ok(self.push(
            Tensor::scalar(total),
            Op::ReconLoss {
                pred,
                truth: truth.clone(),
                weight: ReconWeights {
                    smooth_weight,
                    mse_mask,
                },
            },
            ng,
        ))
    }

    /// Reverse sweep from a scalar `output`.
    pub fn backward(&self, output: Var) -> Gradients {
        let n = self.nodes.len();
        let mut grads: Vec<Option<Tensor>> = (0..n).map(|_| None).collect();
        let out_shape = self.nodes[output.0].value.shape().to_vec();
        grads[output.0] = Some(Tensor::ones(&out_shape));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.backprop_node(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn backprop_node(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let acc = |v: Var, t: Tensor, grads: &mut [Option<Tensor>]| {
            if !self.ng(v) {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&t),
                slot @ None => *slot = Some(t),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                if self.ng(*a) {
                    let mut da = vec![0.0; m * k];
                    gemm(m, n, k, g.data(), false, tb.data(), true, 0.0, &mut da);
                    acc(*a, Tensor::from_vec(&[m, k], da).unwrap(), grads);
                }
                if self.ng(*b) {
                    let mut db = vec![0.0; k * n];
                    gemm(k, m, n, ta.data(), true, g.data(), false, 0.0, &mut db);
                    acc(*b, Tensor::from_vec(&[k, n], db).unwrap(), grads);
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone(), grads);
                acc(*b, g.clone(), grads);
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone(), grads);
                let mut neg = g.clone();
                neg.scale_in_place(-1.0);
                acc(*b, neg, grads);
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let prod = |x: &Tensor| {
                    let d = g.data().iter().zip(x.data()).map(|(u, v)| u * v).collect();
                    Tensor::from_vec(g.shape(), d).unwrap()
                };
                if self.ng(*a) {
                    acc(*a, prod(tb), grads);
                }
                if self.ng(*b) {
                    acc(*b, prod(ta), grads);
                }
            }
            Op::Scale(a, s) => {
                let mut t = g.clone();
                t.scale_in_place(*s);
                acc(*a, t, grads);
            }
            Op::AddRow(x, bias) => {
                acc(*x, g.clone(), grads);
                if self.ng(*bias) {
                    let c = g.cols();
                    let mut db = vec![0.0; c];
                    for row in g.data().chunks(c) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    let shape = self.value(*bias).shape().to_vec();
                    acc(*bias, Tensor::from_vec(&shape, db).unwrap(), grads);
                }
            }
            Op::Transpose(a) => acc(*a, transpose_data(g), grads),
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let c = y.cols();
                let mut dx = vec![0.0; y.len()];
                for ((yr, gr), dr) in y.data().chunks(c).zip(g.data().chunks(c)).zip(dx.chunks_mut(c)) {
                    let dot: f64 = yr.iter().zip(gr).map(|(u, v)| u * v).sum();
                    for j in 0..c {
                        dr[j] = yr[j] * (gr[j] - dot);
                    }
                }
                acc(*a, Tensor::from_vec(y.shape(), dx).unwrap(), grads);
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            } => {
                let tg = self.value(*gain);
                let (r, c) = (node.value.rows(), node.value.cols());
                let gd = g.data();
                if self.ng(*gain) {
                    let mut dg = vec![0.0; c];
                    for i in 0..r {
                        for j in 0..c {
                            dg[j] += gd[i * c + j] * xhat[i * c + j];
                        }
                    }
                    let shape = tg.shape().to_vec();
                    acc(*gain, Tensor::from_vec(&shape, dg).unwrap(), grads);
                }
                if self.ng(*bias) {
                    let mut db = vec![0.0; c];
                    for i in 0..r {
                        for j in 0..c {
                            db[j] += gd[i * c + j];
                        }
                    }
                    let shape = self.value(*bias).shape().to_vec();
                    acc(*bias, Tensor::from_vec(&shape, db).unwrap(), grads);
                }
                if self.ng(*x) {
                    let mut dx = vec![0.0; r * c];
                    let nf = c as f64;
                    for i in 0..r {
                        let mut sum_dh = 0.0;
                        let mut sum_dh_h = 0.0;
                        for j in 0..c {
                            let dh = gd[i * c + j] * tg.data()[j];
                            sum_dh += dh;
                            sum_dh_h += dh * xhat[i * c + j];
                        }
                        for j in 0..c {
                            let dh = gd[i * c + j] * tg.data()[j];
                            dx[i * c + j] = rstd[i] / nf * (nf * dh - sum_dh - xhat[i * c + j] * sum_dh_h);
                        }
                    }
                    acc(*x, Tensor::from_vec(&[r, c], dx).unwrap(), grads);
                }
            }
            Op::Relu(a) => {
                let x = self.value(*a);
                let d = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .map(|(u, v)| if *v > 0.0 { *u } else { 0.0 })
                    .collect();
                acc(*a, Tensor::from_vec(x.shape(), d).unwrap(), grads);
            }
            Op::Dropout { x, scale } => {
                let d = g.data().iter().zip(scale).map(|(u, s)| u * s).collect();
                acc(*x, Tensor::from_vec(g.shape(), d).unwrap(), grads);
            }
            Op::ConcatCols(parts) => {
                let total = g.cols();
                let r = g.rows();
                let mut off = 0;
                for &p in parts {
                    let c = self.value(p).cols();
                    if self.ng(p) {
                        let mut d = vec![0.0; r * c];
                        for i in 0..r {
                            d[i * c..(i + 1) * c].copy_from_slice(&g.data()[i * total + off..i * total + off + c]);
                        }
                        acc(p, Tensor::from_vec(&[r, c], d).unwrap(), grads);
                    }
                    off += c;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    if self.ng(p) {
                        let shape = self.value(p).shape().to_vec();
                        let d = g.data()[off..off + n].to_vec();
                        acc(p, Tensor::from_vec(&shape, d).unwrap(), grads);
                    }
                    off += n;
                }
            }
            Op::SliceRows(a, start) => {
                let src = self.value(*a);
                let c = src.cols();
                let mut d = Tensor::zeros(src.shape());
                d.data_mut()[start * c..start * c + g.len()].copy_from_slice(g.data());
                acc(*a, d, grads);
            }
            Op::Sum(a) => {
                let shape = self.value(*a).shape().to_vec();
                acc(*a, Tensor::filled(&shape, g.item()), grads);
            }
            Op::ReconLoss { pred, truth, weight } => {
                let p = self.value(*pred);
                let mut d = recon_loss_grad(
                    p.data(),
                    truth.data(),
                    p.rows(),
                    p.cols(),
                    weight.smooth_weight,
                    weight.mse_mask.as_deref(),
                );
                let up = g.item();
                d.iter_mut().for_each(|v| *v *= up);
                acc(*pred, Tensor::from_vec(p.shape(), d).unwrap(), grads);
            }
        }
    }
}

fn transpose_data(t: &Tensor) -> Tensor {
    let (r, c) = (t.rows(), t.cols());
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = t.data()[i * c + j];
        }
    }
    Tensor::from_vec(&[c, r], out).unwrap()
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Individual terms of the reconstruction loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub mse: f64,
    pub laplacian: f64,
    pub tv: f64,
}

impl LossTerms {
    pub fn total(&self, smooth_weight: f64) -> f64 {
        self.mse + smooth_weight * (self.laplacian + self.tv)
    }
}

/// MSE over all `L x D` entries (or the masked subset), plus per-dimension
/// mean squared second difference (`L >= 3`) and mean absolute first
/// difference (`L >= 2`) of the prediction, each averaged over dimensions.
pub fn recon_loss_terms(pred: &[f64], truth: &[f64], rows: usize, cols: usize, mse_mask: Option<&[bool]>) -> LossTerms {
    let mut se = 0.0;
    let mut count = 0usize;
    for i in 0..pred.len() {
        if mse_mask.is_none_or(|m| m[i]) {
            let d = pred[i] - truth[i];
            se += d * d;
            count += 1;
        }
    }
    let mse = if count > 0 { se / count as f64 } else { 0.0 };
    let mut laplacian = 0.0;
    let mut tv = 0.0;
    for c in 0..cols {
        let at = |i: usize| pred[i * cols + c];
        if rows >= 3 {
            let s: f64 = (1..rows - 1)
                .map(|i| {
                    let l = at(i - 1) + at(i + 1) - 2.0 * at(i);
                    l * l
                })
                .sum();
            laplacian += s / (rows - 2) as f64;
        }
        if rows >= 2 {
            let s: f64 = (0..rows - 1).map(|i| (at(i) - at(i + 1)).abs()).sum();
            tv += s / (rows - 1) as f64;
        }
    }
    let d = cols.max(1) as f64;
    LossTerms {
        mse,
        laplacian: laplacian / d,
        tv: tv / d,
    }
}

fn recon_loss_grad(
    pred: &[f64],
    truth: &[f64],
    rows: usize,
    cols: usize,
    smooth_weight: f64,
    mse_mask: Option<&[bool]>,
) -> Vec<f64> {
    let mut d = vec![0.0; pred.len()];
    let count = match mse_mask {
        Some(m) => m.iter().filter(|b| **b).count(),
        None => pred.len(),
    };
    if count > 0 {
        let w = 2.0 / count as f64;
        for i in 0..pred.len() {
            if mse_mask.is_none_or(|m| m[i]) {
                d[i] = w * (pred[i] - truth[i]);
            }
        }
    }
    let dims = cols.max(1) as f64;
    for c in 0..cols {
        let idx = |i: usize| i * cols + c;
        if rows >= 3 {
            let w = smooth_weight / (dims * (rows - 2) as f64);
            for i in 1..rows - 1 {
                let l = pred[idx(i - 1)] + pred[idx(i + 1)] - 2.0 * pred[idx(i)];
                d[idx(i - 1)] += 2.0 * w * l;
                d[idx(i + 1)] += 2.0 * w * l;
                d[idx(i)] -= 4.0 * w * l;
            }
        }
        if rows >= 2 {
            let w = smooth_weight / (dims * (rows - 1) as f64);
            for i in 0..rows - 1 {
                let diff = pred[idx(i)] - pred[idx(i + 1)];
                let s = if diff > 0.0 {
                    1.0
                } else if diff < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                d[idx(i)] += w * s;
                d[idx(i + 1)] -= w * s;
            }
        }
    }
    d
}
