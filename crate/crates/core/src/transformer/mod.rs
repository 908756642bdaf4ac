//! Encoder-only transformer that maps a sparse, noisy series to a complete
//! trajectory of the same length.

mod config;
mod model;
mod train;

pub use config::{LossPoints, TransformerConfig};
pub use model::{positional_encoding, Mode, TransformerParams};
pub use train::{batch_loss_and_grads, draw_batch, train, train_with, Batch, TrainLog, TrainingRegime};

use crate::dynsys::TrajectoryMatrix;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::observe::SparseSeries;
use crate::tensorcore::{Graph, LossTerms, Tensor};

/// Reconstruction loss and its gradient with respect to `pred`.
pub fn loss(pred: &Tensor, truth: &Tensor, smooth_weight: f64) -> Result<(f64, Tensor)> {
    let mut g = Graph::new();
    let p = g.param(pred.clone());
    let l = g.recon_loss(p, truth, smooth_weight, None)?;
    let grads = g.backward(l);
    Ok((
        g.value(l).item(),
        grads.get(p).cloned().unwrap_or_else(|| Tensor::zeros(pred.shape())),
    ))
}

/// The three loss components for an `L x D` prediction.
pub fn loss_terms(pred: &Tensor, truth: &Tensor) -> Result<LossTerms> {
    if pred.shape() != truth.shape() || pred.shape().len() != 2 {
        return Err(Error::Shape {
            op: "loss_terms",
            a: pred.shape().to_vec(),
            b: truth.shape().to_vec(),
        });
    }
    Ok(crate::tensorcore::recon_loss_terms(
        pred.data(),
        truth.data(),
        pred.rows(),
        pred.cols(),
        None,
    ))
}

/// Single attention head: returns `softmax(Q K^T / sqrt(d_k)) V` and the
/// attention weights.
pub fn attention_head(x: &Tensor, wq: &Tensor, wk: &Tensor, wv: &Tensor) -> Result<(Tensor, Tensor)> {
    let mut g = Graph::new();
    let xv = g.constant(x.clone());
    let q = g.constant(wq.clone());
    let k = g.constant(wk.clone());
    let v = g.constant(wv.clone());
    let q = g.matmul(xv, q)?;
    let k = g.matmul(xv, k)?;
    let v = g.matmul(xv, v)?;
    let kt = g.transpose(k)?;
    let logits = g.matmul(q, kt)?;
    let logits = g.scale(logits, 1.0 / (wq.cols() as f64).sqrt());
    let a = g.softmax_rows(logits)?;
    let out = g.matmul(a, v)?;
    Ok((g.value(out).clone(), g.value(a).clone()))
}

fn to_tensor(m: &Matrix) -> Result<Tensor> {
    Tensor::from_vec(&[m.rows(), m.cols()], m.as_slice().to_vec())
}

impl TransformerParams {
    /// Projection plus bias plus positional rows for an `L x D` input.
    pub fn embed(&self, x: &Tensor) -> Result<Tensor> {
        if x.rows() > self.config.max_len {
            return Err(Error::SequenceLength {
                len: x.rows(),
                max: self.config.max_len,
            });
        }
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let pe = positional_encoding(x.rows(), self.config.embed_dim);
        let e = self.embed_graph(&mut g, &bound, xv, x.rows(), Some(&pe))?;
        Ok(g.value(e).clone())
    }

    /// One encoder block applied to an `L x N` activation.
    pub fn encoder_block(&self, block: usize, x: &Tensor, mode: Mode, seed: u64) -> Result<Tensor> {
        if block >= self.config.blocks {
            return Err(Error::Invalid(format!("block {block} out of range")));
        }
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let (y, _) = self.block_graph(&mut g, &bound, block, xv, x.rows(), mode, seed)?;
        Ok(g.value(y).clone())
    }
}

/// Eval-mode reconstruction of a sparse series no longer than the model's
/// maximum length.
pub fn reconstruct(sparse: &SparseSeries, model: &TransformerParams) -> Result<TrajectoryMatrix> {
    if sparse.len() > model.config.max_len || sparse.is_empty() {
        return Err(Error::SequenceLength {
            len: sparse.len(),
            max: model.config.max_len,
        });
    }
    let y = model.forward(&to_tensor(&sparse.values)?)?;
    Ok(TrajectoryMatrix {
        data: Matrix::from_vec(y.rows(), y.cols(), y.into_data()),
        dt_effective: sparse.dt_effective,
        norm_stats: sparse.norm_stats.clone(),
    })
}

/// Reconstruction of an arbitrarily long series by consecutive windows of the
/// model's maximum length; the last window is aligned to the series end.
pub fn reconstruct_chunked(sparse: &SparseSeries, model: &TransformerParams) -> Result<TrajectoryMatrix> {
    let len = sparse.len();
    let w = model.config.max_len;
    if len <= w {
        return reconstruct(sparse, model);
    }
    let d = sparse.dim();
    let mut out = Matrix::zeros(len, d);
    let mut start = 0;
    while start < len {
        let s = start.min(len - w);
        let chunk = sparse.values.slice_rows(s, w);
        let y = model.forward(&to_tensor(&chunk)?)?;
        for r in start..(s + w) {
            out.row_mut(r).copy_from_slice(&y.data()[(r - s) * d..(r - s + 1) * d]);
        }
        start = s + w;
    }
    Ok(TrajectoryMatrix {
        data: out,
        dt_effective: sparse.dt_effective,
        norm_stats: sparse.norm_stats.clone(),
    })
}
