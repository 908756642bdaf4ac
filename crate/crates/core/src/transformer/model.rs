use std::io::{Read, Write};

use super::config::TransformerConfig;
use crate::error::{Error, Result};
use crate::seed;
use crate::tensorcore::{container, Graph, ParamSet, Tensor, Var};

/// Sinusoidal position table, positions counted from 0.
pub fn positional_encoding(length: usize, embed_dim: usize) -> Tensor {
    let mut pe = Tensor::zeros(&[length, embed_dim]);
    let data = pe.data_mut();
    for pos in 0..length {
        for i in (0..embed_dim).step_by(2) {
            let angle = pos as f64 / 10000f64.powf(i as f64 / embed_dim as f64);
            data[pos * embed_dim + i] = angle.sin();
            if i + 1 < embed_dim {
                data[pos * embed_dim + i + 1] = angle.cos();
            }
        }
    }
    pe
}

#[derive(Debug, Clone)]
struct BlockSlots {
    wq: Vec<usize>,
    wk: Vec<usize>,
    wv: Vec<usize>,
    wo: usize,
    ln1_g: usize,
    ln1_b: usize,
    wa: usize,
    ba: usize,
    wb: usize,
    bb: usize,
    ln2_g: usize,
    ln2_b: usize,
}

/// Trained or freshly initialized model weights.
#[derive(Debug, Clone)]
pub struct TransformerParams {
    pub config: TransformerConfig,
    params: ParamSet,
    embed_w: usize,
    embed_b: usize,
    blocks: Vec<BlockSlots>,
    head_w: usize,
    head_b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Every parameter mapped onto the tape of one forward pass.
pub(crate) struct Bound {
    pub vars: Vec<Var>,
}

impl TransformerParams {
    /// Weights uniform in `±sqrt(1 / fan_in)`, biases zero, layer-norm gains one.
    pub fn init(config: &TransformerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let c = config;
        let mut rng = seed::rng(seed::derive(seed, "init"));
        let mut ps = ParamSet::new();
        let mut weight = |ps: &mut ParamSet, name: String, fan_in: usize, fan_out: usize| {
            let b = (1.0 / fan_in as f64).sqrt();
            ps.push(name, Tensor::uniform(&[fan_in, fan_out], b, &mut rng))
        };
        let embed_w = weight(&mut ps, "embed.w".into(), c.input_dim, c.embed_dim);
        let embed_b = ps.push("embed.b", Tensor::zeros(&[c.embed_dim]));
        let mut blocks = Vec::with_capacity(c.blocks);
        for b in 0..c.blocks {
            let p = format!("block{b}");
            let mut wq = Vec::new();
            let mut wk = Vec::new();
            let mut wv = Vec::new();
            for h in 0..c.heads {
                wq.push(weight(&mut ps, format!("{p}.head{h}.wq"), c.embed_dim, c.d_k));
                wk.push(weight(&mut ps, format!("{p}.head{h}.wk"), c.embed_dim, c.d_k));
                wv.push(weight(&mut ps, format!("{p}.head{h}.wv"), c.embed_dim, c.d_v));
            }
            let wo = weight(&mut ps, format!("{p}.wo"), c.heads * c.d_v, c.embed_dim);
            let ln1_g = ps.push(format!("{p}.ln1.g"), Tensor::ones(&[c.embed_dim]));
            let ln1_b = ps.push(format!("{p}.ln1.b"), Tensor::zeros(&[c.embed_dim]));
            let wa = weight(&mut ps, format!("{p}.ffn.wa"), c.embed_dim, c.ffn_dim);
            let ba = ps.push(format!("{p}.ffn.ba"), Tensor::zeros(&[c.ffn_dim]));
            let wb = weight(&mut ps, format!("{p}.ffn.wb"), c.ffn_dim, c.embed_dim);
            let bb = ps.push(format!("{p}.ffn.bb"), Tensor::zeros(&[c.embed_dim]));
            let ln2_g = ps.push(format!("{p}.ln2.g"), Tensor::ones(&[c.embed_dim]));
            let ln2_b = ps.push(format!("{p}.ln2.b"), Tensor::zeros(&[c.embed_dim]));
            blocks.push(BlockSlots {
                wq,
                wk,
                wv,
                wo,
                ln1_g,
                ln1_b,
                wa,
                ba,
                wb,
                bb,
                ln2_g,
                ln2_b,
            });
        }
        let head_w = weight(&mut ps, "head.w".into(), c.embed_dim, c.input_dim);
        let head_b = ps.push("head.b", Tensor::zeros(&[c.input_dim]));
        Ok(Self {
            config: c.clone(),
            params: ps,
            embed_w,
            embed_b,
            blocks,
            head_w,
            head_b,
        })
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.tensors().iter().all(Tensor::is_finite)
    }

    pub(crate) fn bind(&self, g: &mut Graph, trainable: bool) -> Bound {
        let vars = self
            .params
            .tensors()
            .iter()
            .map(|t| {
                if trainable {
                    g.param(t.clone())
                } else {
                    g.constant(t.clone())
                }
            })
            .collect();
        Bound { vars }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len == 0 || len > self.config.max_len {
            return Err(Error::SequenceLength {
                len,
                max: self.config.max_len,
            });
        }
        Ok(())
    }

    /// `X W_p + b + PE` for a stack of equal-length segments (`B*L x D`).
    pub(crate) fn embed_graph(
        &self,
        g: &mut Graph,
        bound: &Bound,
        x: Var,
        seg_len: usize,
        pe: Option<&Tensor>,
    ) -> Result<Var> {
        let rows = g.value(x).rows();
        let p = g.matmul(x, bound.vars[self.embed_w])?;
        let mut p = g.add_row(p, bound.vars[self.embed_b])?;
        if let Some(pe) = pe {
            let n = self.config.embed_dim;
            let mut tiled = Vec::with_capacity(rows * n);
            for _ in 0..rows / seg_len {
                tiled.extend_from_slice(&pe.data()[..seg_len * n]);
            }
            let pv = g.constant(Tensor::from_vec(&[rows, n], tiled)?);
            p = g.add(p, pv)?;
        }
        Ok(p)
    }

    /// One attention head applied segment by segment. Returns the head output
    /// and the attention weights of every segment.
    pub(crate) fn attention_graph(
        &self,
        g: &mut Graph,
        x: Var,
        wq: Var,
        wk: Var,
        wv: Var,
        seg_len: usize,
    ) -> Result<(Var, Vec<Var>)> {
        let rows = g.value(x).rows();
        let q = g.matmul(x, wq)?;
        let k = g.matmul(x, wk)?;
        let v = g.matmul(x, wv)?;
        let inv = 1.0 / (self.config.d_k as f64).sqrt();
        let mut outs = Vec::new();
        let mut weights = Vec::new();
        for s in 0..rows / seg_len {
            let qs = g.slice_rows(q, s * seg_len, seg_len)?;
            let ks = g.slice_rows(k, s * seg_len, seg_len)?;
            let vs = g.slice_rows(v, s * seg_len, seg_len)?;
            let kt = g.transpose(ks)?;
            let logits = g.matmul(qs, kt)?;
            let logits = g.scale(logits, inv);
            let a = g.softmax_rows(logits)?;
            weights.push(a);
            outs.push(g.matmul(a, vs)?);
        }
        let out = if outs.len() == 1 {
            outs[0]
        } else {
            g.concat_rows(&outs)?
        };
        Ok((out, weights))
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn block_graph(
        &self,
        g: &mut Graph,
        bound: &Bound,
        block: usize,
        x: Var,
        seg_len: usize,
        mode: Mode,
        dropout_seed: u64,
    ) -> Result<(Var, Vec<Var>)> {
        let b = &self.blocks[block];
        let v = &bound.vars;
        let train = mode == Mode::Train;
        let p = self.config.dropout;
        let mut heads = Vec::with_capacity(b.wq.len());
        let mut weights = Vec::new();
        for h in 0..b.wq.len() {
            let (o, w) = self.attention_graph(g, x, v[b.wq[h]], v[b.wk[h]], v[b.wv[h]], seg_len)?;
            heads.push(o);
            weights.extend(w);
        }
        let cat = if heads.len() == 1 {
            heads[0]
        } else {
            g.concat_cols(&heads)?
        };
        let o = g.matmul(cat, v[b.wo])?;
        let o = g.dropout(o, p, seed::derive(dropout_seed, "attn"), train)?;
        let r = g.add(x, o)?;
        let r = g.layer_norm(r, v[b.ln1_g], v[b.ln1_b])?;
        let f = g.matmul(r, v[b.wa])?;
        let f = g.add_row(f, v[b.ba])?;
        let f = g.relu(f);
        let f = g.matmul(f, v[b.wb])?;
        let f = g.add_row(f, v[b.bb])?;
        let f = g.dropout(f, p, seed::derive(dropout_seed, "ffn"), train)?;
        let out = g.add(r, f)?;
        Ok((g.layer_norm(out, v[b.ln2_g], v[b.ln2_b])?, weights))
    }

    /// Full model on a stack of `B` segments of length `seg_len` (`B*L x D`).
    pub(crate) fn forward_graph(
        &self,
        g: &mut Graph,
        bound: &Bound,
        x: Var,
        seg_len: usize,
        mode: Mode,
        dropout_seed: u64,
        use_pe: bool,
    ) -> Result<Var> {
        self.check_len(seg_len)?;
        let rows = g.value(x).rows();
        if !rows.is_multiple_of(seg_len) || g.value(x).cols() != self.config.input_dim {
            return Err(Error::Shape {
                op: "forward",
                a: g.value(x).shape().to_vec(),
                b: vec![seg_len, self.config.input_dim],
            });
        }
        let pe = use_pe.then(|| positional_encoding(seg_len, self.config.embed_dim));
        let mut h = self.embed_graph(g, bound, x, seg_len, pe.as_ref())?;
        for b in 0..self.blocks.len() {
            let ds = seed::derive_index(dropout_seed, b as u64);
            h = self.block_graph(g, bound, b, h, seg_len, mode, ds)?.0;
        }
        let y = g.matmul(h, bound.vars[self.head_w])?;
        g.add_row(y, bound.vars[self.head_b])
    }

    /// Eval-mode forward of one `L x D` input.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.forward_with(x, true)
    }

    /// Forward with the positional term optionally removed.
    pub fn forward_with(&self, x: &Tensor, use_pe: bool) -> Result<Tensor> {
        if !x.is_finite() {
            return Err(Error::Invalid("non-finite model input".into()));
        }
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let y = self.forward_graph(&mut g, &bound, xv, x.rows(), Mode::Eval, 0, use_pe)?;
        Ok(g.value(y).clone())
    }

    /// Attention weight matrices (`L x L`) of every block and head, in
    /// block-major order, for an eval-mode pass.
    pub fn attention_maps(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        self.check_len(x.rows())?;
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let pe = positional_encoding(x.rows(), self.config.embed_dim);
        let mut h = self.embed_graph(&mut g, &bound, xv, x.rows(), Some(&pe))?;
        let mut maps = Vec::new();
        for b in 0..self.blocks.len() {
            let (next, w) = self.block_graph(&mut g, &bound, b, h, x.rows(), Mode::Eval, 0)?;
            maps.extend(w.into_iter().map(|v| g.value(v).clone()));
            h = next;
        }
        Ok(maps)
    }

    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut items: Vec<(String, Tensor)> = self
            .config
            .to_scalars()
            .into_iter()
            .map(|(k, v)| (format!("cfg.{k}"), Tensor::scalar(v)))
            .collect();
        items.extend(self.params.iter().map(|(n, t)| (n.to_string(), t.clone())));
        container::write_tensors(w, &items)
    }

    pub fn load<R: Read>(r: &mut R) -> Result<Self> {
        let items = container::read_tensors(r)?;
        let cfg = TransformerConfig::from_scalars(|k| container::lookup_scalar(&items, &format!("cfg.{k}")))?;
        let mut model = Self::init(&cfg, 0)?;
        for i in 0..model.params.len() {
            let name = model.params.names()[i].clone();
            let t = container::lookup(&items, &name)?;
            if t.shape() != model.params.get(i).shape() {
                return Err(Error::Format(format!("tensor {name} has shape {:?}", t.shape())));
            }
            *model.params.get_mut(i) = t.clone();
        }
        if !model.is_finite() {
            return Err(Error::Format("checkpoint holds non-finite weights".into()));
        }
        Ok(model)
    }

    /// Zeroes every parameter whose name contains `pattern`.
    pub fn zero_matching(&mut self, pattern: &str) {
        for i in 0..self.params.len() {
            if self.params.names()[i].contains(pattern) {
                self.params.get_mut(i).data_mut().fill(0.0);
            }
        }
    }

    /// Sets every parameter whose name contains `pattern` to `value`.
    pub fn fill_matching(&mut self, pattern: &str, value: f64) {
        for i in 0..self.params.len() {
            if self.params.names()[i].contains(pattern) {
                self.params.get_mut(i).data_mut().fill(value);
            }
        }
    }
}
