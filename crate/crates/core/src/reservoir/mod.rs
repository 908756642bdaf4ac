//! Echo-state network with a sparse random recurrence and a ridge-regression
//! readout, used for closed-loop generation of long trajectories.

mod eigen;

pub use eigen::{dense_eigen_moduli, power_iteration, spectral_radius, SparseMatrix};

use std::io::{Read, Write};

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynsys::TrajectoryMatrix;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;
use crate::tensorcore::{container, gemm, Tensor};

/// Any closed-loop output component beyond this magnitude ends generation.
pub const DIVERGENCE_LIMIT: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirConfig {
    pub size: usize,
    pub leak: f64,
    pub ridge: f64,
    pub input_scale: f64,
    pub spectral_radius: f64,
    pub link_prob: f64,
    pub train_noise: f64,
    #[serde(default = "default_washout")]
    pub washout: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_washout() -> usize {
    100
}

impl ReservoirConfig {
    /// Tuned settings for one of the target systems, at network size `size`.
    pub fn preset(system: &str, size: usize) -> Result<Self> {
        let (leak, ridge, input_scale, spectral_radius, link_prob, train_noise) = match system {
            "food_chain" => (0.36, -1.25, 1.16, 1.29, 0.41, -4.70),
            "lorenz" => (0.30, -5.15, 1.82, 1.30, 0.68, -2.04),
            "lotka_volterra" => (0.29, -6.62, 0.19, 1.72, 0.02, -2.73),
            other => return Err(Error::UnknownSystem(other.to_string())),
        };
        Ok(Self {
            size,
            leak,
            ridge: 10f64.powf(ridge),
            input_scale,
            spectral_radius,
            link_prob,
            train_noise: 10f64.powf(train_noise),
            washout: default_washout(),
            seed: 0,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.size == 0 {
            return bad("reservoir size must be positive".into());
        }
        if !(self.leak > 0.0 && self.leak <= 1.0) {
            return bad(format!("leak {} not in (0, 1]", self.leak));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return bad(format!("ridge {} must be non-negative", self.ridge));
        }
        if !(0.0..=1.0).contains(&self.link_prob) {
            return bad(format!("link probability {} not in [0, 1]", self.link_prob));
        }
        for (name, v) in [
            ("input_scale", self.input_scale),
            ("spectral_radius", self.spectral_radius),
            ("train_noise", self.train_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} {v} must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Fixed random reservoir plus its trained readout.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirModel {
    pub config: ReservoirConfig,
    pub input_dim: usize,
    /// `N_s x D_i`.
    pub w_in: Matrix,
    pub a: SparseMatrix,
    /// `D_o x N_s`; empty before training.
    pub w_out: Matrix,
}

/// Draws the input matrix and the recurrence, rescaling the latter to the
/// configured spectral radius.
pub fn init_reservoir(cfg: &ReservoirConfig, input_dim: usize) -> Result<ReservoirModel> {
    cfg.validate()?;
    let n = cfg.size;
    let mut rng = seed::rng(seed::derive(cfg.seed, "reservoir"));
    let (mut rows, mut cols, mut vals) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        for j in 0..n {
            if rng.random::<f64>() < cfg.link_prob {
                rows.push(i);
                cols.push(j);
                vals.push(StandardNormal.sample(&mut rng));
            }
        }
    }
    let degenerate = || Error::DegenerateReservoir {
        size: n,
        link_prob: cfg.link_prob,
    };
    if vals.is_empty() {
        return Err(degenerate());
    }
    let mut a = SparseMatrix::from_triplets(n, &rows, &cols, &vals)?;
    let radius = spectral_radius(&a, seed::derive(cfg.seed, "power"))?;
    if !(radius > 1e-12) {
        return Err(degenerate());
    }
    a.scale(cfg.spectral_radius / radius);
    let g = cfg.input_scale;
    let mut w_in = Matrix::zeros(n, input_dim);
    for v in w_in.as_mut_slice() {
        *v = if g > 0.0 { rng.random_range(-g..=g) } else { 0.0 };
    }
    Ok(ReservoirModel {
        config: cfg.clone(),
        input_dim,
        w_in,
        a,
        w_out: Matrix::zeros(0, n),
    })
}

impl ReservoirModel {
    pub fn is_trained(&self) -> bool {
        self.w_out.rows() > 0
    }

    /// `r <- (1 - a) r + a tanh(A r + W_in i)`, using `scratch` for `A r`.
    pub fn advance_into(&self, r: &mut [f64], input: &[f64], scratch: &mut [f64]) {
        let alpha = self.config.leak;
        self.a.mul_vec(r, scratch);
        for (k, rk) in r.iter_mut().enumerate() {
            let drive: f64 = scratch[k] + dot(self.w_in.row(k), input);
            *rk = (1.0 - alpha) * *rk + alpha * drive.tanh();
        }
    }

    pub fn advance(&self, r: &[f64], input: &[f64]) -> Vec<f64> {
        let mut next = r.to_vec();
        let mut scratch = vec![0.0; r.len()];
        self.advance_into(&mut next, input, &mut scratch);
        next
    }

    /// `W_out r`.
    pub fn readout(&self, r: &[f64]) -> Vec<f64> {
        (0..self.w_out.rows()).map(|i| dot(self.w_out.row(i), r)).collect()
    }

    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        let c = &self.config;
        let mut items: Vec<(String, Tensor)> = [
            ("size", c.size as f64),
            ("leak", c.leak),
            ("ridge", c.ridge),
            ("input_scale", c.input_scale),
            ("spectral_radius", c.spectral_radius),
            ("link_prob", c.link_prob),
            ("train_noise", c.train_noise),
            ("washout", c.washout as f64),
            ("seed_hi", (c.seed >> 32) as f64),
            ("seed_lo", (c.seed & 0xffff_ffff) as f64),
            ("input_dim", self.input_dim as f64),
        ]
        .into_iter()
        .map(|(k, v)| (format!("cfg.{k}"), Tensor::scalar(v)))
        .collect();
        let (r, cc, v) = self.a.triplets();
        let as_f = |x: Vec<usize>| x.into_iter().map(|i| i as f64).collect::<Vec<_>>();
        let nnz = v.len();
        items.push(("A.rows".into(), Tensor::from_vec(&[nnz], as_f(r))?));
        items.push(("A.cols".into(), Tensor::from_vec(&[nnz], as_f(cc))?));
        items.push(("A.vals".into(), Tensor::from_vec(&[nnz], v)?));
        items.push((
            "W_in".into(),
            Tensor::from_vec(&[self.w_in.rows(), self.w_in.cols()], self.w_in.as_slice().to_vec())?,
        ));
        items.push((
            "W_out".into(),
            Tensor::from_vec(&[self.w_out.rows(), self.w_out.cols()], self.w_out.as_slice().to_vec())?,
        ));
        container::write_tensors(w, &items)
    }

    pub fn load<R: Read>(r: &mut R) -> Result<Self> {
        let items = container::read_tensors(r)?;
        let s = |k: &str| container::lookup_scalar(&items, &format!("cfg.{k}"));
        let config = ReservoirConfig {
            size: s("size")? as usize,
            leak: s("leak")?,
            ridge: s("ridge")?,
            input_scale: s("input_scale")?,
            spectral_radius: s("spectral_radius")?,
            link_prob: s("link_prob")?,
            train_noise: s("train_noise")?,
            washout: s("washout")? as usize,
            seed: ((s("seed_hi")? as u64) << 32) | s("seed_lo")? as u64,
        };
        config.validate()?;
        let n = config.size;
        let input_dim = s("input_dim")? as usize;
        let idx = |k: &str| -> Result<Vec<usize>> {
            Ok(container::lookup(&items, k)?
                .data()
                .iter()
                .map(|v| *v as usize)
                .collect())
        };
        let a = SparseMatrix::from_triplets(
            n,
            &idx("A.rows")?,
            &idx("A.cols")?,
            container::lookup(&items, "A.vals")?.data(),
        )?;
        let mat = |k: &str, rows: Option<usize>, cols: usize| -> Result<Matrix> {
            let t = container::lookup(&items, k)?;
            let ok = t.shape().len() == 2 && t.cols() == cols && rows.is_none_or(|r| t.rows() == r);
            if !ok {
                return Err(Error::Format(format!("{k} has shape {:?}", t.shape())));
            }
            Ok(Matrix::from_vec(t.rows(), cols, t.data().to_vec()))
        };
        Ok(Self {
            w_in: mat("W_in", Some(n), input_dim)?,
            w_out: mat("W_out", None, n)?,
            input_dim,
            a,
            config,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// In-place Cholesky factor (lower triangle) of a symmetric `n x n` matrix.
fn cholesky(g: &mut [f64], n: usize) -> Result<()> {
    let scale = (0..n).map(|i| g[i * n + i].abs()).fold(0.0, f64::max);
    for j in 0..n {
        let mut d = g[j * n + j];
        for k in 0..j {
            d -= g[j * n + k] * g[j * n + k];
        }
        if !(d > 1e-13 * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::Regularization);
        }
        let d = d.sqrt();
        g[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = g[i * n + j];
            for k in 0..j {
                s -= g[i * n + k] * g[j * n + k];
            }
            g[i * n + j] = s / d;
        }
    }
    Ok(())
}

/// Solves `L L^T x = b` for each column of `b` (`n x m`, row-major).
fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64], m: usize) {
    for c in 0..m {
        for i in 0..n {
            let mut s = b[i * m + c];
            for k in 0..i {
                s -= l[i * n + k] * b[k * m + c];
            }
            b[i * m + c] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i * m + c];
            for k in (i + 1)..n {
                s -= l[k * n + i] * b[k * m + c];
            }
            b[i * m + c] = s / l[i * n + i];
        }
    }
}

/// Ridge readout `W_out = U R^T (R R^T + beta I)^-1`, with the states given
/// one per row (`states` is `T x N_s`, `targets` is `T x D_o`).
pub fn ridge_readout(states: &Matrix, targets: &Matrix, beta: f64) -> Result<Matrix> {
    let (t, n, d) = (states.rows(), states.cols(), targets.cols());
    if t == 0 {
        return Err(Error::InsufficientData("no training states".into()));
    }
    if targets.rows() != t {
        return Err(Error::Shape {
            op: "ridge_readout",
            a: vec![t, n],
            b: vec![targets.rows(), d],
        });
    }
    let mut g = vec![0.0; n * n];
    gemm(n, t, n, states.as_slice(), true, states.as_slice(), false, 0.0, &mut g);
    for i in 0..n {
        g[i * n + i] += beta;
    }
    let mut rhs = vec![0.0; n * d];
    gemm(
        n,
        t,
        d,
        states.as_slice(),
        true,
        targets.as_slice(),
        false,
        0.0,
        &mut rhs,
    );
    cholesky(&mut g, n)?;
    cholesky_solve(&g, n, &mut rhs, d);
    let mut w = Matrix::zeros(d, n);
    for i in 0..n {
        for j in 0..d {
            w.set(j, i, rhs[i * d + j]);
        }
    }
    if !w.is_finite() {
        return Err(Error::Regularization);
    }
    Ok(w)
}

/// Teacher-forced training over independent segments: the state after
/// consuming `i(t)` (plus training noise) is regressed onto `i(t+1)`, with
/// the first `washout` pairs of each segment discarded.
pub fn train_on_segments(segments: &[TrajectoryMatrix], cfg: &ReservoirConfig) -> Result<ReservoirModel> {
    let first = segments
        .first()
        .ok_or_else(|| Error::InsufficientData("no training segments".into()))?;
    let d = first.dim();
    let mut model = init_reservoir(cfg, d)?;
    let n = cfg.size;
    let usable: usize = segments.iter().map(|s| s.len().saturating_sub(cfg.washout + 1)).sum();
    if usable == 0 {
        return Err(Error::InsufficientData(format!(
            "segments must be longer than washout + 1 = {}",
            cfg.washout + 1
        )));
    }
    let mut states = Matrix::zeros(usable, n);
    let mut targets = Matrix::zeros(usable, d);
    let mut row = 0;
    let mut scratch = vec![0.0; n];
    let mut input = vec![0.0; d];
    for (si, seg) in segments.iter().enumerate() {
        if seg.dim() != d {
            return Err(Error::Invalid("segments differ in dimension".into()));
        }
        let mut rng = seed::rng(seed::derive_index(seed::derive(cfg.seed, "train-noise"), si as u64));
        let mut r = vec![0.0; n];
        for t in 0..seg.len().saturating_sub(1) {
            for (k, v) in input.iter_mut().enumerate() {
                let xi: f64 = StandardNormal.sample(&mut rng);
                *v = seg.data.get(t, k) + cfg.train_noise * xi;
            }
            model.advance_into(&mut r, &input, &mut scratch);
            if t >= cfg.washout {
                states.row_mut(row).copy_from_slice(&r);
                targets.row_mut(row).copy_from_slice(seg.data.row(t + 1));
                row += 1;
            }
        }
    }
    debug_assert_eq!(row, usable);
    model.w_out = ridge_readout(&states, &targets, cfg.ridge)?;
    Ok(model)
}

/// Closed-loop generation.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub trajectory: TrajectoryMatrix,
    /// Step at which an output left `±DIVERGENCE_LIMIT`; later rows hold
    /// the clipped diverging output.
    pub truncated_at: Option<usize>,
}

/// Drives the reservoir open-loop through `warmup`, then feeds each output
/// back as the next input for `horizon` steps.
pub fn closed_loop_predict(model: &ReservoirModel, warmup: &TrajectoryMatrix, horizon: usize) -> Result<Prediction> {
    if !model.is_trained() {
        return Err(Error::Invalid("reservoir readout is not trained".into()));
    }
    if warmup.len() < model.config.washout.max(1) {
        return Err(Error::InsufficientData(format!(
            "warmup of {} points is shorter than washout {}",
            warmup.len(),
            model.config.washout
        )));
    }
    if warmup.dim() != model.input_dim {
        return Err(Error::Invalid("warmup dimension differs from the model".into()));
    }
    let n = model.config.size;
    let d = model.input_dim;
    let mut r = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    for t in 0..warmup.len() {
        model.advance_into(&mut r, warmup.data.row(t), &mut scratch);
    }
    let mut out = Matrix::zeros(horizon, d);
    let mut truncated_at = None;
    for h in 0..horizon {
        let o = model.readout(&r);
        if o.iter().any(|v| !(v.abs() <= DIVERGENCE_LIMIT)) {
            let clipped: Vec<f64> = o
                .iter()
                .map(|v| {
                    if v.is_nan() {
                        DIVERGENCE_LIMIT
                    } else {
                        v.clamp(-DIVERGENCE_LIMIT, DIVERGENCE_LIMIT)
                    }
                })
                .collect();
            for k in h..horizon {
                out.row_mut(k).copy_from_slice(&clipped);
            }
            truncated_at = Some(h);
            break;
        }
        out.row_mut(h).copy_from_slice(&o);
        model.advance_into(&mut r, &o, &mut scratch);
    }
    Ok(Prediction {
        trajectory: TrajectoryMatrix {
            data: out,
            dt_effective: warmup.dt_effective,
            norm_stats: warmup.norm_stats.clone(),
        },
        truncated_at,
    })
}

#[cfg(test)]
mod tests;
