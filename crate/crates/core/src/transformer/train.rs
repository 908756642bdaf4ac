use rand::Rng as _;

use super::config::{LossPoints, TransformerConfig};
use super::model::{Mode, TransformerParams};
use crate::dynsys::{self, SystemSpec, TrajectoryMatrix};
use crate::error::{Error, Result};
use crate::observe::{apply_observation, ObservationSpec};
use crate::seed;
use crate::tensorcore::{Adam, Graph, Tensor};

/// Training data pool and measurement model.
#[derive(Debug, Clone)]
pub struct TrainingRegime {
    pub pool: Vec<(String, TrajectoryMatrix)>,
    /// Points generated per system.
    pub data_length: usize,
    /// Multiplicative measurement noise applied to every training segment.
    pub noise_sigma: f64,
    /// Systems that must never appear in the pool.
    pub held_out: Vec<String>,
}

impl TrainingRegime {
    /// Simulates `data_length` preprocessed points for each system.
    pub fn from_systems(systems: &[SystemSpec], data_length: usize, noise_sigma: f64, seed: u64) -> Result<Self> {
        let mut pool = Vec::with_capacity(systems.len());
        for s in systems {
            let data = dynsys::generate(s, data_length, seed::derive(seed, s.name()))?;
            pool.push((s.name().to_string(), data));
        }
        Ok(Self {
            pool,
            data_length,
            noise_sigma,
            held_out: dynsys::TARGETS.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn validate(&self, cfg: &TransformerConfig) -> Result<()> {
        if self.pool.is_empty() {
            return Err(Error::InsufficientData("empty training pool".into()));
        }
        for (name, data) in &self.pool {
            if self.held_out.iter().any(|h| h == name) {
                return Err(Error::Invalid(format!(
                    "held-out system {name} is in the training pool"
                )));
            }
            if data.len() < cfg.max_len {
                return Err(Error::InsufficientData(format!(
                    "{name} has {} points, fewer than max_len {}",
                    data.len(),
                    cfg.max_len
                )));
            }
            if data.dim() != cfg.input_dim {
                return Err(Error::Invalid(format!(
                    "{name} has dimension {}, model expects {}",
                    data.dim(),
                    cfg.input_dim
                )));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Invalid(format!("noise sigma {}", self.noise_sigma)));
        }
        Ok(())
    }

    /// Steps needed for the expected number of drawn points to cover every
    /// system's data once.
    pub fn steps_per_epoch(&self, cfg: &TransformerConfig) -> usize {
        let total: usize = self.pool.iter().map(|(_, d)| d.len()).sum();
        let mean_len = (1.0 + cfg.max_len as f64) / 2.0;
        ((total as f64) / (cfg.batch_size as f64 * mean_len)).ceil().max(1.0) as usize
    }
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub steps_per_epoch: usize,
    pub epoch_losses: Vec<f64>,
}

/// One training batch: equal-length noisy masked inputs and clean targets.
#[derive(Debug, Clone)]
pub struct Batch {
    pub system: usize,
    pub seg_len: usize,
    pub sparsity: f64,
    pub inputs: Vec<Tensor>,
    pub targets: Vec<Tensor>,
    pub masks: Vec<Vec<bool>>,
}

/// Draws the batch for `step`: one system, one length, one sparsity, and
/// `batch_size` windows at random offsets.
pub fn draw_batch(regime: &TrainingRegime, cfg: &TransformerConfig, seed: u64, step: usize) -> Result<Batch> {
    let step_seed = seed::derive_index(seed::derive(seed, "step"), step as u64);
    let mut rng = seed::rng(step_seed);
    let system = rng.random_range(0..regime.pool.len());
    let seg_len = rng.random_range(1..=cfg.max_len);
    let sparsity: f64 = rng.random();
    let data = &regime.pool[system].1;
    let mut batch = Batch {
        system,
        seg_len,
        sparsity,
        inputs: Vec::with_capacity(cfg.batch_size),
        targets: Vec::with_capacity(cfg.batch_size),
        masks: Vec::with_capacity(cfg.batch_size),
    };
    for b in 0..cfg.batch_size {
        let off = rng.random_range(0..=data.len() - seg_len);
        let window = data.window(off, seg_len);
        let spec =
            ObservationSpec::new(sparsity, seed::derive_index(step_seed, b as u64)).with_mult_noise(regime.noise_sigma);
        let obs = apply_observation(&window, &spec)?;
        let d = window.dim();
        batch
            .inputs
            .push(Tensor::from_vec(&[seg_len, d], obs.values.into_vec())?);
        batch
            .targets
            .push(Tensor::from_vec(&[seg_len, d], window.data.into_vec())?);
        batch.masks.push(obs.mask.as_slice().iter().map(|m| !m).collect());
    }
    Ok(batch)
}

/// Mean batch loss and its gradient with respect to every parameter.
pub fn batch_loss_and_grads(
    model: &TransformerParams,
    batch: &Batch,
    mode: Mode,
    dropout_seed: u64,
) -> Result<(f64, Vec<Tensor>)> {
    let cfg = &model.config;
    let mut g = Graph::new();
    let bound = model.bind(&mut g, true);
    let parts: Vec<_> = batch.inputs.iter().map(|t| g.constant(t.clone())).collect();
    let x = if parts.len() == 1 {
        parts[0]
    } else {
        g.concat_rows(&parts)?
    };
    let y = model.forward_graph(&mut g, &bound, x, batch.seg_len, mode, dropout_seed, true)?;
    let mut losses = Vec::with_capacity(batch.targets.len());
    for (i, truth) in batch.targets.iter().enumerate() {
        let pred = if batch.targets.len() == 1 {
            y
        } else {
            g.slice_rows(y, i * batch.seg_len, batch.seg_len)?
        };
        let mask = match cfg.loss_points {
            LossPoints::All => None,
            LossPoints::Unobserved => Some(batch.masks[i].clone()),
        };
        losses.push(g.recon_loss(pred, truth, cfg.smooth_weight, mask)?);
    }
    let mut total = losses[0];
    for &l in &losses[1..] {
        total = g.add(total, l)?;
    }
    let mean = g.scale(total, 1.0 / batch.targets.len() as f64);
    let value = g.value(mean).item();
    let mut grads = g.backward(mean);
    let out = bound
        .vars
        .iter()
        .zip(model.params().tensors())
        .map(|(v, t)| grads.take_or_zeros(*v, t.shape()))
        .collect();
    Ok((value, out))
}

/// Trains a fresh model; see [`train_with`].
pub fn train(regime: &TrainingRegime, cfg: &TransformerConfig, seed: u64) -> Result<(TransformerParams, TrainLog)> {
    train_with(regime, cfg, seed, None, |_, _, _| Ok(()))
}

/// Trains for `cfg.epochs` epochs (or `max_steps` steps if given), calling
/// `on_epoch(epoch, mean_loss, params)` after each full epoch. A non-finite
/// loss aborts the run; the last parameters handed to `on_epoch` are then the
/// most recent good state.
pub fn train_with<F>(
    regime: &TrainingRegime,
    cfg: &TransformerConfig,
    seed: u64,
    max_steps: Option<usize>,
    mut on_epoch: F,
) -> Result<(TransformerParams, TrainLog)>
where
    F: FnMut(usize, f64, &TransformerParams) -> Result<()>,
{
    cfg.validate()?;
    regime.validate(cfg)?;
    let mut model = TransformerParams::init(cfg, seed)?;
    let mut opt = Adam::new(model.params(), cfg.lr);
    let steps_per_epoch = regime.steps_per_epoch(cfg);
    let total = max_steps.unwrap_or(steps_per_epoch * cfg.epochs);
    let mut log = TrainLog {
        steps_per_epoch,
        epoch_losses: Vec::new(),
    };
    let mut running = 0.0;
    let mut in_epoch = 0;
    for step in 0..total {
        let batch = draw_batch(regime, cfg, seed, step)?;
        let ds = seed::derive_index(seed::derive(seed, "dropout"), step as u64);
        let (loss, grads) = batch_loss_and_grads(&model, &batch, Mode::Train, ds)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        opt.step(model.params_mut(), &grads)?;
        running += loss;
        in_epoch += 1;
        if in_epoch == steps_per_epoch || step + 1 == total {
            let mean = running / in_epoch as f64;
            log.epoch_losses.push(mean);
            on_epoch(log.epoch_losses.len(), mean, &model)?;
            running = 0.0;
            in_epoch = 0;
        }
    }
    Ok((model, log))
}
