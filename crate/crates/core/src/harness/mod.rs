//! Experiment orchestration: datasets, training, reconstruction sweeps, the
//! transformer-to-reservoir climate pipeline, leave-out rotations and
//! hyperparameter search, each writing CSV reports tagged with the plan hash.

mod manifest;
mod plan;

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng as _;

use crate::dynsys::{self, TrajectoryMatrix};
use crate::error::{Error, Result};
use crate::hyperopt::{self, Config, SearchResult, SearchSpace};
use crate::io;
use crate::metrics::{self, EvalReport};
use crate::observe::{apply_observation, ObservationSpec, SparseSeries};
use crate::reservoir::{self, ReservoirConfig};
use crate::seed;
use crate::transformer::{self, TrainLog, TrainingRegime, TransformerParams};

pub use manifest::{sha256_file, Artifact, RunManifest, MANIFEST_FILE};
pub use plan::{ClimateSettings, ExperimentPlan, SweepGrid, DESK_DATA_LENGTH, DESK_POOL, PAPER_DATA_LENGTH};

/// Dataset files keyed by system, plus systems that could not be simulated.
#[derive(Debug, Clone, Default)]
pub struct DatasetSummary {
    pub files: Vec<(String, PathBuf)>,
    pub skipped: Vec<(String, String)>,
}

fn dataset_seed(plan: &ExperimentPlan) -> u64 {
    seed::derive(plan.seed, "dataset")
}

fn is_simulation_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::Divergence { .. } | Error::Integration { .. } | Error::DegenerateNormalization { .. }
    )
}

/// Simulates and stores every pool system under `dir`. A system that
/// diverges is skipped with a warning.
pub fn build_dataset(plan: &ExperimentPlan, dir: &Path) -> Result<DatasetSummary> {
    plan.validate()?;
    fs::create_dir_all(dir)?;
    let base = dataset_seed(plan);
    let mut out = DatasetSummary::default();
    for name in plan.pool_systems() {
        let spec = dynsys::find(&name).ok_or_else(|| Error::UnknownSystem(name.clone()))?;
        match dynsys::generate(&spec, plan.data_length(), seed::derive(base, &name)) {
            Ok(t) => {
                let path = dir.join(format!("{name}.cwtj"));
                io::save_trajectory(&path, &t)?;
                out.files.push((name, path));
            }
            Err(e) if is_simulation_failure(&e) => {
                log::warn!("skipping {name}: {e}");
                out.skipped.push((name, e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    if out.files.is_empty() {
        return Err(Error::InsufficientData("every pool system failed to simulate".into()));
    }
    Ok(out)
}

/// Training regime over the files of a built dataset.
pub fn load_regime(plan: &ExperimentPlan, dataset: &DatasetSummary) -> Result<TrainingRegime> {
    let mut pool = Vec::with_capacity(dataset.files.len());
    for (name, path) in &dataset.files {
        if plan.held_out.contains(name) {
            return Err(Error::Invalid(format!("held-out system {name} found in the dataset")));
        }
        pool.push((name.clone(), io::load_trajectory(path)?));
    }
    Ok(TrainingRegime {
        pool,
        data_length: plan.data_length(),
        noise_sigma: plan.train_noise,
        held_out: plan.held_out.clone(),
    })
}

/// Simulates the pool in memory, skipping systems that fail.
pub fn regime_in_memory(plan: &ExperimentPlan) -> Result<TrainingRegime> {
    let base = dataset_seed(plan);
    let mut pool = Vec::new();
    for name in plan.pool_systems() {
        let spec = dynsys::find(&name).ok_or_else(|| Error::UnknownSystem(name.clone()))?;
        match dynsys::generate(&spec, plan.data_length(), seed::derive(base, &name)) {
            Ok(t) => pool.push((name, t)),
            Err(e) if is_simulation_failure(&e) => log::warn!("skipping {name}: {e}"),
            Err(e) => return Err(e),
        }
    }
    Ok(TrainingRegime {
        pool,
        data_length: plan.data_length(),
        noise_sigma: plan.train_noise,
        held_out: plan.held_out.clone(),
    })
}

pub fn train_seed(plan: &ExperimentPlan) -> u64 {
    seed::derive(plan.seed, "train")
}

pub fn train_model(plan: &ExperimentPlan, regime: &TrainingRegime) -> Result<(TransformerParams, TrainLog)> {
    transformer::train(regime, &plan.transformer_config()?, train_seed(plan))
}

pub fn write_train_log(path: &Path, log: &TrainLog, config_hash: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["config_hash", "epoch", "steps", "mean_loss"])?;
    for (i, l) in log.epoch_losses.iter().enumerate() {
        w.write_record([
            config_hash.to_string(),
            (i + 1).to_string(),
            log.steps_per_epoch.to_string(),
            l.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_checkpoint(path: &Path, model: &TransformerParams) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    model.save(&mut w)?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<TransformerParams> {
    TransformerParams::load(&mut std::io::BufReader::new(fs::File::open(path)?))
}

/// Ground-truth trajectory used to score a held-out system.
pub fn evaluation_trajectory(plan: &ExperimentPlan, system: &str) -> Result<TrajectoryMatrix> {
    let spec = dynsys::find(system).ok_or_else(|| Error::UnknownSystem(system.to_string()))?;
    dynsys::generate(
        &spec,
        plan.sweep.eval_length,
        seed::derive(plan.seed, &format!("eval/{system}")),
    )
}

/// One sweep condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub seq_len: usize,
    pub sparsity: f64,
    pub noise_sigma: f64,
    pub add_noise: f64,
}

/// The observed window of one realization. Offset and mask both follow from
/// `seed`, so a row can be regenerated from its recorded seed alone.
pub fn realization(
    truth: &TrajectoryMatrix,
    point: &GridPoint,
    seed_r: u64,
) -> Result<(TrajectoryMatrix, SparseSeries)> {
    if point.seq_len == 0 || point.seq_len > truth.len() {
        return Err(Error::Invalid(format!(
            "sequence length {} outside 1..={}",
            point.seq_len,
            truth.len()
        )));
    }
    let mut rng = seed::rng(seed::derive(seed_r, "offset"));
    let offset = rng.random_range(0..=truth.len() - point.seq_len);
    let window = truth.window(offset, point.seq_len);
    let spec = ObservationSpec::new(point.sparsity, seed::derive(seed_r, "observe"))
        .with_mult_noise(point.noise_sigma)
        .with_add_noise(point.add_noise);
    let sparse = apply_observation(&window, &spec)?;
    Ok((window, sparse))
}

/// Per-realization score.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationRow {
    pub system: String,
    pub point: GridPoint,
    pub realization: usize,
    pub seed: u64,
    pub mse: f64,
    pub baseline_mse: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub rows: Vec<RealizationRow>,
    pub reports: Vec<EvalReport>,
    /// Median linear-interpolation MSE per report.
    pub baseline_medians: Vec<f64>,
}

fn grid_points(g: &SweepGrid) -> Vec<GridPoint> {
    let mut v = Vec::new();
    for &seq_len in &g.seq_len {
        for &sparsity in &g.sparsity {
            for &noise_sigma in &g.noise {
                v.push(GridPoint {
                    seq_len,
                    sparsity,
                    noise_sigma,
                    add_noise: g.add_noise,
                });
            }
        }
    }
    v
}

fn point_key(system: &str, p: &GridPoint) -> String {
    format!(
        "{system}/{}/{}/{}/{}",
        p.seq_len, p.sparsity, p.noise_sigma, p.add_noise
    )
}

/// Scores `realizations` independent observations of every held-out system
/// at every grid point, against the model and against linear interpolation.
pub fn run_reconstruction_sweep(plan: &ExperimentPlan, model: &TransformerParams) -> Result<SweepOutput> {
    plan.validate()?;
    let base = seed::derive(plan.seed, "sweep");
    let mut out = SweepOutput::default();
    for system in &plan.held_out {
        let truth = evaluation_trajectory(plan, system)?;
        for point in grid_points(&plan.sweep) {
            let key_seed = seed::derive(base, &point_key(system, &point));
            let mut errors = Vec::with_capacity(plan.realizations);
            let mut baseline = Vec::with_capacity(plan.realizations);
            for r in 0..plan.realizations {
                let seed_r = seed::derive_index(key_seed, r as u64);
                let (window, sparse) = realization(&truth, &point, seed_r)?;
                let rec = transformer::reconstruct_chunked(&sparse, model)?;
                let mse = metrics::mse(&rec.data, &window.data)?;
                let baseline_mse = metrics::mse(&metrics::linear_interpolation(&sparse), &window.data)?;
                errors.push(mse);
                baseline.push(baseline_mse);
                out.rows.push(RealizationRow {
                    system: system.clone(),
                    point,
                    realization: r,
                    seed: seed_r,
                    mse,
                    baseline_mse,
                });
            }
            out.reports.push(EvalReport::from_errors(
                system,
                point.seq_len,
                point.sparsity,
                point.noise_sigma,
                &errors,
                &plan.sweep.thresholds,
            )?);
            out.baseline_medians.push(metrics::median(&baseline)?);
        }
    }
    Ok(out)
}

/// Writes `sweep_realizations.csv` and `sweep_summary.csv`; returns both paths.
pub fn write_sweep_csv(dir: &Path, out: &SweepOutput, config_hash: &str) -> Result<[PathBuf; 2]> {
    let per = dir.join("sweep_realizations.csv");
    let mut w = csv::Writer::from_path(&per)?;
    w.write_record([
        "config_hash",
        "system",
        "seq_len",
        "sparsity",
        "noise_sigma",
        "add_noise",
        "realization",
        "seed",
        "mse",
        "linear_mse",
    ])?;
    for r in &out.rows {
        w.write_record([
            config_hash.to_string(),
            r.system.clone(),
            r.point.seq_len.to_string(),
            r.point.sparsity.to_string(),
            r.point.noise_sigma.to_string(),
            r.point.add_noise.to_string(),
            r.realization.to_string(),
            r.seed.to_string(),
            r.mse.to_string(),
            r.baseline_mse.to_string(),
        ])?;
    }
    w.flush()?;

    let agg = dir.join("sweep_summary.csv");
    let mut w = csv::Writer::from_path(&agg)?;
    let thresholds: Vec<String> = out
        .reports
        .first()
        .map(|r| r.recovery_stability.keys().cloned().collect())
        .unwrap_or_default();
    let mut header: Vec<String> = [
        "config_hash",
        "system",
        "seq_len",
        "sparsity",
        "noise_sigma",
        "realizations",
        "mean_mse",
        "median_mse",
        "rmse",
        "linear_median_mse",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(thresholds.iter().map(|t| format!("recovery_stability_{t}")));
    w.write_record(&header)?;
    for (rep, lin) in out.reports.iter().zip(&out.baseline_medians) {
        let mut rec = vec![
            config_hash.to_string(),
            rep.system.clone(),
            rep.seq_len.to_string(),
            rep.sparsity.to_string(),
            rep.noise_sigma.to_string(),
            rep.n_realizations.to_string(),
            rep.mse.to_string(),
            rep.median_mse.to_string(),
            rep.rmse.to_string(),
            lin.to_string(),
        ];
        rec.extend(thresholds.iter().map(|t| rep.recovery_stability[t].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok([per, agg])
}

/// What the reservoir is trained on.
#[derive(Debug, Clone, Copy)]
pub enum ClimateSource<'a> {
    /// Transformer reconstructions of sparse observations.
    Transformer(&'a TransformerParams),
    /// The clean segments themselves.
    GroundTruth,
}

#[derive(Debug, Clone)]
pub struct ClimateOutcome {
    pub system: String,
    pub source: &'static str,
    pub reservoir_size: usize,
    /// Short-term error over the first `rmse_steps` predicted points.
    pub rmse: f64,
    pub persistence_rmse: f64,
    pub dv: f64,
    /// DV of a column-shuffled copy of the true continuation.
    pub surrogate_dv: f64,
    /// Mean reconstruction MSE over the training segments (0 for clean input).
    pub reconstruction_mse: f64,
    pub truncated_at: Option<usize>,
    pub prediction: TrajectoryMatrix,
}

impl ClimateOutcome {
    pub fn diverged(&self) -> bool {
        self.truncated_at.is_some()
    }
}

/// Observes `segments` consecutive stretches of the target, reconstructs
/// them, trains the reservoir on the result and runs it closed-loop from the
/// end of the last segment. Scores compare against the true continuation.
pub fn run_climate_pipeline(
    plan: &ExperimentPlan,
    source: ClimateSource<'_>,
    rc: &ReservoirConfig,
) -> Result<ClimateOutcome> {
    plan.validate()?;
    let c = &plan.climate;
    let spec = dynsys::find(&c.system).ok_or_else(|| Error::UnknownSystem(c.system.clone()))?;
    let total = c.segments * c.segment_length + c.horizon;
    let truth = dynsys::generate(&spec, total, seed::derive(plan.seed, &format!("climate/{}", c.system)))?;
    let mask_base = seed::derive(plan.seed, "climate-observe");
    let mut segments = Vec::with_capacity(c.segments);
    let mut rec_err = 0.0;
    for i in 0..c.segments {
        let clean = truth.window(i * c.segment_length, c.segment_length);
        let seg = match source {
            ClimateSource::GroundTruth => clean,
            ClimateSource::Transformer(model) => {
                let obs =
                    ObservationSpec::new(c.sparsity, seed::derive_index(mask_base, i as u64)).with_mult_noise(c.noise);
                let rec = transformer::reconstruct_chunked(&apply_observation(&clean, &obs)?, model)?;
                rec_err += metrics::mse(&rec.data, &clean.data)?;
                rec
            }
        };
        segments.push(seg);
    }
    let model = reservoir::train_on_segments(&segments, rc)?;
    let last = segments.last().expect("at least three segments");
    let warm_len = (rc.washout * 2).max(rc.washout + 1).min(last.len());
    let warmup = last.window(last.len() - warm_len, warm_len);
    let pred = reservoir::closed_loop_predict(&model, &warmup, c.horizon)?;
    let future = truth.window(c.segments * c.segment_length, c.horizon);

    let k = c.rmse_steps.min(c.horizon).max(1);
    let head = |m: &crate::matrix::Matrix| m.slice_rows(0, k);
    let rmse = metrics::rmse(&head(&pred.trajectory.data), &head(&future.data))?;
    let persist = metrics::persistence(last.data.row(last.len() - 1), k);
    let persistence_rmse = metrics::rmse(&persist, &head(&future.data))?;
    let dv = metrics::deviation_value(&pred.trajectory.data, &future.data, metrics::DEFAULT_CELL)?;
    let surrogate = metrics::shuffled_surrogate(&future.data, seed::derive(plan.seed, "surrogate"));
    let surrogate_dv = metrics::deviation_value(&surrogate, &future.data, metrics::DEFAULT_CELL)?;
    if pred.truncated_at.is_some() {
        log::warn!("reservoir diverged at step {:?}", pred.truncated_at);
    }
    Ok(ClimateOutcome {
        system: c.system.clone(),
        source: match source {
            ClimateSource::Transformer(_) => "transformer",
            ClimateSource::GroundTruth => "ground_truth",
        },
        reservoir_size: rc.size,
        rmse,
        persistence_rmse,
        dv,
        surrogate_dv,
        reconstruction_mse: rec_err / c.segments as f64,
        truncated_at: pred.truncated_at,
        prediction: pred.trajectory,
    })
}

pub fn write_climate_csv(path: &Path, outcomes: &[ClimateOutcome], config_hash: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "config_hash",
        "system",
        "source",
        "reservoir_size",
        "reconstruction_mse",
        "rmse",
        "persistence_rmse",
        "dv",
        "surrogate_dv",
        "diverged",
        "truncated_at",
    ])?;
    for o in outcomes {
        w.write_record([
            config_hash.to_string(),
            o.system.clone(),
            o.source.to_string(),
            o.reservoir_size.to_string(),
            o.reconstruction_mse.to_string(),
            o.rmse.to_string(),
            o.persistence_rmse.to_string(),
            o.dv.to_string(),
            o.surrogate_dv.to_string(),
            o.diverged().to_string(),
            o.truncated_at.map(|t| t.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Consecutive groups of at most `size` names; the last group may be short.
pub fn rotation_groups(systems: &[String], size: usize) -> Vec<Vec<String>> {
    systems.chunks(size.max(1)).map(|c| c.to_vec()).collect()
}

#[derive(Debug, Clone)]
pub struct RotationRow {
    pub rotation: usize,
    pub report: EvalReport,
    pub linear_median_mse: f64,
}

/// Leave-group-out over the whole catalog: each rotation trains on every
/// other system and scores the held-out group on the sweep grid.
/// `on_rotation` sees each rotation's rows as they finish.
pub fn rotate_leave_out<F>(plan: &ExperimentPlan, mut on_rotation: F) -> Result<Vec<RotationRow>>
where
    F: FnMut(usize, &[RotationRow]),
{
    let names: Vec<String> = dynsys::catalog().iter().map(|s| s.name().to_string()).collect();
    let mut rows = Vec::new();
    for (i, group) in rotation_groups(&names, plan.rotation_group).into_iter().enumerate() {
        let sub = ExperimentPlan {
            pool: names.iter().filter(|n| !group.contains(n)).cloned().collect(),
            held_out: group,
            seed: seed::derive_index(seed::derive(plan.seed, "rotation"), i as u64),
            ..plan.clone()
        };
        sub.validate()?;
        let regime = regime_in_memory(&sub)?;
        let (model, _) = train_model(&sub, &regime)?;
        let out = run_reconstruction_sweep(&sub, &model)?;
        let start = rows.len();
        for (report, lin) in out.reports.into_iter().zip(out.baseline_medians) {
            rows.push(RotationRow {
                rotation: i,
                report,
                linear_median_mse: lin,
            });
        }
        on_rotation(i, &rows[start..]);
    }
    Ok(rows)
}

pub fn write_rotation_csv(path: &Path, rows: &[RotationRow], config_hash: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "config_hash",
        "rotation",
        "system",
        "seq_len",
        "sparsity",
        "noise_sigma",
        "realizations",
        "mean_mse",
        "median_mse",
        "linear_median_mse",
    ])?;
    for r in rows {
        let p = &r.report;
        w.write_record([
            config_hash.to_string(),
            r.rotation.to_string(),
            p.system.clone(),
            p.seq_len.to_string(),
            p.sparsity.to_string(),
            p.noise_sigma.to_string(),
            p.n_realizations.to_string(),
            p.mse.to_string(),
            p.median_mse.to_string(),
            r.linear_median_mse.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn param(cfg: &Config, name: &str) -> Result<f64> {
    cfg.get(name)
        .and_then(|v| v.as_f64())
        .ok_or_else(|| Error::Config(format!("search config lacks numeric `{name}`")))
}

/// Transformer settings with the searched entries of `cfg` applied.
pub fn apply_transformer_config(
    base: &crate::transformer::TransformerConfig,
    cfg: &Config,
) -> Result<crate::transformer::TransformerConfig> {
    let mut t = base.clone();
    for k in cfg.keys() {
        let v = param(cfg, k)?;
        match k.as_str() {
            "embed_dim" => {
                t.embed_dim = v as usize;
                t.d_k = t.embed_dim;
                t.d_v = t.embed_dim;
            }
            "heads" => t.heads = v as usize,
            "blocks" => t.blocks = v as usize,
            "ffn_dim" => t.ffn_dim = v as usize,
            "lr" => t.lr = v,
            "dropout" => t.dropout = v,
            "smooth_weight" => t.smooth_weight = v,
            other => return Err(Error::Config(format!("unknown transformer parameter `{other}`"))),
        }
    }
    t.validate()?;
    Ok(t)
}

pub fn apply_reservoir_config(base: &ReservoirConfig, cfg: &Config) -> Result<ReservoirConfig> {
    let mut r = base.clone();
    for k in cfg.keys() {
        let v = param(cfg, k)?;
        match k.as_str() {
            "leak" => r.leak = v,
            "ridge" => r.ridge = v,
            "input_scale" => r.input_scale = v,
            "spectral_radius" => r.spectral_radius = v,
            "link_prob" => r.link_prob = v,
            "train_noise" => r.train_noise = v,
            "size" => r.size = v as usize,
            other => return Err(Error::Config(format!("unknown reservoir parameter `{other}`"))),
        }
    }
    r.validate()?;
    Ok(r)
}

/// Random search over transformer settings; the objective is the median
/// reconstruction MSE on the held-out systems at the plan's grid.
pub fn search_transformer(
    plan: &ExperimentPlan,
    space: &SearchSpace,
    trials: usize,
    seed: u64,
) -> Result<SearchResult> {
    let regime = regime_in_memory(plan)?;
    let base = plan.transformer_config()?;
    hyperopt::random_search(
        space,
        trials,
        |cfg, trial_seed| {
            let t = apply_transformer_config(&base, cfg)?;
            let (model, _) = transformer::train(&regime, &t, trial_seed)?;
            let out = run_reconstruction_sweep(plan, &model)?;
            let med: Vec<f64> = out.reports.iter().map(|r| r.median_mse).collect();
            Ok(med.iter().sum::<f64>() / med.len() as f64)
        },
        seed,
    )
}

/// Random search over reservoir settings on clean segments of the climate
/// system; the objective is the short-term closed-loop RMSE.
pub fn search_reservoir(plan: &ExperimentPlan, space: &SearchSpace, trials: usize, seed: u64) -> Result<SearchResult> {
    let base = plan.reservoir_config()?;
    hyperopt::random_search(
        space,
        trials,
        |cfg, trial_seed| {
            let rc = apply_reservoir_config(&base, cfg)?.with_seed(trial_seed);
            let o = run_climate_pipeline(plan, ClimateSource::GroundTruth, &rc)?;
            if o.diverged() {
                return Err(Error::Divergence {
                    system: o.system,
                    step: o.truncated_at.unwrap_or(0),
                });
            }
            Ok(o.rmse)
        },
        seed,
    )
}

/// One row per trial; wall time is left out so reruns match byte for byte.
pub fn write_search_csv(path: &Path, result: &SearchResult, config_hash: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let names: Vec<String> = result.best.config.keys().cloned().collect();
    let mut header = vec!["config_hash".to_string(), "trial".into(), "seed".into()];
    header.extend(names.iter().cloned());
    header.extend(["objective".to_string(), "error".into(), "best".into()]);
    w.write_record(&header)?;
    for t in &result.history {
        let mut rec = vec![config_hash.to_string(), t.index.to_string(), t.seed.to_string()];
        rec.extend(
            names
                .iter()
                .map(|n| t.config.get(n).map(|v| v.to_string()).unwrap_or_default()),
        );
        rec.push(t.objective.map(|o| o.to_string()).unwrap_or_default());
        rec.push(t.error.clone().unwrap_or_default());
        rec.push((t.index == result.best.index).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests;
