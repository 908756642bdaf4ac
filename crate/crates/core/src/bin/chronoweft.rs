use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use chronoweft::dynsys;
use chronoweft::harness::{self, ClimateSource, ExperimentPlan, RunManifest};
use chronoweft::hyperopt::SearchSpace;
use chronoweft::io;
use chronoweft::metrics;
use chronoweft::observe::{apply_observation, ObservationSpec};
use chronoweft::transformer;
use chronoweft::{Error, Result};

const OUT_ENV: &str = "CHRONOWEFT_OUT";

#[derive(Parser)]
#[command(
    name = "chronoweft",
    version,
    about = "Sparse-data dynamics reconstruction and climate prediction"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args, Clone, Default)]
struct PlanArgs {
    /// Experiment plan (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named plan: fig4, fig5, fig9 or fig12.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// desk or paper.
    #[arg(long)]
    profile: Option<String>,
    /// Comma-separated systems, `all`, or `all-minus:a,b` (the listed systems become the held-out set).
    #[arg(long)]
    pool: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Run directory; defaults to the plan's output_dir under $CHRONOWEFT_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Verb {
    /// Simulate one catalog system and store the normalized trajectory.
    Gen {
        #[arg(long)]
        system: String,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = dynsys::DT)]
        dt: f64,
        /// Integration steps per stored row; the system default when omitted.
        #[arg(long)]
        subsample: Option<usize>,
        #[arg(long, default_value_t = dynsys::DEFAULT_TRANSIENT)]
        transient: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mask and perturb a trajectory file.
    Mask {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        sparsity: f64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0.0)]
        add_noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the dataset and train a transformer.
    Train(PlanArgs),
    /// Fill in a sparse file with a trained model.
    Reconstruct {
        #[arg(long, alias = "ckpt")]
        checkpoint: PathBuf,
        #[arg(long, alias = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Ground truth to score against; writes a one-row CSV report.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, requires = "truth")]
        report: Option<PathBuf>,
    },
    /// Reconstruction sweep over the plan's grid on held-out systems.
    Evaluate {
        #[command(flatten)]
        plan: PlanArgs,
        /// Defaults to model.cwtc in the run directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Transformer reconstruction feeding a reservoir, scored on long-term statistics.
    Climate {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Source::Both)]
        source: Source,
    },
    /// Random hyperparameter search.
    Search {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, value_enum)]
        target: Target,
        /// Defaults to 60 for the transformer and 200 for the reservoir.
        #[arg(long)]
        trials: Option<usize>,
        /// TOML search space replacing the built-in one.
        #[arg(long)]
        space: Option<PathBuf>,
    },
    /// Leave-group-out training and evaluation over the whole catalog.
    Rotate(PlanArgs),
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Source {
    Transformer,
    GroundTruth,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Transformer,
    Reservoir,
}

fn out_root() -> Option<PathBuf> {
    std::env::var_os(OUT_ENV).map(PathBuf::from)
}

/// Relative paths land under $CHRONOWEFT_OUT when it is set.
fn resolve(path: &Path) -> PathBuf {
    match out_root() {
        Some(root) if path.is_relative() => root.join(path),
        _ => path.to_path_buf(),
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent() {
        if !p.as_os_str().is_empty() {
            fs::create_dir_all(p)?;
        }
    }
    Ok(())
}

fn load_plan(a: &PlanArgs) -> Result<(ExperimentPlan, PathBuf)> {
    let mut plan = match (&a.config, &a.preset) {
        (Some(p), _) => ExperimentPlan::load(p)?,
        (None, Some(name)) => ExperimentPlan::preset(name)?,
        (None, None) => ExperimentPlan::default(),
    };
    if let Some(s) = a.seed {
        plan.seed = s;
    }
    if let Some(p) = &a.profile {
        plan.profile = p.clone();
    }
    if let Some(e) = a.epochs {
        plan.epochs = Some(e);
    }
    if let Some(pool) = &a.pool {
        let list = |s: &str| -> Vec<String> {
            s.split(',')
                .map(str::trim)
                .filter(|x| !x.is_empty())
                .map(String::from)
                .collect()
        };
        if pool == "all" {
            plan.pool.clear();
        } else if let Some(rest) = pool.strip_prefix("all-minus:") {
            plan.pool.clear();
            plan.held_out = list(rest);
        } else {
            plan.pool = list(pool);
        }
    }
    if let Some(o) = &a.out {
        plan.output_dir = o.clone();
    }
    plan.validate()?;
    let dir = resolve(&plan.output_dir);
    fs::create_dir_all(&dir)?;
    Ok((plan, dir))
}

/// Writes the resolved plan beside the outputs and returns its file name.
fn save_plan(plan: &ExperimentPlan, dir: &Path) -> Result<&'static str> {
    fs::write(dir.join("plan.toml"), plan.to_toml())?;
    Ok("plan.toml")
}

fn checkpoint_path(arg: &Option<PathBuf>, dir: &Path) -> PathBuf {
    arg.as_deref().map(resolve).unwrap_or_else(|| dir.join("model.cwtc"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.verb {
        Verb::Gen {
            system,
            steps,
            dt,
            subsample,
            transient,
            seed,
            out,
        } => {
            let spec = dynsys::find(&system).ok_or(Error::UnknownSystem(system))?;
            if (dt - dynsys::DT).abs() > 1e-15 {
                return Err(Error::Invalid(format!("only dt = {} is supported", dynsys::DT)));
            }
            let stride = subsample.unwrap_or(spec.sample_stride());
            let t = dynsys::generate_with(&spec, steps, stride, transient, seed)?;
            let out = resolve(&out);
            create_parent(&out)?;
            io::save_trajectory(&out, &t)?;
            eprintln!("wrote {} ({} x {})", out.display(), t.len(), t.dim());
        }
        Verb::Mask {
            input,
            sparsity,
            noise,
            add_noise,
            seed,
            out,
        } => {
            let t = io::load_trajectory(&input)?;
            let spec = ObservationSpec::new(sparsity, seed)
                .with_mult_noise(noise)
                .with_add_noise(add_noise);
            let s = apply_observation(&t, &spec)?;
            let out = resolve(&out);
            create_parent(&out)?;
            io::save_sparse(&out, &s)?;
            eprintln!(
                "wrote {} (observed fraction {:.4})",
                out.display(),
                s.mask.observed_fraction()
            );
        }
        Verb::Train(a) => {
            let (plan, dir) = load_plan(&a)?;
            let hash = plan.config_hash();
            let data = harness::build_dataset(&plan, &dir.join("dataset"))?;
            for (name, why) in &data.skipped {
                eprintln!("warning: skipped {name}: {why}");
            }
            let regime = harness::load_regime(&plan, &data)?;
            let cfg = plan.transformer_config()?;
            let (model, log) = transformer::train_with(&regime, &cfg, harness::train_seed(&plan), None, |e, l, _| {
                eprintln!("epoch {e}/{} loss {l:.6}", cfg.epochs);
                Ok(())
            })?;
            harness::save_checkpoint(&dir.join("model.cwtc"), &model)?;
            harness::write_train_log(&dir.join("train_log.csv"), &log, &hash)?;
            let mut m = RunManifest::new("train", &hash, plan.seed);
            m.add(&dir, "plan", save_plan(&plan, &dir)?)?;
            for (name, _) in &data.files {
                m.add(&dir, "dataset", PathBuf::from("dataset").join(format!("{name}.cwtj")))?;
            }
            m.add(&dir, "checkpoint", "model.cwtc")?;
            m.add(&dir, "report", "train_log.csv")?;
            m.write(&dir)?;
            eprintln!("run written to {}", dir.display());
        }
        Verb::Reconstruct {
            checkpoint,
            input,
            out,
            truth,
            report,
        } => {
            let model = harness::load_checkpoint(&checkpoint)?;
            let sparse = io::load_sparse(&input)?;
            let rec = transformer::reconstruct_chunked(&sparse, &model)?;
            let out = resolve(&out);
            create_parent(&out)?;
            io::save_trajectory(&out, &rec)?;
            if let Some(t) = truth {
                let truth = io::load_trajectory(&t)?;
                let mse = metrics::mse(&rec.data, &truth.data)?;
                let lin = metrics::mse(&metrics::linear_interpolation(&sparse), &truth.data)?;
                println!("mse {mse} linear_mse {lin}");
                if let Some(r) = report {
                    let r = resolve(&r);
                    create_parent(&r)?;
                    let mut w = csv::Writer::from_path(&r)?;
                    w.write_record(["rows", "dims", "sparsity", "mse", "linear_mse"])?;
                    w.write_record([
                        rec.len().to_string(),
                        rec.dim().to_string(),
                        sparse.spec.sparsity.to_string(),
                        mse.to_string(),
                        lin.to_string(),
                    ])?;
                    w.flush()?;
                }
            }
        }
        Verb::Evaluate { plan: a, checkpoint } => {
            let (plan, dir) = load_plan(&a)?;
            let hash = plan.config_hash();
            let model = harness::load_checkpoint(&checkpoint_path(&checkpoint, &dir))?;
            let out = harness::run_reconstruction_sweep(&plan, &model)?;
            harness::write_sweep_csv(&dir, &out, &hash)?;
            for (r, lin) in out.reports.iter().zip(&out.baseline_medians) {
                println!(
                    "{} L={} S_r={} sigma={}: median mse {:.6} (linear {:.6})",
                    r.system, r.seq_len, r.sparsity, r.noise_sigma, r.median_mse, lin
                );
            }
            let mut m = RunManifest::new("evaluate", &hash, plan.seed);
            m.add(&dir, "plan", save_plan(&plan, &dir)?)?;
            m.add(&dir, "report", "sweep_realizations.csv")?;
            m.add(&dir, "report", "sweep_summary.csv")?;
            m.write(&dir)?;
        }
        Verb::Climate {
            plan: a,
            checkpoint,
            source,
        } => {
            let (plan, dir) = load_plan(&a)?;
            let hash = plan.config_hash();
            let rc = plan.reservoir_config()?;
            let mut outcomes = Vec::new();
            if source != Source::GroundTruth {
                let model = harness::load_checkpoint(&checkpoint_path(&checkpoint, &dir))?;
                outcomes.push(harness::run_climate_pipeline(
                    &plan,
                    ClimateSource::Transformer(&model),
                    &rc,
                )?);
            }
            if source != Source::Transformer {
                outcomes.push(harness::run_climate_pipeline(&plan, ClimateSource::GroundTruth, &rc)?);
            }
            let mut m = RunManifest::new("climate", &hash, plan.seed);
            m.add(&dir, "plan", save_plan(&plan, &dir)?)?;
            for o in &outcomes {
                let name = format!("prediction_{}.cwtj", o.source);
                io::save_trajectory(&dir.join(&name), &o.prediction)?;
                m.add(&dir, "prediction", name)?;
                println!(
                    "{} via {}: rmse {:.5} (persistence {:.5}), dv {:.4} (shuffled {:.4}){}",
                    o.system,
                    o.source,
                    o.rmse,
                    o.persistence_rmse,
                    o.dv,
                    o.surrogate_dv,
                    if o.diverged() { ", diverged" } else { "" }
                );
            }
            harness::write_climate_csv(&dir.join("climate.csv"), &outcomes, &hash)?;
            m.add(&dir, "report", "climate.csv")?;
            m.write(&dir)?;
        }
        Verb::Search {
            plan: a,
            target,
            trials,
            space,
        } => {
            let (plan, dir) = load_plan(&a)?;
            let hash = plan.config_hash();
            let space = match space {
                Some(p) => {
                    toml::from_str::<SearchSpace>(&fs::read_to_string(p)?).map_err(|e| Error::Config(e.to_string()))?
                }
                None => match target {
                    Target::Transformer => SearchSpace::transformer(),
                    Target::Reservoir => SearchSpace::reservoir(),
                },
            };
            let trials = trials.unwrap_or(match target {
                Target::Transformer => 60,
                Target::Reservoir => 200,
            });
            let seed = chronoweft::seed::derive(plan.seed, "search");
            let (result, file) = match target {
                Target::Transformer => (
                    harness::search_transformer(&plan, &space, trials, seed)?,
                    "search_transformer.csv",
                ),
                Target::Reservoir => (
                    harness::search_reservoir(&plan, &space, trials, seed)?,
                    "search_reservoir.csv",
                ),
            };
            harness::write_search_csv(&dir.join(file), &result, &hash)?;
            println!(
                "best objective {} at trial {}",
                result.best.objective.unwrap_or(f64::NAN),
                result.best.index
            );
            for (k, v) in &result.best.config {
                println!("  {k} = {v}");
            }
            let mut m = RunManifest::new("search", &hash, plan.seed);
            m.add(&dir, "plan", save_plan(&plan, &dir)?)?;
            m.add(&dir, "report", file)?;
            m.write(&dir)?;
        }
        Verb::Rotate(a) => {
            let (plan, dir) = load_plan(&a)?;
            let hash = plan.config_hash();
            let rows = harness::rotate_leave_out(&plan, |i, rows| {
                for r in rows {
                    eprintln!(
                        "rotation {i}: {} median mse {:.6}",
                        r.report.system, r.report.median_mse
                    );
                }
            })?;
            harness::write_rotation_csv(&dir.join("rotation.csv"), &rows, &hash)?;
            let mut m = RunManifest::new("rotate", &hash, plan.seed);
            m.add(&dir, "plan", save_plan(&plan, &dir)?)?;
            m.add(&dir, "report", "rotation.csv")?;
            m.write(&dir)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
