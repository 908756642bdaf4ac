//! A complete small run driven by an experiment plan: dataset on disk,
//! training, a reconstruction sweep, the climate pipeline, and a manifest
//! tying the outputs to the plan hash.
//!
//! cargo run --release --example experiment_plan -- /tmp/cw-run

use std::path::PathBuf;

use chronoweft::harness::{self, ClimateSource, ExperimentPlan, RunManifest};

const PLAN: &str = r#"
seed = 7
pool = ["sprott_0", "sprott_1", "sprott_2", "sprott_4"]
held_out = ["lorenz"]
data_length = 5000
epochs = 2
realizations = 10

[sweep]
seq_len = [100]
sparsity = [0.3, 0.7]
eval_length = 5000

[climate]
segment_length = 5000
horizon = 3000
reservoir_size = 150
"#;

fn main() -> chronoweft::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("cw-run"));
    std::fs::create_dir_all(&dir)?;
    let plan = ExperimentPlan::from_toml(PLAN)?;
    let hash = plan.config_hash();
    println!("plan {hash}");

    let data = harness::build_dataset(&plan, &dir.join("dataset"))?;
    let regime = harness::load_regime(&plan, &data)?;
    let (model, log) = harness::train_model(&plan, &regime)?;
    println!(
        "trained {} epochs, final loss {:.5}",
        log.epoch_losses.len(),
        log.epoch_losses.last().unwrap()
    );
    harness::save_checkpoint(&dir.join("model.cwtc"), &model)?;
    harness::write_train_log(&dir.join("train_log.csv"), &log, &hash)?;

    let sweep = harness::run_reconstruction_sweep(&plan, &model)?;
    harness::write_sweep_csv(&dir, &sweep, &hash)?;
    for (r, lin) in sweep.reports.iter().zip(&sweep.baseline_medians) {
        println!(
            "{} S_r={}: median MSE {:.5}, linear {:.5}",
            r.system, r.sparsity, r.median_mse, lin
        );
    }

    let rc = plan.reservoir_config()?;
    let outcomes = vec![
        harness::run_climate_pipeline(&plan, ClimateSource::Transformer(&model), &rc)?,
        harness::run_climate_pipeline(&plan, ClimateSource::GroundTruth, &rc)?,
    ];
    for o in &outcomes {
        println!(
            "climate via {}: DV {:.3} (shuffled {:.3})",
            o.source, o.dv, o.surrogate_dv
        );
    }
    harness::write_climate_csv(&dir.join("climate.csv"), &outcomes, &hash)?;

    std::fs::write(dir.join("plan.toml"), plan.to_toml())?;
    let mut m = RunManifest::new("example", &hash, plan.seed);
    m.add(&dir, "plan", "plan.toml")?;
    for (name, _) in &data.files {
        m.add(&dir, "dataset", PathBuf::from("dataset").join(format!("{name}.cwtj")))?;
    }
    for f in [
        "model.cwtc",
        "train_log.csv",
        "sweep_realizations.csv",
        "sweep_summary.csv",
        "climate.csv",
    ] {
        m.add(&dir, "output", f)?;
    }
    m.write(&dir)?;
    RunManifest::read(&dir)?.verify(&dir)?;
    println!("outputs and manifest in {}", dir.display());
    Ok(())
}
