//! Trains the desk-size transformer on six Sprott systems and saves a
//! checkpoint. The optional arguments cap the number of epochs and pick
//! the output path.
//!
//! cargo run --release --example train_transformer -- 20 /tmp/desk.cwtc

use std::path::PathBuf;
use std::time::Instant;

use chronoweft::harness::{self, ExperimentPlan, DESK_POOL};
use chronoweft::transformer;

fn main() -> chronoweft::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map(|s| s.parse().expect("epochs")).unwrap_or(20);
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("desk.cwtc"));

    let plan = ExperimentPlan {
        pool: DESK_POOL.iter().map(|s| s.to_string()).collect(),
        held_out: vec!["lorenz".into()],
        epochs: Some(epochs),
        ..ExperimentPlan::default()
    };
    let regime = harness::regime_in_memory(&plan)?;
    let cfg = plan.transformer_config()?;
    println!(
        "{} systems x {} points, {} steps per epoch",
        regime.pool.len(),
        plan.data_length(),
        regime.steps_per_epoch(&cfg)
    );
    let t0 = Instant::now();
    let (model, _) = transformer::train_with(&regime, &cfg, harness::train_seed(&plan), None, |e, loss, _| {
        println!("epoch {e:>3}  loss {loss:.5}  {:.0}s", t0.elapsed().as_secs_f64());
        Ok(())
    })?;
    harness::save_checkpoint(&out, &model)?;
    println!("checkpoint written to {}", out.display());
    Ok(())
}
