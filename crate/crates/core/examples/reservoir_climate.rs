//! Trains a reservoir on clean Lorenz segments and compares its closed-loop
//! output with the true continuation, short term and long term.
//!
//! cargo run --release --example reservoir_climate -- 300

use chronoweft::dynsys;
use chronoweft::metrics::{deviation_value, persistence, rmse, shuffled_surrogate, DEFAULT_CELL};
use chronoweft::reservoir::{closed_loop_predict, train_on_segments, ReservoirConfig};

fn main() -> chronoweft::Result<()> {
    let size: usize = std::env::args().nth(1).map(|s| s.parse().expect("size")).unwrap_or(300);
    let (seg, horizon) = (20_000, 10_000);
    let truth = dynsys::generate(&dynsys::find("lorenz").unwrap(), 3 * seg + horizon, 8)?;
    let segments: Vec<_> = (0..3).map(|i| truth.window(i * seg, seg)).collect();
    let cfg = ReservoirConfig::preset("lorenz", size)?.with_seed(1);
    let model = train_on_segments(&segments, &cfg)?;

    let warm = segments[2].window(seg - 200, 200);
    let pred = closed_loop_predict(&model, &warm, horizon)?;
    let future = truth.window(3 * seg, horizon);
    let k = 150;
    let short = rmse(&pred.trajectory.data.slice_rows(0, k), &future.data.slice_rows(0, k))?;
    let naive = rmse(&persistence(warm.data.row(199), k), &future.data.slice_rows(0, k))?;
    let dv = deviation_value(&pred.trajectory.data, &future.data, DEFAULT_CELL)?;
    let dv_shuffled = deviation_value(&shuffled_surrogate(&future.data, 3), &future.data, DEFAULT_CELL)?;
    println!("reservoir size {size}");
    println!("RMSE over {k} steps: {short:.4} (persistence {naive:.4})");
    println!("DV over {horizon} steps: {dv:.4} (shuffled surrogate {dv_shuffled:.4})");
    if let Some(t) = pred.truncated_at {
        println!("diverged at step {t}");
    }
    Ok(())
}
