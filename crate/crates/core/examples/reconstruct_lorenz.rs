//! Loads a checkpoint and reconstructs sparse windows of the Lorenz system,
//! which the model never saw, next to the linear-interpolation baseline.
//!
//! cargo run --release --example reconstruct_lorenz -- /tmp/desk.cwtc

use chronoweft::harness::{self, GridPoint};
use chronoweft::metrics::{linear_interpolation, median, mse};
use chronoweft::{dynsys, seed, transformer};

fn main() -> chronoweft::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().join("desk.cwtc").display().to_string());
    let model = harness::load_checkpoint(path.as_ref())?;
    let truth = dynsys::generate(&dynsys::find("lorenz").unwrap(), 20_000, 17)?;
    println!("S_r   model MSE   linear MSE   (median of 30 windows, L = 200)");
    for sparsity in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let point = GridPoint {
            seq_len: 200,
            sparsity,
            noise_sigma: 0.0,
            add_noise: 0.0,
        };
        let (mut m, mut l) = (Vec::new(), Vec::new());
        for r in 0..30 {
            let (window, sparse) = harness::realization(&truth, &point, seed::derive_index(5, r))?;
            let rec = transformer::reconstruct_chunked(&sparse, &model)?;
            m.push(mse(&rec.data, &window.data)?);
            l.push(mse(&linear_interpolation(&sparse), &window.data)?);
        }
        println!("{sparsity:.1}   {:.5}     {:.5}", median(&m)?, median(&l)?);
    }
    Ok(())
}
