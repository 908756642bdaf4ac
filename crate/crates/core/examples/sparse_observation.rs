//! Masks a trajectory at several sparsity levels and scores the linear
//! interpolation baseline on what remains.

use chronoweft::dynsys;
use chronoweft::metrics::{linear_interpolation, mse};
use chronoweft::observe::{apply_observation, ObservationSpec};

fn main() -> chronoweft::Result<()> {
    let truth = dynsys::generate(&dynsys::find("lorenz").unwrap(), 200, 3)?;
    println!("S_r    observed   linear-interp MSE   (noise 0 / 0.05)");
    for sr in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let clean = apply_observation(&truth, &ObservationSpec::new(sr, 9))?;
        let noisy = apply_observation(&truth, &ObservationSpec::new(sr, 9).with_mult_noise(0.05))?;
        println!(
            "{sr:.1}    {:.3}      {:.5} / {:.5}",
            clean.mask.observed_fraction(),
            mse(&linear_interpolation(&clean), &truth.data)?,
            mse(&linear_interpolation(&noisy), &truth.data)?,
        );
    }
    let s = apply_observation(&truth, &ObservationSpec::new(0.5, 9))?;
    println!("\nfirst rows (x~, mask):");
    for r in 0..6 {
        let row: Vec<String> = (0..3)
            .map(|c| {
                if s.mask.get(r, c) {
                    format!("{:.3}", s.values.get(r, c))
                } else {
                    "  -  ".into()
                }
            })
            .collect();
        println!("  {}", row.join("  "));
    }
    Ok(())
}
