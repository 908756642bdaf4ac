//! Gaussian-filtered noise looks smooth but has no dynamics to learn; lag-1
//! autocorrelation is high while a delay-embedding neighbour predictor does
//! no better than the variance.

use chronoweft::observe::gen_stochastic_signal;

fn main() -> chronoweft::Result<()> {
    let s = gen_stochastic_signal(20_000, 3, 12.0, 5)?;
    let x = s.data.column(0);
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let lag1 = (0..n - 1).map(|i| (x[i] - mean) * (x[i + 1] - mean)).sum::<f64>() / ((n - 1) as f64 * var);
    println!("lag-1 autocorrelation {lag1:.4}, variance {var:.5}");

    // predict x(t + 40) from the nearest 3-delay neighbour in the first half
    let (m, tau, h) = (3, 12, 40);
    let embed = |t: usize| -> Vec<f64> { (0..m).map(|k| x[t - k * tau]).collect() };
    let half = n / 2;
    let mut err = 0.0;
    let mut count = 0;
    for t in (half..n - h).step_by(97) {
        let e = embed(t);
        let best = ((m - 1) * tau..half - h)
            .min_by(|&a, &b| {
                let d = |s: usize| embed(s).iter().zip(&e).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
                d(a).total_cmp(&d(b))
            })
            .unwrap();
        err += (x[best + h] - x[t + h]).powi(2);
        count += 1;
    }
    println!(
        "neighbour-predictor MSE at horizon {h}: {:.5} (variance {var:.5})",
        err / count as f64
    );
    Ok(())
}
