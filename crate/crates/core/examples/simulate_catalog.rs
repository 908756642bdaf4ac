//! Lists the catalog and simulates one system to a trajectory file.
//!
//! cargo run --release --example simulate_catalog -- lorenz 5000 /tmp/lorenz.cwtj

use chronoweft::{dynsys, io};

fn main() -> chronoweft::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "lorenz".into());
    let rows: usize = args.next().map(|s| s.parse().expect("row count")).unwrap_or(5000);
    let out = args
        .next()
        .unwrap_or_else(|| std::env::temp_dir().join("trajectory.cwtj").display().to_string());

    for s in dynsys::catalog() {
        println!(
            "{:<16} dim {}  stride {:>3}  params {:?}",
            s.name(),
            s.dim(),
            s.sample_stride(),
            s.param_pairs()
        );
    }

    let spec = dynsys::find(&name).ok_or(chronoweft::Error::UnknownSystem(name.clone()))?;
    let t = dynsys::generate(&spec, rows, 42)?;
    println!(
        "\n{name}: {} rows x {} dims, dt between rows {}",
        t.len(),
        t.dim(),
        t.dt_effective
    );
    for (d, (lo, hi)) in t.norm_stats.iter().enumerate() {
        println!("  dim {d}: raw range [{lo:.3}, {hi:.3}]");
    }
    io::save_trajectory(std::path::Path::new(&out), &t)?;
    println!("saved to {out}");
    Ok(())
}
