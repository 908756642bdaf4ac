//! Random search over reservoir settings on the short-term Lorenz forecast.

use chronoweft::dynsys;
use chronoweft::hyperopt::{random_search, ParamSpec, SearchSpace, Value};
use chronoweft::metrics::rmse;
use chronoweft::reservoir::{closed_loop_predict, train_on_segments, ReservoirConfig};
use chronoweft::Error;

fn main() -> chronoweft::Result<()> {
    let trials: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("trials"))
        .unwrap_or(30);
    let truth = dynsys::generate(&dynsys::find("lorenz").unwrap(), 6_200, 4)?;
    let train = truth.window(0, 6_000);
    let future = truth.window(6_000, 150);
    let space = SearchSpace::reservoir().with(
        "size",
        ParamSpec::Categorical {
            values: vec![Value::Int(100), Value::Int(200)],
        },
    );
    let result = random_search(
        &space,
        trials,
        |c, seed| {
            let f = |k: &str| c[k].as_f64().unwrap();
            let cfg = ReservoirConfig {
                size: f("size") as usize,
                leak: f("leak"),
                ridge: f("ridge"),
                input_scale: f("input_scale"),
                spectral_radius: f("spectral_radius"),
                link_prob: f("link_prob"),
                train_noise: f("train_noise"),
                washout: 100,
                seed,
            };
            let m = train_on_segments(std::slice::from_ref(&train), &cfg)?;
            let p = closed_loop_predict(&m, &train.window(5_800, 200), 150)?;
            if let Some(step) = p.truncated_at {
                return Err(Error::Divergence {
                    system: "lorenz".into(),
                    step,
                });
            }
            rmse(&p.trajectory.data, &future.data)
        },
        11,
    )?;
    let failed = result.history.iter().filter(|t| t.objective.is_none()).count();
    println!(
        "{trials} trials, {failed} failed; best RMSE {:.5}",
        result.best.objective.unwrap()
    );
    for (k, v) in &result.best.config {
        println!("  {k:<16} {v}");
    }
    Ok(())
}
