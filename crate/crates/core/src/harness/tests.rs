use super::*;
use crate::transformer::TransformerConfig;

fn tiny_model() -> TransformerConfig {
    TransformerConfig {
        embed_dim: 8,
        heads: 1,
        blocks: 1,
        ffn_dim: 16,
        d_k: 8,
        d_v: 8,
        max_len: 32,
        batch_size: 4,
        epochs: 1,
        ..TransformerConfig::desk()
    }
}

fn tiny_plan() -> ExperimentPlan {
    ExperimentPlan {
        seed: 11,
        pool: vec!["sprott_0".into(), "sprott_1".into(), "rossler".into(), "wang".into()],
        held_out: vec!["lorenz".into()],
        data_length: Some(300),
        transformer: Some(tiny_model()),
        realizations: 5,
        sweep: SweepGrid {
            seq_len: vec![20],
            sparsity: vec![0.5, 0.8],
            eval_length: 500,
            ..SweepGrid::default()
        },
        climate: ClimateSettings {
            segment_length: 1500,
            horizon: 1000,
            reservoir_size: 80,
            ..ClimateSettings::default()
        },
        ..ExperimentPlan::default()
    }
}

#[test]
fn plan_toml_roundtrip_and_hash() {
    let p = tiny_plan();
    let back = ExperimentPlan::from_toml(&p.to_toml()).unwrap();
    assert_eq!(back, p);
    assert_eq!(back.config_hash(), p.config_hash());
    assert_eq!(p.config_hash().len(), 16);
    let other = ExperimentPlan { seed: 12, ..p.clone() };
    assert_ne!(other.config_hash(), p.config_hash());
    let minimal = ExperimentPlan::from_toml("seed = 3\n").unwrap();
    assert_eq!(minimal.pool_systems().len(), 28);
    assert!(ExperimentPlan::from_toml("sed = 3\n").is_err());
}

#[test]
fn plan_invariants() {
    let overlap = ExperimentPlan {
        pool: vec!["lorenz".into()],
        ..tiny_plan()
    };
    assert!(matches!(overlap.validate(), Err(Error::Config(_))));
    let none = ExperimentPlan {
        realizations: 0,
        ..tiny_plan()
    };
    assert!(none.validate().is_err());
    let mut two = tiny_plan();
    two.climate.segments = 2;
    assert!(two.validate().is_err());
    let unknown = ExperimentPlan {
        pool: vec!["sprott_99".into()],
        ..tiny_plan()
    };
    assert!(matches!(unknown.validate(), Err(Error::UnknownSystem(_))));
    for name in ["fig4", "fig5", "fig9", "fig12"] {
        ExperimentPlan::preset(name).unwrap().validate().unwrap();
    }
    assert!(ExperimentPlan::preset("fig7").is_err());
    assert_eq!(
        ExperimentPlan {
            profile: "paper".into(),
            ..tiny_plan()
        }
        .data_length(),
        300
    );
    assert_eq!(
        ExperimentPlan {
            profile: "paper".into(),
            data_length: None,
            ..tiny_plan()
        }
        .data_length(),
        PAPER_DATA_LENGTH
    );
}

#[test]
fn dataset_is_complete_and_byte_identical() {
    let plan = tiny_plan();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let da = build_dataset(&plan, a.path()).unwrap();
    let db = build_dataset(&plan, b.path()).unwrap();
    assert_eq!(da.files.len(), 4);
    assert!(da.skipped.is_empty());
    for ((name, pa), (_, pb)) in da.files.iter().zip(&db.files) {
        assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap(), "{name}");
        let t = io::load_trajectory(pa).unwrap();
        assert_eq!((t.len(), t.dim()), (300, 3));
        assert!(t.data.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }
    let regime = load_regime(&plan, &da).unwrap();
    let mem = regime_in_memory(&plan).unwrap();
    for ((n1, t1), (n2, t2)) in regime.pool.iter().zip(&mem.pool) {
        assert_eq!(n1, n2);
        assert_eq!(t1.data, t2.data);
    }
}

#[test]
fn rotation_partition() {
    let names: Vec<String> = dynsys::catalog().iter().map(|s| s.name().to_string()).collect();
    let groups = rotation_groups(&names, 4);
    assert_eq!(groups.len(), 8);
    assert!(groups[..7].iter().all(|g| g.len() == 4));
    assert_eq!(groups[7].len(), 3);
    let mut seen: Vec<&String> = groups.iter().flatten().collect();
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), 31);
}

#[test]
fn sweep_bookkeeping_and_reproducibility() {
    let plan = tiny_plan();
    let regime = regime_in_memory(&plan).unwrap();
    let (model, log) = train_model(&plan, &regime).unwrap();
    assert_eq!(log.epoch_losses.len(), 1);
    let out = run_reconstruction_sweep(&plan, &model).unwrap();
    assert_eq!(out.rows.len(), 2 * 5);
    assert_eq!(out.reports.len(), 2);

    let truth = evaluation_trajectory(&plan, "lorenz").unwrap();
    let row = &out.rows[7];
    let (window, sparse) = realization(&truth, &row.point, row.seed).unwrap();
    let rec = transformer::reconstruct_chunked(&sparse, &model).unwrap();
    assert_eq!(metrics::mse(&rec.data, &window.data).unwrap(), row.mse);

    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let hash = plan.config_hash();
    let files: Vec<_> = dirs
        .iter()
        .map(|d| write_sweep_csv(d.path(), &run_reconstruction_sweep(&plan, &model).unwrap(), &hash).unwrap())
        .collect();
    for k in 0..2 {
        assert_eq!(fs::read(&files[0][k]).unwrap(), fs::read(&files[1][k]).unwrap());
    }
    let text = fs::read_to_string(&files[0][1]).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.starts_with(&hash)));
    assert!(text.lines().next().unwrap().ends_with("recovery_stability_0.01"));
}

#[test]
fn climate_pipeline_contracts() {
    let plan = tiny_plan();
    let rc = plan.reservoir_config().unwrap();
    let clean = run_climate_pipeline(&plan, ClimateSource::GroundTruth, &rc).unwrap();
    assert_eq!(clean.prediction.len(), 1000);
    assert_eq!(clean.reconstruction_mse, 0.0);
    let again = run_climate_pipeline(&plan, ClimateSource::GroundTruth, &rc).unwrap();
    assert_eq!(again.dv, clean.dv);
    assert!((0.0..=2.0).contains(&clean.dv));

    // an untrained model gives a worse reservoir input than the truth
    let model = TransformerParams::init(&tiny_model(), 1).unwrap();
    let noisy = run_climate_pipeline(&plan, ClimateSource::Transformer(&model), &rc).unwrap();
    assert!(noisy.reconstruction_mse > 0.0);
    assert!(noisy.dv > clean.dv, "{} vs {}", noisy.dv, clean.dv);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("climate.csv");
    write_climate_csv(&path, &[clean, noisy], "h").unwrap();
    assert_eq!(fs::read_to_string(path).unwrap().lines().count(), 3);
}

#[test]
fn search_records_every_trial() {
    let plan = tiny_plan();
    let space = SearchSpace::new()
        .with("leak", hyperopt::ParamSpec::Linear { lo: 0.2, hi: 0.4 })
        .with("ridge", hyperopt::ParamSpec::Log { lo: 1e-6, hi: 1e-4 });
    let r = search_reservoir(&plan, &space, 3, 5).unwrap();
    assert_eq!(r.history.len(), 3);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("search.csv");
    write_search_csv(&p, &r, "h").unwrap();
    let text = fs::read_to_string(&p).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "config_hash,trial,seed,leak,ridge,objective,error,best"
    );
    assert_eq!(text.lines().filter(|l| l.ends_with(",true")).count(), 1);
    let bad: Config = [("depth".to_string(), hyperopt::Value::Int(3))].into_iter().collect();
    assert!(apply_reservoir_config(&plan.reservoir_config().unwrap(), &bad).is_err());
}
