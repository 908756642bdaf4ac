use super::*;
use crate::dynsys;
use proptest::prelude::*;

fn cfg(size: usize) -> ReservoirConfig {
    ReservoirConfig::preset("lorenz", size).unwrap().with_seed(3)
}

fn dense_radius(a: &SparseMatrix) -> f64 {
    let n = a.size();
    nalgebra::DMatrix::from_row_slice(n, n, &a.to_dense())
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

#[test]
fn init_is_deterministic_and_scaled() {
    let c = cfg(120);
    let m1 = init_reservoir(&c, 3).unwrap();
    let m2 = init_reservoir(&c, 3).unwrap();
    assert_eq!(m1, m2);
    assert!((dense_radius(&m1.a) - 1.30).abs() < 1e-6);
    assert!(m1.w_in.as_slice().iter().all(|v| v.abs() <= 1.82));
    for preset in ["food_chain", "lotka_volterra"] {
        let c = ReservoirConfig::preset(preset, 150).unwrap().with_seed(5);
        let m = init_reservoir(&c, 3).unwrap();
        assert!((dense_radius(&m.a) - c.spectral_radius).abs() < 1e-6, "{preset}");
    }
}

#[test]
fn dense_when_link_prob_is_one() {
    let c = ReservoirConfig {
        link_prob: 1.0,
        ..cfg(2)
    };
    assert_eq!(init_reservoir(&c, 1).unwrap().a.nnz(), 4);
    let empty = ReservoirConfig {
        link_prob: 0.0,
        ..cfg(5)
    };
    assert!(matches!(
        init_reservoir(&empty, 1),
        Err(Error::DegenerateReservoir { .. })
    ));
}

#[test]
fn advance_examples() {
    let mut m = init_reservoir(&cfg(10), 3).unwrap();
    let r: Vec<f64> = (0..10).map(|i| i as f64 * 0.05 - 0.2).collect();
    m.config.leak = 0.0;
    assert_eq!(m.advance(&r, &[1.0, 2.0, 3.0]), r);
    m.config.leak = 1.0;
    m.a.scale(0.0);
    m.w_in.as_mut_slice().fill(0.0);
    assert!(m.advance(&r, &[1.0, 2.0, 3.0]).iter().all(|v| *v == 0.0));
    m.w_in.as_mut_slice().fill(50.0);
    assert!(m
        .advance(&r, &[1.0, 1.0, 1.0])
        .iter()
        .all(|v| *v > 1.0 - 1e-12 && *v <= 1.0));
}

#[test]
fn ridge_scalar_examples() {
    let r = Matrix::from_vec(1, 1, vec![1.0]);
    let u = Matrix::from_vec(1, 1, vec![2.0]);
    assert!((ridge_readout(&r, &u, 0.0).unwrap().get(0, 0) - 2.0).abs() < 1e-15);
    assert!((ridge_readout(&r, &u, 1.0).unwrap().get(0, 0) - 1.0).abs() < 1e-15);
    let z = Matrix::from_vec(1, 1, vec![0.0]);
    assert!(matches!(ridge_readout(&z, &u, 0.0), Err(Error::Regularization)));
}

#[test]
fn ridge_matches_explicit_inverse() {
    let mut rng = seed::rng(17);
    let (n, t, d) = (20, 200, 3);
    let states = Matrix::from_vec(t, n, (0..t * n).map(|_| rng.random_range(-1.0..1.0)).collect());
    let targets = Matrix::from_vec(t, d, (0..t * d).map(|_| rng.random_range(-1.0..1.0)).collect());
    let beta = 1e-3;
    let w = ridge_readout(&states, &targets, beta).unwrap();

    // oracle: W = U R^T (R R^T + beta I)^-1 with R = states^T, U = targets^T
    let r = nalgebra::DMatrix::from_row_slice(t, n, states.as_slice()).transpose();
    let u = nalgebra::DMatrix::from_row_slice(t, d, targets.as_slice()).transpose();
    let g = &r * r.transpose() + nalgebra::DMatrix::identity(n, n) * beta;
    let want = &u * r.transpose() * g.clone().try_inverse().unwrap();
    for i in 0..d {
        for j in 0..n {
            assert!((w.get(i, j) - want[(i, j)]).abs() < 1e-8);
        }
    }
    // normal-equation residual
    let wm = nalgebra::DMatrix::from_row_slice(d, n, w.as_slice());
    let res = &wm * g - &u * r.transpose();
    assert!(res.amax() < 1e-8);
}

fn lorenz_segments(k: usize, len: usize) -> Vec<TrajectoryMatrix> {
    let data = dynsys::generate(&dynsys::find("lorenz").unwrap(), k * len, 21).unwrap();
    (0..k).map(|i| data.window(i * len, len)).collect()
}

#[test]
fn constant_signal_is_a_fixed_point() {
    let seg = TrajectoryMatrix {
        data: Matrix::from_vec(400, 3, [0.3, 0.6, 0.45].repeat(400)),
        dt_effective: 0.1,
        norm_stats: vec![(0.0, 1.0); 3],
    };
    let m = train_on_segments(std::slice::from_ref(&seg), &cfg(100)).unwrap();
    let p = closed_loop_predict(&m, &seg, 500).unwrap();
    assert!(p.truncated_at.is_none());
    for r in 0..500 {
        for (c, want) in [0.3, 0.6, 0.45].iter().enumerate() {
            assert!((p.trajectory.data.get(r, c) - want).abs() < 1e-3);
        }
    }
}

#[test]
fn duplicate_segments_change_the_readout() {
    let segs = lorenz_segments(1, 600);
    let c = cfg(60);
    let single = train_on_segments(&segs, &c).unwrap();
    let doubled = train_on_segments(&[segs[0].clone(), segs[0].clone()], &c).unwrap();
    assert_ne!(single.w_out, doubled.w_out);
    assert_eq!(single.a, doubled.a);
}

#[test]
fn noise_free_training_ignores_segment_order() {
    let segs = lorenz_segments(2, 500);
    let c = ReservoirConfig {
        train_noise: 0.0,
        ..cfg(60)
    };
    let ab = train_on_segments(&segs, &c).unwrap();
    let ba = train_on_segments(&[segs[1].clone(), segs[0].clone()], &c).unwrap();
    let diff = ab
        .w_out
        .as_slice()
        .iter()
        .zip(ba.w_out.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let scale = ab.w_out.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(diff <= 1e-6 * scale.max(1.0), "{diff}");
}

#[test]
fn echo_state_property_below_unit_radius() {
    for s in 0..10 {
        let c = ReservoirConfig {
            spectral_radius: 0.9,
            ..cfg(100).with_seed(s)
        };
        let m = init_reservoir(&c, 3).unwrap();
        let mut rng = seed::rng(s + 100);
        let mut r1: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut r2: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut scratch = vec![0.0; 100];
        for _ in 0..1000 {
            let input: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            m.advance_into(&mut r1, &input, &mut scratch);
            m.advance_into(&mut r2, &input, &mut scratch);
        }
        let dist = r1.iter().zip(&r2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(dist < 1e-6, "seed {s}: {dist}");
    }
}

#[test]
fn prediction_contracts() {
    let segs = lorenz_segments(3, 800);
    let m = train_on_segments(&segs, &cfg(80)).unwrap();
    let warm = segs[2].window(600, 200);
    assert_eq!(closed_loop_predict(&m, &warm, 0).unwrap().trajectory.len(), 0);
    let a = closed_loop_predict(&m, &warm, 300).unwrap();
    let b = closed_loop_predict(&m, &warm, 300).unwrap();
    assert_eq!(a.trajectory.data, b.trajectory.data);
    assert!(closed_loop_predict(&m, &warm.window(0, 10), 5).is_err());
    let untrained = init_reservoir(&cfg(10), 3).unwrap();
    assert!(closed_loop_predict(&untrained, &warm, 5).is_err());
}

#[test]
fn divergence_is_flagged_and_clipped() {
    let segs = lorenz_segments(1, 400);
    let mut m = train_on_segments(&segs, &cfg(40)).unwrap();
    m.w_out.as_mut_slice().iter_mut().for_each(|v| *v *= 1e4);
    let p = closed_loop_predict(&m, &segs[0], 50).unwrap();
    let h = p.truncated_at.expect("diverged");
    assert_eq!(p.trajectory.len(), 50);
    assert!(p.trajectory.data.as_slice()[h * 3..]
        .iter()
        .all(|v| v.abs() <= DIVERGENCE_LIMIT));
}

#[test]
fn checkpoint_roundtrip() {
    let segs = lorenz_segments(1, 300);
    let m = train_on_segments(&segs, &cfg(30).with_seed(u64::MAX - 5)).unwrap();
    let mut buf = Vec::new();
    m.save(&mut buf).unwrap();
    assert_eq!(ReservoirModel::load(&mut buf.as_slice()).unwrap(), m);
}

#[test]
fn short_segments_are_rejected() {
    let segs = lorenz_segments(1, 101);
    assert!(matches!(
        train_on_segments(&segs, &cfg(10)),
        Err(Error::InsufficientData(_))
    ));
    assert!(ReservoirConfig::preset("rossler", 10).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn radius_scales_with_matrix(seed in 0u64..1000, c in -3.0f64..3.0) {
        prop_assume!(c.abs() > 1e-3);
        let base = ReservoirConfig { link_prob: 0.3, ..cfg(30).with_seed(seed) };
        let m = init_reservoir(&base, 3).unwrap();
        let mut scaled = m.a.clone();
        scaled.scale(c);
        let r0 = spectral_radius(&m.a, 1).unwrap();
        let r1 = spectral_radius(&scaled, 1).unwrap();
        prop_assert!((r1 - c.abs() * r0).abs() < 1e-6 * r1.max(1.0));
    }
}
