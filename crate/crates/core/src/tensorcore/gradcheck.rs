//! Finite-difference checks of every primitive's backward rule.

use super::*;
use crate::seed;

type Build<'a> = dyn Fn(&mut Graph, &[Var]) -> Var + 'a;

/// Central-difference gradient of the scalar output with respect to every
/// entry of every input, compared against the tape gradient.
fn check(inputs: &[Tensor], build: &Build<'_>, tol: f64) {
    let eval = |ins: &[Tensor]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = ins.iter().map(|t| g.param(t.clone())).collect();
        let out = build(&mut g, &vars);
        g.value(out).item()
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = build(&mut g, &vars);
    let grads = g.backward(out);
    let h = 1e-6;
    for (k, t) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[k]).cloned().unwrap_or_else(|| Tensor::zeros(t.shape()));
        for j in 0..t.len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[j] += h;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[j] -= h;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let a = analytic.data()[j];
            let rel = (a - fd).abs() / (a.abs().max(fd.abs()).max(1e-3));
            assert!(rel < tol, "input {k} entry {j}: analytic {a} vs fd {fd} (rel {rel})");
        }
    }
}

fn rand_t(shape: &[usize], s: u64) -> Tensor {
    Tensor::uniform(shape, 1.0, &mut seed::rng(s))
}

/// Weighted sum so that every output entry carries a distinct cotangent.
fn wsum(g: &mut Graph, v: Var, s: u64) -> Var {
    let shape = g.value(v).shape().to_vec();
    let w = g.constant(rand_t(&shape, s ^ 0xabc));
    let p = g.mul(v, w).unwrap();
    g.sum(p)
}

#[test]
fn primitives_match_finite_differences() {
    for point in 0..20u64 {
        let s = 1000 + point * 17;
        let a = rand_t(&[3, 4], s);
        let b = rand_t(&[4, 5], s + 1);
        let c = rand_t(&[3, 4], s + 2);
        let r = rand_t(&[4], s + 3);

        check(
            &[a.clone(), b.clone()],
            &|g, v| {
                let m = g.matmul(v[0], v[1]).unwrap();
                wsum(g, m, s)
            },
            1e-6,
        );
        check(
            &[a.clone(), c.clone()],
            &|g, v| {
                let x = g.add(v[0], v[1]).unwrap();
                let y = g.sub(x, v[1]).unwrap();
                let z = g.mul(y, v[1]).unwrap();
                let z = g.scale(z, -1.7);
                wsum(g, z, s)
            },
            1e-6,
        );
        check(
            &[a.clone(), r.clone()],
            &|g, v| {
                let x = g.add_row(v[0], v[1]).unwrap();
                let t = g.transpose(x).unwrap();
                wsum(g, t, s)
            },
            1e-6,
        );
        check(
            &[a.clone()],
            &|g, v| {
                let x = g.scale(v[0], 3.0);
                let y = g.softmax_rows(x).unwrap();
                wsum(g, y, s)
            },
            1e-6,
        );
        let gain = rand_t(&[4], s + 4);
        let bias = rand_t(&[4], s + 5);
        check(
            &[a.clone(), gain, bias],
            &|g, v| {
                let y = g.layer_norm(v[0], v[1], v[2]).unwrap();
                wsum(g, y, s)
            },
            1e-6,
        );
        check(
            &[a.clone(), c.clone()],
            &|g, v| {
                let y = g.concat_cols(&[v[0], v[1], v[0]]).unwrap();
                let y = g.relu(y);
                let y = g.dropout(y, 0.3, s, true).unwrap();
                wsum(g, y, s)
            },
            1e-6,
        );
        check(
            &[a.clone(), c.clone()],
            &|g, v| {
                let y = g.concat_rows(&[v[0], v[1]]).unwrap();
                let top = g.slice_rows(y, 1, 4).unwrap();
                let bot = g.slice_rows(v[0], 0, 1).unwrap();
                let y = g.concat_rows(&[top, bot, top]).unwrap();
                wsum(g, y, s)
            },
            1e-6,
        );
        // smoothness terms are nondifferentiable only where neighbours tie,
        // which random points avoid
        let truth = rand_t(&[6, 3], s + 6);
        let mask: Vec<bool> = (0..18).map(|i| (i * 7 + point as usize) % 3 != 0).collect();
        let p = rand_t(&[6, 3], s + 7);
        check(
            &[p.clone()],
            &|g, v| g.recon_loss(v[0], &truth, 0.1, None).unwrap(),
            1e-6,
        );
        check(
            &[p],
            &|g, v| g.recon_loss(v[0], &truth, 0.3, Some(mask.clone())).unwrap(),
            1e-6,
        );
    }
}

#[test]
fn composite_three_layer_network() {
    let x = rand_t(&[5, 4], 1);
    let params = vec![
        rand_t(&[4, 6], 2),
        rand_t(&[6], 3),
        rand_t(&[6, 6], 4),
        rand_t(&[6], 5),
        rand_t(&[6], 6),
        rand_t(&[6, 3], 7),
    ];
    let truth = rand_t(&[5, 3], 8);
    check(
        &params,
        &move |g, v| {
            let xi = g.constant(x.clone());
            let h = g.matmul(xi, v[0]).unwrap();
            let h = g.add_row(h, v[1]).unwrap();
            let h = g.relu(h);
            let h2 = g.matmul(h, v[2]).unwrap();
            let h = g.add(h, h2).unwrap();
            let h = g.layer_norm(h, v[3], v[4]).unwrap();
            let q = g.transpose(h).unwrap();
            let s = g.matmul(h, q).unwrap();
            let s = g.softmax_rows(s).unwrap();
            let h = g.matmul(s, h).unwrap();
            let o = g.matmul(h, v[5]).unwrap();
            g.recon_loss(o, &truth, 0.1, None).unwrap()
        },
        1e-5,
    );
}

#[test]
fn recon_loss_hand_example() {
    let t = recon_loss_terms(&[0.0, 1.0, 0.0], &[0.0; 3], 3, 1, None);
    assert!((t.mse - 1.0 / 3.0).abs() < 1e-15);
    assert!((t.laplacian - 4.0).abs() < 1e-15);
    assert!((t.tv - 1.0).abs() < 1e-15);
    assert!((t.total(0.1) - (1.0 / 3.0 + 0.5)).abs() < 1e-12);
    // short windows drop the terms that need more samples
    let t1 = recon_loss_terms(&[2.0], &[0.0], 1, 1, None);
    assert_eq!((t1.mse, t1.laplacian, t1.tv), (4.0, 0.0, 0.0));
    let t2 = recon_loss_terms(&[0.0, 1.0], &[0.0, 0.0], 2, 1, None);
    assert_eq!((t2.laplacian, t2.tv), (0.0, 1.0));
}

#[test]
fn softmax_rows_are_distributions() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::from_rows(&[&[1000.0, 1001.0, 999.0], &[-5.0, 0.0, 5.0]]));
    let y = g.softmax_rows(x).unwrap();
    for r in 0..2 {
        let s: f64 = (0..3).map(|c| g.value(y).at(r, c)).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
    assert!(g.value(y).is_finite());
}

#[test]
fn dropout_eval_is_identity_and_train_is_unbiased() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::ones(&[200, 50]));
    assert_eq!(g.dropout(x, 0.2, 1, false).unwrap(), x);
    assert_eq!(g.dropout(x, 0.0, 1, true).unwrap(), x);
    let y = g.dropout(x, 0.2, 1, true).unwrap();
    let mean = g.value(y).data().iter().sum::<f64>() / 10_000.0;
    assert!((mean - 1.0).abs() < 0.03, "{mean}");
    assert!(g.dropout(x, 1.0, 1, true).is_err());
}

#[test]
fn shape_mismatch_is_reported() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::zeros(&[2, 3]));
    let b = g.constant(Tensor::zeros(&[2, 3]));
    assert!(matches!(g.matmul(a, b), Err(crate::Error::Shape { .. })));
    let c = g.constant(Tensor::zeros(&[3, 2]));
    assert!(g.add(a, c).is_err());
}
