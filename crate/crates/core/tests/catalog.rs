//! Catalog checks against independently written vector fields and an
//! independent RK4.

use chronoweft::dynsys::{self, SystemSpec};
use chronoweft::seed;
use rand::Rng;

type F3 = fn(f64, f64, f64) -> [f64; 3];

fn reference(name: &str) -> Option<F3> {
    let f: F3 = match name {
        "aizawa" => |x, y, z| {
            [
                (z - 0.7) * x - 3.5 * y,
                3.5 * x + (z - 0.7) * y,
                0.6 + 0.95 * z - z.powi(3) / 3.0 - (x * x + y * y) * (1.0 + 0.25 * z) + 0.1 * z * x.powi(3),
            ]
        },
        "bouali" => |x, y, z| [x * (4.0 - y) + 0.3 * z, -y * (1.0 - x * x), -x * (1.5 - z) - 0.05 * z],
        "chua" => |x, y, z| {
            let ht = -0.714 * x + 0.5 * (-1.143 + 0.714) * ((x + 1.0).abs() - (x - 1.0).abs());
            [15.6 * (y - x - ht), x - y + z, -28.0 * y]
        },
        "dadras" => |x, y, z| [y - 3.0 * x + 2.7 * y * z, 1.7 * y - x * z + z, 2.0 * x * y - 9.0 * z],
        "four_wing" => |x, y, z| [0.2 * x + y * z, 0.01 * x - 0.4 * y - x * z, -z - x * y],
        "hastings_powell" => |v, h, p| {
            let f1 = 5.0 * v * h / (3.0 * v + 1.0);
            let f2 = 0.1 * h * p / (2.0 * h + 1.0);
            [v * (1.0 - v) - f1, f1 - f2 - 0.4 * h, f2 - 0.01 * p]
        },
        "rikitake" => |x, y, z| [-2.0 * x + z * y, -2.0 * y + x * (z - 5.0), 1.0 - x * y],
        "rossler" => |x, y, z| [-(y + z), x + 0.2 * y, 0.2 + z * (x - 5.7)],
        "wang" => |x, y, z| [x - y * z, x - y + x * z, -3.0 * z + x * y],
        "lorenz" => |x, y, z| [10.0 * (y - x), x * (28.0 - z) - y, x * y - 8.0 / 3.0 * z],
        "food_chain" => |r, c, p| {
            [
                r * (1.0 - r) - 0.4 * 2.009 * c * r / (r + 0.16129),
                0.4 * c * (2.009 * r / (r + 0.16129) - 1.0) - 0.08 * 2.876 * p * c / (c + 0.5),
                0.08 * p * (2.876 * c / (c + 0.5) - 1.0),
            ]
        },
        "sprott_0" => |x, y, z| [y, -x + y * z, 1.0 - y * y],
        "sprott_1" => |x, y, z| [y * z, x - y, 1.0 - x * y],
        "sprott_2" => |x, y, z| [y * z, x - y, 1.0 - x * x],
        "sprott_3" => |x, y, z| [-y, x + z, x * z + 3.0 * y * y],
        "sprott_4" => |x, y, z| [y * z, x * x - y, 1.0 - 4.0 * x],
        "sprott_5" => |x, y, z| [y + z, -x + 0.5 * y, x * x - z],
        // standard Sprott G and H forms
        "sprott_6" => |x, y, z| [0.4 * x + z, x * z - y, -x + y],
        "sprott_7" => |x, y, z| [-y + z * z, x + 0.5 * y, x - z],
        "sprott_8" => |x, y, z| [-0.2 * y, x + z, x + y * y - z],
        "sprott_9" => |x, y, z| [2.0 * z, -2.0 * y + z, -x + y + y * y],
        "sprott_10" => |x, y, z| [x * y - z, x - y, x + 0.3 * z],
        "sprott_11" => |x, y, z| [y + 3.9 * z, 0.9 * x * x - y, 1.0 - x],
        "sprott_12" => |x, y, z| [-z, -x * x - y, 1.7 + 1.7 * x + y],
        "sprott_13" => |x, y, z| [-2.0 * y, x + z * z, 1.0 + y - 2.0 * z],
        "sprott_14" => |x, y, z| [y, x - z, x + x * z + 2.7 * y],
        "sprott_15" => |x, y, z| [2.7 * y + z, -x + y * y, x + y],
        "sprott_16" => |x, y, z| [-z, x - y, 3.1 * x + y * y + 0.5 * z],
        "sprott_17" => |x, y, z| [0.9 - y, 0.4 + z, x * y - z],
        "sprott_18" => |x, y, z| [-x - 4.0 * y, x + z * z, 1.0 + x],
        _ => return None,
    };
    Some(f)
}

fn lotka_volterra_ref(p: &[f64]) -> Vec<f64> {
    let r = [1.0, 0.72, 1.53, 1.27];
    let a = [
        [1.0, 1.09, 1.52, 0.0],
        [0.0, 1.0, 0.44, 1.36],
        [2.33, 0.0, 1.0, 0.47],
        [1.21, 0.51, 0.35, 1.0],
    ];
    (0..4)
        .map(|i| r[i] * p[i] * (1.0 - (0..4).map(|j| a[i][j] * p[j]).sum::<f64>()))
        .collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn catalog_has_31_distinct_systems() {
    let all = dynsys::catalog();
    assert_eq!(all.len(), 31);
    let mut names: Vec<&str> = all.iter().map(SystemSpec::name).collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), 31);
    assert_eq!(dynsys::training_systems().len(), 28);
    let r = dynsys::find("rikitake").unwrap();
    assert_eq!((r.param("mu"), r.param("a")), (Some(2.0), Some(5.0)));
    assert_eq!(dynsys::find("sprott_5").unwrap().eval(&[0.0; 3], 0.0), vec![0.0; 3]);
    assert_eq!(dynsys::find("Lotka-Volterra").unwrap().dim(), 4);
}

#[test]
fn fields_match_independent_transcription() {
    let mut rng = seed::rng(2024);
    for spec in dynsys::catalog() {
        for _ in 0..100 {
            if spec.name() == "lotka_volterra" {
                let p: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
                let got = spec.eval(&p, 0.0);
                for (g, w) in got.iter().zip(lotka_volterra_ref(&p)) {
                    assert!(close(*g, w, 1e-14));
                }
                continue;
            }
            let f = reference(spec.name()).unwrap_or_else(|| panic!("no reference for {}", spec.name()));
            // positive states keep the saturating denominators away from zero
            let (lo, hi) = if matches!(spec.name(), "food_chain" | "hastings_powell") {
                (0.05, 2.0)
            } else {
                (-3.0, 3.0)
            };
            let s: Vec<f64> = (0..3).map(|_| rng.random_range(lo..hi)).collect();
            let got = spec.eval(&s, 0.0);
            let want = f(s[0], s[1], s[2]);
            for k in 0..3 {
                assert!(
                    close(got[k], want[k], 1e-14),
                    "{} at {s:?}: {got:?} vs {want:?}",
                    spec.name()
                );
            }
        }
    }
}

fn rk4_reference(f: F3, x: [f64; 3], dt: f64, steps: usize) -> [f64; 3] {
    let add = |a: [f64; 3], b: [f64; 3], h: f64| [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2]];
    let ev = |s: [f64; 3]| f(s[0], s[1], s[2]);
    let mut s = x;
    for _ in 0..steps {
        let k1 = ev(s);
        let k2 = ev(add(s, k1, dt / 2.0));
        let k3 = ev(add(s, k2, dt / 2.0));
        let k4 = ev(add(s, k3, dt));
        for i in 0..3 {
            s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    s
}

#[test]
fn integrator_matches_reference_rk4() {
    for name in ["lorenz", "rossler", "sprott_3", "chua"] {
        let spec = dynsys::find(name).unwrap();
        let x0 = spec.random_initial(5);
        let raw = dynsys::simulate(&spec, &x0, 500, 0.01, 0).unwrap();
        let want = rk4_reference(reference(name).unwrap(), [x0[0], x0[1], x0[2]], 0.01, 500);
        let got = raw.data.row(499);
        for k in 0..3 {
            assert!(close(got[k], want[k], 1e-12), "{name}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn rk4_is_fourth_order() {
    // x' = -x from x = 1 to t = 1
    let err = |dt: f64| {
        let n = (1.0 / dt).round() as usize;
        let mut x = vec![1.0];
        for i in 0..n {
            x = dynsys::rk4_step(|s, _, o| o[0] = -s[0], &x, i as f64 * dt, dt).unwrap();
        }
        (x[0] - (-1.0f64).exp()).abs()
    };
    for dt in [0.1, 0.05, 0.025] {
        let ratio = err(dt) / err(dt / 2.0);
        assert!(ratio >= 12.0, "dt {dt}: ratio {ratio}");
    }
}
