//! The 31-system catalog: 28 training systems (9 named flows plus Sprott
//! cases 0-18) and 3 deployment targets.

use super::SystemSpec;

type Field = fn(&[f64], &[f64], &mut [f64]);

fn aizawa(s: &[f64], p: &[f64], o: &mut [f64]) {
    let (x, y, z) = (s[0], s[1], s[2]);
    let (a, b, c, d, e, f) = (p[0], p[1], p[2], p[3], p[4], p[5]);
    o[0] = (z - b) * x - d * y;
    o[1] = d * x + (z - b) * y;
    o[2] = c + a * z - z * z * z / 3.0 - (x * x + y * y) * (1.0 + e * z) + f * z * x * x * x;
}

fn bouali(s: &[f64], p: &[f64], o: &mut [f64]) {
    let (x, y, z) = (s[0], s[1], s[2]);
    let (alpha, beta, a, b, c, sc) = (p[0], p[1], p[2], p[3], p[4], p[5]);
    o[0] = x * (a - y) + alpha * z;
    o[1] = -y * (b - x * x);
    o[2] = -x * (c - sc * z) - beta * z;
}

fn chua(s: &[f64], p: &[f64], o: &mut [f64]) {
    let (x, y, z) = (s[0], s[1], s[2]);
    let (alpha, gamma, beta, mu0, mu1) = (p[0], p[1], p[2], p[3], p[4]);
    let ht = mu1 * x + 0.5 * (mu0 - mu1) * ((x + 1.0).abs() - (x - 1.0).abs());
    o[0] = alpha * (y - x - ht);
    o[1] = gamma * (x - y + z);
    o[2] = -beta * y;
}

fn dadras(s: &[f64], p: &[f64], o: &mut [f64]) {
    let (x, y, z) = (s[0], s[1], s[2]);
    let (a, b, c, d, e) = (p[0], p[1], p[2], p[3], p[4]);
    o[0] = y - a * x + b * y * z;
    o[1] = c * y - x * z + z;
    o[2] = d * x * y - e * z;
}

fn four_wing(s: &[f64], p: &[f64], o: &mut [f64]) {
    let (x, y, z) = (s[0], s[1], s[2]);
    let (a, b, c) = (p[0], p[1], p[2]);
    o[0] = a * x + y * z;
    o[1] = b * x + c * y - x * z;
    o[2] = -z - x * y;
}

fn hastings_powell(s: &[f64], p: &[f64], o: &mut [f64]) {
    let (v, h, pr) = (s[0], s[1], s[2]);
    let (a1, a2, b1, b2, d1, d2) = (p[0], p[1], p[2], p[3], p[4], p[5]);
    let f1 = a1 * v * h / (b1 * v + 1.0);
    let f2 = a2 * h * pr / (b2 * h + 1.0);
    o[0] = v * (1.0 - v) - f1;
    o[1] = f1 - f2 - d1 * h;
    o[2] = f2 - d2 * pr;
}

fn rikitake(s: &[f64], p: &[f64], o: &mut [f64]) {
    let (x, y, z) = (s[0], s[1], s[2]);
    let (mu, a) = (p[0], p[1]);
    o[0] = -mu * x + z * y;
    o[1] = -mu * y + x * (z - a);
    o[2] = 1.0 - x * y;
}

fn rossler(s: &[f64], p: &[f64], o: &mut [f64]) {
    let (x, y, z) = (s[0], s[1], s[2]);
    let (a, b, c) = (p[0], p[1], p[2]);
    o[0] = -(y + z);
    o[1] = x + a * y;
    o[2] = b + z * (x - c);
}

fn wang(s: &[f64], p: &[f64], o: &mut [f64]) {
    let (x, y, z) = (s[0], s[1], s[2]);
    let a = p[0];
    o[0] = x - y * z;
    o[1] = x - y + x * z;
    o[2] = -a * z + x * y;
}

fn lorenz(s: &[f64], p: &[f64], o: &mut [f64]) {
    let (x, y, z) = (s[0], s[1], s[2]);
    let (sigma, rho, beta) = (p[0], p[1], p[2]);
    o[0] = sigma * (y - x);
    o[1] = x * (rho - z) - y;
    o[2] = x * y - beta * z;
}

fn food_chain(s: &[f64], p: &[f64], o: &mut [f64]) {
    let (r, c, pr) = (s[0], s[1], s[2]);
    let (k, xc, yc, xp, yp, r0, c0) = (p[0], p[1], p[2], p[3], p[4], p[5], p[6]);
    o[0] = r * (1.0 - r / k) - xc * yc * c * r / (r + r0);
    o[1] = xc * c * (yc * r / (r + r0) - 1.0) - xp * yp * pr * c / (c + c0);
    o[2] = xp * pr * (yp * c / (c + c0) - 1.0);
}

/// Competitive Lotka-Volterra with `p = [r_1..r_4, a_11, a_12, .., a_44]`.
fn lotka_volterra(s: &[f64], p: &[f64], o: &mut [f64]) {
    let n = s.len();
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += p[n + i * n + j] * s[j];
        }
        o[i] = p[i] * s[i] * (1.0 - acc);
    }
}

macro_rules! sprott {
    ($name:ident, |$x:ident, $y:ident, $z:ident| [$fx:expr, $fy:expr, $fz:expr]) => {
        fn $name(s: &[f64], _p: &[f64], o: &mut [f64]) {
            let ($x, $y, $z) = (s[0], s[1], s[2]);
            let _ = ($x, $y, $z);
            o[0] = $fx;
            o[1] = $fy;
            o[2] = $fz;
        }
    };
}

sprott!(sprott_0, |x, y, z| [y, -x + y * z, 1.0 - y * y]);
sprott!(sprott_1, |x, y, z| [y * z, x - y, 1.0 - x * y]);
sprott!(sprott_2, |x, y, z| [y * z, x - y, 1.0 - x * x]);
sprott!(sprott_3, |x, y, z| [-y, x + z, x * z + 3.0 * y * y]);
sprott!(sprott_4, |x, y, z| [y * z, x * x - y, 1.0 - 4.0 * x]);
sprott!(sprott_5, |x, y, z| [y + z, -x + 0.5 * y, x * x - z]);
sprott!(sprott_6, |x, y, z| [0.4 * x + z, x * z - y, -x + y]);
sprott!(sprott_7, |x, y, z| [-y + z * z, x + 0.5 * y, x - z]);
sprott!(sprott_8, |x, y, z| [-0.2 * y, x + z, x + y * y - z]);
sprott!(sprott_9, |x, y, z| [2.0 * z, -2.0 * y + z, -x + y + y * y]);
sprott!(sprott_10, |x, y, z| [x * y - z, x - y, x + 0.3 * z]);
sprott!(sprott_11, |x, y, z| [y + 3.9 * z, 0.9 * x * x - y, 1.0 - x]);
sprott!(sprott_12, |x, y, z| [-z, -x * x - y, 1.7 + 1.7 * x + y]);
sprott!(sprott_13, |x, y, z| [-2.0 * y, x + z * z, 1.0 + y - 2.0 * z]);
sprott!(sprott_14, |x, y, z| [y, x - z, x + x * z + 2.7 * y]);
sprott!(sprott_15, |x, y, z| [2.7 * y + z, -x + y * y, x + y]);
sprott!(sprott_16, |x, y, z| [-z, x - y, 3.1 * x + y * y + 0.5 * z]);
sprott!(sprott_17, |x, y, z| [0.9 - y, 0.4 + z, x * y - z]);
sprott!(sprott_18, |x, y, z| [-x - 4.0 * y, x + z * z, 1.0 + x]);

const SPROTT: [Field; 19] = [
    sprott_0, sprott_1, sprott_2, sprott_3, sprott_4, sprott_5, sprott_6, sprott_7, sprott_8, sprott_9, sprott_10,
    sprott_11, sprott_12, sprott_13, sprott_14, sprott_15, sprott_16, sprott_17, sprott_18,
];

/// Initial-condition boxes (centre, half-width) for the Sprott cases whose
/// basins do not contain the default unit cube.
const SPROTT_INIT: [Option<([f64; 3], f64)>; 19] = [
    None,
    None,
    None,
    Some(([-0.45, 0.33, 0.65], 0.05)),
    None,
    Some(([0.6, 0.38, 0.13], 0.05)),
    Some(([-1.2, 0.25, -0.25], 0.05)),
    Some(([-1.44, 0.73, -1.09], 0.05)),
    Some(([-0.03, -0.68, 0.46], 0.05)),
    None,
    None,
    Some(([1.97, 8.66, -0.35], 0.05)),
    Some(([0.98, -0.8, 0.26], 0.05)),
    None,
    Some(([-0.5, -0.07, -1.03], 0.05)),
    Some(([0.69, 0.01, 0.4], 0.05)),
    None,
    None,
    None,
];

/// Sampling stride (in integration steps) per Sprott case, chosen so one
/// dominant oscillation spans roughly 40-50 stored samples.
const SPROTT_STRIDE: [usize; 19] = [
    15, 25, 25, 15, 15, 25, 15, 15, 25, 10, 15, 10, 10, 10, 10, 15, 10, 15, 10,
];

fn unit_box(dim: usize) -> Vec<(f64, f64)> {
    vec![(0.0, 1.0); dim]
}

fn centred(c: &[f64], w: f64) -> Vec<(f64, f64)> {
    c.iter().map(|&v| (v - w, v + w)).collect()
}

fn named(name: &str, field: Field, params: &[(&str, f64)], init_box: Vec<(f64, f64)>, stride: usize) -> SystemSpec {
    SystemSpec::new(name, init_box.len(), field, params, init_box, stride)
}

/// Canonical chaotic Lorenz parameters.
pub const LORENZ_CANONICAL: [(&str, f64); 3] = [("sigma", 10.0), ("rho", 28.0), ("beta", 8.0 / 3.0)];
/// Alternate Lorenz set (sigma 10, rho 2.67, beta 26); trajectories settle to a fixed point.
pub const LORENZ_PRINTED: [(&str, f64); 3] = [("sigma", 10.0), ("rho", 2.67), ("beta", 26.0)];

pub const TARGETS: [&str; 3] = ["food_chain", "lorenz", "lotka_volterra"];

pub fn training_systems() -> Vec<SystemSpec> {
    let mut v = vec![
        named(
            "aizawa",
            aizawa,
            &[("a", 0.95), ("b", 0.7), ("c", 0.6), ("d", 3.5), ("e", 0.25), ("f", 0.1)],
            centred(&[0.1, 0.0, 0.0], 0.1),
            5,
        ),
        named(
            "bouali",
            bouali,
            &[
                ("alpha", 0.3),
                ("beta", 0.05),
                ("a", 4.0),
                ("b", 1.0),
                ("c", 1.5),
                ("s", 1.0),
            ],
            unit_box(3),
            25,
        ),
        named(
            "chua",
            chua,
            &[
                ("alpha", 15.6),
                ("gamma", 1.0),
                ("beta", 28.0),
                ("mu0", -1.143),
                ("mu1", -0.714),
            ],
            centred(&[1.42, 0.14, -0.35], 0.05),
            10,
        ),
        named(
            "dadras",
            dadras,
            &[("a", 3.0), ("b", 2.7), ("c", 1.7), ("d", 2.0), ("e", 9.0)],
            unit_box(3),
            10,
        ),
        named(
            "four_wing",
            four_wing,
            &[("a", 0.2), ("b", 0.01), ("c", -0.4)],
            unit_box(3),
            80,
        ),
        named(
            "hastings_powell",
            hastings_powell,
            &[
                ("a1", 5.0),
                ("a2", 0.1),
                ("b1", 3.0),
                ("b2", 2.0),
                ("d1", 0.4),
                ("d2", 0.01),
            ],
            centred(&[0.75, 0.15, 10.0], 0.05),
            80,
        ),
        named("rikitake", rikitake, &[("mu", 2.0), ("a", 5.0)], unit_box(3), 15),
        named(
            "rossler",
            rossler,
            &[("a", 0.2), ("b", 0.2), ("c", 5.7)],
            unit_box(3),
            15,
        ),
        named("wang", wang, &[("a", 3.0)], unit_box(3), 15),
    ];
    for (i, field) in SPROTT.iter().enumerate() {
        let init = match SPROTT_INIT[i] {
            Some((c, w)) => centred(&c, w),
            None => unit_box(3),
        };
        v.push(named(&format!("sprott_{i}"), *field, &[], init, SPROTT_STRIDE[i]));
    }
    v
}

pub fn target_systems() -> Vec<SystemSpec> {
    let lv_r = [1.0, 0.72, 1.53, 1.27];
    let lv_a = [
        [1.0, 1.09, 1.52, 0.0],
        [0.0, 1.0, 0.44, 1.36],
        [2.33, 0.0, 1.0, 0.47],
        [1.21, 0.51, 0.35, 1.0],
    ];
    let mut lv_params: Vec<(String, f64)> = Vec::new();
    for (i, r) in lv_r.iter().enumerate() {
        lv_params.push((format!("r{}", i + 1), *r));
    }
    for (i, row) in lv_a.iter().enumerate() {
        for (j, a) in row.iter().enumerate() {
            lv_params.push((format!("a{}{}", i + 1, j + 1), *a));
        }
    }
    let lv_refs: Vec<(&str, f64)> = lv_params.iter().map(|(n, v)| (n.as_str(), *v)).collect();

    let lorenz = named("lorenz", lorenz, &LORENZ_CANONICAL, unit_box(3), 10).with_alternate("printed", &LORENZ_PRINTED);

    vec![
        named(
            "food_chain",
            food_chain,
            &[
                ("K", 1.0),
                ("x_c", 0.4),
                ("y_c", 2.009),
                ("x_p", 0.08),
                ("y_p", 2.876),
                ("R_0", 0.16129),
                ("C_0", 0.5),
            ],
            centred(&[0.5, 0.5, 0.5], 0.2),
            10,
        ),
        lorenz,
        named("lotka_volterra", lotka_volterra, &lv_refs, unit_box(4), 10),
    ]
}

/// All 31 systems: training systems first, then the three targets.
pub fn catalog() -> Vec<SystemSpec> {
    let mut v = training_systems();
    v.extend(target_systems());
    v
}

pub fn find(name: &str) -> Option<SystemSpec> {
    let key = name.to_ascii_lowercase().replace(['-', ' '], "_");
    catalog().into_iter().find(|s| s.name() == key)
}
