//! Chaotic systems, fixed-step integration, and preprocessing into
//! normalized trajectory matrices.

mod catalog;

pub use catalog::{catalog, find, target_systems, training_systems, LORENZ_CANONICAL, LORENZ_PRINTED, TARGETS};

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

/// Integration step used throughout.
pub const DT: f64 = 0.01;
/// Integration steps discarded before the trajectory is assumed on the attractor.
pub const DEFAULT_TRANSIENT: usize = 50_000;
/// Any component beyond this magnitude counts as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e6;

type FieldFn = fn(&[f64], &[f64], &mut [f64]);

/// A named autonomous ODE from the catalog.
#[derive(Clone)]
pub struct SystemSpec {
    name: String,
    dim: usize,
    field: FieldFn,
    param_names: Vec<String>,
    params: Vec<f64>,
    init_box: Vec<(f64, f64)>,
    sample_stride: usize,
    alternates: Vec<(String, Vec<f64>)>,
}

impl std::fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("params", &self.param_pairs())
            .finish()
    }
}

impl SystemSpec {
    pub(crate) fn new(
        name: &str,
        dim: usize,
        field: FieldFn,
        params: &[(&str, f64)],
        init_box: Vec<(f64, f64)>,
        sample_stride: usize,
    ) -> Self {
        debug_assert!(dim >= 3 && init_box.len() == dim);
        Self {
            name: name.to_string(),
            dim,
            field,
            param_names: params.iter().map(|(n, _)| n.to_string()).collect(),
            params: params.iter().map(|(_, v)| *v).collect(),
            init_box,
            sample_stride,
            alternates: Vec::new(),
        }
    }

    pub(crate) fn with_alternate(mut self, label: &str, params: &[(&str, f64)]) -> Self {
        self.alternates
            .push((label.to_string(), params.iter().map(|(_, v)| *v).collect()));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.param_names.iter().position(|n| n == name).map(|i| self.params[i])
    }

    pub fn param_pairs(&self) -> Vec<(&str, f64)> {
        self.param_names
            .iter()
            .map(String::as_str)
            .zip(self.params.iter().copied())
            .collect()
    }

    pub fn init_box(&self) -> &[(f64, f64)] {
        &self.init_box
    }

    /// Default number of integration steps between stored samples.
    pub fn sample_stride(&self) -> usize {
        self.sample_stride
    }

    pub fn alternate_labels(&self) -> Vec<&str> {
        self.alternates.iter().map(|(l, _)| l.as_str()).collect()
    }

    /// The same system with an alternate named parameter set.
    pub fn alternate(&self, label: &str) -> Option<SystemSpec> {
        let (_, values) = self.alternates.iter().find(|(l, _)| l == label)?;
        let mut s = self.clone();
        s.name = format!("{}_{}", self.name, label);
        s.params = values.clone();
        Some(s)
    }

    /// Replace a single parameter value.
    pub fn with_param(mut self, name: &str, value: f64) -> Result<Self> {
        let i = self
            .param_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Invalid(format!("{} has no parameter `{name}`", self.name)))?;
        self.params[i] = value;
        Ok(self)
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.field)(x, &self.params, out);
    }

    /// Vector field at `x`. The catalog is autonomous, so `t` is unused.
    pub fn eval(&self, x: &[f64], _t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out);
        out
    }

    /// Uniform draw from the initial-condition box.
    pub fn random_initial(&self, seed: u64) -> Vec<f64> {
        let mut rng = seed::rng(seed);
        self.init_box
            .iter()
            .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect()
    }
}

/// One classical fourth-order Runge-Kutta step of `field` from `x`.
pub fn rk4_step<F>(mut field: F, x: &[f64], t: f64, dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], f64, &mut [f64]),
{
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut out = vec![0.0; n];
    rk4_into(
        &mut field,
        x,
        t,
        dt,
        [&mut k1, &mut k2, &mut k3, &mut k4],
        &mut tmp,
        &mut out,
    )?;
    Ok(out)
}

fn rk4_into<F>(
    field: &mut F,
    x: &[f64],
    t: f64,
    dt: f64,
    k: [&mut [f64]; 4],
    tmp: &mut [f64],
    out: &mut [f64],
) -> Result<()>
where
    F: FnMut(&[f64], f64, &mut [f64]),
{
    let [k1, k2, k3, k4] = k;
    let h = 0.5 * dt;
    field(x, t, k1);
    for i in 0..x.len() {
        tmp[i] = x[i] + h * k1[i];
    }
    field(tmp, t + h, k2);
    for i in 0..x.len() {
        tmp[i] = x[i] + h * k2[i];
    }
    field(tmp, t + h, k3);
    for i in 0..x.len() {
        tmp[i] = x[i] + dt * k3[i];
    }
    field(tmp, t + dt, k4);
    if ![&*k1, &*k2, &*k3, &*k4].iter().all(|k| k.iter().all(|v| v.is_finite())) {
        return Err(Error::Integration { state: x.to_vec(), t });
    }
    for i in 0..x.len() {
        out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(())
}

/// Integrated states at the integration resolution. Row `i` is the state
/// after `i + 1` steps from `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrajectory {
    pub data: Matrix,
    pub t0: f64,
    pub dt: f64,
}

impl RawTrajectory {
    pub fn len(&self) -> usize {
        self.data.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Integrate `spec` for `n_steps` RK4 steps from `x0`. Integration is
/// deterministic; `_seed` is accepted for interface symmetry with the
/// stochastic stages.
pub fn simulate(spec: &SystemSpec, x0: &[f64], n_steps: usize, dt: f64, _seed: u64) -> Result<RawTrajectory> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::Invalid(format!("step size must be positive, got {dt}")));
    }
    if x0.len() != spec.dim() {
        return Err(Error::Invalid(format!(
            "{} expects a {}-dimensional initial state, got {}",
            spec.name(),
            spec.dim(),
            x0.len()
        )));
    }
    let d = spec.dim();
    let mut data = Vec::with_capacity(n_steps * d);
    let mut x = x0.to_vec();
    let mut next = vec![0.0; d];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut field = |s: &[f64], _t: f64, o: &mut [f64]| spec.eval_into(s, o);
    for step in 0..n_steps {
        let t = step as f64 * dt;
        rk4_into(
            &mut field,
            &x,
            t,
            dt,
            [&mut k1, &mut k2, &mut k3, &mut k4],
            &mut tmp,
            &mut next,
        )?;
        if next.iter().any(|v| !(v.abs() <= DIVERGENCE_BOUND)) {
            return Err(Error::Divergence {
                system: spec.name().to_string(),
                step,
            });
        }
        std::mem::swap(&mut x, &mut next);
        data.extend_from_slice(&x);
    }
    Ok(RawTrajectory {
        data: Matrix::from_vec(n_steps, d, data),
        t0: 0.0,
        dt,
    })
}

/// Uniformly sampled, min-max normalized `L_s x D` trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMatrix {
    pub data: Matrix,
    pub dt_effective: f64,
    /// Per-dimension `(min, max)` of the pre-normalization data.
    pub norm_stats: Vec<(f64, f64)>,
}

impl TrajectoryMatrix {
    pub fn len(&self) -> usize {
        self.data.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    /// Rows `start..start + len`, keeping the metadata.
    pub fn window(&self, start: usize, len: usize) -> TrajectoryMatrix {
        TrajectoryMatrix {
            data: self.data.slice_rows(start, len),
            dt_effective: self.dt_effective,
            norm_stats: self.norm_stats.clone(),
        }
    }
}

/// Min-max normalize each column into `[0, 1]`, returning the stats used.
pub fn min_max_normalize(m: &mut Matrix) -> Result<Vec<(f64, f64)>> {
    let mut stats = Vec::with_capacity(m.cols());
    for c in 0..m.cols() {
        let (lo, hi) = (0..m.rows()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            let v = m.get(r, c);
            (lo.min(v), hi.max(v))
        });
        if !(hi > lo) {
            return Err(Error::DegenerateNormalization { dim: c, value: lo });
        }
        let span = hi - lo;
        for r in 0..m.rows() {
            let v = (m.get(r, c) - lo) / span;
            m.set(r, c, v);
        }
        stats.push((lo, hi));
    }
    Ok(stats)
}

/// Drop the transient, keep every `subsample`-th row, project onto
/// `project_dims` (first three when `D > 3` and none given), and min-max
/// normalize per dimension.
pub fn preprocess(
    raw: &RawTrajectory,
    transient_cut: usize,
    subsample: usize,
    project_dims: Option<&[usize]>,
) -> Result<TrajectoryMatrix> {
    if subsample == 0 {
        return Err(Error::Invalid("subsample must be at least 1".into()));
    }
    if raw.len() <= transient_cut {
        return Err(Error::InsufficientData(format!(
            "trajectory has {} rows, transient cut is {transient_cut}",
            raw.len()
        )));
    }
    let d = raw.data.cols();
    let dims: Vec<usize> = match project_dims {
        Some(p) => {
            if let Some(&bad) = p.iter().find(|&&i| i >= d) {
                return Err(Error::Invalid(format!("projection dimension {bad} >= {d}")));
            }
            p.to_vec()
        }
        None if d > 3 => vec![0, 1, 2],
        None => (0..d).collect(),
    };
    let kept: Vec<usize> = (transient_cut..raw.len()).step_by(subsample).collect();
    let mut m = Matrix::zeros(kept.len(), dims.len());
    for (i, &r) in kept.iter().enumerate() {
        for (j, &c) in dims.iter().enumerate() {
            m.set(i, j, raw.data.get(r, c));
        }
    }
    let norm_stats = min_max_normalize(&mut m)?;
    Ok(TrajectoryMatrix {
        data: m,
        dt_effective: raw.dt * subsample as f64,
        norm_stats,
    })
}

/// Simulate from a seeded initial condition and preprocess to `length`
/// stored rows using the system's default stride.
pub fn generate(spec: &SystemSpec, length: usize, seed: u64) -> Result<TrajectoryMatrix> {
    generate_with(spec, length, spec.sample_stride(), DEFAULT_TRANSIENT, seed)
}

pub fn generate_with(
    spec: &SystemSpec,
    length: usize,
    subsample: usize,
    transient: usize,
    seed: u64,
) -> Result<TrajectoryMatrix> {
    let x0 = spec.random_initial(seed::derive(seed, "x0"));
    let n_steps = transient + length * subsample;
    let raw = simulate(spec, &x0, n_steps, DT, seed)?;
    let tm = preprocess(&raw, transient, subsample, None)?;
    debug_assert_eq!(tm.len(), length);
    Ok(tm)
}
