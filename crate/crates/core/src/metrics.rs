//! Pointwise errors, recovery stability, attractor occupancy and the
//! deviation value, plus the simple baselines used for comparison.

use std::collections::BTreeMap;

use rand::seq::SliceRandom as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::observe::SparseSeries;

/// Default recovery threshold.
pub const DEFAULT_MSE_THRESHOLD: f64 = 0.01;
/// Default occupancy cell edge.
pub const DEFAULT_CELL: f64 = 0.05;
/// Default long-horizon window for the deviation value.
pub const DEFAULT_DV_WINDOW: usize = 10_000;

fn check_pair(pred: &Matrix, truth: &Matrix) -> Result<()> {
    if pred.rows() != truth.rows() || pred.cols() != truth.cols() {
        return Err(Error::Shape {
            op: "metric",
            a: vec![pred.rows(), pred.cols()],
            b: vec![truth.rows(), truth.cols()],
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyMetric);
    }
    Ok(())
}

pub fn mse(pred: &Matrix, truth: &Matrix) -> Result<f64> {
    check_pair(pred, truth)?;
    let s: f64 = pred
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(s / pred.as_slice().len() as f64)
}

pub fn rmse(pred: &Matrix, truth: &Matrix) -> Result<f64> {
    mse(pred, truth).map(f64::sqrt)
}

/// Fraction of `errors` strictly below `threshold`.
pub fn recovery_stability(errors: &[f64], threshold: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyMetric);
    }
    if !(threshold > 0.0) {
        return Err(Error::Invalid(format!("threshold {threshold} must be positive")));
    }
    Ok(errors.iter().filter(|e| **e < threshold).count() as f64 / errors.len() as f64)
}

/// Visit frequencies of a 3-D trajectory on a cubic lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub cell: f64,
    pub counts_per_axis: [usize; 3],
    /// Row-major `(x, y, z)` frequencies.
    pub freq: Vec<f64>,
    /// Share of points outside the bounds.
    pub overflow: f64,
}

impl OccupancyGrid {
    pub fn total(&self) -> f64 {
        self.freq.iter().sum::<f64>() + self.overflow
    }

    pub fn cell_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        let [_, my, mz] = self.counts_per_axis;
        (ix * my + iy) * mz + iz
    }
}

/// Bins the first three columns of `traj` into cells of edge `cell` over
/// `bounds` (per axis `(lo, hi)`, upper edge closed). Points outside the
/// bounds or non-finite go to the overflow bucket.
pub fn occupancy(traj: &Matrix, cell: f64, bounds: [(f64, f64); 3]) -> Result<OccupancyGrid> {
    if traj.cols() < 3 {
        return Err(Error::Invalid(format!(
            "occupancy needs 3 columns, got {}",
            traj.cols()
        )));
    }
    if traj.rows() == 0 {
        return Err(Error::EmptyMetric);
    }
    if !(cell > 0.0) {
        return Err(Error::Invalid(format!("cell size {cell}")));
    }
    let m: [usize; 3] = std::array::from_fn(|a| {
        let (lo, hi) = bounds[a];
        (((hi - lo) / cell) - 1e-9).ceil().max(1.0) as usize
    });
    let mut counts = vec![0usize; m[0] * m[1] * m[2]];
    let mut overflow = 0usize;
    'rows: for r in 0..traj.rows() {
        let row = traj.row(r);
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let (lo, hi) = bounds[a];
            let v = row[a];
            if !(v >= lo && v <= hi) {
                overflow += 1;
                continue 'rows;
            }
            idx[a] = (((v - lo) / cell).floor() as usize).min(m[a] - 1);
        }
        counts[(idx[0] * m[1] + idx[1]) * m[2] + idx[2]] += 1;
    }
    let n = traj.rows() as f64;
    Ok(OccupancyGrid {
        cell,
        counts_per_axis: m,
        freq: counts.iter().map(|c| *c as f64 / n).collect(),
        overflow: overflow as f64 / n,
    })
}

/// Unit-cube occupancy with the default cell size.
pub fn unit_occupancy(traj: &Matrix) -> Result<OccupancyGrid> {
    occupancy(traj, DEFAULT_CELL, [(0.0, 1.0); 3])
}

/// L1 distance between two occupancy grids, overflow bucket included.
pub fn grid_distance(a: &OccupancyGrid, b: &OccupancyGrid) -> Result<f64> {
    if a.counts_per_axis != b.counts_per_axis || a.cell != b.cell {
        return Err(Error::Invalid("occupancy grids differ in geometry".into()));
    }
    let cells: f64 = a.freq.iter().zip(&b.freq).map(|(x, y)| (x - y).abs()).sum();
    Ok(cells + (a.overflow - b.overflow).abs())
}

/// Deviation value between two equal-length 3-D trajectories on the unit cube.
pub fn deviation_value(pred: &Matrix, truth: &Matrix, cell: f64) -> Result<f64> {
    if pred.rows() != truth.rows() {
        return Err(Error::WindowMismatch(pred.rows(), truth.rows()));
    }
    let a = occupancy(pred, cell, [(0.0, 1.0); 3])?;
    let b = occupancy(truth, cell, [(0.0, 1.0); 3])?;
    grid_distance(&a, &b)
}

/// Per-dimension linear interpolation between observed points, holding the
/// nearest observation beyond the first and last ones. Dimensions without
/// any observation are filled with `0.5`, the centre of the normalized range.
pub fn linear_interpolation(sparse: &SparseSeries) -> Matrix {
    let (l, d) = (sparse.len(), sparse.dim());
    let mut out = Matrix::zeros(l, d);
    for c in 0..d {
        let obs: Vec<usize> = (0..l).filter(|&r| sparse.mask.get(r, c)).collect();
        if obs.is_empty() {
            (0..l).for_each(|r| out.set(r, c, 0.5));
            continue;
        }
        let val = |r: usize| sparse.values.get(r, c);
        let mut k = 0;
        for r in 0..l {
            while k + 1 < obs.len() && obs[k + 1] <= r {
                k += 1;
            }
            let v = if r <= obs[0] {
                val(obs[0])
            } else if k + 1 >= obs.len() {
                val(obs[k])
            } else {
                let (a, b) = (obs[k], obs[k + 1]);
                let w = (r - a) as f64 / (b - a) as f64;
                val(a) * (1.0 - w) + val(b) * w
            };
            out.set(r, c, v);
        }
    }
    out
}

/// Repeats `last` for `horizon` steps.
pub fn persistence(last: &[f64], horizon: usize) -> Matrix {
    let mut out = Matrix::zeros(horizon, last.len());
    for r in 0..horizon {
        out.row_mut(r).copy_from_slice(last);
    }
    out
}

/// Surrogate with each column permuted independently in time. Marginal
/// distributions survive while the joint attractor geometry is destroyed.
pub fn shuffled_surrogate(traj: &Matrix, seed: u64) -> Matrix {
    let (rows, cols) = (traj.rows(), traj.cols());
    let mut out = Matrix::zeros(rows, cols);
    for c in 0..cols {
        let mut col = traj.column(c);
        col.shuffle(&mut crate::seed::rng(crate::seed::derive_index(seed, c as u64)));
        for (r, v) in col.into_iter().enumerate() {
            out.set(r, c, v);
        }
    }
    out
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyMetric);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Aggregate scores for one experimental condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system: String,
    pub seq_len: usize,
    pub sparsity: f64,
    pub noise_sigma: f64,
    pub n_realizations: usize,
    pub mse: f64,
    pub rmse: f64,
    pub median_mse: f64,
    pub recovery_stability: BTreeMap<String, f64>,
    pub dv: Option<f64>,
}

impl EvalReport {
    /// Summarizes per-realization MSEs; `mse` is their mean and `rmse` its root.
    pub fn from_errors(
        system: &str,
        seq_len: usize,
        sparsity: f64,
        noise_sigma: f64,
        errors: &[f64],
        thresholds: &[f64],
    ) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::EmptyMetric);
        }
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        let mut rs = BTreeMap::new();
        for t in thresholds {
            rs.insert(format!("{t}"), recovery_stability(errors, *t)?);
        }
        Ok(Self {
            system: system.to_string(),
            seq_len,
            sparsity,
            noise_sigma,
            n_realizations: errors.len(),
            mse: mean,
            rmse: mean.sqrt(),
            median_mse: median(errors)?,
            recovery_stability: rs,
            dv: None,
        })
    }
}
