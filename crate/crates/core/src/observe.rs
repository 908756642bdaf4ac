//! Measurement model: element-wise random masking with multiplicative and
//! additive Gaussian noise, and the smoothed-noise counterexample signal.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::dynsys::{min_max_normalize, TrajectoryMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationSpec {
    /// Fraction of elements removed, `S_r`.
    pub sparsity: f64,
    pub mult_noise_sigma: f64,
    pub add_noise_sigma: f64,
    pub seed: u64,
}

impl ObservationSpec {
    pub fn new(sparsity: f64, seed: u64) -> Self {
        Self {
            sparsity,
            mult_noise_sigma: 0.0,
            add_noise_sigma: 0.0,
            seed,
        }
    }

    pub fn with_mult_noise(mut self, sigma: f64) -> Self {
        self.mult_noise_sigma = sigma;
        self
    }

    pub fn with_add_noise(mut self, sigma: f64) -> Self {
        self.add_noise_sigma = sigma;
        self
    }

    /// Probability that an element is observed.
    pub fn observe_prob(&self) -> f64 {
        1.0 - self.sparsity
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.sparsity) {
            return Err(Error::Invalid(format!(
                "sparsity must lie in [0, 1], got {}",
                self.sparsity
            )));
        }
        if !(self.mult_noise_sigma >= 0.0) || !(self.add_noise_sigma >= 0.0) {
            return Err(Error::Invalid("noise amplitudes must be non-negative".into()));
        }
        Ok(())
    }
}

/// Row-major boolean observation mask; `true` means observed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn from_vec(rows: usize, cols: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), rows * cols);
        Self { rows, cols, bits }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self::from_vec(rows, cols, vec![true; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.cols + c]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn observed_count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn observed_fraction(&self) -> f64 {
        if self.bits.is_empty() {
            return 0.0;
        }
        self.observed_count() as f64 / self.bits.len() as f64
    }
}

/// Independent Bernoulli(1 - `sparsity`) draw per element.
pub fn make_mask(rows: usize, cols: usize, sparsity: f64, seed: u64) -> Mask {
    let keep = 1.0 - sparsity;
    let mut rng = seed::rng(seed);
    let bits = (0..rows * cols).map(|_| rng.random::<f64>() < keep).collect();
    Mask { rows, cols, bits }
}

/// Observation matrix `X~` with zeros at unobserved entries, the mask that
/// distinguishes them from genuine zeros, and the source metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSeries {
    pub values: Matrix,
    pub mask: Mask,
    pub spec: ObservationSpec,
    pub dt_effective: f64,
    pub norm_stats: Vec<(f64, f64)>,
}

impl SparseSeries {
    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    /// Wrap a complete matrix as a fully observed, noise-free series.
    pub fn fully_observed(x: &TrajectoryMatrix) -> Self {
        Self {
            values: x.data.clone(),
            mask: Mask::full(x.len(), x.dim()),
            spec: ObservationSpec::new(0.0, 0),
            dt_effective: x.dt_effective,
            norm_stats: x.norm_stats.clone(),
        }
    }
}

/// Mask `x` and perturb the observed entries:
/// `X_ij (1 + sigma xi_ij) + sigma_add xi'_ij`.
pub fn apply_observation(x: &TrajectoryMatrix, spec: &ObservationSpec) -> Result<SparseSeries> {
    spec.validate()?;
    let (rows, cols) = (x.len(), x.dim());
    let mask = make_mask(rows, cols, spec.sparsity, seed::derive(spec.seed, "mask"));
    let mut rng = seed::rng(seed::derive(spec.seed, "noise"));
    let mut values = Matrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let xi: f64 = StandardNormal.sample(&mut rng);
            let xi_add: f64 = StandardNormal.sample(&mut rng);
            if mask.get(r, c) {
                let v = x.data.get(r, c);
                values.set(
                    r,
                    c,
                    v * (1.0 + spec.mult_noise_sigma * xi) + spec.add_noise_sigma * xi_add,
                );
            }
        }
    }
    Ok(SparseSeries {
        values,
        mask,
        spec: *spec,
        dt_effective: x.dt_effective,
        norm_stats: x.norm_stats.clone(),
    })
}

/// Truncated Gaussian kernel of radius `ceil(4 sigma)`, normalized to sum 1.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Per-dimension U(0,1) noise smoothed by a Gaussian kernel of width
/// `kernel_sigma` (in samples), then min-max normalized. The noise is drawn
/// with a margin of one kernel radius on each side so every output sample
/// sees the full kernel.
pub fn gen_stochastic_signal(length: usize, dims: usize, kernel_sigma: f64, seed: u64) -> Result<TrajectoryMatrix> {
    if !(kernel_sigma > 0.0) || (length as f64) <= 6.0 * kernel_sigma {
        return Err(Error::Invalid(format!(
            "stochastic signal length {length} must exceed 6 x kernel sigma {kernel_sigma}"
        )));
    }
    let kernel = gaussian_kernel(kernel_sigma);
    let radius = kernel.len() / 2;
    let mut rng = seed::rng(seed);
    let mut m = Matrix::zeros(length, dims);
    for c in 0..dims {
        let noise: Vec<f64> = (0..length + 2 * radius).map(|_| rng.random::<f64>()).collect();
        for r in 0..length {
            let v: f64 = kernel.iter().zip(&noise[r..r + kernel.len()]).map(|(k, n)| k * n).sum();
            m.set(r, c, v);
        }
    }
    let norm_stats = min_max_normalize(&mut m)?;
    Ok(TrajectoryMatrix {
        data: m,
        dt_effective: 1.0,
        norm_stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(rows: usize, cols: usize) -> TrajectoryMatrix {
        let data = (0..rows * cols)
            .map(|i| (i as f64 + 1.0) / (rows * cols) as f64)
            .collect();
        TrajectoryMatrix {
            data: Matrix::from_vec(rows, cols, data),
            dt_effective: 0.1,
            norm_stats: vec![(0.0, 1.0); cols],
        }
    }

    #[test]
    fn mask_extremes() {
        assert!(make_mask(10, 3, 0.0, 1).as_slice().iter().all(|b| *b));
        assert!(make_mask(10, 3, 1.0, 1).as_slice().iter().all(|b| !*b));
    }

    #[test]
    fn mask_fraction_within_binomial_band() {
        let m = make_mask(3000, 3, 0.8, 42);
        assert!((m.observed_fraction() - 0.2).abs() < 0.02);
    }

    #[test]
    fn mask_is_seeded() {
        assert_eq!(make_mask(50, 3, 0.5, 9), make_mask(50, 3, 0.5, 9));
        assert_ne!(make_mask(50, 3, 0.5, 9), make_mask(50, 3, 0.5, 10));
    }

    #[test]
    fn mask_hamming_distance_between_seeds() {
        let alpha: f64 = 0.3;
        let n = 30_000;
        let a = make_mask(n, 1, 1.0 - alpha, 1);
        let b = make_mask(n, 1, 1.0 - alpha, 2);
        let diff = a.as_slice().iter().zip(b.as_slice()).filter(|(x, y)| x != y).count() as f64 / n as f64;
        let p = 2.0 * alpha * (1.0 - alpha);
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((diff - p).abs() < 3.0 * sd, "{diff} vs {p}");
    }

    #[test]
    fn identity_observation() {
        let x = ramp(20, 3);
        let s = apply_observation(&x, &ObservationSpec::new(0.0, 3)).unwrap();
        assert_eq!(s.values, x.data);
    }

    #[test]
    fn fully_masked_is_zero() {
        let x = ramp(20, 3);
        let spec = ObservationSpec::new(1.0, 3).with_mult_noise(0.5).with_add_noise(0.5);
        let s = apply_observation(&x, &spec).unwrap();
        assert!(s.values.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn masked_entries_are_zero_and_observed_exact() {
        let x = ramp(40, 3);
        let s = apply_observation(&x, &ObservationSpec::new(0.6, 5)).unwrap();
        for r in 0..40 {
            for c in 0..3 {
                if s.mask.get(r, c) {
                    assert_eq!(s.values.get(r, c), x.data.get(r, c));
                } else {
                    assert_eq!(s.values.get(r, c), 0.0);
                }
            }
        }
    }

    #[test]
    fn multiplicative_noise_moments() {
        let x = TrajectoryMatrix {
            data: Matrix::from_vec(1, 1, vec![0.7]),
            dt_effective: 0.1,
            norm_stats: vec![(0.0, 1.0)],
        };
        let n = 10_000;
        let draws: Vec<f64> = (0..n)
            .map(|i| {
                let spec = ObservationSpec::new(0.0, i).with_mult_noise(0.05);
                apply_observation(&x, &spec).unwrap().values.get(0, 0)
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let expected_var = (0.05f64 * 0.7).powi(2);
        assert!((mean - 0.7).abs() / 0.7 < 0.1);
        assert!(
            (var - expected_var).abs() / expected_var < 0.1,
            "{var} vs {expected_var}"
        );
    }

    #[test]
    fn invalid_specs_rejected() {
        let x = ramp(5, 3);
        assert!(apply_observation(&x, &ObservationSpec::new(1.5, 0)).is_err());
        assert!(apply_observation(&x, &ObservationSpec::new(0.5, 0).with_mult_noise(-1.0)).is_err());
    }

    #[test]
    fn kernel_is_normalized() {
        let k = gaussian_kernel(12.0);
        assert_eq!(k.len(), 97);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stochastic_signal_range_and_smoothness() {
        let s = gen_stochastic_signal(5000, 3, 12.0, 7).unwrap();
        for c in 0..3 {
            let col = s.data.column(c);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(lo, 0.0);
            assert!((hi - 1.0).abs() < 1e-12);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
            let lag1: f64 = col.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
            assert!(lag1 / var > 0.95, "lag-1 autocorrelation {}", lag1 / var);
        }
    }

    #[test]
    fn stochastic_signal_rejects_short_length() {
        assert!(gen_stochastic_signal(72, 3, 12.0, 0).is_err());
    }
}
