//! Spectral radius of a dense or sparse square matrix.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seed;

/// Row-compressed sparse square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets sorted by row then column.
    pub fn from_triplets(n: usize, rows: &[usize], cols: &[usize], vals: &[f64]) -> Result<Self> {
        if rows.len() != cols.len() || rows.len() != vals.len() {
            return Err(Error::Format("triplet arrays differ in length".into()));
        }
        let mut row_ptr = vec![0usize; n + 1];
        let mut prev = (0usize, 0usize);
        for (k, (&r, &c)) in rows.iter().zip(cols).enumerate() {
            if r >= n || c >= n || (k > 0 && (r, c) <= prev) {
                return Err(Error::Format(format!("bad or unsorted triplet ({r}, {c})")));
            }
            prev = (r, c);
            row_ptr[r + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n,
            row_ptr,
            cols: cols.to_vec(),
            vals: vals.to_vec(),
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `(rows, cols, vals)` triplets in row-major order.
    pub fn triplets(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let mut rows = Vec::with_capacity(self.nnz());
        for r in 0..self.n {
            rows.extend(std::iter::repeat_n(r, self.row_ptr[r + 1] - self.row_ptr[r]));
        }
        (rows, self.cols.clone(), self.vals.clone())
    }

    pub fn scale(&mut self, s: f64) {
        self.vals.iter_mut().for_each(|v| *v *= s);
    }

    /// `out = A x`.
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            out[r] = acc;
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                d[r * self.n + self.cols[k]] = self.vals[k];
            }
        }
        d
    }
}

const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITERS: usize = 20_000;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest root modulus of `z^2 + a z + b`.
fn quadratic_radius(a: f64, b: f64) -> f64 {
    let disc = a * a - 4.0 * b;
    if disc >= 0.0 {
        let s = disc.sqrt();
        ((-a + s) / 2.0).abs().max(((-a - s) / 2.0).abs())
    } else {
        b.sqrt()
    }
}

/// Power iteration that tolerates a dominant complex-conjugate or `±λ`
/// pair: each step fits either `A x = λ x` or `A^2 x + a A x + b x = 0` and
/// stops once the relative residual of the better fit falls below 1e-8.
pub fn power_iteration(a: &SparseMatrix, seed: u64) -> Option<f64> {
    let n = a.size();
    let mut rng = seed::rng(seed);
    let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nx = norm(&x);
    if nx == 0.0 {
        return None;
    }
    x.iter_mut().for_each(|v| *v /= nx);
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    for _ in 0..POWER_MAX_ITERS {
        a.mul_vec(&x, &mut y);
        let ny = norm(&y);
        if ny == 0.0 {
            return Some(0.0);
        }
        a.mul_vec(&y, &mut z);
        let lam = dot(&y, &x);
        let r1 = y.iter().zip(&x).map(|(u, v)| (u - lam * v).powi(2)).sum::<f64>().sqrt() / ny;
        if r1 < POWER_TOL {
            return Some(lam.abs());
        }
        // least squares for z ≈ -(a y + b x)
        let (yy, yx, xx) = (dot(&y, &y), dot(&y, &x), dot(&x, &x));
        let (zy, zx) = (dot(&z, &y), dot(&z, &x));
        let det = yy * xx - yx * yx;
        if det.abs() > 1e-300 {
            let ca = -(zy * xx - zx * yx) / det;
            let cb = -(yy * zx - yx * zy) / det;
            let nz = norm(&z);
            let r2 = z
                .iter()
                .zip(&y)
                .zip(&x)
                .map(|((w, u), v)| (w + ca * u + cb * v).powi(2))
                .sum::<f64>()
                .sqrt()
                / nz.max(1e-300);
            if r2 < POWER_TOL {
                return Some(quadratic_radius(ca, cb));
            }
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / ny;
        }
    }
    None
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Moduli of all eigenvalues of a dense row-major `n x n` matrix, by
/// reduction to Hessenberg form and shifted QR iteration.
pub fn dense_eigen_moduli(mut m: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    let a = |m: &Vec<f64>, i: usize, j: usize| m[i * n + j];
    // Hessenberg reduction by stabilized elimination
    for mm in 1..n.saturating_sub(1) {
        let mut x: f64 = 0.0;
        let mut piv = mm;
        for j in mm..n {
            if a(&m, j, mm - 1).abs() > x.abs() {
                x = a(&m, j, mm - 1);
                piv = j;
            }
        }
        if piv != mm {
            for j in (mm - 1)..n {
                m.swap(piv * n + j, mm * n + j);
            }
            for j in 0..n {
                m.swap(j * n + piv, j * n + mm);
            }
        }
        if x != 0.0 {
            for i in (mm + 1)..n {
                let mut y = a(&m, i, mm - 1);
                if y != 0.0 {
                    y /= x;
                    m[i * n + mm - 1] = y;
                    for j in mm..n {
                        m[i * n + j] -= y * m[mm * n + j];
                    }
                    for j in 0..n {
                        m[j * n + mm] += y * m[j * n + i];
                    }
                }
            }
        }
    }
    for i in 2..n {
        for j in 0..i - 1 {
            m[i * n + j] = 0.0;
        }
    }

    let eps = f64::EPSILON;
    let mut out = vec![0.0; n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a(&m, i, j).abs();
        }
    }
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    let (mut p, mut q, mut r): (f64, f64, f64);
    let (mut x, mut y, mut z, mut w);
    while nn >= 0 {
        let mut its = 0;
        loop {
            let nnu = nn as usize;
            let mut l = nnu;
            while l > 0 {
                let mut s = a(&m, l - 1, l - 1).abs() + a(&m, l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a(&m, l, l - 1).abs() <= eps * s {
                    m[l * n + l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a(&m, nnu, nnu);
            if l == nnu {
                out[nnu] = (x + t).abs();
                nn -= 1;
            } else {
                y = a(&m, nnu - 1, nnu - 1);
                w = a(&m, nnu, nnu - 1) * a(&m, nnu - 1, nnu);
                if l == nnu - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        out[nnu - 1] = (x + z).abs();
                        out[nnu] = if z != 0.0 { (x - w / z).abs() } else { (x + z).abs() };
                    } else {
                        let md = ((x + p) * (x + p) + z * z).sqrt();
                        out[nnu] = md;
                        out[nnu - 1] = md;
                    }
                    nn -= 2;
                } else {
                    if its == 60 {
                        return Err(Error::DegenerateReservoir {
                            size: n,
                            link_prob: f64::NAN,
                        });
                    }
                    if its == 10 || its == 20 || its == 40 {
                        t += x;
                        for i in 0..=nnu {
                            m[i * n + i] -= x;
                        }
                        let s = a(&m, nnu, nnu - 1).abs() + a(&m, nnu - 1, nnu - 2).abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let mut mm = nnu - 2;
                    loop {
                        z = a(&m, mm, mm);
                        r = x - z;
                        let s0 = y - z;
                        p = (r * s0 - w) / a(&m, mm + 1, mm) + a(&m, mm, mm + 1);
                        q = a(&m, mm + 1, mm + 1) - z - r - s0;
                        r = a(&m, mm + 2, mm + 1);
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if mm == l {
                            break;
                        }
                        let u = a(&m, mm, mm - 1).abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a(&m, mm - 1, mm - 1).abs() + z.abs() + a(&m, mm + 1, mm + 1).abs());
                        if u <= eps * v {
                            break;
                        }
                        mm -= 1;
                    }
                    for i in mm..nnu - 1 {
                        m[(i + 2) * n + i] = 0.0;
                        if i != mm {
                            m[(i + 2) * n + i - 1] = 0.0;
                        }
                    }
                    let mut k = mm;
                    while k < nnu {
                        if k != mm {
                            p = a(&m, k, k - 1);
                            q = a(&m, k + 1, k - 1);
                            r = 0.0;
                            if k + 1 != nnu {
                                r = a(&m, k + 2, k - 1);
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != 0.0 {
                            if k == mm {
                                if l != mm {
                                    m[k * n + k - 1] = -m[k * n + k - 1];
                                }
                            } else {
                                m[k * n + k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nnu {
                                let mut pp = a(&m, k, j) + q * a(&m, k + 1, j);
                                if k + 1 != nnu {
                                    pp += r * a(&m, k + 2, j);
                                    m[(k + 2) * n + j] -= pp * z;
                                }
                                m[(k + 1) * n + j] -= pp * y;
                                m[k * n + j] -= pp * x;
                            }
                            let mmin = if nnu < k + 3 { nnu } else { k + 3 };
                            for i in l..=mmin {
                                let mut pp = x * a(&m, i, k) + y * a(&m, i, k + 1);
                                if k + 1 != nnu {
                                    pp += z * a(&m, i, k + 2);
                                    m[i * n + k + 2] -= pp * r;
                                }
                                m[i * n + k + 1] -= pp * q;
                                m[i * n + k] -= pp;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn < 0 || l + 1 >= nn as usize {
                break;
            }
        }
    }
    Ok(out)
}

/// Spectral radius: power iteration first, dense QR if it fails to settle.
pub fn spectral_radius(a: &SparseMatrix, seed: u64) -> Result<f64> {
    if let Some(r) = power_iteration(a, seed) {
        return Ok(r);
    }
    let moduli = dense_eigen_moduli(a.to_dense(), a.size())?;
    Ok(moduli.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn random_sparse(n: usize, d: f64, seed: u64) -> SparseMatrix {
        let mut rng = seed::rng(seed);
        let (mut r, mut c, mut v) = (vec![], vec![], vec![]);
        for i in 0..n {
            for j in 0..n {
                if rng.random::<f64>() < d {
                    r.push(i);
                    c.push(j);
                    v.push(StandardNormal.sample(&mut rng));
                }
            }
        }
        SparseMatrix::from_triplets(n, &r, &c, &v).unwrap()
    }

    fn oracle(a: &SparseMatrix) -> f64 {
        let n = a.size();
        let m = nalgebra::DMatrix::from_row_slice(n, n, &a.to_dense());
        m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn power_iteration_matches_dense_oracle() {
        for (n, d, s) in [(50, 0.1, 1), (100, 0.68, 2), (120, 0.02, 3), (200, 0.41, 4)] {
            let a = random_sparse(n, d, s);
            let want = oracle(&a);
            let got = spectral_radius(&a, 9).unwrap();
            assert!((got - want).abs() / want < 1e-7, "{n} {d}: {got} vs {want}");
        }
    }

    #[test]
    fn dense_qr_matches_oracle() {
        for (n, d, s) in [(3, 1.0, 5), (17, 0.5, 6), (60, 0.3, 7), (150, 0.05, 8)] {
            let a = random_sparse(n, d, s);
            let mut got = dense_eigen_moduli(a.to_dense(), n).unwrap();
            let dm = nalgebra::DMatrix::from_row_slice(n, n, &a.to_dense());
            let mut want: Vec<f64> = dm.complex_eigenvalues().iter().map(|z| z.norm()).collect();
            got.sort_by(f64::total_cmp);
            want.sort_by(f64::total_cmp);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-8 * want[n - 1].max(1.0), "{g} vs {w}");
            }
        }
    }

    #[test]
    fn handles_rotation_and_sign_pairs() {
        // eigenvalues ±2i: pure complex pair
        let a = SparseMatrix::from_triplets(2, &[0, 1], &[1, 0], &[2.0, -2.0]).unwrap();
        assert!((power_iteration(&a, 1).unwrap() - 2.0).abs() < 1e-8);
        // eigenvalues ±3
        let b = SparseMatrix::from_triplets(2, &[0, 1], &[1, 0], &[3.0, 3.0]).unwrap();
        assert!((power_iteration(&b, 1).unwrap() - 3.0).abs() < 1e-8);
        let z = SparseMatrix::from_triplets(3, &[], &[], &[]).unwrap();
        assert_eq!(spectral_radius(&z, 1).unwrap(), 0.0);
    }

    #[test]
    fn triplets_roundtrip_and_validation() {
        let a = random_sparse(20, 0.2, 11);
        let (r, c, v) = a.triplets();
        assert_eq!(SparseMatrix::from_triplets(20, &r, &c, &v).unwrap(), a);
        assert!(SparseMatrix::from_triplets(2, &[1, 0], &[0, 0], &[1.0, 1.0]).is_err());
        assert!(SparseMatrix::from_triplets(2, &[2], &[0], &[1.0]).is_err());
    }
}
