//! Principal component analysis of flattened deformation fields.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::Real;
use crate::error::{Error, Result};

/// Mean-centered top-k principal directions.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    pub mean: Vec<f64>,
    /// Orthonormal, ordered by decreasing variance.
    pub components: Vec<Vec<f64>>,
    /// Sample variance (`1 / (n - 1)`) along each component.
    pub variances: Vec<f64>,
}

impl PcaBasis {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Coefficients of `x - mean` along each component.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(x.iter().zip(&self.mean)).map(|(u, (a, m))| u * (a - m)).sum())
            .collect()
    }

    /// `mean + sum_i coeffs[i] * component_i`, using the first
    /// `coeffs.len()` components.
    pub fn reconstruct(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, u) in coeffs.iter().zip(&self.components) {
            for (o, ui) in out.iter_mut().zip(u) {
                *o += c * ui;
            }
        }
        out
    }

    /// Largest `|<u_i, u_j> - delta_ij|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.components.iter().enumerate() {
            for (j, b) in self.components.iter().enumerate().skip(i) {
                let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                worst = worst.max((d - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }
}

/// Fits `k` components to `samples` (each of equal length). Directions with
/// no variance are completed deterministically so `k` components are always
/// returned. Each component's largest-magnitude entry is positive.
pub fn fit_pca(samples: &[Vec<f64>], k: usize) -> Result<PcaBasis> {
    let n = samples.len();
    if k == 0 {
        return Err(Error::InvalidArgument("PCA needs k >= 1".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("PCA with k = {k} needs at least {k} samples, got {n}")));
    }
    let d = samples[0].len();
    if d == 0 || samples.iter().any(|s| s.len() != d) {
        return Err(Error::Shape("PCA samples must be nonempty and of equal length".into()));
    }
    if k > d {
        return Err(Error::InvalidArgument(format!("PCA with k = {k} exceeds the dimension {d}")));
    }
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    // centered, row-major n x d
    let mut x = Vec::with_capacity(n * d);
    for s in samples {
        x.extend(s.iter().zip(&mean).map(|(a, m)| a - m));
    }

    let (vals, dirs) = if n <= d {
        // Gram route: eigenvectors v of X X^T give components X^T v / sqrt(l).
        let mut gram = vec![0.0; n * n];
        f64::gemm(n, d, n, &x, d as isize, 1, &x, 1, d as isize, 0.0, &mut gram);
        let (vals, vecs) = top_eigen(&gram, n, k);
        let dirs: Vec<Vec<f64>> = vals
            .iter()
            .zip(&vecs)
            .map(|(&l, v)| {
                let mut u = vec![0.0; d];
                for (i, &vi) in v.iter().enumerate() {
                    for (uj, xj) in u.iter_mut().zip(&x[i * d..(i + 1) * d]) {
                        *uj += vi * xj;
                    }
                }
                let norm = u.iter().map(|a| a * a).sum::<f64>().sqrt();
                if l > 0.0 && norm > 0.0 {
                    u.iter_mut().for_each(|a| *a /= norm);
                }
                u
            })
            .collect();
        (vals, dirs)
    } else {
        let mut cov = vec![0.0; d * d];
        f64::gemm(d, n, d, &x, 1, d as isize, &x, d as isize, 1, 0.0, &mut cov);
        top_eigen(&cov, d, k)
    };

    let lmax = vals.first().copied().unwrap_or(0.0).max(0.0);
    let tol = 1e-12 * lmax.max(f64::MIN_POSITIVE);
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for (l, u) in vals.into_iter().zip(dirs) {
        if l > tol {
            components.push(u);
            variances.push(l / denom);
        }
    }
    // complete null directions from the canonical basis
    let mut e = 0;
    while components.len() < k && e < d {
        let mut u = vec![0.0; d];
        u[e] = 1.0;
        e += 1;
        for _ in 0..2 {
            for c in &components {
                let dot: f64 = c.iter().zip(&u).map(|(a, b)| a * b).sum();
                u.iter_mut().zip(c).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            u.iter_mut().for_each(|a| *a /= norm);
            components.push(u);
            variances.push(0.0);
        }
    }
    for u in &mut components {
        let big = u.iter().copied().fold(0.0_f64, |acc, a| if a.abs() > acc.abs() { a } else { acc });
        if big < 0.0 {
            u.iter_mut().for_each(|a| *a = -*a);
        }
    }
    Ok(PcaBasis {
        mean,
        components,
        variances,
    })
}

/// Largest `k` eigenpairs of a symmetric `m x m` row-major matrix, in
/// decreasing order. Small problems use a dense solver, larger ones
/// subspace iteration with a final Rayleigh-Ritz step.
fn top_eigen(a: &[f64], m: usize, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    const DENSE_LIMIT: usize = 600;
    if m <= DENSE_LIMIT {
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(m, m, a));
        return sorted_pairs(&eig.eigenvalues.as_slice().to_vec(), &eig.eigenvectors, k);
    }
    let p = (k + 16).min(m);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    // Q is m x p, row-major
    let mut q: Vec<f64> = (0..m * p).map(|_| StandardNormal.sample(&mut rng)).collect();
    orthonormalize_cols(&mut q, m, p);
    let mut prev: Vec<f64> = Vec::new();
    let mut z = vec![0.0; m * p];
    for it in 0..300 {
        f64::gemm(m, m, p, a, m as isize, 1, &q, p as isize, 1, 0.0, &mut z);
        std::mem::swap(&mut q, &mut z);
        orthonormalize_cols(&mut q, m, p);
        if it % 5 == 4 {
            let ritz = ritz_values(a, &q, m, p);
            let done = prev.len() == ritz.len()
                && ritz.iter().zip(&prev).take(k).all(|(r, s)| (r - s).abs() <= 1e-10 * r.abs().max(1e-300));
            prev = ritz;
            if done {
                break;
            }
        }
    }
    // Rayleigh-Ritz: H = Q^T A Q
    let mut aq = vec![0.0; m * p];
    f64::gemm(m, m, p, a, m as isize, 1, &q, p as isize, 1, 0.0, &mut aq);
    let mut h = vec![0.0; p * p];
    f64::gemm(p, m, p, &q, 1, p as isize, &aq, p as isize, 1, 0.0, &mut h);
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(p, p, &h));
    let (vals, small) = sorted_pairs(&eig.eigenvalues.as_slice().to_vec(), &eig.eigenvectors, k);
    let vecs = small
        .iter()
        .map(|w| (0..m).map(|r| (0..p).map(|c| q[r * p + c] * w[c]).sum()).collect())
        .collect();
    (vals, vecs)
}

fn sorted_pairs(vals: &[f64], vecs: &DMatrix<f64>, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]).then(i.cmp(&j)));
    order.truncate(k);
    let v = order.iter().map(|&i| vals[i]).collect();
    let u = order.iter().map(|&i| vecs.column(i).iter().copied().collect()).collect();
    (v, u)
}

fn ritz_values(a: &[f64], q: &[f64], m: usize, p: usize) -> Vec<f64> {
    let mut aq = vec![0.0; m * p];
    f64::gemm(m, m, p, a, m as isize, 1, q, p as isize, 1, 0.0, &mut aq);
    let mut h = vec![0.0; p * p];
    f64::gemm(p, m, p, q, 1, p as isize, &aq, p as isize, 1, 0.0, &mut h);
    let mut v = SymmetricEigen::new(DMatrix::from_row_slice(p, p, &h)).eigenvalues.as_slice().to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Modified Gram-Schmidt on the columns of a row-major `m x p` matrix.
fn orthonormalize_cols(q: &mut [f64], m: usize, p: usize) {
    for c in 0..p {
        for _ in 0..2 {
            for prev in 0..c {
                let dot: f64 = (0..m).map(|r| q[r * p + c] * q[r * p + prev]).sum();
                for r in 0..m {
                    q[r * p + c] -= dot * q[r * p + prev];
                }
            }
        }
        let norm = (0..m).map(|r| q[r * p + c].powi(2)).sum::<f64>().sqrt();
        if norm > 0.0 {
            for r in 0..m {
                q[r * p + c] /= norm;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_samples(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // anisotropic so the spectrum is well separated
        (0..n)
            .map(|_| (0..d).map(|j| rng.random_range(-1.0..1.0) * (1.0 + j as f64).powf(-0.7) * 10.0).collect())
            .collect()
    }

    #[test]
    fn rank_one_data() {
        let d = 12;
        let u: Vec<f64> = (0..d).map(|j| (j as f64 - 3.0) / 22.4944438).collect();
        let norm = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        let u: Vec<f64> = u.iter().map(|a| a / norm).collect();
        let mean: Vec<f64> = (0..d).map(|j| j as f64 * 0.5).collect();
        let samples: Vec<Vec<f64>> = [-2.0, -0.5, 0.3, 1.1, 4.0]
            .iter()
            .map(|a| mean.iter().zip(&u).map(|(m, ui)| m + a * ui).collect())
            .collect();
        let b = fit_pca(&samples, 3).unwrap();
        assert!(b.variances[0] > 1.0);
        assert_eq!(&b.variances[1..], &[0.0, 0.0]);
        let dot: f64 = b.components[0].iter().zip(&u).map(|(a, c)| a * c).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-12);
        assert!(b.orthonormality_error() < 1e-12);
    }

    #[test]
    fn matches_dense_covariance_eigendecomposition() {
        // Oracle: eigen-decompose the d x d sample covariance directly.
        let (n, d) = (20, 9);
        let samples = random_samples(n, d, 3);
        let b = fit_pca(&samples, 5).unwrap();
        let mut cov = DMatrix::<f64>::zeros(d, d);
        let mean: Vec<f64> = (0..d).map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / n as f64).collect();
        for s in &samples {
            for i in 0..d {
                for j in 0..d {
                    cov[(i, j)] += (s[i] - mean[i]) * (s[j] - mean[j]) / (n - 1) as f64;
                }
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        for (c, &i) in idx.iter().take(5).enumerate() {
            assert!((b.variances[c] - eig.eigenvalues[i]).abs() < 1e-6 * eig.eigenvalues[i]);
            let dot: f64 = b.components[c].iter().zip(eig.eigenvectors.column(i).iter()).map(|(a, e)| a * e).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-6);
        }
        // reconstructions agree too
        for s in &samples {
            let ours = b.reconstruct(&b.project(s));
            let mut theirs = mean.clone();
            for &i in idx.iter().take(5) {
                let col = eig.eigenvectors.column(i);
                let c: f64 = col.iter().zip(s.iter().zip(&mean)).map(|(e, (x, m))| e * (x - m)).sum();
                theirs.iter_mut().zip(col.iter()).for_each(|(t, e)| *t += c * e);
            }
            for (a, b) in ours.iter().zip(&theirs) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn full_rank_reconstruction() {
        let samples = random_samples(8, 30, 5);
        let b = fit_pca(&samples, 7).unwrap();
        for s in &samples {
            let r = b.reconstruct(&b.project(s));
            assert!(r.iter().zip(s).all(|(a, c)| (a - c).abs() < 1e-5));
        }
    }

    #[test]
    fn error_nonincreasing_in_k() {
        let samples = random_samples(15, 10, 7);
        let mut last = f64::INFINITY;
        for k in 1..=10 {
            let b = fit_pca(&samples, k).unwrap();
            let err: f64 = samples
                .iter()
                .map(|s| b.reconstruct(&b.project(s)).iter().zip(s).map(|(a, c)| (a - c).powi(2)).sum::<f64>())
                .sum();
            assert!(err <= last + 1e-9);
            last = err;
        }
    }

    #[test]
    fn sign_convention_and_order() {
        let b = fit_pca(&random_samples(25, 6, 9), 6).unwrap();
        for u in &b.components {
            let big = u.iter().copied().fold(0.0_f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(big > 0.0);
        }
        assert!(b.variances.windows(2).all(|w| w[0] >= w[1]));
        assert!(b.orthonormality_error() < 1e-9);
    }

    #[test]
    fn too_few_samples() {
        assert!(fit_pca(&random_samples(3, 10, 1), 4).is_err());
        assert!(fit_pca(&random_samples(3, 10, 1), 0).is_err());
    }

    #[test]
    fn subspace_iteration_agrees_with_dense() {
        // 700 samples takes the iterative route on the Gram matrix.
        let (n, d) = (700, 900);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let basis: Vec<Vec<f64>> = (0..8).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let samples: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let w: Vec<f64> = (0..8).map(|i| rng.random_range(-1.0..1.0) * (8 - i) as f64).collect();
                (0..d)
                    .map(|j| (0..8).map(|i| w[i] * basis[i][j]).sum::<f64>() + rng.random_range(-0.01..0.01))
                    .collect()
            })
            .collect();
        let b = fit_pca(&samples, 6).unwrap();
        let dense = fit_pca(&samples[..600], 6).unwrap();
        assert!(b.orthonormality_error() < 1e-9);
        // the leading subspace is the planted one in both fits
        for u in &b.components[..6] {
            let along: f64 = dense.components.iter().map(|v| u.iter().zip(v).map(|(a, c)| a * c).sum::<f64>().powi(2)).sum();
            assert!(along > 0.99, "{along}");
        }
    }
}
