//! Per-cloud first and second moments, plus the sorted spectrum of the covariance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::cloud::EmbeddingCloud;
use crate::error::{Error, Result};

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone)]
pub struct CloudStats {
    pub mean: DVector<f64>,
    /// Unbiased sample covariance (divisor `N - 1`).
    pub covariance: DMatrix<f64>,
    /// Largest diagonal entry of the covariance.
    pub sigma_q: f64,
    /// Descending; empty unless requested.
    pub eigenvalues: DVector<f64>,
    /// Column `i` pairs with `eigenvalues[i]`; `0 x 0` unless requested.
    pub eigenvectors: DMatrix<f64>,
}

impl CloudStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn has_eigen(&self) -> bool {
        !self.eigenvalues.is_empty()
    }
}

/// Mean and unbiased covariance; eigen-pairs too when `with_eigen` is set.
pub fn compute_stats(cloud: &EmbeddingCloud, with_eigen: bool) -> Result<CloudStats> {
    let (mean, covariance) = mean_and_covariance(cloud)?;
    let sigma_q = covariance
        .diagonal()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let (eigenvalues, eigenvectors) = if with_eigen {
        sorted_symmetric_eigen(&covariance)?
    } else {
        (DVector::zeros(0), DMatrix::zeros(0, 0))
    };
    Ok(CloudStats {
        mean,
        covariance,
        sigma_q,
        eigenvalues,
        eigenvectors,
    })
}

pub fn mean_and_covariance(cloud: &EmbeddingCloud) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n_samples = cloud.count();
    if n_samples < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: n_samples,
        });
    }
    let x = cloud.to_matrix();
    let mean = DVector::from_iterator(
        cloud.dim(),
        x.column_iter().map(|c| c.sum() / n_samples as f64),
    );
    let mut centered = x;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let mut cov = centered.transpose() * &centered;
    cov /= (n_samples - 1) as f64;
    Ok((mean, symmetrize(&cov)))
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigen-decomposition of the symmetrized input, eigenvalues sorted descending.
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let sym = symmetrize(m);
    let eig = SymmetricEigen::try_new(sym, EIGEN_EPS, EIGEN_MAX_ITER).ok_or(
        Error::NoConvergence {
            iterations: EIGEN_MAX_ITER,
        },
    )?;
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Eigenvalues only, sorted descending. Cheaper than [`sorted_symmetric_eigen`].
pub fn sorted_symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let sym = symmetrize(m);
    let n = sym.nrows();
    let values = sym.symmetric_eigenvalues();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence { iterations: n });
    }
    let mut v: Vec<f64> = values.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(DVector::from_vec(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    #[test]
    fn two_point_covariance() {
        let c = EmbeddingCloud::from_rows("c", &[vec![0., 0.], vec![2., 0.]]).unwrap();
        let s = compute_stats(&c, false).unwrap();
        assert_eq!(s.mean.as_slice(), &[1.0, 0.0]);
        assert_eq!(s.covariance, DMatrix::from_row_slice(2, 2, &[2., 0., 0., 0.]));
        assert_eq!(s.sigma_q, 2.0);
        assert!(!s.has_eigen());
    }

    #[test]
    fn identity_like_pair_spectrum() {
        // Hand decomposition: [[.5,-.5],[-.5,.5]] = 1 * v v^T with v = (1,-1)/sqrt2, plus 0.
        let c = EmbeddingCloud::from_rows("c", &[vec![1., 0.], vec![0., 1.]]).unwrap();
        let s = compute_stats(&c, true).unwrap();
        assert_eq!(s.covariance, DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]));
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!(s.eigenvalues[1].abs() < 1e-14);
        let v = s.eigenvectors.column(0);
        assert!((v[0] + v[1]).abs() < 1e-12);
        assert!((v[0].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn sampled_sigma_q_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut data = Vec::with_capacity(1000);
        for _ in 0..500 {
            let z0: f64 = rng.sample(StandardNormal);
            let z1: f64 = rng.sample(StandardNormal);
            data.push(2.0 * z0);
            data.push(z1);
        }
        let c = EmbeddingCloud::new("g", 2, data).unwrap();
        let s = compute_stats(&c, false).unwrap();
        assert!((3.0..=5.0).contains(&s.sigma_q), "{}", s.sigma_q);
    }

    #[test]
    fn single_sample_is_rejected() {
        let c = EmbeddingCloud::new("c", 3, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            compute_stats(&c, false),
            Err(Error::InsufficientSamples { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn eigenvalues_only_matches_full() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(12, 12, |_, _| rng.random_range(-1.0..1.0));
        let m = symmetrize(&a);
        let (full, _) = sorted_symmetric_eigen(&m).unwrap();
        let only = sorted_symmetric_eigenvalues(&m).unwrap();
        assert!((full - only).amax() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn reconstruction_and_orthonormality(n in 1usize..=64, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-10.0..10.0));
            let sigma = symmetrize(&a);
            let (vals, vecs) = sorted_symmetric_eigen(&sigma).unwrap();
            for i in 1..n {
                prop_assert!(vals[i - 1] >= vals[i]);
            }
            let recon = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
            prop_assert!(max_abs(&(recon - &sigma)) <= 1e-8 * max_abs(&sigma).max(1.0));
            let gram = vecs.transpose() * &vecs;
            prop_assert!(max_abs(&(gram - DMatrix::identity(n, n))) <= 1e-8);
        }

        #[test]
        fn translation_equivariance(seed in any::<u64>(), shift in prop::collection::vec(-50.0f64..50.0, 3)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..60).map(|_| rng.sample(StandardNormal)).collect();
            let shifted: Vec<f64> = data.iter().enumerate().map(|(i, v)| v + shift[i % 3]).collect();
            let a = compute_stats(&EmbeddingCloud::new("a", 3, data).unwrap(), true).unwrap();
            let b = compute_stats(&EmbeddingCloud::new("b", 3, shifted).unwrap(), true).unwrap();
            for i in 0..3 {
                prop_assert!((b.mean[i] - a.mean[i] - shift[i]).abs() < 1e-12 * (1.0 + shift[i].abs()));
            }
            let tol = 1e-12;
            prop_assert!(max_abs(&(&b.covariance - &a.covariance)) < tol);
            prop_assert!((b.sigma_q - a.sigma_q).abs() < tol);
            prop_assert!((&b.eigenvalues - &a.eigenvalues).amax() < tol);
        }
    }
}
