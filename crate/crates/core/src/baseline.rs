//! Baseline dataset-distance metrics: FID, KID and Laplacian sharpness.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::EmbeddingCloud;
use crate::error::{Error, Result};
use crate::sd::subsample;
use crate::stats::{mean_and_covariance, sorted_symmetric_eigen, symmetrize};

pub const FID_MAX_SAMPLES: usize = 10_000;
pub const KID_MAX_SAMPLES: usize = 5_000;
pub const KID_BLOCK: usize = 1_000;
/// Eigenvalues below `-PSD_TOLERANCE * ‖Σ‖` are an error; between that and
/// zero they are clamped.
pub const PSD_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidReport {
    pub value: f64,
    /// `‖μ_a - μ_b‖²`
    pub mean_term: f64,
    /// `Tr(Σ_a + Σ_b - 2 (Σ_a Σ_b)^{1/2})`
    pub trace_term: f64,
    pub samples_used: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsampleOptions {
    pub max_samples: usize,
    pub seed: u64,
}

fn check_pair(a: &EmbeddingCloud, b: &EmbeddingCloud) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("dims {} and {} differ", a.dim(), b.dim())));
    }
    for c in [a, b] {
        if c.count() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: c.count(),
            });
        }
    }
    Ok(())
}

/// Fréchet distance between Gaussians fitted to the two clouds (at most
/// 10 000 samples each, seed 0).
pub fn fid(a: &EmbeddingCloud, b: &EmbeddingCloud) -> Result<FidReport> {
    fid_with(
        a,
        b,
        SubsampleOptions {
            max_samples: FID_MAX_SAMPLES,
            seed: 0,
        },
    )
}

pub fn fid_with(a: &EmbeddingCloud, b: &EmbeddingCloud, opts: SubsampleOptions) -> Result<FidReport> {
    check_pair(a, b)?;
    let a = subsample(a, opts.max_samples, opts.seed)?;
    let b = subsample(b, opts.max_samples, opts.seed)?;
    let (mu_a, cov_a) = mean_and_covariance(&a)?;
    let (mu_b, cov_b) = mean_and_covariance(&b)?;
    let (mean_term, trace_term) = frechet_terms(&mu_a, &cov_a, &mu_b, &cov_b)?;
    Ok(FidReport {
        value: mean_term + trace_term,
        mean_term,
        trace_term,
        samples_used: (a.count(), b.count()),
    })
}

/// Returns `(‖μ_a - μ_b‖², Tr(Σ_a + Σ_b - 2 (Σ_a Σ_b)^{1/2}))`.
///
/// The root trace is taken as `Tr((Σ_a^{1/2} Σ_b Σ_a^{1/2})^{1/2})`, which
/// stays within symmetric eigenproblems.
pub fn frechet_terms(
    mu_a: &DVector<f64>,
    cov_a: &DMatrix<f64>,
    mu_b: &DVector<f64>,
    cov_b: &DMatrix<f64>,
) -> Result<(f64, f64)> {
    let n = mu_a.len();
    if mu_b.len() != n || cov_a.shape() != (n, n) || cov_b.shape() != (n, n) {
        return Err(Error::Shape("mean/covariance dimensions disagree".into()));
    }
    let mean_term = (mu_a - mu_b).norm_squared();
    let root_a = psd_sqrt(cov_a)?;
    let inner = symmetrize(&(&root_a * cov_b * &root_a));
    let (inner_vals, _) = sorted_symmetric_eigen(&inner)?;
    let scale = psd_scale(cov_a).max(psd_scale(cov_b)).max(inner_vals.amax());
    let root_trace: f64 = inner_vals
        .iter()
        .map(|&l| clamp_eigenvalue(l, scale).map(f64::sqrt))
        .sum::<Result<f64>>()?;
    let trace_term = cov_a.trace() + cov_b.trace() - 2.0 * root_trace;
    Ok((mean_term, trace_term))
}

fn psd_scale(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

fn clamp_eigenvalue(l: f64, scale: f64) -> Result<f64> {
    let tolerance = -PSD_TOLERANCE * scale;
    if l < tolerance {
        Err(Error::NotPsd {
            eigenvalue: l,
            tolerance,
        })
    } else {
        Ok(l.max(0.0))
    }
}

/// Symmetric square root of a PSD matrix.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sorted_symmetric_eigen(m)?;
    let scale = vals.amax();
    let roots = vals
        .iter()
        .map(|&l| clamp_eigenvalue(l, scale).map(f64::sqrt))
        .collect::<Result<Vec<_>>>()?;
    let d = DMatrix::from_diagonal(&DVector::from_vec(roots));
    Ok(symmetrize(&(&vecs * d * vecs.transpose())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KidReport {
    pub value: f64,
    pub block_count: usize,
    pub samples_used: (usize, usize),
}

/// `((1/n) xᵀy + 1)³`
#[inline]
pub fn polynomial_kernel(x: &[f64], y: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let base = dot / x.len() as f64 + 1.0;
    base * base * base
}

/// Unbiased squared MMD with the cubic polynomial kernel, over at most 5000
/// samples per cloud.
pub fn kid(a: &EmbeddingCloud, b: &EmbeddingCloud) -> Result<KidReport> {
    kid_with(
        a,
        b,
        SubsampleOptions {
            max_samples: KID_MAX_SAMPLES,
            seed: 0,
        },
        KID_BLOCK,
    )
}

pub fn kid_with(
    a: &EmbeddingCloud,
    b: &EmbeddingCloud,
    opts: SubsampleOptions,
    block: usize,
) -> Result<KidReport> {
    check_pair(a, b)?;
    if block == 0 {
        return Err(Error::InvalidParameter {
            name: "block",
            detail: "must be at least 1".into(),
        });
    }
    let a = subsample(a, opts.max_samples, opts.seed)?;
    let b = subsample(b, opts.max_samples, opts.seed)?;
    // The cross sum is accumulated in a fixed order regardless of argument
    // order, which makes kid(a, b) and kid(b, a) bitwise equal.
    let (first, second) = match canonical_cmp(&a, &b) {
        Ordering::Greater => (&b, &a),
        _ => (&a, &b),
    };
    let (s_aa, blocks_aa) = block_sum(&a, &a, block, true);
    let (s_bb, blocks_bb) = block_sum(&b, &b, block, true);
    let (s_ab, blocks_ab) = block_sum(first, second, block, false);
    let m = a.count() as f64;
    let n = b.count() as f64;
    let within = s_aa / (m * (m - 1.0)) + s_bb / (n * (n - 1.0));
    let value = within - 2.0 * s_ab / (m * n);
    Ok(KidReport {
        value,
        block_count: blocks_aa + blocks_bb + blocks_ab,
        samples_used: (a.count(), b.count()),
    })
}

fn canonical_cmp(a: &EmbeddingCloud, b: &EmbeddingCloud) -> Ordering {
    a.count()
        .cmp(&b.count())
        .then_with(|| {
            a.data()
                .iter()
                .zip(b.data())
                .map(|(x, y)| x.to_bits().cmp(&y.to_bits()))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Sum of `K(x_i, y_j)` over all pairs (skipping `i == j` when `skip_diagonal`),
/// accumulated block by block. Returns the sum and the number of blocks.
fn block_sum(x: &EmbeddingCloud, y: &EmbeddingCloud, block: usize, skip_diagonal: bool) -> (f64, usize) {
    let row_blocks: Vec<usize> = (0..x.count()).step_by(block).collect();
    let col_blocks: Vec<usize> = (0..y.count()).step_by(block).collect();
    let partials: Vec<f64> = row_blocks
        .par_iter()
        .map(|&r0| {
            let r1 = (r0 + block).min(x.count());
            let mut row_total = 0.0;
            for &c0 in &col_blocks {
                let c1 = (c0 + block).min(y.count());
                let mut s = 0.0;
                for i in r0..r1 {
                    let xi = x.row(i);
                    for j in c0..c1 {
                        if skip_diagonal && i == j {
                            continue;
                        }
                        s += polynomial_kernel(xi, y.row(j));
                    }
                }
                row_total += s;
            }
            row_total
        })
        .collect();
    (partials.iter().sum(), row_blocks.len() * col_blocks.len())
}

/// Variance of the 4-neighbour Laplacian edge map (valid convolution).
pub fn laplacian_variance(image: &DMatrix<f64>) -> Result<f64> {
    let (h, w) = image.shape();
    if h < 3 || w < 3 {
        return Err(Error::Shape(format!("image {h}x{w} is smaller than the 3x3 stencil")));
    }
    let mut edges = Vec::with_capacity((h - 2) * (w - 2));
    for i in 1..h - 1 {
        for j in 1..w - 1 {
            let v = image[(i - 1, j)] + image[(i + 1, j)] + image[(i, j - 1)] + image[(i, j + 1)]
                - 4.0 * image[(i, j)];
            edges.push(v);
        }
    }
    let n = edges.len() as f64;
    let mean = edges.iter().sum::<f64>() / n;
    Ok(edges.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n)
}

/// Mean Laplacian variance over grayscale images.
pub fn sharpness(images: &[DMatrix<f64>]) -> Result<f64> {
    if images.is_empty() {
        return Err(Error::InvalidParameter {
            name: "images",
            detail: "need at least one image".into(),
        });
    }
    let total = images
        .iter()
        .map(laplacian_variance)
        .sum::<Result<f64>>()?;
    Ok(total / images.len() as f64)
}

/// Unweighted channel mean of an `h x w x c` row-major interleaved buffer.
pub fn to_grayscale(pixels: &[f64], height: usize, width: usize, channels: usize) -> Result<DMatrix<f64>> {
    if channels == 0 || pixels.len() != height * width * channels {
        return Err(Error::Shape(format!(
            "{} values for a {height}x{width}x{channels} image",
            pixels.len()
        )));
    }
    Ok(DMatrix::from_fn(height, width, |i, j| {
        let base = (i * width + j) * channels;
        pixels[base..base + channels].iter().sum::<f64>() / channels as f64
    }))
}

/// Grayscale images stored in a cloud.
///
/// A label ending in `@{H}x{W}` means one flattened `H x W` image per row;
/// otherwise the whole cloud is a single image with one pixel row per sample.
pub fn images_from_cloud(cloud: &EmbeddingCloud) -> Result<Vec<DMatrix<f64>>> {
    match parse_shape_suffix(cloud.label()) {
        Some((h, w)) => {
            if h * w != cloud.dim() {
                return Err(Error::Shape(format!(
                    "label shape {h}x{w} does not match row length {}",
                    cloud.dim()
                )));
            }
            Ok(cloud
                .rows()
                .map(|r| DMatrix::from_row_slice(h, w, r))
                .collect())
        }
        None => Ok(vec![cloud.to_matrix()]),
    }
}

fn parse_shape_suffix(label: &str) -> Option<(usize, usize)> {
    let (_, shape) = label.rsplit_once('@')?;
    let (h, w) = shape.split_once('x')?;
    Some((h.parse().ok()?, w.parse().ok()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn one_d(label: &str, mean: f64, var: f64) -> EmbeddingCloud {
        // two points at mean ± sqrt(var/2) have unbiased variance `var`
        let h = (var / 2.0).sqrt();
        EmbeddingCloud::new(label, 1, vec![mean - h, mean + h]).unwrap()
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize, shift: f64) -> EmbeddingCloud {
        let data = (0..n * dim).map(|_| shift + rng.sample::<f64, _>(StandardNormal)).collect();
        EmbeddingCloud::new("r", dim, data).unwrap()
    }

    #[test]
    fn fid_closed_forms() {
        let r = fid(&one_d("a", 0.0, 1.0), &one_d("b", 1.0, 1.0)).unwrap();
        assert!((r.value - 1.0).abs() <= 1e-9, "{r:?}");
        let r = fid(&one_d("a", 0.0, 1.0), &one_d("b", 0.0, 4.0)).unwrap();
        assert!((r.value - 1.0).abs() <= 1e-9, "{r:?}");
        assert!(r.mean_term.abs() < 1e-15);
        assert!((r.value - (r.mean_term + r.trace_term)).abs() <= 1e-9 * r.value.abs().max(1.0));
    }

    #[test]
    fn fid_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_cloud(&mut rng, 200, 6, 0.0);
        assert!(fid(&a, &a).unwrap().value <= 1e-8);
    }

    #[test]
    fn fid_rejects_mismatch_and_tiny_clouds() {
        let a = EmbeddingCloud::new("a", 2, vec![0.0; 6]).unwrap();
        let b = EmbeddingCloud::new("b", 3, vec![0.0; 6]).unwrap();
        assert!(matches!(fid(&a, &b), Err(Error::Shape(_))));
        let c = EmbeddingCloud::new("c", 2, vec![0.0; 2]).unwrap();
        assert!(matches!(fid(&a, &c), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn non_psd_is_rejected() {
        let mu = DVector::zeros(2);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        let good = DMatrix::identity(2, 2);
        assert!(matches!(frechet_terms(&mu, &bad, &mu, &good), Err(Error::NotPsd { .. })));
        // tiny negative eigenvalue is clamped
        let nearly = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-9]);
        assert!(frechet_terms(&mu, &nearly, &mu, &good).is_ok());
    }

    #[test]
    fn kernel_spot_value() {
        assert_eq!(polynomial_kernel(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]), 8.0);
    }

    #[test]
    fn kid_self_is_nonpositive_and_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_cloud(&mut rng, 40, 3, 0.0);
        let r = kid(&a, &a).unwrap();
        let max_k = a
            .rows()
            .flat_map(|x| a.rows().map(move |y| polynomial_kernel(x, y).abs()))
            .fold(0.0, f64::max);
        assert!(r.value <= 0.0);
        assert!(r.value.abs() <= 2.0 * max_k / 39.0);
    }

    #[test]
    fn kid_is_exactly_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_cloud(&mut rng, 37, 4, 0.0);
        let b = random_cloud(&mut rng, 23, 4, 0.3);
        assert_eq!(kid(&a, &b).unwrap().value.to_bits(), kid(&b, &a).unwrap().value.to_bits());
    }

    #[test]
    fn kid_block_size_is_immaterial() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_cloud(&mut rng, 90, 4, 0.0);
        let b = random_cloud(&mut rng, 70, 4, 0.5);
        let opts = SubsampleOptions { max_samples: 5000, seed: 0 };
        let r1 = kid_with(&a, &b, opts, 1).unwrap();
        let r2 = kid_with(&a, &b, opts, 16).unwrap();
        let r3 = kid_with(&a, &b, opts, 1000).unwrap();
        assert!((r1.value - r3.value).abs() <= 1e-10);
        assert!((r2.value - r3.value).abs() <= 1e-10);
        assert_eq!(r3.block_count, 3);
    }

    #[test]
    fn sharpness_constant_ramp_and_impulse() {
        let constant = DMatrix::from_element(6, 7, 0.3);
        assert_eq!(sharpness(&[constant]).unwrap(), 0.0);
        let ramp = DMatrix::from_fn(8, 5, |i, _| i as f64 / 8.0);
        // i/8 is exact in binary, so the second difference is exactly zero
        assert_eq!(sharpness(&[ramp]).unwrap(), 0.0);

        let mut impulse = DMatrix::zeros(5, 5);
        impulse[(2, 2)] = 1.0;
        // edge map (3x3): centre -4, four edge neighbours 1, corners 0
        let edge = [0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0];
        let mean = edge.iter().sum::<f64>() / 9.0;
        let var = edge.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / 9.0;
        assert!((var - 20.0 / 9.0).abs() < 1e-15);
        assert!((sharpness(&[impulse]).unwrap() - var).abs() <= 1e-12);
    }

    #[test]
    fn sharpness_shape_errors() {
        assert!(matches!(sharpness(&[DMatrix::zeros(2, 5)]), Err(Error::Shape(_))));
        assert!(sharpness(&[]).is_err());
    }

    #[test]
    fn grayscale_and_cloud_images() {
        let rgb = [0.0, 0.3, 0.6, 1.0, 1.0, 1.0];
        let g = to_grayscale(&rgb, 1, 2, 3).unwrap();
        assert!((g[(0, 0)] - 0.3).abs() < 1e-15);
        assert_eq!(g[(0, 1)], 1.0);

        let c = EmbeddingCloud::new("digits@3x3", 9, vec![0.5; 18]).unwrap();
        let imgs = images_from_cloud(&c).unwrap();
        assert_eq!(imgs.len(), 2);
        assert_eq!(imgs[0].shape(), (3, 3));
        let single = EmbeddingCloud::new("img", 4, vec![0.0; 12]).unwrap();
        assert_eq!(images_from_cloud(&single).unwrap()[0].shape(), (3, 4));
    }
}
