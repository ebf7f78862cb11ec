//! Seeded Gaussian-mixture samplers and the named validation scenarios.
//!
//! Every preset draws from independent ChaCha streams of one seed:
//! stream 1 samples the target, stream 2 the source, stream 3 the target
//! mixture means and stream 4 the means of an unrelated mixture.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::baseline::frechet_terms;
use crate::cloud::EmbeddingCloud;
use crate::error::{Error, Result};
use crate::sd::entry_seed;
use crate::stats::sorted_symmetric_eigen;

pub const DEFAULT_SAMPLES: usize = 500;

pub const PRESETS: [&str; 9] = [
    "fig5_far",
    "fig5_mid",
    "fig5_same",
    "fig6_tight_01",
    "fig6_tight_025",
    "fig6_wide",
    "fig7_moment_matched",
    "fig7_distinct_gmm",
    "fig7_mode_collapsed",
];

const TARGET_STREAM: u64 = 1;
const SOURCE_STREAM: u64 = 2;
const MEANS_STREAM: u64 = 3;
const DISTINCT_MEANS_STREAM: u64 = 4;

const WEIGHT_TOLERANCE: f64 = 1e-12;
const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureSpec {
    dim: usize,
    components: Vec<GaussianComponent>,
}

impl GaussianMixtureSpec {
    /// Weights must be positive and sum to one; covariances must be symmetric.
    /// Positive semi-definiteness is checked when sampling.
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        let dim = components
            .first()
            .map(|c| c.mean.len())
            .ok_or_else(|| Error::InvalidParameter {
                name: "components",
                detail: "at least one component is required".into(),
            })?;
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                detail: "must be positive".into(),
            });
        }
        let mut total = 0.0;
        for (i, c) in components.iter().enumerate() {
            if c.mean.len() != dim || c.covariance.shape() != (dim, dim) {
                return Err(Error::Shape(format!("component {i} does not have dimension {dim}")));
            }
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "weight",
                    detail: format!("component {i} has weight {}", c.weight),
                });
            }
            if c.mean.iter().chain(c.covariance.iter()).any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "component",
                    detail: format!("component {i} has non-finite parameters"),
                });
            }
            let asym = (&c.covariance - c.covariance.transpose()).amax();
            if asym > SYMMETRY_TOLERANCE * c.covariance.amax().max(1.0) {
                return Err(Error::InvalidParameter {
                    name: "covariance",
                    detail: format!("component {i} is not symmetric"),
                });
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidParameter {
                name: "weights",
                detail: format!("sum to {total}, expected 1"),
            });
        }
        Ok(Self { dim, components })
    }

    pub fn gaussian(mean: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![GaussianComponent {
            weight: 1.0,
            mean: DVector::from_vec(mean),
            covariance,
        }])
    }

    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let n = mean.len();
        Self::gaussian(mean, DMatrix::identity(n, n) * variance)
    }

    /// Equal-weight mixture with a shared isotropic covariance.
    pub fn equal_weights(means: &[Vec<f64>], variance: f64) -> Result<Self> {
        let w = 1.0 / means.len().max(1) as f64;
        Self::new(
            means
                .iter()
                .map(|m| GaussianComponent {
                    weight: w,
                    mean: DVector::from_column_slice(m),
                    covariance: DMatrix::identity(m.len(), m.len()) * variance,
                })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn mean(&self) -> DVector<f64> {
        self.components
            .iter()
            .fold(DVector::zeros(self.dim), |acc, c| acc + &c.mean * c.weight)
    }

    /// Law of total covariance.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mu = self.mean();
        self.components.iter().fold(DMatrix::zeros(self.dim, self.dim), |acc, c| {
            let d = &c.mean - &mu;
            acc + (&c.covariance + &d * d.transpose()) * c.weight
        })
    }
}

/// Lower factor `L` with `L Lᵀ = Σ`; falls back to an eigen root for singular PSD input.
fn factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = cov.clone().cholesky() {
        return Ok(ch.l());
    }
    let (vals, vecs) = sorted_symmetric_eigen(cov)?;
    let tolerance = -1e-12 * vals.amax().max(f64::MIN_POSITIVE);
    if let Some(&bad) = vals.iter().find(|&&l| l < tolerance) {
        return Err(Error::Decomposition(format!(
            "covariance is not positive semi-definite (eigenvalue {bad:e})"
        )));
    }
    let roots = DVector::from_iterator(vals.len(), vals.iter().map(|l| l.max(0.0).sqrt()));
    Ok(vecs * DMatrix::from_diagonal(&roots))
}

/// Draws `count` samples: a component by weight, then `mean + L z`.
pub fn sample_gmm(spec: &GaussianMixtureSpec, count: usize, seed: u64) -> Result<EmbeddingCloud> {
    if count == 0 {
        return Err(Error::InvalidParameter {
            name: "count",
            detail: "must be at least 1".into(),
        });
    }
    let factors = spec
        .components
        .iter()
        .map(|c| factor(&c.covariance))
        .collect::<Result<Vec<_>>>()?;
    let n = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(count * n);
    let mut z = DVector::zeros(n);
    for _ in 0..count {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = spec.components.len() - 1;
        for (i, c) in spec.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                k = i;
                break;
            }
        }
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let x = &spec.components[k].mean + &factors[k] * &z;
        data.extend(x.iter());
    }
    EmbeddingCloud::new("gmm", n, data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub source: EmbeddingCloud,
    pub target: EmbeddingCloud,
    pub source_spec: GaussianMixtureSpec,
    pub target_spec: GaussianMixtureSpec,
    /// Predicted SD pattern, e.g. `"positive-then-zero"`.
    pub expectation: String,
}

const FIG5_VARIANCE: f64 = 0.75;
const FIG5_TARGET_MEAN: f64 = 5.5;
const FIG7_COMPONENTS: usize = 8;
const FIG7_COLLAPSED: usize = 4;
const FIG7_VARIANCE: f64 = 0.02;

fn uniform_means(seed: u64, stream: u64, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect()
}

/// Means of the `FIG7_COLLAPSED`-subset whose equal-weight mixture is closest
/// to the full mixture in Fréchet distance; ties go to the lexicographically
/// first subset.
fn best_collapsed_subset(means: &[Vec<f64>], target: &GaussianMixtureSpec) -> Result<Vec<Vec<f64>>> {
    let mu_t = target.mean();
    let cov_t = target.covariance();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for subset in combinations(means.len(), FIG7_COLLAPSED) {
        let chosen: Vec<Vec<f64>> = subset.iter().map(|&i| means[i].clone()).collect();
        let spec = GaussianMixtureSpec::equal_weights(&chosen, FIG7_VARIANCE)?;
        let (m, t) = frechet_terms(&spec.mean(), &spec.covariance(), &mu_t, &cov_t)?;
        if best.as_ref().is_none_or(|(d, _)| m + t < *d) {
            best = Some((m + t, subset));
        }
    }
    let (_, subset) = best.expect("at least one subset");
    Ok(subset.into_iter().map(|i| means[i].clone()).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Builds preset `name` with [`DEFAULT_SAMPLES`] points per cloud.
pub fn scenario(name: &str, seed: u64) -> Result<Scenario> {
    scenario_with(name, seed, DEFAULT_SAMPLES)
}

pub fn scenario_with(name: &str, seed: u64, count: usize) -> Result<Scenario> {
    let fig5_target = || GaussianMixtureSpec::isotropic(vec![FIG5_TARGET_MEAN; 2], FIG5_VARIANCE);
    let fig7_target = || {
        let means = uniform_means(seed, MEANS_STREAM, FIG7_COMPONENTS, 2);
        GaussianMixtureSpec::equal_weights(&means, FIG7_VARIANCE).map(|s| (means, s))
    };

    let (source_spec, target_spec, expectation) = match name {
        "fig5_far" => (
            GaussianMixtureSpec::isotropic(vec![0.0; 2], FIG5_VARIANCE)?,
            fig5_target()?,
            "positive-then-zero",
        ),
        "fig5_mid" => (
            GaussianMixtureSpec::isotropic(vec![2.5; 2], FIG5_VARIANCE)?,
            fig5_target()?,
            "positive-then-zero",
        ),
        "fig5_same" => (fig5_target()?, fig5_target()?, "zero"),
        "fig6_tight_01" | "fig6_tight_025" | "fig6_wide" => {
            let variance = match name {
                "fig6_tight_01" => 0.1,
                "fig6_tight_025" => 0.25,
                _ => 1.0,
            };
            let tag = if variance < FIG5_VARIANCE {
                "negative-then-zero"
            } else {
                "positive-then-zero"
            };
            (
                GaussianMixtureSpec::isotropic(vec![FIG5_TARGET_MEAN; 2], variance)?,
                fig5_target()?,
                tag,
            )
        }
        "fig7_moment_matched" => {
            let (_, target) = fig7_target()?;
            let source = GaussianMixtureSpec::gaussian(target.mean().as_slice().to_vec(), target.covariance())?;
            (source, target, "negative")
        }
        "fig7_distinct_gmm" => {
            let (_, target) = fig7_target()?;
            let means = uniform_means(seed, DISTINCT_MEANS_STREAM, FIG7_COMPONENTS, 2);
            (
                GaussianMixtureSpec::equal_weights(&means, FIG7_VARIANCE)?,
                target,
                "sign-change",
            )
        }
        "fig7_mode_collapsed" => {
            let (means, target) = fig7_target()?;
            let subset = best_collapsed_subset(&means, &target)?;
            (
                GaussianMixtureSpec::equal_weights(&subset, FIG7_VARIANCE)?,
                target,
                "nonzero-sd-low-fid",
            )
        }
        _ => {
            return Err(Error::Lookup {
                kind: "preset",
                name: name.to_string(),
            })
        }
    };

    let source = sample_gmm(&source_spec, count, entry_seed(seed, SOURCE_STREAM))?
        .relabeled(format!("{name}_source"))?;
    let target = sample_gmm(&target_spec, count, entry_seed(seed, TARGET_STREAM))?
        .relabeled(format!("{name}_target"))?;
    Ok(Scenario {
        name: name.to_string(),
        seed,
        source,
        target,
        source_spec,
        target_spec,
        expectation: expectation.to_string(),
    })
}
