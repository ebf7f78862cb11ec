//! Davis-Kahan style sinΘ bound between leading eigen-subspaces of two
//! covariance matrices, and the `min sinΘ` score over subspace sizes.
//!
//! For `1 <= r <= s <= n` and `d = s - r + 1`:
//!
//! ```text
//! sinΘ(r, s) <= 2 · min{ √d · ‖Σ_p - Σ_q‖_op, ‖Σ_p - Σ_q‖_F }
//!               / min{ λ^q_{r-1} - λ^q_r, λ^q_s - λ^q_{s+1} }
//! ```
//!
//! with `λ^q_0 = +∞`, `λ^q_{n+1} = -∞`, and the operator norm approximated by
//! `max_i |λ^p_i - λ^q_i|`. The eigen-gap comes from the target (second) cloud.

use serde::{Deserialize, Serialize};

use crate::cloud::EmbeddingCloud;
use crate::error::{Error, Result};
use crate::stats::{mean_and_covariance, sorted_symmetric_eigenvalues, CloudStats};

/// Eigen-gaps at or below this are treated as degenerate.
pub const GAP_EPS: f64 = 1e-12;
pub const MIN_DIM: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubspaceBound {
    pub s: usize,
    /// `+∞` when the target eigen-gap is degenerate.
    #[serde(with = "crate::report::f64_or_inf")]
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinThetaReport {
    #[serde(with = "crate::report::f64_or_inf")]
    pub min_value: f64,
    pub per_s: Vec<SubspaceBound>,
    pub fixed_r: usize,
    pub dim_n: usize,
    /// Subspace sizes whose bound is the infinite sentinel.
    pub degenerate_s: Vec<usize>,
}

/// Shared per-pair quantities that do not depend on `(r, s)`.
struct PairNorms<'a> {
    lambda_p: &'a [f64],
    lambda_q: &'a [f64],
    op: f64,
    fro: f64,
}

impl<'a> PairNorms<'a> {
    fn new(p: &'a CloudStats, q: &'a CloudStats) -> Result<Self> {
        if p.dim() != q.dim() {
            return Err(Error::Shape(format!("dims {} and {} differ", p.dim(), q.dim())));
        }
        if !p.has_eigen() || !q.has_eigen() {
            return Err(Error::InvalidParameter {
                name: "stats",
                detail: "eigenvalues required; compute stats with_eigen".into(),
            });
        }
        let lambda_p = p.eigenvalues.as_slice();
        let lambda_q = q.eigenvalues.as_slice();
        let op = lambda_p
            .iter()
            .zip(lambda_q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let fro = (&p.covariance - &q.covariance).norm();
        Ok(Self {
            lambda_p,
            lambda_q,
            op,
            fro,
        })
    }

    fn bound(&self, r: usize, s: usize) -> Result<f64> {
        let n = self.lambda_q.len();
        if !(1 <= r && r <= s && s <= n) {
            return Err(Error::InvalidParameter {
                name: "r,s",
                detail: format!("need 1 <= r <= s <= n, got r={r}, s={s}, n={n}"),
            });
        }
        debug_assert_eq!(self.lambda_p.len(), n);
        let d = (s - r + 1) as f64;
        let numerator = 2.0 * (d.sqrt() * self.op).min(self.fro);
        if numerator == 0.0 {
            return Ok(0.0);
        }
        // 1-based: λ_i = lambda_q[i - 1]
        let lam = |i: usize| -> f64 {
            if i == 0 {
                f64::INFINITY
            } else if i > n {
                f64::NEG_INFINITY
            } else {
                self.lambda_q[i - 1]
            }
        };
        let denominator = (lam(r - 1) - lam(r)).min(lam(s) - lam(s + 1));
        if denominator <= GAP_EPS {
            return Ok(f64::INFINITY);
        }
        Ok(numerator / denominator)
    }
}

/// sinΘ upper bound for the `r..=s` eigen-subspaces; `stats_q` is the target.
pub fn sin_theta_bound(stats_p: &CloudStats, stats_q: &CloudStats, r: usize, s: usize) -> Result<f64> {
    PairNorms::new(stats_p, stats_q)?.bound(r, s)
}

/// Largest subspace size considered: `ceil(n / 10)`.
pub fn max_subspace(dim_n: usize) -> usize {
    dim_n.div_ceil(10)
}

/// Covariance plus sorted eigenvalues, without eigenvectors.
pub fn spectral_stats(cloud: &EmbeddingCloud) -> Result<CloudStats> {
    let (mean, covariance) = mean_and_covariance(cloud)?;
    let sigma_q = covariance.diagonal().max();
    let eigenvalues = sorted_symmetric_eigenvalues(&covariance)?;
    Ok(CloudStats {
        mean,
        covariance,
        sigma_q,
        eigenvalues,
        eigenvectors: nalgebra::DMatrix::zeros(0, 0),
    })
}

/// `min_s sinΘ(1, s)` over `s = 3..=ceil(n/10)`, with `cloud_q` as the target.
pub fn min_sin_theta(cloud_p: &EmbeddingCloud, cloud_q: &EmbeddingCloud) -> Result<SinThetaReport> {
    if cloud_p.dim() != cloud_q.dim() {
        return Err(Error::Shape(format!(
            "dims {} and {} differ",
            cloud_p.dim(),
            cloud_q.dim()
        )));
    }
    let n = cloud_q.dim();
    if n < MIN_DIM {
        return Err(Error::RangeEmpty { dim: n });
    }
    let p = spectral_stats(cloud_p)?;
    let q = spectral_stats(cloud_q)?;
    min_sin_theta_from_stats(&p, &q)
}

pub fn min_sin_theta_from_stats(p: &CloudStats, q: &CloudStats) -> Result<SinThetaReport> {
    let n = q.dim();
    if n < MIN_DIM {
        return Err(Error::RangeEmpty { dim: n });
    }
    let norms = PairNorms::new(p, q)?;
    let per_s = (3..=max_subspace(n))
        .map(|s| norms.bound(1, s).map(|bound| SubspaceBound { s, bound }))
        .collect::<Result<Vec<_>>>()?;
    let min_value = per_s
        .iter()
        .map(|b| b.bound)
        .fold(f64::INFINITY, f64::min);
    let degenerate_s = per_s.iter().filter(|b| b.bound.is_infinite()).map(|b| b.s).collect();
    Ok(SinThetaReport {
        min_value,
        per_s,
        fixed_r: 1,
        dim_n: n,
        degenerate_s,
    })
}
