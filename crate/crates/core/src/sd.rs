//! Signed distance between two point clouds, its hypercube sweep, and CSID.
//!
//! For a source cloud `{c̃_i}` (N_p points), a target cloud `{c_j}` (N_q
//! points) and test points `x_ℓ` drawn uniformly in a hypercube around the
//! target mean:
//!
//! ```text
//! SD = 1/M Σ_ℓ [ 1/N_q Σ_j Φ(x_ℓ, c_j) - 1/N_p Σ_i Φ(x_ℓ, c̃_i) ]
//! ```
//!
//! Positive values mean the source is more spread out than the target with
//! respect to the cube, negative values mean it is more concentrated.
//!
//! The sweep evaluates SD over cubes of side `k · σ_q` (σ_q the largest
//! diagonal entry of the target covariance) and CSID is the sum over the
//! sweep. Every grid entry owns an RNG stream derived from `(seed, index)`,
//! so a curve is bitwise reproducible whatever the thread count or batch size.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::EmbeddingCloud;
use crate::error::{Error, Result};
use crate::kernel::{euclidean, KernelAccumulator, KernelSpec, SumMode};
use crate::stats::mean_and_covariance;

const SUBSAMPLE_STREAM: u64 = u64::MAX;

/// Axis-aligned cube with full side length `side`: coordinate `i` spans
/// `center[i] ± side / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypercubeSpec {
    center: Vec<f64>,
    side: f64,
}

impl HypercubeSpec {
    pub fn new(center: Vec<f64>, side: f64) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "side",
                detail: format!("{side} must be positive and finite"),
            });
        }
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "center",
                detail: "must be a non-empty finite vector".into(),
            });
        }
        Ok(Self { center, side })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

fn fill_hypercube<R: Rng>(cube: &HypercubeSpec, count: usize, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(count * cube.dim());
    for _ in 0..count {
        for &c in &cube.center {
            let u: f64 = rng.random();
            out.push(c + cube.side * (u - 0.5));
        }
    }
    out
}

/// `count` points uniform in `cube`, deterministic in `seed`.
pub fn sample_hypercube(cube: &HypercubeSpec, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fill_hypercube(cube, count, &mut rng)
        .chunks_exact(cube.dim())
        .map(<[f64]>::to_vec)
        .collect()
}

/// A signed-distance estimate with its Monte-Carlo standard error over test points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdEstimate {
    pub sd: f64,
    pub stderr: f64,
}

fn check_dims(source: &EmbeddingCloud, target: &EmbeddingCloud, kernel: &KernelSpec) -> Result<()> {
    if source.dim() != target.dim() || target.dim() != kernel.dim_n() {
        return Err(Error::Shape(format!(
            "source dim {}, target dim {}, kernel dim {}",
            source.dim(),
            target.dim(),
            kernel.dim_n()
        )));
    }
    Ok(())
}

/// Mean of `Φ(x, c)` over the centers, fed in batches of `batch` rows.
fn mean_potential(
    kernel: &KernelSpec,
    x: &[f64],
    centers: &EmbeddingCloud,
    batch: usize,
) -> Result<f64> {
    let dim = centers.dim();
    let mut acc = KernelAccumulator::new(kernel, SumMode::Direct)?;
    for chunk in centers.data().chunks(batch * dim) {
        acc.push_centers(x, chunk, dim);
    }
    let sum = acc.finish()?;
    if sum.collapsed {
        return Err(Error::Underflow {
            exponent_magnitude: kernel.exponent().unsigned_abs(),
        });
    }
    Ok(sum.value / centers.count() as f64)
}

/// Per-test-point terms `1/N_q Σ Φ(x, c_j) - 1/N_p Σ Φ(x, c̃_i)`, in point order.
fn point_terms(
    source: &EmbeddingCloud,
    target: &EmbeddingCloud,
    kernel: &KernelSpec,
    points: &[f64],
    batch: usize,
) -> Result<Vec<f64>> {
    // Identical clouds give bitwise identical potentials; compute one.
    let same = source.data() == target.data();
    points
        .par_chunks_exact(kernel.dim_n())
        .map(|x| {
            let q = mean_potential(kernel, x, target, batch)?;
            let p = if same { q } else { mean_potential(kernel, x, source, batch)? };
            Ok(q - p)
        })
        .collect()
}

fn summarize(terms: &[f64]) -> SdEstimate {
    let m = terms.len() as f64;
    let sd = terms.iter().sum::<f64>() / m;
    let stderr = if terms.len() > 1 {
        let var = terms.iter().map(|t| (t - sd) * (t - sd)).sum::<f64>() / (m - 1.0);
        (var / m).sqrt()
    } else {
        0.0
    };
    SdEstimate { sd, stderr }
}

fn signed_distance_batched(
    source: &EmbeddingCloud,
    target: &EmbeddingCloud,
    kernel: &KernelSpec,
    cube: &HypercubeSpec,
    test_points: usize,
    seed: u64,
    batch: usize,
) -> Result<SdEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = fill_hypercube(cube, test_points, &mut rng);
    let terms = point_terms(source, target, kernel, &points, batch)?;
    Ok(summarize(&terms))
}

/// SD of `source` from `target` over `test_points` uniform draws in `cube`.
pub fn signed_distance(
    source: &EmbeddingCloud,
    target: &EmbeddingCloud,
    kernel: &KernelSpec,
    cube: &HypercubeSpec,
    test_points: usize,
    seed: u64,
) -> Result<SdEstimate> {
    check_dims(source, target, kernel)?;
    if cube.dim() != kernel.dim_n() {
        return Err(Error::Shape(format!(
            "cube dim {}, kernel dim {}",
            cube.dim(),
            kernel.dim_n()
        )));
    }
    if test_points == 0 {
        return Err(Error::InvalidParameter {
            name: "test_points",
            detail: "must be at least 1".into(),
        });
    }
    let whole = source.count().max(target.count());
    signed_distance_batched(source, target, kernel, cube, test_points, seed, whole)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub multiplier_start: f64,
    pub multiplier_stop: f64,
    pub multiplier_step: f64,
    /// Test points per cube (M_x).
    pub test_points_per_r: usize,
    /// Centers per accumulation batch (N_B).
    pub batch_size: usize,
    pub max_samples_per_cloud: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            multiplier_start: 1.0,
            multiplier_stop: 100.0,
            multiplier_step: 0.5,
            test_points_per_r: 128,
            batch_size: 100,
            max_samples_per_cloud: 5000,
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, detail: String| Err(Error::InvalidParameter { name, detail });
        if !(self.multiplier_start.is_finite() && self.multiplier_stop.is_finite()) {
            return bad("multiplier", "start and stop must be finite".into());
        }
        if self.multiplier_start > self.multiplier_stop {
            return bad(
                "multiplier_start",
                format!("{} > stop {}", self.multiplier_start, self.multiplier_stop),
            );
        }
        if !(self.multiplier_step > 0.0 && self.multiplier_step.is_finite()) {
            return bad("multiplier_step", format!("{} must be positive", self.multiplier_step));
        }
        if self.multiplier_start <= 0.0 {
            return bad(
                "multiplier_start",
                format!("{} must be positive (a zero cube is a point)", self.multiplier_start),
            );
        }
        if self.test_points_per_r == 0 || self.batch_size == 0 || self.max_samples_per_cloud == 0 {
            return bad("counts", "test points, batch size and sample cap must be >= 1".into());
        }
        Ok(())
    }

    /// Cube-side multipliers `start, start + step, …` up to `stop` inclusive.
    pub fn multipliers(&self) -> Vec<f64> {
        let span = (self.multiplier_stop - self.multiplier_start) / self.multiplier_step;
        let n = (span + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|i| self.multiplier_start + i as f64 * self.multiplier_step)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidEntry {
    pub multiplier: f64,
    pub side_r: f64,
    pub sd: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidCurve {
    pub entries: Vec<SidEntry>,
    pub kernel: KernelSpec,
    pub config: SweepConfig,
    pub source_label: String,
    pub target_label: String,
    pub sigma_q: f64,
    /// Samples actually used from (source, target) after capping.
    pub samples_used: (usize, usize),
}

pub const CURVE_CSV_HEADER: &str = "multiplier,side_r,sd,stderr";

impl SidCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(32 * (self.entries.len() + 1));
        s.push_str(CURVE_CSV_HEADER);
        s.push('\n');
        for e in &self.entries {
            let _ = writeln!(s, "{},{},{},{}", e.multiplier, e.side_r, e.sd, e.stderr);
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn sd_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.sd)
    }
}

/// Derives the RNG seed of grid entry `index` from the sweep seed.
///
/// ChaCha streams are counter-based, so this is a pure function of its inputs.
pub fn entry_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// Keeps the first `cap` rows after a shuffle seeded by `(seed, count)`.
///
/// Two clouds of equal size get the same permutation, so a cloud compared
/// with itself is subsampled identically on both sides.
pub fn subsample(cloud: &EmbeddingCloud, cap: usize, seed: u64) -> Result<EmbeddingCloud> {
    if cloud.count() <= cap {
        return Ok(cloud.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SUBSAMPLE_STREAM);
    let mut idx: Vec<usize> = (0..cloud.count()).collect();
    idx.shuffle(&mut rng);
    idx.truncate(cap);
    cloud.select_rows(&idx)
}

/// SD of `source` from `target` over the configured cube-side grid.
pub fn sid_sweep(
    source: &EmbeddingCloud,
    target: &EmbeddingCloud,
    kernel: &KernelSpec,
    config: &SweepConfig,
) -> Result<SidCurve> {
    config.validate()?;
    check_dims(source, target, kernel)?;
    let source = subsample(source, config.max_samples_per_cloud, config.seed)?;
    let target = subsample(target, config.max_samples_per_cloud, config.seed)?;

    let (mean, cov) = mean_and_covariance(&target)?;
    let sigma_q = cov.diagonal().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(sigma_q > 0.0 && sigma_q.is_finite()) {
        return Err(Error::DegenerateTarget { sigma_q });
    }
    let center: Vec<f64> = mean.iter().copied().collect();

    let entries = config
        .multipliers()
        .into_par_iter()
        .enumerate()
        .map(|(i, k)| {
            let side_r = k * sigma_q;
            let cube = HypercubeSpec::new(center.clone(), side_r)?;
            let est = signed_distance_batched(
                &source,
                &target,
                kernel,
                &cube,
                config.test_points_per_r,
                entry_seed(config.seed, i as u64),
                config.batch_size,
            )?;
            Ok(SidEntry {
                multiplier: k,
                side_r,
                sd: est.sd,
                stderr: est.stderr,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SidCurve {
        entries,
        kernel: *kernel,
        config: config.clone(),
        source_label: source.label().to_string(),
        target_label: target.label().to_string(),
        sigma_q,
        samples_used: (source.count(), target.count()),
    })
}

/// Cumulative signed distance: the sum of a curve's SD values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsidValue {
    pub value: f64,
    pub source_label: String,
    pub target_label: String,
    pub entries: usize,
}

pub fn csid(curve: &SidCurve) -> CsidValue {
    CsidValue {
        value: curve.sd_values().sum(),
        source_label: curve.source_label.clone(),
        target_label: curve.target_label.clone(),
        entries: curve.entries.len(),
    }
}

/// Direct triple loop, used as a reference in tests.
#[doc(hidden)]
pub fn naive_signed_distance(
    source: &EmbeddingCloud,
    target: &EmbeddingCloud,
    kernel: &KernelSpec,
    points: &[Vec<f64>],
) -> f64 {
    let mut total = 0.0;
    for x in points {
        let mut q = 0.0;
        for c in target.rows() {
            q += kernel.eval(euclidean(x, c));
        }
        let mut p = 0.0;
        for c in source.rows() {
            p += kernel.eval(euclidean(x, c));
        }
        total += q / target.count() as f64 - p / source.count() as f64;
    }
    total / points.len() as f64
}
