//! Polyharmonic kernel `Φ(x, y) = κ · r^p` or `κ · r^p · ln r`, with `p = 2m - n`.
//!
//! The log-weighted form applies when `p >= 0` and `n` is even; every other
//! combination uses the pure power. Distances are clamped below by
//! `radius_floor` so coincident points stay finite.
//!
//! Sums over many centers can be accumulated directly or in the log domain.
//! The log-domain path keeps `ln Σ Φ` finite for exponents where `r^p` alone
//! leaves the `f64` range (|p| in the thousands for 2048-d embeddings).

use serde::{Deserialize, Serialize};

use crate::cloud::EmbeddingCloud;
use crate::error::{Error, Result};

pub const DEFAULT_KAPPA: f64 = 1.0;
pub const DEFAULT_RADIUS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// `κ r^p`
    Power,
    /// `κ r^p ln r`
    LogWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SumMode {
    #[default]
    Direct,
    LogDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    /// `None` when the kernel was built from an exponent directly.
    order_m: Option<i64>,
    dim_n: usize,
    exponent_p: i32,
    branch: Branch,
    kappa: f64,
    radius_floor: f64,
}

fn branch_for(exponent_p: i32, dim_n: usize) -> Branch {
    if exponent_p >= 0 && dim_n % 2 == 0 {
        Branch::LogWeighted
    } else {
        Branch::Power
    }
}

impl KernelSpec {
    /// Kernel of order `m` in dimension `n`.
    pub fn from_order(order_m: u32, dim_n: usize) -> Result<Self> {
        if order_m == 0 {
            return Err(Error::InvalidParameter {
                name: "m",
                detail: "order must be positive".into(),
            });
        }
        check_dim(dim_n)?;
        let p = 2 * i64::from(order_m) - dim_n as i64;
        let exponent_p = i32::try_from(p).map_err(|_| Error::InvalidParameter {
            name: "m",
            detail: format!("exponent 2m - n = {p} out of range"),
        })?;
        Ok(Self {
            order_m: Some(i64::from(order_m)),
            ..Self::from_exponent(exponent_p, dim_n)?
        })
    }

    /// Kernel given the exponent `p = 2m - n` directly.
    pub fn from_exponent(exponent_p: i32, dim_n: usize) -> Result<Self> {
        check_dim(dim_n)?;
        Ok(Self {
            order_m: None,
            dim_n,
            exponent_p,
            branch: branch_for(exponent_p, dim_n),
            kappa: DEFAULT_KAPPA,
            radius_floor: DEFAULT_RADIUS_FLOOR,
        })
    }

    /// The `m = floor(n / 2)` kernel: `p = 0` (log) for even `n`, `p = -1` for odd `n`.
    pub fn half_order(dim_n: usize) -> Result<Self> {
        check_dim(dim_n)?;
        if dim_n < 2 {
            return Self::from_exponent(-1, dim_n);
        }
        Self::from_order((dim_n / 2) as u32, dim_n)
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "kappa",
                detail: format!("{kappa} must be positive and finite"),
            });
        }
        self.kappa = kappa;
        Ok(self)
    }

    pub fn with_radius_floor(mut self, floor: f64) -> Result<Self> {
        if !(floor > 0.0 && floor.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "radius_floor",
                detail: format!("{floor} must be positive and finite"),
            });
        }
        self.radius_floor = floor;
        Ok(self)
    }

    pub fn order_m(&self) -> Option<i64> {
        self.order_m
    }

    pub fn dim_n(&self) -> usize {
        self.dim_n
    }

    pub fn exponent(&self) -> i32 {
        self.exponent_p
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn radius_floor(&self) -> f64 {
        self.radius_floor
    }

    fn exponent_magnitude(&self) -> u32 {
        self.exponent_p.unsigned_abs()
    }

    /// `Φ` at the given distance. May return `±inf` or `0` when `r^p` leaves
    /// the `f64` range; [`kernel_sum`] detects both.
    pub fn eval(&self, distance: f64) -> f64 {
        let r = distance.max(self.radius_floor);
        let pow = r.powi(self.exponent_p);
        match self.branch {
            Branch::Power => self.kappa * pow,
            Branch::LogWeighted => self.kappa * pow * r.ln(),
        }
    }

    /// `ln Φ` for the power branch.
    fn ln_eval(&self, distance: f64) -> f64 {
        let r = distance.max(self.radius_floor);
        f64::from(self.exponent_p) * r.ln() + self.kappa.ln()
    }
}

fn check_dim(dim_n: usize) -> Result<()> {
    if dim_n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            detail: "dimension must be positive".into(),
        });
    }
    Ok(())
}

/// Free-function form of [`KernelSpec::eval`].
pub fn kernel_eval(spec: &KernelSpec, distance: f64) -> f64 {
    spec.eval(distance)
}

#[inline]
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Result of summing `Φ(query, c)` over a set of centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSum {
    /// The sum as an `f64`. Zero or subnormal when `collapsed` is set.
    pub value: f64,
    /// `ln |sum|`. Finite in log-domain mode even when `value` underflows.
    pub ln_abs: f64,
    /// Set when the true sum is nonzero but `value` lost it to underflow
    /// (zero or subnormal), or when some term underflowed in direct mode.
    pub collapsed: bool,
}

/// Running accumulator for `Σ Φ(query, c)`; chunks of centers can be fed in
/// any split and the result only depends on center order.
#[derive(Debug, Clone)]
pub(crate) struct KernelAccumulator<'k> {
    spec: &'k KernelSpec,
    mode: SumMode,
    sum: f64,
    // online log-sum-exp state
    max_ln: f64,
    scaled: f64,
    underflow: bool,
    overflow: bool,
}

impl<'k> KernelAccumulator<'k> {
    pub(crate) fn new(spec: &'k KernelSpec, mode: SumMode) -> Result<Self> {
        if mode == SumMode::LogDomain && spec.branch == Branch::LogWeighted {
            return Err(Error::UnsupportedMode {
                exponent: spec.exponent_p,
                dim: spec.dim_n,
            });
        }
        Ok(Self {
            spec,
            mode,
            sum: 0.0,
            max_ln: f64::NEG_INFINITY,
            scaled: 0.0,
            underflow: false,
            overflow: false,
        })
    }

    #[inline]
    pub(crate) fn push_distance(&mut self, distance: f64) {
        match self.mode {
            SumMode::Direct => {
                let v = self.spec.eval(distance);
                if !v.is_finite() {
                    self.overflow = true;
                } else if v == 0.0 || v.is_subnormal() {
                    // Power terms are strictly positive; ln-weighted terms vanish
                    // only at r = 1 exactly.
                    let r = distance.max(self.spec.radius_floor);
                    if self.spec.branch == Branch::Power || r != 1.0 {
                        self.underflow = true;
                    }
                }
                self.sum += v;
            }
            SumMode::LogDomain => {
                let l = self.spec.ln_eval(distance);
                if l > self.max_ln {
                    self.scaled = self.scaled * (self.max_ln - l).exp() + 1.0;
                    self.max_ln = l;
                } else {
                    self.scaled += (l - self.max_ln).exp();
                }
            }
        }
    }

    pub(crate) fn push_centers(&mut self, query: &[f64], centers: &[f64], dim: usize) {
        for c in centers.chunks_exact(dim) {
            self.push_distance(euclidean(query, c));
        }
    }

    pub(crate) fn finish(&self) -> Result<KernelSum> {
        let magnitude = self.spec.exponent_magnitude();
        match self.mode {
            SumMode::Direct => {
                if self.overflow || !self.sum.is_finite() {
                    return Err(Error::Overflow {
                        exponent_magnitude: magnitude,
                    });
                }
                Ok(KernelSum {
                    value: self.sum,
                    ln_abs: self.sum.abs().ln(),
                    collapsed: self.underflow || (self.sum != 0.0 && self.sum.is_subnormal()),
                })
            }
            SumMode::LogDomain => {
                if self.scaled == 0.0 {
                    return Ok(KernelSum {
                        value: 0.0,
                        ln_abs: f64::NEG_INFINITY,
                        collapsed: false,
                    });
                }
                let ln_abs = self.max_ln + self.scaled.ln();
                let value = ln_abs.exp();
                if !value.is_finite() {
                    return Err(Error::Overflow {
                        exponent_magnitude: magnitude,
                    });
                }
                Ok(KernelSum {
                    value,
                    ln_abs,
                    collapsed: value == 0.0 || value.is_subnormal(),
                })
            }
        }
    }
}

/// `Σ_c Φ(query, c)` over every row of `centers`.
pub fn kernel_sum(
    spec: &KernelSpec,
    query: &[f64],
    centers: &EmbeddingCloud,
    mode: SumMode,
) -> Result<KernelSum> {
    if query.len() != centers.dim() || centers.dim() != spec.dim_n {
        return Err(Error::Shape(format!(
            "query dim {}, centers dim {}, kernel dim {}",
            query.len(),
            centers.dim(),
            spec.dim_n
        )));
    }
    let mut acc = KernelAccumulator::new(spec, mode)?;
    acc.push_centers(query, centers.data(), centers.dim());
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn branch_case_split() {
        assert_eq!(KernelSpec::from_order(1, 3).unwrap().branch(), Branch::Power); // p = -1
        assert_eq!(KernelSpec::from_order(2, 3).unwrap().branch(), Branch::Power); // p = 1, n odd
        assert_eq!(KernelSpec::from_order(1, 2).unwrap().branch(), Branch::LogWeighted); // p = 0
        assert_eq!(KernelSpec::from_order(1, 4).unwrap().branch(), Branch::Power); // p = -2
        let k = KernelSpec::from_order(1024, 2048).unwrap();
        assert_eq!((k.exponent(), k.branch()), (0, Branch::LogWeighted));
        assert_eq!(KernelSpec::half_order(3).unwrap().exponent(), -1);
    }

    #[test]
    fn point_values() {
        let p1 = KernelSpec::from_exponent(-1, 3).unwrap();
        assert_eq!(p1.eval(2.0), 0.5);
        let log0 = KernelSpec::from_exponent(0, 2).unwrap();
        assert_eq!(log0.eval(1.0), 0.0);
        let p3 = KernelSpec::from_exponent(-3, 3).unwrap();
        assert!((p3.eval(10.0) - 0.001).abs() < 1e-18);
    }

    #[test]
    fn floor_keeps_coincident_points_finite() {
        let k = KernelSpec::from_exponent(-1, 2).unwrap();
        assert!((k.eval(0.0) / 1e12 - 1.0).abs() < 1e-12);
        let lw = KernelSpec::from_exponent(2, 2).unwrap();
        assert!(lw.eval(0.0).is_finite());
    }

    #[test]
    fn invalid_parameters() {
        assert!(KernelSpec::from_order(0, 2).is_err());
        assert!(KernelSpec::from_exponent(-1, 0).is_err());
        let k = KernelSpec::from_exponent(-1, 2).unwrap();
        assert!(k.with_kappa(0.0).is_err());
        assert!(k.with_radius_floor(-1.0).is_err());
    }

    #[test]
    fn two_center_sum() {
        let k = KernelSpec::from_exponent(-1, 2).unwrap();
        let centers = EmbeddingCloud::from_rows("c", &[vec![3., 4.], vec![0., 5.]]).unwrap();
        let s = kernel_sum(&k, &[0.0, 0.0], &centers, SumMode::Direct).unwrap();
        assert!((s.value - 0.4).abs() < 1e-15);
        let l = kernel_sum(&k, &[0.0, 0.0], &centers, SumMode::LogDomain).unwrap();
        assert!((l.value - 0.4).abs() < 1e-15);
    }

    #[test]
    fn shape_and_mode_errors() {
        let k = KernelSpec::from_exponent(-1, 2).unwrap();
        let centers = EmbeddingCloud::new("c", 3, vec![0.0; 3]).unwrap();
        assert!(matches!(kernel_sum(&k, &[0.0; 3], &centers, SumMode::Direct), Err(Error::Shape(_))));
        let lw = KernelSpec::from_exponent(0, 2).unwrap();
        let c2 = EmbeddingCloud::new("c", 2, vec![1.0; 2]).unwrap();
        assert!(matches!(
            kernel_sum(&lw, &[0.0; 2], &c2, SumMode::LogDomain),
            Err(Error::UnsupportedMode { .. })
        ));
    }

    #[test]
    fn fifty_centers_direct_vs_log() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = KernelSpec::from_exponent(-1, 5).unwrap();
        let data: Vec<f64> = (0..250).map(|_| rng.random_range(-3.0..3.0)).collect();
        let centers = EmbeddingCloud::new("c", 5, data).unwrap();
        let q = [0.1, -0.2, 0.3, 0.0, 1.0];
        let d = kernel_sum(&k, &q, &centers, SumMode::Direct).unwrap();
        let l = kernel_sum(&k, &q, &centers, SumMode::LogDomain).unwrap();
        assert!(((d.value - l.value) / d.value).abs() <= 1e-9);
        assert!(!d.collapsed && !l.collapsed);
    }

    #[test]
    fn extreme_negative_exponent() {
        // n = 2048, m = 24 gives p = -2000. At r ~ 30, r^p ~ e^-6802.
        let k = KernelSpec::from_order(24, 2048).unwrap();
        assert_eq!(k.exponent(), -2000);
        let mut q = vec![0.0; 2048];
        q[0] = 30.0;
        let centers = EmbeddingCloud::new("c", 2048, vec![0.0; 2048]).unwrap();
        let d = kernel_sum(&k, &q, &centers, SumMode::Direct).unwrap();
        assert_eq!(d.value, 0.0);
        assert!(d.collapsed);
        let l = kernel_sum(&k, &q, &centers, SumMode::LogDomain).unwrap();
        assert!(l.collapsed);
        let expected = -2000.0 * 30f64.ln();
        assert!(l.ln_abs.is_finite());
        assert!((l.ln_abs - expected).abs() < 1e-9 * expected.abs());
    }

    #[test]
    fn extreme_positive_exponent_overflows_loudly() {
        let k = KernelSpec::from_exponent(2000, 2047).unwrap();
        let centers = EmbeddingCloud::new("c", 2047, vec![0.0; 2047]).unwrap();
        let mut q = vec![0.0; 2047];
        q[0] = 30.0;
        assert!(matches!(
            kernel_sum(&k, &q, &centers, SumMode::Direct),
            Err(Error::Overflow { exponent_magnitude: 2000 })
        ));
        assert!(matches!(
            kernel_sum(&k, &q, &centers, SumMode::LogDomain),
            Err(Error::Overflow { exponent_magnitude: 2000 })
        ));
    }

    proptest! {
        #[test]
        fn depends_only_on_distance(a in prop::collection::vec(-5.0f64..5.0, 4), b in prop::collection::vec(-5.0f64..5.0, 4), p in -6i32..4) {
            let k = KernelSpec::from_exponent(p, 4).unwrap();
            // same coordinate permutation applied to both points keeps the distance
            let perm = [2usize, 0, 3, 1];
            let pa: Vec<f64> = perm.iter().map(|&i| a[i]).collect();
            let pb: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
            let v1 = k.eval(euclidean(&a, &b));
            let v2 = k.eval(euclidean(&pa, &pb));
            let v3 = k.eval(euclidean(&b, &a));
            prop_assert!((v1 - v2).abs() <= 1e-12 * v1.abs().max(1e-300));
            prop_assert_eq!(v1, v3);
        }

        #[test]
        fn power_branch_decreasing(p in -8i32..0, d in 1e-6f64..100.0, step in 1e-3f64..10.0) {
            let k = KernelSpec::from_exponent(p, 3).unwrap();
            prop_assert!(k.eval(d + step) < k.eval(d));
        }

        #[test]
        fn scale_law(p in -8i32..5, a in 0.1f64..10.0, d in 1e-3f64..10.0) {
            let k = KernelSpec::from_exponent(p, 7).unwrap();
            let lhs = k.eval(a * d);
            let rhs = a.powi(p) * k.eval(d);
            prop_assert!(((lhs - rhs) / rhs).abs() <= 1e-12);
        }
    }
}
