//! Reference implementations used as oracles. Each one is written the slow,
//! obvious way and shares no code with the library beyond data access.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sidkit::cloud::EmbeddingCloud;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_cloud(rng: &mut ChaCha8Rng, label: &str, count: usize, dim: usize, shift: f64, scale: f64) -> EmbeddingCloud {
    let data = (0..count * dim)
        .map(|_| shift + scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    EmbeddingCloud::new(label, dim, data).unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s.sqrt()
}

/// Power-branch polyharmonic kernel with κ = 1 and the 1e-12 floor.
pub fn phi(r: f64, p: i32) -> f64 {
    let r = if r < 1e-12 { 1e-12 } else { r };
    let mut v = 1.0;
    for _ in 0..p.unsigned_abs() {
        v *= r;
    }
    if p < 0 {
        1.0 / v
    } else {
        v
    }
}

/// Triple loop: mean over points of (mean target potential − mean source potential).
pub fn naive_sd(source: &EmbeddingCloud, target: &EmbeddingCloud, points: &[Vec<f64>], p: i32) -> f64 {
    let mut total = 0.0;
    for x in points {
        let mut q = 0.0;
        for j in 0..target.count() {
            q += phi(dist(x, target.row(j)), p);
        }
        let mut s = 0.0;
        for i in 0..source.count() {
            s += phi(dist(x, source.row(i)), p);
        }
        total += q / target.count() as f64 - s / source.count() as f64;
    }
    total / points.len() as f64
}

fn poly(x: &[f64], y: &[f64]) -> f64 {
    let mut d = 0.0;
    for i in 0..x.len() {
        d += x[i] * y[i];
    }
    (d / x.len() as f64 + 1.0).powi(3)
}

/// Unbiased MMD² with the cubic polynomial kernel, full double loops.
pub fn kid_oracle(a: &EmbeddingCloud, b: &EmbeddingCloud) -> f64 {
    let (m, n) = (a.count(), b.count());
    let mut kxx = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                kxx += poly(a.row(i), a.row(j));
            }
        }
    }
    let mut kyy = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                kyy += poly(b.row(i), b.row(j));
            }
        }
    }
    let mut kxy = 0.0;
    for i in 0..m {
        for j in 0..n {
            kxy += poly(a.row(i), b.row(j));
        }
    }
    kxx / (m * (m - 1)) as f64 + kyy / (n * (n - 1)) as f64 - 2.0 * kxy / (m * n) as f64
}

/// Principal square root by the Denman–Beavers iteration.
pub fn denman_beavers_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::identity(n, n);
    for _ in 0..100 {
        let y_inv = y.clone().try_inverse().expect("invertible iterate");
        let z_inv = z.clone().try_inverse().expect("invertible iterate");
        let y_next = (&y + z_inv) * 0.5;
        let z_next = (&z + y_inv) * 0.5;
        let delta = (&y_next - &y).norm();
        y = y_next;
        z = z_next;
        if delta < 1e-15 * y.norm() {
            break;
        }
    }
    y
}

/// Sample mean and N−1 covariance by explicit loops.
pub fn moments(c: &EmbeddingCloud) -> (Vec<f64>, DMatrix<f64>) {
    let (n, d) = (c.count(), c.dim());
    let mut mu = vec![0.0; d];
    for r in c.rows() {
        for k in 0..d {
            mu[k] += r[k];
        }
    }
    for v in &mut mu {
        *v /= n as f64;
    }
    let mut cov = DMatrix::zeros(d, d);
    for r in c.rows() {
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += (r[i] - mu[i]) * (r[j] - mu[j]);
            }
        }
    }
    (mu, cov / (n - 1) as f64)
}

/// `‖Δμ‖² + Tr(A + B − 2 (A B)^{1/2})` with the non-symmetric root.
pub fn fid_oracle(a: &EmbeddingCloud, b: &EmbeddingCloud) -> f64 {
    let (ma, ca) = moments(a);
    let (mb, cb) = moments(b);
    let mean: f64 = ma.iter().zip(&mb).map(|(x, y)| (x - y) * (x - y)).sum();
    let root = denman_beavers_sqrt(&(&ca * &cb));
    mean + ca.trace() + cb.trace() - 2.0 * root.trace()
}

/// Davis-Kahan bound from descending eigenvalue lists and covariances.
pub fn sin_theta_oracle(lp: &[f64], lq: &[f64], cp: &DMatrix<f64>, cq: &DMatrix<f64>, r: usize, s: usize) -> f64 {
    let mut op: f64 = 0.0;
    for i in 0..lp.len() {
        op = op.max((lp[i] - lq[i]).abs());
    }
    let fro = (cp - cq).norm();
    let d = (s - r + 1) as f64;
    let num = 2.0 * f64::min(d.sqrt() * op, fro);
    if num == 0.0 {
        return 0.0;
    }
    let upper = if r == 1 { f64::INFINITY } else { lq[r - 2] - lq[r - 1] };
    let lower = if s == lq.len() { f64::INFINITY } else { lq[s - 1] - lq[s] };
    let gap = upper.min(lower);
    if gap <= 1e-12 {
        f64::INFINITY
    } else {
        num / gap
    }
}
