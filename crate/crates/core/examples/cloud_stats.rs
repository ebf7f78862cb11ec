//! Mean, covariance spectrum and σ_q of a sampled cloud.

use sidkit::stats::compute_stats;
use sidkit::synth::{sample_gmm, GaussianMixtureSpec};

fn main() {
    let spec = GaussianMixtureSpec::isotropic(vec![1.0, -2.0, 0.5], 0.25).expect("spec");
    let cloud = sample_gmm(&spec, 2000, 7).expect("samples");
    let stats = compute_stats(&cloud, true).expect("stats");

    println!("mean       {:.3?}", stats.mean.as_slice());
    println!("sigma_q    {:.4}", stats.sigma_q);
    println!("eigenvalues {:.4?}", stats.eigenvalues.as_slice());
}
