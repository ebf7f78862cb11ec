//! Davis-Kahan min-sinΘ between a target and two candidate sources.

use sidkit::subspace::min_sin_theta;
use sidkit::synth::{sample_gmm, GaussianMixtureSpec};

fn main() {
    let n = 40;
    let target_spec = GaussianMixtureSpec::isotropic(vec![0.0; n], 1.0).expect("spec");
    let target = sample_gmm(&target_spec, 400, 1).expect("target");
    let close = sample_gmm(&target_spec, 400, 2).expect("close");
    let wide = sample_gmm(&GaussianMixtureSpec::isotropic(vec![0.0; n], 3.0).expect("spec"), 400, 3).expect("wide");

    for (name, source) in [("same law", &close), ("3x variance", &wide)] {
        let r = min_sin_theta(source, &target).expect("bound");
        println!("{name:<12} min sinΘ bound {:.4} over s = 3..={}", r.min_value, r.per_s.last().map_or(0, |b| b.s));
    }
}
