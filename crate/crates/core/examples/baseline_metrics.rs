//! FID, KID and sharpness on small synthetic inputs.

use nalgebra::DMatrix;
use sidkit::baseline::{fid, kid, sharpness};
use sidkit::synth::{sample_gmm, GaussianMixtureSpec};

fn main() {
    let a = sample_gmm(&GaussianMixtureSpec::isotropic(vec![0.0; 4], 1.0).expect("spec"), 800, 1).expect("a");
    let b = sample_gmm(&GaussianMixtureSpec::isotropic(vec![0.5; 4], 1.5).expect("spec"), 800, 2).expect("b");

    let f = fid(&a, &b).expect("fid");
    println!("FID {:.4} (mean term {:.4}, trace term {:.4})", f.value, f.mean_term, f.trace_term);
    println!("FID self {:.2e}", fid(&a, &a).expect("fid").value);
    println!("KID {:.5}, self {:.5}", kid(&a, &b).expect("kid").value, kid(&a, &a).expect("kid").value);

    let flat = DMatrix::from_element(8, 8, 0.5);
    let checker = DMatrix::from_fn(8, 8, |i, j| ((i + j) % 2) as f64);
    println!("sharpness flat {} checker {}", sharpness(&[flat]).expect("flat"), sharpness(&[checker]).expect("checker"));
}
