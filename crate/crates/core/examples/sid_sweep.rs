//! SD curve of a displaced Gaussian against its target, plus CSID.
//!
//! Writes the curve CSV to the system temp directory.

use sidkit::kernel::KernelSpec;
use sidkit::sd::{csid, sid_sweep, SweepConfig};
use sidkit::synth::scenario;

fn main() {
    let s = scenario("fig5_mid", 0).expect("preset");
    let kernel = KernelSpec::from_exponent(-1, 2).expect("kernel");
    let config = SweepConfig::default();
    let curve = sid_sweep(&s.source, &s.target, &kernel, &config).expect("sweep");

    println!("sigma_q = {:.4}, {} grid points", curve.sigma_q, curve.entries.len());
    for e in curve.entries.iter().step_by(20) {
        println!("k = {:>5.1}  r = {:>7.3}  sd = {:+.5}  ± {:.5}", e.multiplier, e.side_r, e.sd, e.stderr);
    }
    println!("CSID = {:.4}", csid(&curve).value);

    let path = std::env::temp_dir().join("sidkit-fig5-mid.csv");
    curve.write_csv(&path).expect("write curve");
    println!("curve written to {}", path.display());
}
