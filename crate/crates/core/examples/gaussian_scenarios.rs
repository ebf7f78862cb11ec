//! Every synthetic preset: expected SD pattern and the SD at the smallest cube.

use sidkit::kernel::KernelSpec;
use sidkit::sd::{csid, sid_sweep, SweepConfig};
use sidkit::synth::{scenario, PRESETS};

fn main() {
    let kernel = KernelSpec::from_exponent(-1, 2).expect("kernel");
    let config = SweepConfig { multiplier_stop: 20.0, ..SweepConfig::default() };
    for name in PRESETS {
        let s = scenario(name, 0).expect("preset");
        let curve = sid_sweep(&s.source, &s.target, &kernel, &config).expect("sweep");
        println!(
            "{name:<20} {:<20} sd(k=1) {:+.4}  CSID(k<=20) {:+.4}",
            s.expectation,
            curve.entries[0].sd,
            csid(&curve).value
        );
    }
}
