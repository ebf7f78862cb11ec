//! A source that covers half the target's modes: FID barely notices, SD does.

use sidkit::baseline::fid;
use sidkit::kernel::KernelSpec;
use sidkit::sd::{csid, sid_sweep, SweepConfig};
use sidkit::synth::scenario;

fn main() {
    let kernel = KernelSpec::from_exponent(-1, 2).expect("kernel");
    let config = SweepConfig::default();
    for seed in 0..3 {
        let collapsed = scenario("fig7_mode_collapsed", seed).expect("preset");
        let distinct = scenario("fig7_distinct_gmm", seed).expect("preset");
        let target = &collapsed.target;
        let c = csid(&sid_sweep(&collapsed.source, target, &kernel, &config).expect("sweep")).value;
        let d = csid(&sid_sweep(&distinct.source, target, &kernel, &config).expect("sweep")).value;
        println!(
            "seed {seed}: collapsed FID {:.4} CSID {:+.3} | distinct FID {:.4} CSID {:+.3}",
            fid(&collapsed.source, target).expect("fid").value,
            c,
            fid(&distinct.source, target).expect("fid").value,
            d
        );
    }
}
