//! Direct and log-domain kernel sums, and what happens at extreme exponents.

use sidkit::cloud::EmbeddingCloud;
use sidkit::kernel::{kernel_sum, KernelSpec, SumMode};

fn main() {
    let centers = EmbeddingCloud::from_rows("c", &[vec![3.0, 4.0], vec![0.0, 5.0]]).expect("centers");
    let coulomb = KernelSpec::from_exponent(-1, 2).expect("kernel");
    let direct = kernel_sum(&coulomb, &[0.0, 0.0], &centers, SumMode::Direct).expect("sum");
    let log = kernel_sum(&coulomb, &[0.0, 0.0], &centers, SumMode::LogDomain).expect("sum");
    println!("p = -1: direct {} log-domain {}", direct.value, log.value);

    // m = 24 in n = 2048 gives p = -2000: 30^-2000 is far below f64 range
    let n = 2048;
    let spec = KernelSpec::from_order(24, n).expect("kernel");
    let mut far = vec![0.0; n];
    far[0] = 30.0;
    let centers = EmbeddingCloud::new("far", n, far).expect("center");
    let query = vec![0.0; n];
    let direct = kernel_sum(&spec, &query, &centers, SumMode::Direct).expect("sum");
    let log = kernel_sum(&spec, &query, &centers, SumMode::LogDomain).expect("sum");
    println!("p = {}: direct value {} collapsed {}", spec.exponent(), direct.value, direct.collapsed);
    println!("p = {}: log-domain ln|sum| {:.4}", spec.exponent(), log.ln_abs);

    let grow = KernelSpec::from_exponent(2000, n).expect("kernel");
    match kernel_sum(&grow, &query, &centers, SumMode::Direct) {
        Ok(s) => println!("unexpected finite sum {}", s.value),
        Err(e) => println!("p = 2000: {e}"),
    }
}
