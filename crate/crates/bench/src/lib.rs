//! Fixtures shared by the criterion benchmarks.

use sqc_core::{generate_random, TreeInstance};

/// Random tree with edge lengths in 1..=5 and total demand rate `lambda`.
pub fn fixture(n: usize, seed: u64, lambda: f64) -> TreeInstance {
    generate_random(n, &[1.0, 2.0, 3.0, 4.0, 5.0], seed)
        .and_then(|t| t.with_total_rate(lambda))
        .expect("fixture parameters are valid")
}
