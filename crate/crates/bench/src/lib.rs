//! Benchmark fixtures.

use std::f64::consts::SQRT_2;

use vmfe_core::experiment::random_truth;
use vmfe_core::{seeded_rng, GeneratorKind, SampleMatrix, VmfEllipticalParams};

/// Seeded random truth and `n` draws from it.
pub fn fixture(m: usize, n: usize, kind: GeneratorKind) -> (VmfEllipticalParams, SampleMatrix) {
    let mut rng = seeded_rng(0xBE7C);
    let truth = random_truth(m, 6.0 * SQRT_2, kind, 4.0, &mut rng).expect("valid fixture");
    let data = truth.sample(n, &mut rng);
    (truth, data)
}
