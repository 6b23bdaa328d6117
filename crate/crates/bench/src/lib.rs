//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use orbitcp_core::{generate, Point, PoseBiasedVelocity, PredictorHandle, SyntheticConfig, TrajectorySample};

pub fn fixture(n: usize, seed: u64) -> (Vec<TrajectorySample>, PredictorHandle) {
    let data = generate(&SyntheticConfig {
        n_samples: n,
        seed,
        ..SyntheticConfig::default()
    })
    .expect("valid config");
    let base: PredictorHandle = Arc::new(PoseBiasedVelocity {
        horizon: 12,
        bias: Point::new(0.5, 0.0),
    });
    (data.samples, base)
}
