//! Shared fixtures for the criterion benches.

use dynlen_core::data::{generate_synthetic, BetaSpec, Dataset, SyntheticConfig};
use dynlen_core::model::{Model, ModelConfig};
use dynlen_core::Tensor;

pub use dynlen_core;

pub fn bench_model(hidden: usize) -> Model {
    let mut cfg = ModelConfig::seq2seq(4);
    cfg.hidden = hidden;
    Model::new(cfg, 7).expect("valid config")
}

/// Deterministic pseudo-random input block in [-1, 1].
pub fn bench_input(rows: usize, cols: usize, seed: u64) -> Tensor {
    let v: Vec<f64> = (0..rows * cols)
        .map(|i| (((i as u64 + 1).wrapping_mul(seed | 1) % 10_000) as f64 / 5_000.0) - 1.0)
        .collect();
    Tensor::new(vec![rows, cols], v).expect("shape consistent")
}

pub fn bench_dataset() -> Dataset {
    let cfg = SyntheticConfig {
        series: 4,
        days: 20,
        seed: 3,
        ..SyntheticConfig::default()
    };
    let panel = generate_synthetic(&cfg).expect("valid config");
    Dataset::from_panel(&panel, 78, BetaSpec::Fixed(0.14), None).expect("labelable")
}
