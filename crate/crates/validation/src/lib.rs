//! Oracles and helpers behind the acceptance suite in `tests/acceptance.rs`.

pub mod oracle;

use std::path::PathBuf;

use lanequeue::harness::{load_config, ExperimentSpec};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// A bundled scenario configuration (`s1` or `s2`).
pub fn bundled(name: &str) -> ExperimentSpec {
    load_config(config_path(&format!("{name}.cfg"))).expect("bundled configuration loads")
}

/// Sample mean, unbiased variance and count.
pub fn mean_and_variance(xs: impl IntoIterator<Item = f64>) -> (f64, f64, usize) {
    let xs: Vec<f64> = xs.into_iter().collect();
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, var, n)
}
