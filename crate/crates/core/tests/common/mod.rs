#![allow(dead_code)]

use std::path::PathBuf;

use lanequeue::assignment::{JunctionTopology, TurnRatios};
use lanequeue::harness::{load_config, ExperimentSpec};
use lanequeue::sim::{ScenarioConfig, SignalTiming};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// A bundled scenario configuration (`s1` or `s2`).
pub fn bundled(name: &str) -> ExperimentSpec {
    load_config(config_path(&format!("{name}.cfg"))).expect("bundled configuration loads")
}

/// Three-lane turning layout with the given ratios and timings.
pub fn scenario(rho: &[f64], lambda: f64, p: f64, green_s: f64, horizon_s: f64, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        topology: JunctionTopology::turning_lanes(3).unwrap(),
        rho: TurnRatios::new(rho.to_vec()).unwrap(),
        lambda,
        p,
        q_sat: 0.5,
        timing: SignalTiming::new(60.0, green_s).unwrap(),
        horizon_s,
        seed,
    }
}

pub fn mean_and_variance(xs: impl IntoIterator<Item = f64>) -> (f64, f64, usize) {
    let xs: Vec<f64> = xs.into_iter().collect();
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, var, n)
}
