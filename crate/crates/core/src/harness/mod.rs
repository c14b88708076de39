//! Configuration, replicated experiments, error metrics and CSV outputs.

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{load_config, parse_config, EstimatorKind, ExperimentSpec};
pub use experiment::{run_experiment, run_replication, ExperimentResult, MaeRow, MaeTable, ReplicationResult};
pub use output::write_outputs;

use crate::sim::CycleObservation;
use crate::{Error, Result};

/// Mean absolute error between `estimates` and `truths`.
pub fn mae(estimates: &[f64], truths: &[u32]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::LengthMismatch {
            estimates: estimates.len(),
            truths: truths.len(),
        });
    }
    if estimates.is_empty() {
        return Err(Error::Empty);
    }
    let total: f64 = estimates.iter().zip(truths).map(|(e, &t)| (e - t as f64).abs()).sum();
    Ok(total / estimates.len() as f64)
}

/// Every lane estimated by the cycle's last-probe position.
pub fn baseline_m(cycle: &CycleObservation) -> [f64; 3] {
    [cycle.m as f64; 3]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0, 3.0], &[1, 2, 3]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, 2.0], &[2, 4]).unwrap(), 1.5);
        assert_eq!(mae(&[3.25, 4.25], &[3, 4]).unwrap(), 0.25);
        assert_eq!(mae(&[1.0], &[1, 2]), Err(Error::LengthMismatch { estimates: 1, truths: 2 }));
        assert_eq!(mae(&[], &[]), Err(Error::Empty));
    }

    #[test]
    fn baseline_examples() {
        let mut c = CycleObservation {
            cycle_index: 0,
            true_queues: vec![9, 7, 3],
            probe_queues: vec![1, 1, 0],
            m: 7,
            last_probe_lane: Some(1),
            x_p: 2,
            queued_probes: Vec::new(),
            probe_exits: Vec::new(),
            probe_arrivals_in_red: 2,
            carried_over: 0,
            overflow: false,
        };
        assert_eq!(baseline_m(&c), [7.0; 3]);
        c.m = 0;
        assert_eq!(baseline_m(&c), [0.0; 3]);
    }
}
