//! Roads with more than three lanes, handled as overlapping virtual
//! three-lane roads whose per-lane estimates are averaged.

use std::collections::BTreeMap;

use crate::estimators::{probe_counts_e0, probe_counts_e1, ProbeCountEstimate};
use crate::pipeline::{estimate_queues, EstimationContext, QueueEstimator, WindowInput};
use crate::sim::CycleObservation;
use crate::{Error, Result};

/// Three adjacent lanes `(i, i + 1, i + 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VirtualWindow {
    pub lanes: [usize; 3],
}

impl VirtualWindow {
    pub fn starting_at(first: usize) -> Self {
        Self {
            lanes: [first, first + 1, first + 2],
        }
    }

    pub fn first(&self) -> usize {
        self.lanes[0]
    }
}

/// All `n - 2` windows of an `n`-lane road, left to right.
pub fn enumerate_windows(n: usize) -> Result<Vec<VirtualWindow>> {
    if n < 3 {
        return Err(Error::TooFewLanes(n));
    }
    Ok((0..n - 2).map(VirtualWindow::starting_at).collect())
}

/// Per-lane averages over the windows covering each lane.
#[derive(Debug, Clone, PartialEq)]
pub struct NLaneEstimate {
    pub per_lane: Vec<f64>,
    pub contributing_windows: Vec<usize>,
}

/// Averages window triples, keyed by each window's first lane.
pub fn estimate_nlane(window_estimates: &BTreeMap<usize, [f64; 3]>, n: usize) -> Result<NLaneEstimate> {
    let windows = enumerate_windows(n)?;
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for w in &windows {
        let triple = window_estimates.get(&w.first()).ok_or(Error::MissingWindow(w.first()))?;
        for (k, &lane) in w.lanes.iter().enumerate() {
            sums[lane] += triple[k];
            counts[lane] += 1;
        }
    }
    let per_lane = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    Ok(NLaneEstimate {
        per_lane,
        contributing_windows: counts,
    })
}

/// All estimates for one cycle of an `n`-lane road.
#[derive(Debug, Clone, PartialEq)]
pub struct NLaneCycleEstimate {
    pub e0: ProbeCountEstimate,
    pub e1: ProbeCountEstimate,
    /// One entry per [`QueueEstimator::ALL`] member, in that order.
    pub queues: Vec<NLaneEstimate>,
    pub fallbacks: u32,
}

impl NLaneCycleEstimate {
    pub fn get(&self, estimator: QueueEstimator) -> &NLaneEstimate {
        let k = QueueEstimator::ALL.iter().position(|&e| e == estimator).expect("known estimator");
        &self.queues[k]
    }
}

/// Runs the three-lane queue estimators on every window of `obs` and
/// averages them per lane. Each window sees the queued probes of its own
/// lanes only; rates and probe counts come from the full-road estimates.
pub fn estimate_cycle_nlane(ctx: &EstimationContext<'_>, obs: &CycleObservation) -> Result<NLaneCycleEstimate> {
    let n = ctx.topology.n_lanes();
    let windows = enumerate_windows(n)?;
    let e0 = probe_counts_e0(&obs.queued_probes, ctx.topology);
    let e1 = probe_counts_e1(&obs.queued_probes, ctx.w)?;

    let mut per_estimator: Vec<BTreeMap<usize, [f64; 3]>> = vec![BTreeMap::new(); QueueEstimator::ALL.len()];
    let mut fallbacks = 0;
    for w in &windows {
        let input = WindowInput::restrict(obs, w.lanes, ctx.lane_rates, &e1.rounded, ctx.p, ctx.red_s);
        let est = estimate_queues(&input)?;
        fallbacks += est.fallbacks;
        for (k, &e) in QueueEstimator::ALL.iter().enumerate() {
            per_estimator[k].insert(w.first(), est.get(e));
        }
    }
    let queues = per_estimator
        .iter()
        .map(|m| estimate_nlane(m, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(NLaneCycleEstimate {
        e0,
        e1,
        queues,
        fallbacks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_enumeration() {
        assert_eq!(enumerate_windows(3).unwrap(), vec![VirtualWindow::starting_at(0)]);
        let w4: Vec<_> = enumerate_windows(4).unwrap().iter().map(|w| w.lanes).collect();
        assert_eq!(w4, vec![[0, 1, 2], [1, 2, 3]]);
        assert_eq!(enumerate_windows(6).unwrap().len(), 4);
        assert_eq!(enumerate_windows(2), Err(Error::TooFewLanes(2)));
    }

    #[test]
    fn coverage_counts() {
        for n in 3..=10 {
            let windows = enumerate_windows(n).unwrap();
            for lane in 0..n {
                let covering = windows.iter().filter(|w| w.lanes.contains(&lane)).count();
                assert_eq!(covering, lane.min(n - 3).min(n - 1 - lane).min(2) + 1, "n={n} lane={lane}");
            }
        }
    }

    #[test]
    fn averaging_examples() {
        let single = BTreeMap::from([(0, [1.5, 2.5, 3.5])]);
        assert_eq!(estimate_nlane(&single, 3).unwrap().per_lane, vec![1.5, 2.5, 3.5]);

        let two = BTreeMap::from([(0, [1.0, 4.0, 2.0]), (1, [6.0, 3.0, 8.0])]);
        let est = estimate_nlane(&two, 4).unwrap();
        assert_eq!(est.per_lane, vec![1.0, 5.0, 2.5, 8.0]);
        assert_eq!(est.contributing_windows, vec![1, 2, 2, 1]);

        let three = BTreeMap::from([(0, [9.0, 1.0, 1.0]), (1, [2.0, 2.0, 2.0]), (2, [3.0, 3.0, 3.0])]);
        assert_eq!(estimate_nlane(&three, 5).unwrap().per_lane[0], 9.0);
    }

    #[test]
    fn missing_window_is_reported() {
        let partial = BTreeMap::from([(0, [1.0; 3])]);
        assert_eq!(estimate_nlane(&partial, 4), Err(Error::MissingWindow(1)));
    }
}
