//! Per-cycle queue estimates for a three-lane road.
//!
//! Each cycle's observation is reduced to the inputs of the queue
//! distributions (`m`, `x_p`, estimated per-lane probe counts) and every
//! queue estimator is evaluated on it.

use crate::assignment::{AssignmentMatrix, JunctionTopology};
use crate::estimators::{probe_counts_e0, probe_counts_e1, ProbeCountEstimate};
use crate::queue_dist::{prop2_means, prop3_expectation, prop3_pmf, StockParams};
use crate::sim::CycleObservation;
use crate::{Error, Result};

/// The queue-length estimators compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueueEstimator {
    /// Every lane estimated by the last-probe position `m`.
    MBaseline,
    Prop1,
    Prop2,
    Prop3,
}

impl QueueEstimator {
    pub const ALL: [QueueEstimator; 4] = [Self::MBaseline, Self::Prop1, Self::Prop2, Self::Prop3];

    pub fn name(self) -> &'static str {
        match self {
            Self::MBaseline => "m-baseline",
            Self::Prop1 => "prop1",
            Self::Prop2 => "prop2",
            Self::Prop3 => "prop3",
        }
    }
}

/// What the queue estimators see of one three-lane road in one cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowInput {
    pub lambdas: [f64; 3],
    pub p: f64,
    pub red_s: f64,
    pub m: u32,
    pub x_p: u32,
    /// Rounded probe-count estimates per lane.
    pub probe_counts: [u32; 3],
}

impl WindowInput {
    /// Restricts `obs` to `lanes`: only queued probes on those lanes count
    /// towards `x_p`, and `m` is the position of the latest of them.
    pub fn restrict(
        obs: &CycleObservation,
        lanes: [usize; 3],
        lane_rates: &[f64],
        probe_counts: &[u32],
        p: f64,
        red_s: f64,
    ) -> Self {
        let mut x_p = 0;
        let mut m = 0;
        for q in obs.queued_probes.iter().filter(|q| lanes.contains(&q.lane)) {
            x_p += 1;
            m = q.position;
        }
        Self {
            lambdas: lanes.map(|i| lane_rates[i]),
            p,
            red_s,
            m,
            x_p,
            probe_counts: lanes.map(|i| probe_counts[i]),
        }
    }
}

/// Queue estimates of one road in one cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueEstimates {
    pub m_baseline: [f64; 3],
    pub prop1: [f64; 3],
    pub prop2: [f64; 3],
    pub prop3: [f64; 3],
    /// Number of evaluations that fell back to the prior (Prop 2) or to the
    /// probe-free branch (Prop 3) because the observation was inconsistent
    /// with the estimated parameters.
    pub fallbacks: u32,
}

impl QueueEstimates {
    pub fn get(&self, estimator: QueueEstimator) -> [f64; 3] {
        match estimator {
            QueueEstimator::MBaseline => self.m_baseline,
            QueueEstimator::Prop1 => self.prop1,
            QueueEstimator::Prop2 => self.prop2,
            QueueEstimator::Prop3 => self.prop3,
        }
    }
}

/// Evaluates every queue estimator at the end of red.
pub fn estimate_queues(input: &WindowInput) -> Result<QueueEstimates> {
    let base = StockParams::new(input.lambdas, [input.red_s; 3], input.p);
    let params = base.with_observation(input.m, input.x_p, input.probe_counts);
    let prop1 = params.mu;
    let mut fallbacks = 0;

    let prop2 = if input.m == 0 || input.x_p == 0 {
        prop1
    } else {
        match prop2_means(&params, params.n_max()) {
            Ok(means) => means,
            Err(Error::EmptySupport) => {
                fallbacks += 1;
                prop1
            }
            Err(e) => return Err(e),
        }
    };

    let mut prop3 = [0.0; 3];
    for (lane, slot) in prop3.iter_mut().enumerate() {
        let pmf = match prop3_pmf(lane, &params, params.n_max()) {
            Ok(pmf) => pmf,
            Err(Error::InconsistentObservation { .. } | Error::EmptySupport) => {
                fallbacks += 1;
                let mut counts = params.probe_counts;
                counts[lane] = 0;
                let probe_free = params.clone().with_observation(params.m, params.x_p, counts);
                prop3_pmf(lane, &probe_free, params.n_max())?
            }
            Err(e) => return Err(e),
        };
        *slot = prop3_expectation(&pmf);
    }

    Ok(QueueEstimates {
        m_baseline: [input.m as f64; 3],
        prop1,
        prop2,
        prop3,
        fallbacks,
    })
}

/// Parameters shared by every cycle of one run.
#[derive(Debug, Clone, Copy)]
pub struct EstimationContext<'a> {
    pub topology: &'a JunctionTopology,
    /// Assignment matrix used by E1.
    pub w: &'a AssignmentMatrix,
    pub lane_rates: &'a [f64],
    pub p: f64,
    pub red_s: f64,
}

/// All estimates for one cycle of a three-lane road.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleEstimate {
    pub e0: ProbeCountEstimate,
    pub e1: ProbeCountEstimate,
    pub queues: QueueEstimates,
}

/// Probe counts by E0 and E1, then queue estimates with E1's counts.
pub fn estimate_cycle(ctx: &EstimationContext<'_>, obs: &CycleObservation) -> Result<CycleEstimate> {
    let n = ctx.topology.n_lanes();
    if n != 3 {
        return Err(Error::InvalidScenario(format!(
            "the three-lane pipeline got a {n}-lane road"
        )));
    }
    let e0 = probe_counts_e0(&obs.queued_probes, ctx.topology);
    let e1 = probe_counts_e1(&obs.queued_probes, ctx.w)?;
    let input = WindowInput::restrict(obs, [0, 1, 2], ctx.lane_rates, &e1.rounded, ctx.p, ctx.red_s);
    let queues = estimate_queues(&input)?;
    Ok(CycleEstimate { e0, e1, queues })
}
