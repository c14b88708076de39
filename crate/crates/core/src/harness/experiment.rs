//! Replicated experiments over a grid of penetration ratios.

use crate::assignment::{lane_arrival_rates, AssignmentMatrix};
use crate::estimators::{estimate_primary, probe_counts_e0, probe_counts_e1, PrimaryEstimates};
use crate::harness::config::{EstimatorKind, ExperimentSpec};
use crate::harness::mae;
use crate::nlane::estimate_cycle_nlane;
use crate::par::{try_map_indexed, Execution};
use crate::pipeline::{estimate_cycle, EstimationContext, QueueEstimator};
use crate::rng::{replication_stream, stream};
use crate::sim::{run_simulation_with, CycleObservation, ScenarioConfig};
use crate::{Error, Result};

/// Per-lane estimates and truths of one estimator over one replication.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Series {
    pub estimates: Vec<Vec<f64>>,
    pub truths: Vec<Vec<u32>>,
}

impl Series {
    fn new(n_lanes: usize) -> Self {
        Self {
            estimates: vec![Vec::new(); n_lanes],
            truths: vec![Vec::new(); n_lanes],
        }
    }

    fn push(&mut self, estimates: impl IntoIterator<Item = f64>, truths: &[u32]) {
        for (lane, e) in estimates.into_iter().enumerate() {
            self.estimates[lane].push(e);
            self.truths[lane].push(truths[lane]);
        }
    }
}

/// Outcome of one `(p, replication)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub p: f64,
    pub point: usize,
    pub replication: usize,
    pub lambda_true: f64,
    pub primary: PrimaryEstimates,
    pub cycles: usize,
    pub overflow_cycles: usize,
    /// Fallbacks taken by the queue distributions.
    pub fallbacks: u32,
    /// One series per estimator in [`EstimatorKind::ALL`] order; empty for
    /// scalar estimators and for estimators not selected.
    pub series: Vec<Series>,
}

impl ReplicationResult {
    pub fn series(&self, kind: EstimatorKind) -> &Series {
        let k = EstimatorKind::ALL.iter().position(|&e| e == kind).expect("known estimator");
        &self.series[k]
    }

    /// MAE of one lane within this replication, `None` without clean cycles.
    pub fn lane_mae(&self, kind: EstimatorKind, lane: usize) -> Option<f64> {
        let s = self.series(kind);
        let (e, t) = (s.estimates.get(lane)?, s.truths.get(lane)?);
        mae(e, t).ok()
    }
}

/// Everything an experiment produced, in `(p, replication)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub runs: Vec<ReplicationResult>,
}

/// Runs every `(p, replication)` pair of `spec`.
pub fn run_experiment(spec: &ExperimentSpec, mode: Execution) -> Result<ExperimentResult> {
    spec.validate()?;
    let reps = spec.replications;
    let jobs = spec.p_grid.len() * reps;
    let runs = try_map_indexed(jobs, mode, |job| {
        let (point, replication) = (job / reps, job % reps);
        let p = spec.p_grid[point];
        run_replication(spec, point, replication).map_err(|e| Error::Replication {
            p,
            replication,
            source: Box::new(e),
        })
    })?;
    Ok(ExperimentResult {
        spec: spec.clone(),
        runs,
    })
}

/// Runs one replication of grid point `point`.
pub fn run_replication(spec: &ExperimentSpec, point: usize, replication: usize) -> Result<ReplicationResult> {
    let p = spec.p_grid[point];
    let scenario = ScenarioConfig {
        p,
        ..spec.scenario.clone()
    };
    let mut rng = stream(scenario.seed, replication_stream(point, replication));
    let trace = run_simulation_with(&scenario, &mut rng)?;
    let n_lanes = trace.n_lanes();
    let red_s = scenario.timing.red_s();

    let clean: Vec<&CycleObservation> = trace.clean_cycles().collect();
    let primary = match estimate_primary(&trace.cycles, &clean, &scenario.topology, scenario.q_sat, red_s) {
        // Without any probe exit nothing can be estimated, which only
        // matters when the queue estimators need the estimates.
        Err(Error::NoProbeExits) if spec.oracle_params => unobserved(&trace.assignment, scenario.lambda)?,
        other => other?,
    };

    let mut series: Vec<Series> = EstimatorKind::ALL
        .iter()
        .map(|&k| {
            if (k.is_queue() || k.is_probe_count()) && spec.selects(k) {
                Series::new(n_lanes)
            } else {
                Series::default()
            }
        })
        .collect();
    let mut fallbacks = 0;
    let per_cycle = EstimatorKind::ALL
        .iter()
        .any(|&k| (k.is_queue() || k.is_probe_count()) && spec.selects(k));

    if per_cycle {
        let true_rates;
        let (w, lane_rates, p_used) = if spec.oracle_params {
            true_rates = lane_arrival_rates(&trace.assignment, scenario.lambda)?;
            (&trace.assignment, true_rates.as_slice(), p)
        } else {
            (&primary.w_hat, primary.lane_rates_hat.as_slice(), primary.p_hat)
        };
        let ctx = EstimationContext {
            topology: &scenario.topology,
            w,
            lane_rates,
            p: p_used,
            red_s,
        };
        let need_queues = EstimatorKind::ALL.iter().any(|&k| k.is_queue() && spec.selects(k));
        for obs in &clean {
            let (e0, e1, queues): (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) = if !need_queues {
                let e0 = probe_counts_e0(&obs.queued_probes, ctx.topology);
                let e1 = probe_counts_e1(&obs.queued_probes, ctx.w)?;
                (as_f64(&e0.rounded), as_f64(&e1.rounded), Vec::new())
            } else if n_lanes == 3 {
                let est = estimate_cycle(&ctx, obs)?;
                fallbacks += est.queues.fallbacks;
                let queues = QueueEstimator::ALL.iter().map(|&q| est.queues.get(q).to_vec()).collect();
                (as_f64(&est.e0.rounded), as_f64(&est.e1.rounded), queues)
            } else {
                let est = estimate_cycle_nlane(&ctx, obs)?;
                fallbacks += est.fallbacks;
                let queues = QueueEstimator::ALL.iter().map(|&q| est.get(q).per_lane.clone()).collect();
                (as_f64(&est.e0.rounded), as_f64(&est.e1.rounded), queues)
            };
            for (k, kind) in EstimatorKind::ALL.iter().enumerate() {
                if series[k].estimates.is_empty() {
                    continue;
                }
                match kind {
                    EstimatorKind::E0 => series[k].push(e0.iter().copied(), &obs.probe_queues),
                    EstimatorKind::E1 => series[k].push(e1.iter().copied(), &obs.probe_queues),
                    _ => {
                        let q = queue_estimator(*kind).expect("queue estimator");
                        let idx = QueueEstimator::ALL.iter().position(|&x| x == q).expect("known");
                        series[k].push(queues[idx].iter().copied(), &obs.true_queues);
                    }
                }
            }
        }
    }

    Ok(ReplicationResult {
        p,
        point,
        replication,
        lambda_true: scenario.lambda,
        primary,
        cycles: trace.cycles.len(),
        overflow_cycles: trace.overflow_cycles(),
        fallbacks,
        series,
    })
}

/// NaN estimates, with the true matrix and rates standing in for theirs.
fn unobserved(w: &AssignmentMatrix, lambda: f64) -> Result<PrimaryEstimates> {
    Ok(PrimaryEstimates {
        p_hat: f64::NAN,
        p_hat_raw: f64::NAN,
        lambda_hat: f64::NAN,
        rho_hat: vec![f64::NAN; w.n_roads()],
        w_hat: w.clone(),
        lane_rates_hat: lane_arrival_rates(w, lambda)?,
    })
}

fn as_f64(v: &[u32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

fn queue_estimator(kind: EstimatorKind) -> Option<QueueEstimator> {
    match kind {
        EstimatorKind::MBaseline => Some(QueueEstimator::MBaseline),
        EstimatorKind::Prop1 => Some(QueueEstimator::Prop1),
        EstimatorKind::Prop2 => Some(QueueEstimator::Prop2),
        EstimatorKind::Prop3 => Some(QueueEstimator::Prop3),
        _ => None,
    }
}

/// One row of the MAE table.
#[derive(Debug, Clone, PartialEq)]
pub struct MaeRow {
    pub estimator: EstimatorKind,
    pub lane: usize,
    pub p: f64,
    pub mae: f64,
    pub replications: usize,
    pub horizon_s: f64,
    /// Cycles evaluated, pooled over replications.
    pub cycles: usize,
    /// Overflow-flagged cycles left out, pooled over replications.
    pub excluded_cycles: usize,
}

/// MAE per `(estimator, lane, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaeTable {
    pub rows: Vec<MaeRow>,
}

impl MaeTable {
    pub fn get(&self, estimator: EstimatorKind, lane: usize, p: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.lane == lane && r.p == p)
            .map(|r| r.mae)
    }
}

impl ExperimentResult {
    pub fn runs_at(&self, point: usize) -> impl Iterator<Item = &ReplicationResult> {
        self.runs.iter().filter(move |r| r.point == point)
    }

    pub fn n_lanes(&self) -> usize {
        self.spec.scenario.topology.n_lanes()
    }

    /// Pools every clean cycle of every replication at each grid point.
    /// Grid points without any clean cycle get a NaN MAE.
    pub fn mae_table(&self) -> MaeTable {
        let mut rows = Vec::new();
        for kind in EstimatorKind::ALL {
            if !(kind.is_queue() || kind.is_probe_count()) || !self.spec.selects(kind) {
                continue;
            }
            for lane in 0..self.n_lanes() {
                for (point, &p) in self.spec.p_grid.iter().enumerate() {
                    let (mut estimates, mut truths) = (Vec::new(), Vec::new());
                    let mut excluded = 0;
                    for run in self.runs_at(point) {
                        let s = run.series(kind);
                        estimates.extend_from_slice(&s.estimates[lane]);
                        truths.extend_from_slice(&s.truths[lane]);
                        excluded += run.overflow_cycles;
                    }
                    rows.push(MaeRow {
                        estimator: kind,
                        lane,
                        p,
                        mae: mae(&estimates, &truths).unwrap_or(f64::NAN),
                        replications: self.spec.replications,
                        horizon_s: self.spec.horizon_s(),
                        cycles: truths.len(),
                        excluded_cycles: excluded,
                    });
                }
            }
        }
        MaeTable { rows }
    }

    /// Mean `p_hat` and mean absolute error of `p_hat` at each grid point.
    pub fn p_hat_summary(&self) -> Vec<(f64, f64, f64)> {
        self.summary(|r| r.primary.p_hat, |r| r.p)
    }

    /// Mean `lambda_hat` and mean absolute error of `lambda_hat` at each grid point.
    pub fn lambda_hat_summary(&self) -> Vec<(f64, f64, f64)> {
        self.summary(|r| r.primary.lambda_hat, |r| r.lambda_true)
    }

    fn summary(
        &self,
        value: impl Fn(&ReplicationResult) -> f64,
        truth: impl Fn(&ReplicationResult) -> f64,
    ) -> Vec<(f64, f64, f64)> {
        self.spec
            .p_grid
            .iter()
            .enumerate()
            .map(|(point, &p)| {
                let runs: Vec<_> = self.runs_at(point).collect();
                let n = runs.len() as f64;
                let mean = runs.iter().map(|r| value(r)).sum::<f64>() / n;
                let err = runs.iter().map(|r| (value(r) - truth(r)).abs()).sum::<f64>() / n;
                (p, mean, err)
            })
            .collect()
    }
}
