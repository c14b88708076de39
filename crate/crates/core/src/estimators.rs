//! Primary parameters and per-lane probe counts recovered from observations.

use crate::assignment::{lane_arrival_rates, solve_assignment, AssignmentMatrix, JunctionTopology, TurnRatios};
use crate::sim::{CycleObservation, QueuedProbe};
use crate::{Error, Result};

/// Unclamped penetration ratio: queued probes over the discharge time of the
/// last queued probe to each road, both summed across `cycles`.
pub fn estimate_p_raw<'a>(cycles: impl IntoIterator<Item = &'a CycleObservation>, q_sat: f64) -> Result<f64> {
    let mut probes = 0u64;
    let mut span = 0.0;
    let mut last_by_road: Vec<f64> = Vec::new();
    for c in cycles {
        probes += c.x_p as u64;
        last_by_road.clear();
        for e in c.probe_exits.iter().filter(|e| e.queued) {
            if e.dest >= last_by_road.len() {
                last_by_road.resize(e.dest + 1, 0.0);
            }
            last_by_road[e.dest] = last_by_road[e.dest].max(e.t_e);
        }
        span += last_by_road.iter().sum::<f64>();
    }
    let denominator = q_sat * span;
    if !(denominator > 0.0) {
        return Err(Error::NoProbeExits);
    }
    Ok(probes as f64 / denominator)
}

/// [`estimate_p_raw`] clamped to `[0, 1]`.
pub fn estimate_p<'a>(cycles: impl IntoIterator<Item = &'a CycleObservation>, q_sat: f64) -> Result<f64> {
    estimate_p_raw(cycles, q_sat).map(|p| p.clamp(0.0, 1.0))
}

/// Total arrival rate from probe arrivals during red:
/// `sum Y_p / (p R n_cycles)`.
pub fn estimate_lambda<'a>(
    cycles: impl IntoIterator<Item = &'a CycleObservation>,
    p: f64,
    red_s: f64,
) -> Result<f64> {
    if p <= 0.0 {
        return Err(Error::ZeroPenetration);
    }
    let (mut count, mut n) = (0u64, 0usize);
    for c in cycles {
        count += c.probe_arrivals_in_red as u64;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Empty);
    }
    Ok(count as f64 / (p * red_s * n as f64))
}

/// Share of probe exits to each of `n_roads` roads.
pub fn estimate_turn_ratios<'a>(
    cycles: impl IntoIterator<Item = &'a CycleObservation>,
    n_roads: usize,
) -> Result<Vec<f64>> {
    let mut counts = vec![0u64; n_roads];
    for c in cycles {
        for e in &c.probe_exits {
            counts[e.dest] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::NoProbeExits);
    }
    Ok(counts.into_iter().map(|k| k as f64 / total as f64).collect())
}

/// Estimated primary parameters of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimaryEstimates {
    /// Clamped to `[0, 1]`.
    pub p_hat: f64,
    /// Before clamping.
    pub p_hat_raw: f64,
    pub lambda_hat: f64,
    pub rho_hat: Vec<f64>,
    /// Assignment matrix solved from `rho_hat`.
    pub w_hat: AssignmentMatrix,
    pub lane_rates_hat: Vec<f64>,
}

/// Chains the primary estimators: `p_hat` on `clean` cycles, `lambda_hat`
/// and `rho_hat` on `all` cycles, then `W_hat` and per-lane rates.
pub fn estimate_primary(
    all: &[CycleObservation],
    clean: &[&CycleObservation],
    topology: &JunctionTopology,
    q_sat: f64,
    red_s: f64,
) -> Result<PrimaryEstimates> {
    let p_hat_raw = estimate_p_raw(clean.iter().copied(), q_sat)?;
    let p_hat = p_hat_raw.clamp(0.0, 1.0);
    let lambda_hat = estimate_lambda(all, p_hat, red_s)?;
    let rho_hat = estimate_turn_ratios(all, topology.n_roads())?;
    let w_hat = solve_assignment(topology, &TurnRatios::new(rho_hat.clone())?)?;
    let lane_rates_hat = lane_arrival_rates(&w_hat, lambda_hat)?;
    Ok(PrimaryEstimates {
        p_hat,
        p_hat_raw,
        lambda_hat,
        rho_hat,
        w_hat,
        lane_rates_hat,
    })
}

/// Per-lane probe counts: expectations and their rounded values.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeCountEstimate {
    pub raw: Vec<f64>,
    pub rounded: Vec<u32>,
}

impl ProbeCountEstimate {
    fn from_raw(raw: Vec<f64>) -> Self {
        // f64::round breaks ties away from zero.
        let rounded = raw.iter().map(|x| x.max(0.0).round() as u32).collect();
        Self { raw, rounded }
    }

    /// Rounded counts of a three-lane road.
    pub fn triple(&self) -> [u32; 3] {
        self.rounded.as_slice().try_into().expect("three-lane estimate")
    }
}

/// Attributes every queued probe to its destination's nominal lane.
pub fn probe_counts_e0(probes: &[QueuedProbe], topology: &JunctionTopology) -> ProbeCountEstimate {
    let mut raw = vec![0.0; topology.n_lanes()];
    for q in probes {
        if let Some(lane) = topology.nominal_lane(q.dest) {
            raw[lane] += 1.0;
        }
    }
    ProbeCountEstimate::from_raw(raw)
}

/// Spreads every queued probe over lanes by `P(lane | destination) = w_ij / rho_j`.
pub fn probe_counts_e1(probes: &[QueuedProbe], w: &AssignmentMatrix) -> Result<ProbeCountEstimate> {
    let mut raw = vec![0.0; w.n_lanes()];
    for q in probes {
        for (lane, r) in raw.iter_mut().enumerate() {
            *r += w.lane_given_road(lane, q.dest)?;
        }
    }
    Ok(ProbeCountEstimate::from_raw(raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ProbeExit;

    fn probe(dest: usize) -> QueuedProbe {
        QueuedProbe {
            id: 0,
            lane: 0,
            position: 1,
            dest,
        }
    }

    fn exit(dest: usize, t_e: f64) -> ProbeExit {
        ProbeExit {
            id: 0,
            lane: 0,
            dest,
            t_e,
            queued: true,
        }
    }

    fn cycle(x_p: u32, exits: Vec<ProbeExit>, red_probes: u32) -> CycleObservation {
        CycleObservation {
            cycle_index: 0,
            true_queues: vec![0; 3],
            probe_queues: vec![0; 3],
            m: 0,
            last_probe_lane: None,
            x_p,
            queued_probes: Vec::new(),
            probe_exits: exits,
            probe_arrivals_in_red: red_probes,
            carried_over: 0,
            overflow: false,
        }
    }

    fn table2() -> AssignmentMatrix {
        let topology = JunctionTopology::turning_lanes(3).unwrap();
        solve_assignment(&topology, &TurnRatios::new(vec![0.1, 0.8, 0.1]).unwrap()).unwrap()
    }

    fn table3() -> AssignmentMatrix {
        let topology = JunctionTopology::turning_lanes(3).unwrap();
        solve_assignment(&topology, &TurnRatios::new(vec![0.7, 0.15, 0.15]).unwrap()).unwrap()
    }

    #[test]
    fn p_single_cycle() {
        let c = cycle(4, vec![exit(0, 6.0), exit(0, 16.0)], 0);
        assert!((estimate_p([&c], 0.5).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn p_sums_last_exits_per_road_and_ignores_pass_through() {
        let mut late = exit(1, 50.0);
        late.queued = false;
        let c = cycle(3, vec![exit(0, 4.0), exit(1, 2.0), exit(1, 6.0), late], 0);
        // 3 / (0.5 * (4 + 6))
        assert!((estimate_p_raw([&c], 0.5).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn p_is_clamped_and_needs_exits() {
        let c = cycle(9, vec![exit(0, 2.0)], 0);
        assert_eq!(estimate_p([&c], 0.5).unwrap(), 1.0);
        assert!(estimate_p_raw([&c], 0.5).unwrap() > 1.0);
        assert_eq!(estimate_p([&cycle(0, vec![], 0)], 0.5), Err(Error::NoProbeExits));
    }

    #[test]
    fn p_is_scale_consistent() {
        let a = cycle(5, vec![exit(0, 8.0), exit(2, 12.0)], 0);
        let b = cycle(5, vec![exit(0, 4.0), exit(2, 6.0)], 0);
        assert_eq!(estimate_p([&a], 0.5).unwrap(), estimate_p([&b], 1.0).unwrap());
    }

    #[test]
    fn lambda_examples() {
        let c = cycle(0, vec![], 15);
        assert!((estimate_lambda([&c], 0.2, 60.0).unwrap() - 1.25).abs() < 1e-12);
        assert_eq!(estimate_lambda([&cycle(0, vec![], 0)], 0.2, 60.0).unwrap(), 0.0);
        assert_eq!(estimate_lambda([&c], 0.0, 60.0), Err(Error::ZeroPenetration));
        assert_eq!(estimate_lambda([], 0.3, 60.0), Err(Error::Empty));
    }

    #[test]
    fn turn_ratio_examples() {
        let exits: Vec<ProbeExit> = [0; 7]
            .into_iter()
            .chain([1; 2])
            .chain([2])
            .map(|d| exit(d, 1.0))
            .collect();
        let rho = estimate_turn_ratios([&cycle(0, exits, 0)], 3).unwrap();
        assert_eq!(rho, vec![0.7, 0.2, 0.1]);
        let rho = estimate_turn_ratios([&cycle(0, vec![exit(0, 1.0)], 0)], 3).unwrap();
        assert_eq!(rho, vec![1.0, 0.0, 0.0]);
        assert_eq!(estimate_turn_ratios([&cycle(0, vec![], 0)], 3), Err(Error::NoProbeExits));
    }

    #[test]
    fn e0_examples() {
        let topology = JunctionTopology::turning_lanes(3).unwrap();
        let probes: Vec<_> = [0, 0, 1, 2].map(probe).to_vec();
        assert_eq!(probe_counts_e0(&probes, &topology).triple(), [2, 1, 1]);
        assert_eq!(probe_counts_e0(&[], &topology).triple(), [0, 0, 0]);
    }

    #[test]
    fn e1_examples() {
        let est = probe_counts_e1(&[probe(1)], &table2()).unwrap();
        let expected = [0.7 / 2.4, 1.0 / 2.4, 0.7 / 2.4];
        for i in 0..3 {
            assert!((est.raw[i] - expected[i]).abs() < 1e-6);
        }
        assert_eq!(est.triple(), [0, 0, 0]);

        let est = probe_counts_e1(&[probe(0), probe(0), probe(2)], &table3()).unwrap();
        for (r, e) in est.raw.iter().zip([2.0, 0.0, 1.0]) {
            assert!((r - e).abs() < 1e-9);
        }
        assert_eq!(est.triple(), [2, 0, 1]);
        assert_eq!(probe_counts_e1(&[], &table3()).unwrap().triple(), [0, 0, 0]);
    }

    #[test]
    fn e1_rejects_zero_columns() {
        let w = AssignmentMatrix::from_rows(&[vec![0.5, 0.0], vec![0.5, 0.0]]).unwrap();
        assert_eq!(probe_counts_e1(&[probe(1)], &w), Err(Error::ZeroColumn { road: 1 }));
    }

    #[test]
    fn rounding_breaks_ties_away_from_zero() {
        let est = ProbeCountEstimate::from_raw(vec![0.5, 1.5, 2.4999]);
        assert_eq!(est.rounded, vec![1, 2, 2]);
    }
}
