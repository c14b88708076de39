//! Discrete-event simulation of one signalized approach.
//!
//! Vehicles arrive as a Poisson process, pick `(lane, destination)` from the
//! assignment matrix and are tagged as probes independently. Each cycle
//! starts with red; queues build up until the end of red, when the
//! observation is captured, then every lane discharges FIFO at `q_sat`
//! during green. The simulator handles any number of lanes.

use std::collections::VecDeque;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::assignment::{solve_assignment, AssignmentMatrix, JunctionTopology, TurnRatios};
use crate::rng::SimRng;
use crate::{Error, Result};

/// Red and green durations of a fixed-time signal, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalTiming {
    red_s: f64,
    green_s: f64,
}

impl SignalTiming {
    pub fn new(red_s: f64, green_s: f64) -> Result<Self> {
        if !(red_s > 0.0 && red_s.is_finite()) || !(green_s > 0.0 && green_s.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "red and green durations must be positive, got R = {red_s}, G = {green_s}"
            )));
        }
        Ok(Self { red_s, green_s })
    }

    pub fn red_s(&self) -> f64 {
        self.red_s
    }

    pub fn green_s(&self) -> f64 {
        self.green_s
    }

    pub fn cycle_s(&self) -> f64 {
        self.red_s + self.green_s
    }
}

/// Everything needed to simulate one approach.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub topology: JunctionTopology,
    pub rho: TurnRatios,
    /// Total arrival rate (veh/s).
    pub lambda: f64,
    /// Penetration ratio.
    pub p: f64,
    /// Saturation rate per lane (veh/s).
    pub q_sat: f64,
    pub timing: SignalTiming,
    pub horizon_s: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Checks the scalar invariants and that `rho` matches the topology.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidScenario(format!("p = {} is outside [0, 1]", self.p)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidScenario(format!("lambda = {} must be >= 0", self.lambda)));
        }
        if !(self.q_sat > 0.0 && self.q_sat.is_finite()) {
            return Err(Error::InvalidScenario(format!("q_sat = {} must be > 0", self.q_sat)));
        }
        if !(self.horizon_s >= 0.0 && self.horizon_s.is_finite()) {
            return Err(Error::InvalidScenario(format!("horizon = {} must be >= 0", self.horizon_s)));
        }
        if self.rho.len() != self.topology.n_roads() {
            return Err(Error::InvalidScenario(format!(
                "{} turn ratios for {} outgoing roads",
                self.rho.len(),
                self.topology.n_roads()
            )));
        }
        Ok(())
    }

    /// Solves the assignment matrix for this scenario.
    pub fn assignment(&self) -> Result<AssignmentMatrix> {
        solve_assignment(&self.topology, &self.rho)
    }

    /// Expected arrivals per cycle on the busiest lane divided by what one
    /// green can discharge. Below one means undersaturated.
    pub fn saturation_ratio(&self, w: &AssignmentMatrix) -> f64 {
        let busiest = w.lane_weights().into_iter().fold(0.0, f64::max);
        self.lambda * self.timing.cycle_s() * busiest / (self.q_sat * self.timing.green_s())
    }

    pub fn is_undersaturated(&self, w: &AssignmentMatrix) -> bool {
        self.saturation_ratio(w) < 1.0
    }

    pub fn n_cycles(&self) -> usize {
        (self.horizon_s / self.timing.cycle_s()).floor() as usize
    }
}

/// One simulated vehicle. Times are absolute seconds from the start of the run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vehicle {
    pub id: u64,
    pub arrival_s: f64,
    pub lane: usize,
    pub dest: usize,
    pub is_probe: bool,
}

/// Draws `(destination, lane, is_probe)`: the pair with probability `w_ij`,
/// the probe flag independently with probability `p`.
pub fn sample_vehicle(rng: &mut SimRng, w: &AssignmentMatrix, p: f64) -> (usize, usize, bool) {
    let d = w.n_roads();
    let entries = w.entries();
    let total: f64 = entries.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    // Fall back to the last positive entry against rounding at the top end.
    let mut pick = entries.iter().rposition(|&x| x > 0.0).unwrap_or(0);
    for (k, &x) in entries.iter().enumerate() {
        acc += x;
        if u < acc && x > 0.0 {
            pick = k;
            break;
        }
    }
    let is_probe = p >= 1.0 || (p > 0.0 && rng.random_bool(p));
    (pick % d, pick / d, is_probe)
}

/// A departure during green, timed from green start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitEvent {
    pub vehicle: Vehicle,
    pub t_e: f64,
}

/// FIFO discharge of one lane during one green.
///
/// The `k`-th queued vehicle leaves at `k / q_sat`. A green arrival (times
/// relative to green start, sorted) joins the queue if the previous vehicle
/// has not left yet and then leaves one headway after it; otherwise it
/// passes through at its arrival time. Vehicles that cannot leave by
/// `green_s` are returned as the residual queue, in order.
pub fn discharge(
    queue: impl IntoIterator<Item = Vehicle>,
    green_arrivals: impl IntoIterator<Item = (f64, Vehicle)>,
    q_sat: f64,
    green_s: f64,
) -> (Vec<ExitEvent>, Vec<Vehicle>) {
    let headway = 1.0 / q_sat;
    let mut exits = Vec::new();
    let mut residual = Vec::new();
    let mut last_exit = f64::NEG_INFINITY;
    let mut k = 0u64;
    for v in queue {
        k += 1;
        let t = k as f64 * headway;
        if t <= green_s && residual.is_empty() {
            exits.push(ExitEvent { vehicle: v, t_e: t });
            last_exit = t;
        } else {
            residual.push(v);
        }
    }
    for (offset, v) in green_arrivals {
        if !residual.is_empty() {
            residual.push(v);
            continue;
        }
        let t = if last_exit > offset { last_exit + headway } else { offset };
        if t <= green_s {
            exits.push(ExitEvent { vehicle: v, t_e: t });
            last_exit = t;
        } else {
            residual.push(v);
        }
    }
    (exits, residual)
}

/// A probe in the queue at the end of red.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueuedProbe {
    pub id: u64,
    pub lane: usize,
    /// 1-based position from the stop line within its lane.
    pub position: u32,
    pub dest: usize,
}

/// A probe leaving the junction during green.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeExit {
    pub id: u64,
    pub lane: usize,
    pub dest: usize,
    /// Exit time from green start (s).
    pub t_e: f64,
    /// Whether the probe was in the queue at the end of red.
    pub queued: bool,
}

/// What one cycle reveals, together with the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleObservation {
    pub cycle_index: usize,
    /// True queue lengths per lane at the end of red.
    pub true_queues: Vec<u32>,
    /// Probes per lane at the end of red.
    pub probe_queues: Vec<u32>,
    /// Position of the most recently arrived queued probe within its lane, 0 if none.
    pub m: u32,
    pub last_probe_lane: Option<usize>,
    pub x_p: u32,
    /// Queued probes in arrival order.
    pub queued_probes: Vec<QueuedProbe>,
    pub probe_exits: Vec<ProbeExit>,
    /// Probe arrivals on the link during this red.
    pub probe_arrivals_in_red: u32,
    /// Vehicles left over from the previous green, already queued when this red began.
    pub carried_over: u32,
    /// A queue was non-empty at the start of this red or at the end of this green.
    pub overflow: bool,
}

impl CycleObservation {
    /// True queues as a triple. Panics unless the road has three lanes.
    pub fn queues3(&self) -> [u32; 3] {
        self.true_queues.as_slice().try_into().expect("three-lane observation")
    }
}

/// Output of [`run_simulation`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub config: ScenarioConfig,
    pub assignment: AssignmentMatrix,
    pub cycles: Vec<CycleObservation>,
    pub arrivals: u64,
    pub departures: u64,
    /// Vehicles still on the link when the run ends.
    pub in_system: u64,
}

impl SimTrace {
    pub fn n_lanes(&self) -> usize {
        self.assignment.n_lanes()
    }

    pub fn overflow_cycles(&self) -> usize {
        self.cycles.iter().filter(|c| c.overflow).count()
    }

    /// Cycles usable for accuracy statistics.
    pub fn clean_cycles(&self) -> impl Iterator<Item = &CycleObservation> {
        self.cycles.iter().filter(|c| !c.overflow)
    }
}

/// Simulates `config` with its own seed.
pub fn run_simulation(config: &ScenarioConfig) -> Result<SimTrace> {
    let mut rng = crate::rng::stream(config.seed, 0);
    run_simulation_with(config, &mut rng)
}

/// Simulates `config` drawing from `rng`.
pub fn run_simulation_with(config: &ScenarioConfig, rng: &mut SimRng) -> Result<SimTrace> {
    config.validate()?;
    let w = config.assignment()?;
    let n_lanes = w.n_lanes();
    let (red, green) = (config.timing.red_s(), config.timing.green_s());
    let cycle_s = config.timing.cycle_s();
    let n_cycles = config.n_cycles();
    let end = n_cycles as f64 * cycle_s;

    let mut arrivals = ArrivalStream::new(config.lambda, end, rng)?;
    let mut queues: Vec<VecDeque<Vehicle>> = vec![VecDeque::new(); n_lanes];
    let mut cycles = Vec::with_capacity(n_cycles);
    let mut arrived = 0u64;
    let mut departed = 0u64;

    for c in 0..n_cycles {
        let start = c as f64 * cycle_s;
        let red_end = start + red;
        let green_end = start + cycle_s;
        let carried_over = queues.iter().map(|q| q.len() as u32).sum::<u32>();

        let mut probe_arrivals_in_red = 0;
        let mut probe_order: Vec<(usize, u32)> = Vec::new();
        while let Some(v) = arrivals.next_before(red_end, &w, config.p, rng) {
            arrived += 1;
            let q = &mut queues[v.lane];
            q.push_back(v);
            if v.is_probe {
                probe_arrivals_in_red += 1;
                probe_order.push((v.lane, q.len() as u32));
            }
        }

        // Carried-over vehicles sit ahead of this red's arrivals, so
        // positions recorded above are already stop-line positions.
        let true_queues: Vec<u32> = queues.iter().map(|q| q.len() as u32).collect();
        let probe_queues: Vec<u32> = queues
            .iter()
            .map(|q| q.iter().filter(|v| v.is_probe).count() as u32)
            .collect();
        let mut queued_probes = Vec::new();
        for &(lane, position) in &probe_order {
            let v = queues[lane][position as usize - 1];
            queued_probes.push(QueuedProbe {
                id: v.id,
                lane,
                position,
                dest: v.dest,
            });
        }
        // Carried-over probes precede this red's probes in arrival order.
        let carried_probes: Vec<QueuedProbe> = queues
            .iter()
            .enumerate()
            .flat_map(|(lane, q)| {
                q.iter()
                    .enumerate()
                    .filter(|(_, v)| v.is_probe && v.arrival_s < start)
                    .map(move |(k, v)| QueuedProbe {
                        id: v.id,
                        lane,
                        position: k as u32 + 1,
                        dest: v.dest,
                    })
            })
            .collect();
        if !carried_probes.is_empty() {
            let mut all = carried_probes;
            all.extend(queued_probes);
            queued_probes = all;
        }
        let x_p = queued_probes.len() as u32;
        let (m, last_probe_lane) = queued_probes
            .last()
            .map_or((0, None), |q| (q.position, Some(q.lane)));

        let mut green_arrivals: Vec<Vec<(f64, Vehicle)>> = vec![Vec::new(); n_lanes];
        while let Some(v) = arrivals.next_before(green_end, &w, config.p, rng) {
            arrived += 1;
            green_arrivals[v.lane].push((v.arrival_s - red_end, v));
        }

        let mut probe_exits = Vec::new();
        let mut left_residual = false;
        for lane in 0..n_lanes {
            let queued = std::mem::take(&mut queues[lane]);
            let (exits, residual) = discharge(queued, green_arrivals[lane].drain(..), config.q_sat, green);
            departed += exits.len() as u64;
            for e in &exits {
                if e.vehicle.is_probe {
                    probe_exits.push(ProbeExit {
                        id: e.vehicle.id,
                        lane,
                        dest: e.vehicle.dest,
                        t_e: e.t_e,
                        queued: e.vehicle.arrival_s <= red_end,
                    });
                }
            }
            left_residual |= !residual.is_empty();
            queues[lane] = residual.into();
        }
        probe_exits.sort_by(|a, b| a.t_e.total_cmp(&b.t_e).then(a.id.cmp(&b.id)));

        cycles.push(CycleObservation {
            cycle_index: c,
            true_queues,
            probe_queues,
            m,
            last_probe_lane,
            x_p,
            queued_probes,
            probe_exits,
            probe_arrivals_in_red,
            carried_over,
            overflow: carried_over > 0 || left_residual,
        });
    }

    let in_system = queues.iter().map(|q| q.len() as u64).sum();
    Ok(SimTrace {
        config: config.clone(),
        assignment: w,
        cycles,
        arrivals: arrived,
        departures: departed,
        in_system,
    })
}

/// Poisson arrivals on `[0, end)`, generated lazily.
struct ArrivalStream {
    gap: Option<Exp<f64>>,
    next_s: f64,
    end: f64,
    next_id: u64,
}

impl ArrivalStream {
    fn new(lambda: f64, end: f64, rng: &mut SimRng) -> Result<Self> {
        let gap = if lambda > 0.0 {
            Some(Exp::new(lambda).map_err(|e| Error::InvalidScenario(e.to_string()))?)
        } else {
            None
        };
        let next_s = gap.as_ref().map_or(f64::INFINITY, |g| g.sample(rng));
        Ok(Self {
            gap,
            next_s,
            end,
            next_id: 0,
        })
    }

    fn next_before(&mut self, t: f64, w: &AssignmentMatrix, p: f64, rng: &mut SimRng) -> Option<Vehicle> {
        if self.next_s >= t || self.next_s >= self.end {
            return None;
        }
        let (dest, lane, is_probe) = sample_vehicle(rng, w, p);
        let v = Vehicle {
            id: self.next_id,
            arrival_s: self.next_s,
            lane,
            dest,
            is_probe,
        };
        self.next_id += 1;
        self.next_s += self.gap.as_ref().map_or(f64::INFINITY, |g| g.sample(rng));
        Some(v)
    }
}

fn lane_label(lane: usize) -> String {
    let letter = (b'A' + (lane % 26) as u8) as char;
    if lane < 26 {
        letter.to_string()
    } else {
        format!("{letter}{}", lane / 26)
    }
}

/// One row per cycle: `cycle, A, B, C, A_p, B_p, C_p, m, x_p, overflow`
/// (one queue and one probe column per lane).
pub fn write_cycles_csv<W: Write>(trace: &SimTrace, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let n = trace.n_lanes();
    let mut header = vec!["cycle".to_string()];
    header.extend((0..n).map(lane_label));
    header.extend((0..n).map(|i| format!("{}_p", lane_label(i))));
    header.extend(["m", "x_p", "overflow"].map(String::from));
    wtr.write_record(&header)?;
    for c in &trace.cycles {
        let mut row = vec![c.cycle_index.to_string()];
        row.extend(c.true_queues.iter().map(u32::to_string));
        row.extend(c.probe_queues.iter().map(u32::to_string));
        row.push(c.m.to_string());
        row.push(c.x_p.to_string());
        row.push(u8::from(c.overflow).to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// One row per probe exit: `cycle, probe_id, dest, t_e`. Roads are 1-based,
/// times have three decimals.
pub fn write_exits_csv<W: Write>(trace: &SimTrace, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["cycle", "probe_id", "dest", "t_e"])?;
    for c in &trace.cycles {
        for e in &c.probe_exits {
            wtr.write_record([
                c.cycle_index.to_string(),
                e.id.to_string(),
                (e.dest + 1).to_string(),
                format!("{:.3}", e.t_e),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
