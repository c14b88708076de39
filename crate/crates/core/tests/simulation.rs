mod common;

use common::{mean_and_variance, scenario};
use lanequeue::assignment::{solve_assignment, JunctionTopology, TurnRatios};
use lanequeue::rng::stream;
use lanequeue::sim::{run_simulation, sample_vehicle, write_cycles_csv, write_exits_csv, CycleObservation};

/// Upper 0.001 quantiles of the chi-square law, indexed by degrees of freedom.
const CHI2_999: [f64; 9] = [0.0, 10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.124];

#[test]
fn lane_and_destination_draws_follow_the_assignment() {
    let topology = JunctionTopology::turning_lanes(3).unwrap();
    for rho in [vec![0.1, 0.8, 0.1], vec![0.7, 0.15, 0.15]] {
        let w = solve_assignment(&topology, &TurnRatios::new(rho).unwrap()).unwrap();
        let mut rng = stream(11, 0);
        let n = 1_000_000;
        let mut counts = [0u64; 9];
        let mut probes = 0u64;
        for _ in 0..n {
            let (dest, lane, probe) = sample_vehicle(&mut rng, &w, 0.3);
            counts[lane * 3 + dest] += 1;
            probes += u64::from(probe);
        }
        let mut chi2 = 0.0;
        let mut cells = 0;
        for (k, &x) in counts.iter().enumerate() {
            let expected = w.entries()[k] * n as f64;
            if expected == 0.0 {
                assert_eq!(x, 0, "draw in a zero cell {k}");
                continue;
            }
            chi2 += (x as f64 - expected).powi(2) / expected;
            cells += 1;
        }
        assert!(chi2 < CHI2_999[cells - 1], "chi2 = {chi2} over {cells} cells");
        let share = probes as f64 / n as f64;
        assert!((share - 0.3).abs() < 3.0 * (0.3 * 0.7 / n as f64).sqrt() + 1e-12, "{share}");
    }
}

fn fresh_cycles(obs: &[CycleObservation]) -> Vec<&CycleObservation> {
    obs.iter().filter(|c| c.carried_over == 0).collect()
}

#[test]
fn end_of_red_queues_are_poisson_and_independent() {
    let config = scenario(&[0.7, 0.15, 0.15], 0.5, 0.5, 300.0, 360.0 * 5000.0, 3);
    let trace = run_simulation(&config).unwrap();
    let cycles = fresh_cycles(&trace.cycles);
    assert!(cycles.len() >= 2000);
    let lane = |i: usize| cycles.iter().map(move |c| c.true_queues[i] as f64);
    let stats: Vec<(f64, f64, usize)> = (0..3).map(|i| mean_and_variance(lane(i))).collect();
    for (mean, var, _) in &stats {
        let dispersion = var / mean;
        assert!((0.9..=1.1).contains(&dispersion), "variance/mean = {dispersion}");
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let n = cycles.len() as f64;
        let cov = lane(i)
            .zip(lane(j))
            .map(|(x, y)| (x - stats[i].0) * (y - stats[j].0))
            .sum::<f64>()
            / (n - 1.0);
        let r = cov / (stats[i].1 * stats[j].1).sqrt();
        assert!(r.abs() < 0.05, "corr({i}, {j}) = {r}");
    }
}

#[test]
fn probes_are_a_thinned_share_of_the_queue() {
    let config = scenario(&[0.1, 0.8, 0.1], 0.75, 0.4, 120.0, 180.0 * 3000.0, 5);
    let trace = run_simulation(&config).unwrap();
    let (mut probes, mut total) = (0u64, 0u64);
    for c in &trace.cycles {
        probes += c.probe_queues.iter().map(|&x| x as u64).sum::<u64>();
        total += c.true_queues.iter().map(|&x| x as u64).sum::<u64>();
        assert_eq!(c.x_p, c.probe_queues.iter().sum::<u32>());
        assert_eq!(c.queued_probes.len() as u32, c.x_p);
        for (lane, (&p, &q)) in c.probe_queues.iter().zip(&c.true_queues).enumerate() {
            assert!(p <= q, "lane {lane}");
        }
        assert_eq!(c.m == 0, c.x_p == 0);
    }
    let share = probes as f64 / total as f64;
    assert!((share - 0.4).abs() < 3.0 * (0.24 / total as f64).sqrt(), "{share}");
}

#[test]
fn vehicles_are_conserved() {
    for seed in 0..5 {
        let config = scenario(&[0.1, 0.8, 0.1], 0.9, 0.5, 120.0, 20_000.0, seed);
        let trace = run_simulation(&config).unwrap();
        assert_eq!(trace.arrivals, trace.departures + trace.in_system);
        assert!(trace.arrivals > 0);
    }
}

#[test]
fn runs_are_reproducible_per_seed() {
    let config = scenario(&[0.7, 0.15, 0.15], 0.5, 0.5, 300.0, 9000.0, 42);
    let a = run_simulation(&config).unwrap();
    let b = run_simulation(&config).unwrap();
    assert_eq!(a, b);
    let c = run_simulation(&lanequeue::sim::ScenarioConfig { seed: 43, ..config }).unwrap();
    assert_ne!(a.cycles, c.cycles);
}

#[test]
fn cycle_table_round_trips_through_csv() {
    let config = scenario(&[0.1, 0.8, 0.1], 0.75, 0.5, 120.0, 9000.0, 8);
    let trace = run_simulation(&config).unwrap();
    let mut buf = Vec::new();
    write_cycles_csv(&trace, &mut buf).unwrap();
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["cycle", "A", "B", "C", "A_p", "B_p", "C_p", "m", "x_p", "overflow"]
    );
    let rows: Vec<Vec<u64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), trace.cycles.len());
    for (row, c) in rows.iter().zip(&trace.cycles) {
        let mut want = vec![c.cycle_index as u64];
        want.extend(c.true_queues.iter().map(|&x| x as u64));
        want.extend(c.probe_queues.iter().map(|&x| x as u64));
        want.extend([c.m as u64, c.x_p as u64, u64::from(c.overflow)]);
        assert_eq!(row, &want);
    }

    let mut buf = Vec::new();
    write_exits_csv(&trace, &mut buf).unwrap();
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    let exits: Vec<_> = trace.cycles.iter().flat_map(|c| &c.probe_exits).collect();
    let mut n = 0;
    for (rec, e) in rdr.records().zip(&exits) {
        let rec = rec.unwrap();
        assert_eq!(rec[1].parse::<u64>().unwrap(), e.id);
        assert_eq!(rec[2].parse::<usize>().unwrap(), e.dest + 1);
        assert!((rec[3].parse::<f64>().unwrap() - e.t_e).abs() <= 5e-4);
        n += 1;
    }
    assert_eq!(n, exits.len());
}
