//! Command-line front end: simulate, estimate, run experiments, solve `W`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lanequeue::assignment::{lane_arrival_rates, solve_assignment_with_report};
use lanequeue::estimators::estimate_primary;
use lanequeue::harness::{load_config, run_experiment, write_outputs, EstimatorKind, ExperimentSpec};
use lanequeue::nlane::estimate_cycle_nlane;
use lanequeue::par::Execution;
use lanequeue::pipeline::{estimate_cycle, EstimationContext, QueueEstimator};
use lanequeue::sim::{run_simulation, write_cycles_csv, write_exits_csv, CycleObservation, ScenarioConfig};
use lanequeue::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "lanequeue", version, about = "Queue-length estimation from probe vehicle data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one run and dump the per-cycle trace.
    Simulate(Common),
    /// Simulate one run and write per-cycle estimates next to the truth.
    Estimate(Common),
    /// Run the replicated experiment over the p grid.
    Experiment(Common),
    /// Solve and print the lane-assignment matrix.
    Assignment(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Comma-separated penetration ratios, overriding the configuration.
    /// `simulate` and `estimate` use the first value.
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<f64>>,
    /// Replications per grid point, overriding the configuration.
    #[arg(long)]
    replications: Option<usize>,
    /// Feed the true parameters to the queue estimators.
    #[arg(long)]
    oracle_params: bool,
    /// Run replications on one thread.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn spec(&self) -> Result<ExperimentSpec, Error> {
        let mut spec = load_config(&self.config)?;
        if let Some(seed) = self.seed {
            spec.scenario.seed = seed;
        }
        if let Some(grid) = &self.p_grid {
            spec.p_grid = grid.clone();
            spec.scenario.p = grid.first().copied().unwrap_or(spec.scenario.p);
        }
        if let Some(r) = self.replications {
            spec.replications = r;
        }
        spec.oracle_params |= self.oracle_params;
        spec.validate()?;
        Ok(spec)
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Estimate(c) => estimate(c),
        Command::Experiment(c) => experiment(c),
        Command::Assignment(c) => assignment(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::from(EXIT_RUNTIME)
            }
        }
    }
}

fn create(dir: &std::path::Path, name: &str) -> Result<BufWriter<File>, Error> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn warn_if_oversaturated(scenario: &ScenarioConfig) -> Result<(), Error> {
    let w = scenario.assignment()?;
    if !scenario.is_undersaturated(&w) {
        eprintln!(
            "warning: busiest lane receives {:.2} times what one green discharges; expect overflow cycles",
            scenario.saturation_ratio(&w)
        );
    }
    Ok(())
}

fn simulate(c: &Common) -> Result<(), Error> {
    let spec = c.spec()?;
    warn_if_oversaturated(&spec.scenario)?;
    let trace = run_simulation(&spec.scenario)?;
    write_cycles_csv(&trace, create(&c.out_dir, "trace_cycles.csv")?)?;
    write_exits_csv(&trace, create(&c.out_dir, "trace_exits.csv")?)?;
    println!(
        "{} cycles, {} arrivals, {} departures, {} overflow cycles -> {}",
        trace.cycles.len(),
        trace.arrivals,
        trace.departures,
        trace.overflow_cycles(),
        c.out_dir.display()
    );
    Ok(())
}

fn estimate(c: &Common) -> Result<(), Error> {
    let spec = c.spec()?;
    let scenario = &spec.scenario;
    warn_if_oversaturated(scenario)?;
    let trace = run_simulation(scenario)?;
    let red_s = scenario.timing.red_s();
    let clean: Vec<&CycleObservation> = trace.clean_cycles().collect();
    let primary = estimate_primary(&trace.cycles, &clean, &scenario.topology, scenario.q_sat, red_s)?;
    println!(
        "p_hat = {:.4} (raw {:.4}), lambda_hat = {:.4}, rho_hat = {:?}",
        primary.p_hat, primary.p_hat_raw, primary.lambda_hat, primary.rho_hat
    );

    let true_rates = lane_arrival_rates(&trace.assignment, scenario.lambda)?;
    let (w, rates, p) = if spec.oracle_params {
        (&trace.assignment, true_rates.as_slice(), scenario.p)
    } else {
        (&primary.w_hat, primary.lane_rates_hat.as_slice(), primary.p_hat)
    };
    let ctx = EstimationContext {
        topology: &scenario.topology,
        w,
        lane_rates: rates,
        p,
        red_s,
    };
    let n = trace.n_lanes();
    let mut wtr = csv::Writer::from_writer(create(&c.out_dir, "estimates.csv")?);
    let mut header = vec!["cycle".to_string(), "lane".to_string(), "queue".to_string(), "probes".to_string()];
    header.extend(["E0", "E1"].map(String::from));
    header.extend(QueueEstimator::ALL.iter().map(|q| q.name().to_string()));
    wtr.write_record(&header)?;
    for obs in &clean {
        let (e0, e1, queues): (Vec<u32>, Vec<u32>, Vec<Vec<f64>>) = if n == 3 {
            let est = estimate_cycle(&ctx, obs)?;
            let q = QueueEstimator::ALL.iter().map(|&e| est.queues.get(e).to_vec()).collect();
            (est.e0.rounded, est.e1.rounded, q)
        } else {
            let est = estimate_cycle_nlane(&ctx, obs)?;
            let q = QueueEstimator::ALL.iter().map(|&e| est.get(e).per_lane.clone()).collect();
            (est.e0.rounded, est.e1.rounded, q)
        };
        for lane in 0..n {
            let mut row = vec![
                obs.cycle_index.to_string(),
                lanequeue::harness::output::lane_name(lane),
                obs.true_queues[lane].to_string(),
                obs.probe_queues[lane].to_string(),
                e0[lane].to_string(),
                e1[lane].to_string(),
            ];
            row.extend(queues.iter().map(|q| q[lane].to_string()));
            wtr.write_record(&row)?;
        }
    }
    wtr.flush()?;
    println!(
        "{} clean cycles ({} overflow) -> {}",
        clean.len(),
        trace.overflow_cycles(),
        c.out_dir.join("estimates.csv").display()
    );
    Ok(())
}

fn experiment(c: &Common) -> Result<(), Error> {
    let spec = c.spec()?;
    warn_if_oversaturated(&spec.scenario)?;
    let result = run_experiment(&spec, c.execution())?;
    let written = write_outputs(&result, &c.out_dir)?;

    let mut out = std::io::stdout().lock();
    let table = result.mae_table();
    let lanes = result.n_lanes();
    for kind in EstimatorKind::ALL.into_iter().filter(|&k| spec.selects(k) && (k.is_queue() || k.is_probe_count())) {
        for &p in &spec.p_grid {
            let maes: Vec<String> = (0..lanes)
                .map(|l| format!("{:.3}", table.get(kind, l, p).unwrap_or(f64::NAN)))
                .collect();
            writeln!(out, "{:<10} p={p:<5} mae per lane: {}", kind.name(), maes.join(" "))?;
        }
    }
    if spec.selects(EstimatorKind::PHat) {
        for (p, mean, err) in result.p_hat_summary() {
            writeln!(out, "p-hat      p={p:<5} mean {mean:.4} abs error {err:.4}")?;
        }
    }
    if spec.selects(EstimatorKind::LambdaHat) {
        for (p, mean, err) in result.lambda_hat_summary() {
            writeln!(out, "lambda-hat p={p:<5} mean {mean:.4} abs error {err:.4}")?;
        }
    }
    let overflow: usize = result.runs.iter().map(|r| r.overflow_cycles).sum();
    let cycles: usize = result.runs.iter().map(|r| r.cycles).sum();
    writeln!(out, "{overflow} of {cycles} cycles flagged for overflow and excluded")?;
    for path in written {
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

fn assignment(c: &Common) -> Result<(), Error> {
    let spec = c.spec()?;
    let (w, report) = solve_assignment_with_report(&spec.scenario.topology, &spec.scenario.rho)?;
    let mut wtr = csv::Writer::from_writer(create(&c.out_dir, "assignment.csv")?);
    let d = w.n_roads();
    let mut header = vec!["lane".to_string()];
    header.extend((1..=d).map(|j| format!("road_{j}")));
    header.push("w_i".into());
    wtr.write_record(&header)?;
    let weights = w.lane_weights();
    let mut out = std::io::stdout().lock();
    for lane in 0..w.n_lanes() {
        let mut row = vec![lanequeue::harness::output::lane_name(lane)];
        row.extend(w.row(lane).iter().map(f64::to_string));
        row.push(weights[lane].to_string());
        wtr.write_record(&row)?;
        let cells: Vec<String> = w.row(lane).iter().map(|x| format!("{x:.4}")).collect();
        writeln!(out, "lane {}: {}  w_i = {:.4}", lanequeue::harness::output::lane_name(lane), cells.join(" "), weights[lane])?;
    }
    wtr.flush()?;
    writeln!(out, "solved in {} iterations, KKT residual {:.1e}", report.iterations, report.kkt_residual)?;
    Ok(())
}
