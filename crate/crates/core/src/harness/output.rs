//! CSV outputs of an experiment.
//!
//! Floats are written in Rust's shortest round-trip form, so parsing a
//! field back yields the same `f64`. Lanes are labelled `a`, `b`, `c`, ...
//! and roads are 1-based.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::harness::config::EstimatorKind;
use crate::harness::experiment::ExperimentResult;
use crate::Result;

pub const MAE_CSV: &str = "mae.csv";
pub const PRIMARY_CSV: &str = "primary.csv";
pub const REPORT_CSV: &str = "report.csv";
pub const FIG_PENETRATION_CSV: &str = "fig_penetration.csv";
pub const FIG_PROBE_COUNTS_CSV: &str = "fig_probe_counts.csv";
pub const FIG_QUEUES_CSV: &str = "fig_queues.csv";

pub fn lane_name(lane: usize) -> String {
    if lane < 26 {
        ((b'a' + lane as u8) as char).to_string()
    } else {
        format!("lane{lane}")
    }
}

/// `estimator, lane, p, mae, replications, horizon_s, cycles, excluded_cycles`.
pub fn write_mae_csv<W: Write>(result: &ExperimentResult, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record([
        "estimator",
        "lane",
        "p",
        "mae",
        "replications",
        "horizon_s",
        "cycles",
        "excluded_cycles",
    ])?;
    for r in result.mae_table().rows {
        wtr.write_record([
            r.estimator.name().to_string(),
            lane_name(r.lane),
            r.p.to_string(),
            r.mae.to_string(),
            r.replications.to_string(),
            r.horizon_s.to_string(),
            r.cycles.to_string(),
            r.excluded_cycles.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// `p_true, replication, p_hat, p_hat_raw, lambda_hat, rho_hat_1..d`.
pub fn write_primary_csv<W: Write>(result: &ExperimentResult, out: W) -> Result<()> {
    let d = result.spec.scenario.topology.n_roads();
    let mut wtr = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["p_true", "replication", "p_hat", "p_hat_raw", "lambda_hat"]
        .map(String::from)
        .to_vec();
    header.extend((1..=d).map(|j| format!("rho_hat_{j}")));
    wtr.write_record(&header)?;
    for r in &result.runs {
        let mut row = vec![
            r.p.to_string(),
            r.replication.to_string(),
            r.primary.p_hat.to_string(),
            r.primary.p_hat_raw.to_string(),
            r.primary.lambda_hat.to_string(),
        ];
        row.extend(r.primary.rho_hat.iter().map(f64::to_string));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// One row per `(p, replication)`: primary estimates next to their truths and
/// the per-lane MAE of E0 and E1 within that replication.
pub fn write_report_csv<W: Write>(result: &ExperimentResult, out: W) -> Result<()> {
    let d = result.spec.scenario.topology.n_roads();
    let n = result.n_lanes();
    let mut wtr = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["scenario", "p_true", "replication", "p_hat", "lambda_true", "lambda_hat"]
        .map(String::from)
        .to_vec();
    header.extend((1..=d).map(|j| format!("rho_hat_{j}")));
    for kind in [EstimatorKind::E0, EstimatorKind::E1] {
        header.extend((0..n).map(|l| format!("mae_{}_{}", kind.name(), lane_name(l))));
    }
    header.extend(["cycles", "overflow_cycles", "fallbacks"].map(String::from));
    wtr.write_record(&header)?;
    for r in &result.runs {
        let mut row = vec![
            result.spec.name.clone(),
            r.p.to_string(),
            r.replication.to_string(),
            r.primary.p_hat.to_string(),
            r.lambda_true.to_string(),
            r.primary.lambda_hat.to_string(),
        ];
        row.extend(r.primary.rho_hat.iter().map(f64::to_string));
        for kind in [EstimatorKind::E0, EstimatorKind::E1] {
            for lane in 0..n {
                row.push(r.lane_mae(kind, lane).map_or_else(String::new, |v| v.to_string()));
            }
        }
        row.push(r.cycles.to_string());
        row.push(r.overflow_cycles.to_string());
        row.push(r.fallbacks.to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// `p, p_hat_mean, abs_error` for the penetration-ratio figure.
pub fn write_fig_penetration_csv<W: Write>(result: &ExperimentResult, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["p", "p_hat_mean", "abs_error"])?;
    for (p, mean, err) in result.p_hat_summary() {
        wtr.write_record([p.to_string(), mean.to_string(), err.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// `estimator, lane, p, mae` restricted to the estimators matching `keep`.
fn write_fig_mae<W: Write>(result: &ExperimentResult, out: W, keep: impl Fn(EstimatorKind) -> bool) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["estimator", "lane", "p", "mae"])?;
    for r in result.mae_table().rows.into_iter().filter(|r| keep(r.estimator)) {
        wtr.write_record([r.estimator.name().to_string(), lane_name(r.lane), r.p.to_string(), r.mae.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_fig_probe_counts_csv<W: Write>(result: &ExperimentResult, out: W) -> Result<()> {
    write_fig_mae(result, out, EstimatorKind::is_probe_count)
}

pub fn write_fig_queues_csv<W: Write>(result: &ExperimentResult, out: W) -> Result<()> {
    write_fig_mae(result, out, EstimatorKind::is_queue)
}

/// Writes every output file into `dir`, creating it if needed, and returns
/// the paths written.
pub fn write_outputs(result: &ExperimentResult, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    type Writer = fn(&ExperimentResult, BufWriter<File>) -> Result<()>;
    let mut files: Vec<(&str, Writer)> = vec![
        (PRIMARY_CSV, write_primary_csv),
        (REPORT_CSV, write_report_csv),
    ];
    let spec = &result.spec;
    if EstimatorKind::ALL.iter().any(|&k| (k.is_queue() || k.is_probe_count()) && spec.selects(k)) {
        files.push((MAE_CSV, write_mae_csv));
    }
    if spec.selects(EstimatorKind::PHat) {
        files.push((FIG_PENETRATION_CSV, write_fig_penetration_csv));
    }
    if spec.selects(EstimatorKind::E0) || spec.selects(EstimatorKind::E1) {
        files.push((FIG_PROBE_COUNTS_CSV, write_fig_probe_counts_csv));
    }
    if EstimatorKind::ALL.iter().any(|&k| k.is_queue() && spec.selects(k)) {
        files.push((FIG_QUEUES_CSV, write_fig_queues_csv));
    }
    let mut written = Vec::new();
    for (name, write) in files {
        let path = dir.join(name);
        write(result, BufWriter::new(File::create(&path)?))?;
        written.push(path);
    }
    Ok(written)
}
