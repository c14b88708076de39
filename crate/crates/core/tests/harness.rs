mod common;

use common::{bundled, config_path};
use lanequeue::harness::{parse_config, run_experiment, write_outputs, EstimatorKind};
use lanequeue::par::Execution;
use lanequeue::Error;

fn small(name: &str) -> lanequeue::harness::ExperimentSpec {
    let mut spec = bundled(name);
    spec.scenario.horizon_s = 1800.0;
    spec.p_grid = vec![0.3, 0.7];
    spec.replications = 2;
    spec
}

#[test]
fn bundled_configurations() {
    let s1 = bundled("s1");
    assert_eq!(s1.scenario.lambda, 0.75);
    assert_eq!(s1.scenario.rho.as_slice(), [0.1, 0.8, 0.1]);
    let s2 = bundled("s2");
    assert_eq!(s2.scenario.lambda, 0.5);
    assert_eq!(s2.scenario.rho.as_slice(), [0.7, 0.15, 0.15]);
    for spec in [&s1, &s2] {
        let w = spec.scenario.assignment().unwrap();
        assert!(spec.scenario.is_undersaturated(&w));
        assert_eq!(spec.replications, 10);
        assert_eq!(spec.estimators, EstimatorKind::ALL.to_vec());
    }
}

#[test]
fn out_of_range_penetration_is_a_validation_error() {
    let text = std::fs::read_to_string(config_path("s1.cfg")).unwrap().replace("p = 0.5", "p = 1.5");
    assert!(matches!(parse_config(&text), Err(Error::Validation(_))));
}

#[test]
fn outputs_are_byte_identical_per_seed_and_mode() {
    let spec = small("s1");
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let modes = [Execution::Parallel, Execution::Parallel, Execution::Sequential];
    let mut written = Vec::new();
    for (dir, mode) in dirs.iter().zip(modes) {
        let result = run_experiment(&spec, mode).unwrap();
        written.push(write_outputs(&result, dir.path()).unwrap());
    }
    assert!(written[0].len() >= 5);
    for k in 0..written[0].len() {
        let bytes: Vec<Vec<u8>> = written.iter().map(|w| std::fs::read(&w[k]).unwrap()).collect();
        assert_eq!(bytes[0], bytes[1], "{:?}", written[0][k]);
        assert_eq!(bytes[0], bytes[2], "{:?}", written[0][k]);
    }
}

#[test]
fn figure_files_have_one_point_per_grid_value() {
    let spec = small("s2");
    let dir = tempfile::tempdir().unwrap();
    let result = run_experiment(&spec, Execution::default()).unwrap();
    let files = write_outputs(&result, dir.path()).unwrap();
    for (name, kinds) in [("fig_probe_counts.csv", 2), ("fig_queues.csv", 4)] {
        let path = files.iter().find(|p| p.ends_with(name)).expect(name);
        let rows = csv::Reader::from_path(path).unwrap().records().count();
        assert_eq!(rows, kinds * 3 * spec.p_grid.len(), "{name}");
    }
    let path = files.iter().find(|p| p.ends_with("fig_penetration.csv")).unwrap();
    assert_eq!(csv::Reader::from_path(path).unwrap().records().count(), spec.p_grid.len());
}

#[test]
fn empty_road_has_zero_error() {
    let text = std::fs::read_to_string(config_path("s1.cfg"))
        .unwrap()
        .replace("lambda = 0.75", "lambda = 0.0")
        .replace("oracle_params = false", "oracle_params = true")
        .replace("horizon_s = 9000", "horizon_s = 1800")
        .replace("replications = 10", "replications = 2");
    let spec = parse_config(&text).unwrap();
    let table = run_experiment(&spec, Execution::default()).unwrap().mae_table();
    assert!(!table.rows.is_empty());
    for row in &table.rows {
        assert_eq!(row.mae, 0.0, "{row:?}");
    }
}

#[test]
fn queue_estimators_beat_chance_with_true_parameters() {
    let mut spec = small("s1");
    spec.oracle_params = true;
    let table = run_experiment(&spec, Execution::default()).unwrap().mae_table();
    for lane in 0..3 {
        let prior = table.get(EstimatorKind::Prop1, lane, 0.7).unwrap();
        // Poisson(15) mean absolute deviation is about 3.1.
        assert!(prior > 2.0 && prior < 4.5, "{prior}");
    }
}
