//! Experiment configuration files.
//!
//! A configuration is a small TOML document with three sections:
//!
//! ```toml
//! [scenario]
//! name = "s1"
//! lanes = 3
//! turn_ratios = [0.1, 0.8, 0.1]
//! lambda = 0.75
//! p = 0.5
//! q_sat = 0.5
//! seed = 1
//!
//! [signal]
//! red_s = 60
//! green_s = 120
//!
//! [experiment]
//! p_grid = [0.2, 0.5, 0.8]
//! replications = 10
//! horizon_s = 9000
//! estimators = ["prop1", "prop2"]
//! oracle_params = false
//! ```
//!
//! Every key is optional except `turn_ratios` and `lambda`. Lanes and roads
//! default to the turning-lane layout (left turns from the leftmost lane,
//! right turns from the rightmost, straight from any); `forbidden` lists
//! extra 1-based `[lane, road]` pairs to disconnect.

use std::path::Path;

use serde::Deserialize;

use crate::assignment::{JunctionTopology, TurnRatios};
use crate::sim::{ScenarioConfig, SignalTiming};
use crate::{Error, Result};

pub const DEFAULT_RED_S: f64 = 60.0;
pub const DEFAULT_GREEN_S: f64 = 40.0;
pub const DEFAULT_Q_SAT: f64 = 0.5;
pub const DEFAULT_HORIZON_S: f64 = 9000.0;
pub const DEFAULT_REPLICATIONS: usize = 10;
pub const DEFAULT_SEED: u64 = 1;

/// Quantities an experiment can report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    MBaseline,
    Prop1,
    Prop2,
    Prop3,
    E0,
    E1,
    PHat,
    LambdaHat,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 8] = [
        Self::MBaseline,
        Self::Prop1,
        Self::Prop2,
        Self::Prop3,
        Self::E0,
        Self::E1,
        Self::PHat,
        Self::LambdaHat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::MBaseline => "m-baseline",
            Self::Prop1 => "prop1",
            Self::Prop2 => "prop2",
            Self::Prop3 => "prop3",
            Self::E0 => "E0",
            Self::E1 => "E1",
            Self::PHat => "p-hat",
            Self::LambdaHat => "lambda-hat",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(name))
    }

    /// Queue-length estimators, compared against true queues.
    pub fn is_queue(self) -> bool {
        matches!(self, Self::MBaseline | Self::Prop1 | Self::Prop2 | Self::Prop3)
    }

    /// Probe-count estimators, compared against true probe counts.
    pub fn is_probe_count(self) -> bool {
        matches!(self, Self::E0 | Self::E1)
    }
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    /// Template scenario; `p` is replaced by each grid value.
    pub scenario: ScenarioConfig,
    pub p_grid: Vec<f64>,
    pub replications: usize,
    pub estimators: Vec<EstimatorKind>,
    /// Evaluate the queue estimators with the true parameters instead of
    /// the estimated ones.
    pub oracle_params: bool,
}

impl ExperimentSpec {
    pub fn horizon_s(&self) -> f64 {
        self.scenario.horizon_s
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario
            .validate()
            .map_err(|e| Error::Validation(e.to_string()))?;
        if self.p_grid.is_empty() {
            return Err(Error::Validation("p_grid must not be empty".into()));
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::Validation(format!("p_grid value {p} is outside (0, 1]")));
        }
        if self.replications == 0 {
            return Err(Error::Validation("replications must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Validation("no estimator selected".into()));
        }
        Ok(())
    }

    pub fn selects(&self, kind: EstimatorKind) -> bool {
        self.estimators.contains(&kind)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: RawScenario,
    #[serde(default)]
    signal: RawSignal,
    #[serde(default)]
    experiment: RawExperiment,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    lanes: Option<usize>,
    roads: Option<usize>,
    forbidden: Option<Vec<[usize; 2]>>,
    turn_ratios: Vec<f64>,
    lambda: f64,
    p: Option<f64>,
    q_sat: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSignal {
    red_s: Option<f64>,
    green_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    p_grid: Option<Vec<f64>>,
    replications: Option<usize>,
    horizon_s: Option<f64>,
    estimators: Option<Vec<String>>,
    oracle_params: Option<bool>,
}

/// Reads and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        Error::Parse {
            line,
            message: e.message().to_string(),
        }
    })?;
    build(raw)
}

fn build(raw: RawConfig) -> Result<ExperimentSpec> {
    let s = raw.scenario;
    let invalid = |e: Error| Error::Validation(e.to_string());
    let lanes = s.lanes.unwrap_or(3);
    let roads = s.roads.unwrap_or(s.turn_ratios.len());
    let base = if roads == 3 {
        JunctionTopology::turning_lanes(lanes).map_err(invalid)?
    } else {
        JunctionTopology::new(lanes, roads, []).map_err(invalid)?
    };
    let mut forbidden: Vec<(usize, usize)> = base.forbidden().collect();
    for [lane, road] in s.forbidden.unwrap_or_default() {
        if lane == 0 || road == 0 {
            return Err(Error::Validation(format!(
                "forbidden pair [{lane}, {road}] must use 1-based indices"
            )));
        }
        forbidden.push((lane - 1, road - 1));
    }
    let topology = JunctionTopology::new(lanes, roads, forbidden).map_err(invalid)?;
    let rho = TurnRatios::new(s.turn_ratios).map_err(invalid)?;
    let timing = SignalTiming::new(
        raw.signal.red_s.unwrap_or(DEFAULT_RED_S),
        raw.signal.green_s.unwrap_or(DEFAULT_GREEN_S),
    )
    .map_err(invalid)?;

    let e = raw.experiment;
    let p_grid = e.p_grid.unwrap_or_else(|| (1..=9).map(|k| k as f64 / 10.0).collect());
    let scenario = ScenarioConfig {
        topology,
        rho,
        lambda: s.lambda,
        p: s.p.unwrap_or(p_grid[0]),
        q_sat: s.q_sat.unwrap_or(DEFAULT_Q_SAT),
        timing,
        horizon_s: e.horizon_s.unwrap_or(DEFAULT_HORIZON_S),
        seed: s.seed.unwrap_or(DEFAULT_SEED),
    };
    let estimators = match e.estimators {
        None => EstimatorKind::ALL.to_vec(),
        Some(names) => names
            .iter()
            .map(|n| EstimatorKind::parse(n).ok_or_else(|| Error::Validation(format!("unknown estimator {n:?}"))))
            .collect::<Result<Vec<_>>>()?,
    };
    let spec = ExperimentSpec {
        name: s.name.unwrap_or_else(|| "scenario".into()),
        scenario,
        p_grid,
        replications: e.replications.unwrap_or(DEFAULT_REPLICATIONS),
        estimators,
        oracle_params: e.oracle_params.unwrap_or(false),
    };
    spec.validate()?;
    Ok(spec)
}
