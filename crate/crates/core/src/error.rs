use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("infeasible topology: destination road {road} has positive turn ratio but no permitted lane")]
    InfeasibleTopology { road: usize },

    #[error("invalid turn ratios: {0}")]
    InvalidRatios(String),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("negative arrival rate {0}")]
    NegativeRate(f64),

    #[error("assignment solver did not converge after {iterations} iterations")]
    SolverFailure { iterations: usize },

    #[error("trace has no probe exits")]
    NoProbeExits,

    #[error("penetration ratio is zero")]
    ZeroPenetration,

    #[error("observed destination road {road} has zero turn ratio in the assignment matrix")]
    ZeroColumn { road: usize },

    #[error("degenerate observation (m = {m}, x_p = {x_p}): no probe in the queue")]
    DegenerateObservation { m: u32, x_p: u32 },

    #[error("inconsistent observation: last-probe position {m} is below the probe count {probes}")]
    InconsistentObservation { m: u32, probes: u32 },

    #[error("distribution has no mass on its truncated support")]
    EmptySupport,

    #[error("at least three lanes are required, got {0}")]
    TooFewLanes(usize),

    #[error("missing estimate for window starting at lane {0}")]
    MissingWindow(usize),

    #[error("length mismatch: {estimates} estimates against {truths} truths")]
    LengthMismatch { estimates: usize, truths: usize },

    #[error("empty series")]
    Empty,

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("{source} (p = {p}, replication {replication})")]
    Replication {
        p: f64,
        replication: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for errors caused by the user's configuration rather than by a run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::InvalidRatios(_)
                | Error::InvalidTopology(_)
                | Error::InfeasibleTopology { .. }
                | Error::InvalidScenario(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
