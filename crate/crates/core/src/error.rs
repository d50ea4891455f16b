use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid power alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("conflict-graph capacity needs a binary configuration, link {link} is at level {level}")]
    NonBinary { link: usize, level: u8 },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid rate table: {0}")]
    InvalidRateTable(String),

    #[error("invalid neighbor sets: {0}")]
    InvalidNeighbors(String),

    #[error("configurations must differ only at link {link}, but also differ at {others:?}")]
    NotSingleCoordinate { link: usize, others: Vec<usize> },

    #[error("no bound entry for proposer {i}, neighbor {j}, transition {from}->{to}")]
    MissingBound {
        i: usize,
        j: usize,
        from: u8,
        to: u8,
    },

    #[error("invalid bound value {value} for ({i}, {j}, {from}->{to}): {reason}")]
    InvalidBound {
        i: usize,
        j: usize,
        from: u8,
        to: u8,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid drop model: {0}")]
    InvalidDropModel(String),

    #[error("invalid cooling schedule: {0}")]
    InvalidSchedule(String),

    #[error("a proposal needs at least two power levels")]
    SingleLevelAlphabet,

    #[error("RSA needs a bound table")]
    MissingBounds,

    #[error("state space of {size} configurations exceeds the cap of {cap} (raise it with --cap)")]
    StateSpaceTooLarge { size: u128, cap: usize },

    #[error("link {link} has {size} neighbors, subset enumeration is capped at {cap}")]
    SubsetCapExceeded { link: usize, size: usize, cap: usize },

    #[error("exact analysis needs truncated interference so that neighbor-local differentials are exact")]
    FullInterference,

    #[error("chain is reducible: state {from} cannot reach state {to}")]
    Reducible { from: usize, to: usize },

    #[error("chain is periodic with period {0}")]
    Periodic(usize),

    #[error("insufficient data: need {needed} samples, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("stale weight bound violated at slot {t}: observer {observer} bounds link {neighbor} by {bound}, true weight is {actual}")]
    StaleBoundViolated {
        t: u64,
        observer: usize,
        neighbor: usize,
        bound: f64,
        actual: f64,
    },

    #[error("{path}: {message}")]
    Scenario { path: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unknown sweep axis `{0}` (expected one of p, arrival, beta, d, cmax, seed)")]
    UnknownAxis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn scenario(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scenario {
            path: path.into(),
            message: message.into(),
        }
    }
}
