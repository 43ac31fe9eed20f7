use crate::rational::Rational;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("metric violation on triple ({a}, {b}, {c}): c({a},{c}) = {direct} exceeds c({a},{b}) + c({b},{c}) = {detour}")]
    MetricViolation {
        a: usize,
        b: usize,
        c: usize,
        direct: Rational,
        detour: Rational,
    },

    #[error("support graph is disconnected")]
    Disconnected,

    #[error("gamma must lie in [0, 1/2], got {0}")]
    GammaOutOfRange(Rational),

    #[error("narrow cuts cross: {0}")]
    ChainViolation(String),

    #[error("common denominator {k} exceeds the configured cap {cap}")]
    DenominatorCap { k: String, cap: u64 },

    #[error("matroid partition failed; violating edge set {0:?}")]
    PartitionFailed(Vec<usize>),

    #[error("parity set has odd size {0}")]
    OddParitySet(usize),

    #[error("|T| = {size} exceeds the matching cap {cap}")]
    MatchingCap { size: usize, cap: usize },

    #[error("no T-join exists in the given graph")]
    NoJoin,

    #[error("exact search limited to n <= {cap}, got {n}")]
    BruteForceCap { n: usize, cap: usize },

    #[error("unknown variable {0:?}")]
    UnknownVariable(String),

    #[error("restricted basis family is empty")]
    EmptyRestriction,

    #[error("multigraph is not an s-t tour: {0}")]
    NotAnStTour(String),

    #[error("assertion failed: {0}")]
    Assertion(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by bad user input rather than by a failed internal check.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse(_)
                | Error::InvalidInstance(_)
                | Error::MetricViolation { .. }
                | Error::Disconnected
                | Error::GammaOutOfRange(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
