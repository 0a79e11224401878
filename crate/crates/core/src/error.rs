use thiserror::Error;

/// Errors raised by the model, geometry, oracle and sampler layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("site {site} outside the window [-{l}, {l}]")]
    SiteOutOfRange { site: isize, l: usize },

    #[error("spin sequence has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },

    #[error("malformed spin line: unexpected character {0:?}")]
    BadSpinChar(char),

    #[error("intervals are not disjoint, ordered and inside the window: {0}")]
    BadIntervals(String),

    #[error("inconsistent triangle family: {0}")]
    InconsistentFamily(String),

    #[error("incompatible external triangles: {0}")]
    IncompatibleExternals(String),

    #[error("|m| = {m} must be smaller than m_beta = {m_beta}")]
    MagnetizationOutOfRange { m: f64, m_beta: f64 },

    #[error("rho = {0} is not a multiple of 1/|Lambda|")]
    InfeasibleRho(f64),

    #[error("volume too large for exhaustive enumeration: {what} (limit {limit})")]
    TooLarge { what: String, limit: usize },

    #[error("conditioning event has zero probability: {0}")]
    EmptyEvent(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
