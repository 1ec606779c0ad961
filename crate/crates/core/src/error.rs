use thiserror::Error;

/// Errors raised by cone construction, simulation and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} components, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("normal {index} is the zero vector")]
    ZeroVector { index: usize },

    #[error("wall normals are linearly dependent (smallest singular value {sigma_min:e})")]
    DegenerateArrangement { sigma_min: f64 },

    #[error("a cone needs between 1 and dim walls, got {walls} walls in dimension {dim}")]
    WallCount { walls: usize, dim: usize },

    #[error("operation requires exactly {expected} walls, cone has {found}")]
    WrongWallCount { expected: usize, found: usize },

    #[error("operation requires a square arrangement (n = m), got n = {walls}, m = {dim}")]
    NotSquare { walls: usize, dim: usize },

    #[error("invalid billiard state: {0}")]
    InvalidState(String),

    #[error("trajectory and report/cone describe different arrangements")]
    ConeMismatch,

    #[error("need at least {needed} collisions, record has {found}")]
    TooFewEvents { needed: usize, found: usize },

    #[error("collisions {index} and {next} hit the same wall; walls do not alternate", next = .index + 1)]
    Alternation { index: usize },

    #[error("a hard-ball system needs at least two balls, got {0}")]
    TooFewBalls(usize),

    #[error("mass of ball {index} is not positive ({mass})")]
    NonpositiveMass { index: usize, mass: f64 },

    #[error("no well-conditioned cone after {attempts} sampling attempts")]
    DegenerateSampling { attempts: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
