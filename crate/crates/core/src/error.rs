use thiserror::Error;

/// Errors produced by belief arithmetic, attainability queries, envelope
/// computations and the simulators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid state space: {0}")]
    InvalidStateSpace(String),

    #[error("message has zero probability under the prior; supply an off-path belief")]
    ZeroProbabilityMessage,

    #[error("belief is not absolutely continuous with respect to the prior (state {0})")]
    NotAbsolutelyContinuous(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state space has no numeric state values")]
    MissingStateValues,

    #[error("state space too large for subset enumeration: {0} states (max {max})", max = crate::attainable::MAX_ENUMERATED_STATES)]
    StateSpaceTooLarge(usize),

    #[error("degenerate prior {0}: must lie strictly inside (0, 1)")]
    DegeneratePrior(f64),

    #[error("fraction {0} outside its admissible range")]
    InvalidFraction(f64),

    #[error("operation requires a binary state space, game has {0} states")]
    NonBinaryStateSpace(usize),

    #[error("game `{0}` has no per-receiver sender utility")]
    NonSeparableGame(&'static str),

    #[error("belief is not attainable: {0}")]
    NotAttainable(String),

    #[error("audience mismatch: strategy built for {strategy} receivers, game has {game}")]
    AudienceMismatch { strategy: usize, game: usize },

    #[error("length mismatch: expected {expected} actions, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("incentive check failed for n = {0}")]
    IncentiveCheckFailed(usize),

    #[error("unsupported game for this command: {0}")]
    UnsupportedGame(String),

    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
