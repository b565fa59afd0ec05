use thiserror::Error;

/// Errors raised by the channel, game and population routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("empty subset has no capacity")]
    EmptySubset,

    #[error("user {user} is not a member of subset {subset}")]
    UserNotInSubset { user: usize, subset: String },

    #[error("user index {user} out of range for {users} users")]
    UserOutOfRange { user: usize, users: usize },

    #[error("dimension mismatch: expected {expected} rates, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{users} users exceeds the supported maximum of {max} for {what}")]
    TooManyUsers { users: usize, max: usize, what: &'static str },

    #[error("coalition enumeration too large: {users} users (max 6)")]
    CoalitionTooLarge { users: usize },

    #[error("no feasible action set: opponents' rates violate the capacity region")]
    NoFeasibleActionSet,

    #[error("degenerate face: no feasible sample after {draws} draws")]
    DegenerateFace { draws: usize },

    #[error("invalid utility: {0}")]
    InvalidUtility(String),

    #[error("utility is not strictly concave: {0}")]
    NotStrictlyConcave(String),

    #[error("bisection bracket failure: total rate {low_sum} at c={low} and {high_sum} at c={high}, target {target}")]
    BracketFailure {
        low: f64,
        high: f64,
        low_sum: f64,
        high_sum: f64,
        target: f64,
    },

    #[error("certificate requires interior point (minimum slack {slack:e})")]
    NotInterior { slack: f64 },

    #[error("model is not symmetric: {0}")]
    AsymmetricModel(&'static str),

    #[error("invalid population state: {0}")]
    InvalidState(String),

    #[error("exact enumeration too large ({cells} cells); use the Monte Carlo method")]
    ExactTooLarge { cells: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step size too large: non-finite mass after step")]
    StepTooLarge,
}

pub type Result<T> = std::result::Result<T, Error>;
