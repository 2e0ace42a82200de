use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown objective `{0}`")]
    UnknownObjective(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// `alpha * M >= 1` (or a diagonal variant of that bound).
    #[error("step size {alpha} violates alpha < {bound}")]
    StepSizeTooLarge { alpha: f64, bound: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite gradient component {coord}")]
    NonFiniteGradient { coord: usize },

    #[error("could not bracket the inverse of coordinate {coord}")]
    BracketFailure { coord: usize },

    #[error("iterate left the working region (radius {radius}) at t = {t}")]
    RegionExit { t: i64, radius: f64 },

    #[error("factor for coordinate {coord} is singular: |1 - alpha*H_ii| = {gap:e}")]
    SingularFactor { coord: usize, gap: f64 },

    #[error("critical point is numerically degenerate: {0}")]
    Degenerate(String),

    #[error("only {usable} usable points, need at least {needed}")]
    TooFewPoints { usable: usize, needed: usize },

    #[error("R diagonal underflow at step {step}; reduce the reorthogonalization interval")]
    Underflow { step: usize },

    #[error("empty feasible set: {0}")]
    EmptyFeasibleSet(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors caused by caller-supplied values that break a documented
    /// precondition, as opposed to runtime or numerical failures.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::StepSizeTooLarge { .. }
                | Error::Precondition(_)
                | Error::InvalidParameter(_)
                | Error::DimensionMismatch { .. }
        )
    }

    /// Malformed configuration: unparsable text, unknown keys or names.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::UnknownObjective(_))
    }
}
