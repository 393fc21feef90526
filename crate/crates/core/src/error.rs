use thiserror::Error;

/// Failures surfaced by the engine.
///
/// Variants fall in two families: problems with the input (`Parse`,
/// `Validation`, `Unsupported`, `Precondition`, `NotRegularValue`, `Io`)
/// and numerical or mathematical-consistency failures discovered while
/// computing (everything else). [`MorseError::is_numerical`] tells them apart.
#[derive(Debug, Error)]
pub enum MorseError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate critical point at {location:?}: eigenvalue {eigenvalue:e}")]
    DegenerateCriticalPoint { location: Vec<f64>, eigenvalue: f64 },

    #[error("non-finite input or value: {0}")]
    NonFinite(String),

    #[error("step size underflow at t = {t:e} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("singular metric at {0:?}")]
    SingularMetric(Vec<f64>),

    #[error("transversality suspect: {0}")]
    TransversalitySuspect(String),

    #[error("stratification failure: {0}")]
    Stratification(String),

    #[error("boundary composition is nonzero: {0}")]
    SignConsistency(String),

    #[error("normalization radius too large: {reason}; try epsilon <= {suggested:e}")]
    ShrinkRadius { reason: String, suggested: f64 },

    #[error("{0} is not a regular value")]
    NotRegularValue(f64),

    #[error("integer overflow in {0}")]
    Overflow(&'static str),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl MorseError {
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            MorseError::Parse(_)
                | MorseError::Validation(_)
                | MorseError::Unsupported(_)
                | MorseError::Precondition(_)
                | MorseError::NotRegularValue(_)
                | MorseError::Io(_)
        )
    }
}

impl From<serde_json::Error> for MorseError {
    fn from(err: serde_json::Error) -> Self {
        MorseError::Parse(err.to_string())
    }
}

pub type Result<T, E = MorseError> = std::result::Result<T, E>;
