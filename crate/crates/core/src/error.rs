use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not Hermitian (asymmetry {asymmetry:e})")]
    NonHermitian { asymmetry: f64 },

    #[error("state factor has vanishing norm")]
    DegenerateFactor,

    #[error("invalid {what}: {reason}")]
    InvalidValue { what: &'static str, reason: String },

    #[error("no trials recorded for setting x={x}, y={y}")]
    EmptySetting { x: usize, y: usize },

    #[error("parameter vector has length {got}, chart expects {expected}")]
    ChartMismatch { expected: usize, got: usize },

    #[error("classical-to-quantum embedding needs latent cardinality 4, got {0}")]
    UnsupportedCardinality(usize),

    #[error("behavior lies outside the steerable two-qubit region used by the embedding")]
    NotEmbeddable,

    #[error("tuning search could not bracket target {target}")]
    UnreachableTarget { target: f64 },

    #[error("a study needs at least {min} seeds, got {got}")]
    TooFewSeeds { min: usize, got: usize },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidValue {
            what,
            reason: reason.into(),
        }
    }
}
