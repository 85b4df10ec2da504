use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate geometry: source {src} and destination {dst} coincide")]
    DegenerateGeometry { src: usize, dst: usize },

    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NonHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch { context: &'static str, expected: String, got: String },

    #[error("rank-deficient composite ({0}); re-initialize the phases at random")]
    RankDeficient(&'static str),

    #[error("singular correlation matrix ({0})")]
    SingularCorrelation(&'static str),

    #[error("layer index {index} out of range 1..={count}")]
    LayerOutOfRange { index: usize, count: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
