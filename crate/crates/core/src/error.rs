use thiserror::Error;

/// Errors raised while building models, estimators or running trials.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CwcuError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{what} is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { what: &'static str, deviation: f64 },

    #[error("{what} is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemidefinite {
        what: &'static str,
        min_eigenvalue: f64,
    },

    #[error("prior variance of component {component} is not strictly positive ({variance:.3e})")]
    NonPositiveVariance { component: usize, variance: f64 },

    #[error("column {column} of the observation matrix is zero")]
    UnobservableComponent { column: usize },

    #[error("singular covariance: {0}")]
    SingularCovariance(&'static str),

    #[error("component {component} is uninformative (denominator {denominator:.3e})")]
    UninformativeComponent { component: usize, denominator: f64 },

    #[error("gain for component {component} has imaginary part {imag:.3e}")]
    NonRealGain { component: usize, imag: f64 },

    #[error(
        "prior covariance is not diagonal: entry ({row}, {col}) has magnitude {magnitude:.3e}"
    )]
    NotDiagonalPrior {
        row: usize,
        col: usize,
        magnitude: f64,
    },

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("component index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("factorization failed: {0}")]
    FactorizationFailure(String),

    #[error("prior inconsistent with model: {0}")]
    InconsistentPrior(String),

    #[error("degenerate regressor for component {component}: sample variance {variance:.3e}")]
    DegenerateRegressor { component: usize, variance: f64 },

    #[error("need at least {required} pairs, got {got}")]
    InsufficientSamples { required: usize, got: usize },

    #[error("invalid setup: {0}")]
    InvalidSetup(String),

    #[error("invalid model file: {0}")]
    ModelFormat(String),

    #[error("model file parse error at line {line}, column {column}: {message}")]
    ModelParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CwcuError {
    fn from(e: std::io::Error) -> Self {
        CwcuError::Io(e.to_string())
    }
}

impl From<csv::Error> for CwcuError {
    fn from(e: csv::Error) -> Self {
        CwcuError::Io(e.to_string())
    }
}

impl CwcuError {
    /// Stable machine-readable code, used by the CLI on stderr.
    pub fn code(&self) -> &'static str {
        match self {
            CwcuError::DimensionMismatch(_) => "DIMENSION_MISMATCH",
            CwcuError::NotHermitian { .. } => "NOT_HERMITIAN",
            CwcuError::NotPositiveSemidefinite { .. } => "NOT_PSD",
            CwcuError::NonPositiveVariance { .. } => "NON_POSITIVE_VARIANCE",
            CwcuError::UnobservableComponent { .. } => "UNOBSERVABLE_COMPONENT",
            CwcuError::SingularCovariance(_) => "SINGULAR_COVARIANCE",
            CwcuError::UninformativeComponent { .. } => "UNINFORMATIVE_COMPONENT",
            CwcuError::NonRealGain { .. } => "NON_REAL_GAIN",
            CwcuError::NotDiagonalPrior { .. } => "NOT_DIAGONAL_PRIOR",
            CwcuError::RankDeficient(_) => "RANK_DEFICIENT",
            CwcuError::IndexOutOfRange { .. } => "INDEX_OUT_OF_RANGE",
            CwcuError::FactorizationFailure(_) => "FACTORIZATION_FAILURE",
            CwcuError::InconsistentPrior(_) => "INCONSISTENT_PRIOR",
            CwcuError::DegenerateRegressor { .. } => "DEGENERATE_REGRESSOR",
            CwcuError::InsufficientSamples { .. } => "INSUFFICIENT_SAMPLES",
            CwcuError::InvalidSetup(_) => "INVALID_SETUP",
            CwcuError::ModelFormat(_) => "MODEL_FORMAT",
            CwcuError::ModelParse { .. } => "MODEL_PARSE",
            CwcuError::Io(_) => "IO",
        }
    }
}

pub type Result<T> = std::result::Result<T, CwcuError>;
