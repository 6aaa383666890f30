use thiserror::Error;

pub type Result<T, E = GeomError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("incomplete symmetric matrix: expected {expected} components for n = {n}, found {found}")]
    IncompleteMatrix { n: usize, expected: usize, found: usize },

    #[error("asymmetric component list: entry ({i},{j}) differs from ({j},{i})")]
    Asymmetric { i: usize, j: usize },

    #[error("signature mismatch at {point:?}: expected {expected}, eigenvalues {eigenvalues:?}")]
    SignatureMismatch {
        point: Vec<f64>,
        expected: String,
        eigenvalues: Vec<f64>,
    },

    #[error("point {point:?} lies outside the chart box")]
    OutsideChart { point: Vec<f64> },

    #[error("finite-difference stencil at {point:?} exits the chart box")]
    StencilExitsChart { point: Vec<f64> },

    #[error("metric is not invertible at {point:?}")]
    SingularMetric { point: Vec<f64> },

    #[error("geodesic left the chart at parameter {t} before reaching {target}")]
    DomainExit { t: f64, target: f64 },

    #[error("step size underflow at parameter {t} (last step {step:e})")]
    StepUnderflow { t: f64, step: f64 },

    #[error("parameter {requested} outside solution span [{start}, {end}]")]
    SpanViolation { requested: f64, start: f64, end: f64 },

    #[error("unknown builtin metric `{0}`")]
    UnknownBuiltin(String),

    #[error("empty sample set: {0}")]
    EmptySample(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("hypersurface error: {0}")]
    Hypersurface(String),

    #[error("shooting did not converge: {0}")]
    NoConvergence(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl GeomError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        GeomError::Invalid(msg.into())
    }
}
