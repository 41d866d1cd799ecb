use thiserror::Error;

/// Errors raised by kernels, integrators, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix has non-finite entries ({context})")]
    InvalidMatrix { context: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionError { expected: usize, found: usize },

    #[error("tolerance {tol} outside (0, {max}]")]
    InvalidTolerance { tol: f64, max: f64 },

    #[error("matrix logarithm out of domain: ||B - I||_F = {norm:.3e} (bound {bound})")]
    LogDomainError { norm: f64, bound: f64 },

    #[error("series diverges: {context}")]
    SeriesDivergence { context: String },

    #[error("singular stage system in implicit step")]
    StageSolveError,

    #[error("iteration failed to converge: {context}")]
    NonConvergence { context: String },

    #[error("step matrix is not symplectic (residual {residual:.3e}); auxiliary update ill-defined")]
    NotSymplectic { residual: f64 },

    #[error("not applicable: {context}")]
    NotApplicable { context: String },

    #[error("empty input")]
    EmptyInput,

    #[error("unknown method id `{id}`")]
    UnknownMethod { id: String },

    #[error("invalid configuration: {context}")]
    ConfigError { context: String },

    #[error("series has no reference column attached")]
    MissingReference,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
