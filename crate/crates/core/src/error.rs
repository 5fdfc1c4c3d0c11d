use thiserror::Error;

/// Errors raised while constructing or validating jetfield objects.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate metric: |det| = {det:e} is below {threshold:e}")]
    DegenerateMetric { det: f64, threshold: f64 },

    #[error("metric is not symmetric: max asymmetry {asymmetry:e}")]
    AsymmetricMetric { asymmetry: f64 },

    #[error("metric signature changes across the lattice (node {node})")]
    NonUniformSignature { node: usize },

    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),

    #[error("structure constants violate the Jacobi identity: residual {residual:e}")]
    JacobiViolation { residual: f64 },

    #[error("metric is not Ad-invariant: residual {residual:e}")]
    AdInvarianceViolation { residual: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("operation requires m = r = 3, got m = {m}, r = {r}")]
    NotThreeDimensional { m: usize, r: usize },

    #[error("singular triad: det = {det:e}")]
    SingularTriad { det: f64 },

    #[error("generator too large for the adjoint series: |ad| = {norm} exceeds {limit}")]
    GeneratorTooLarge { norm: f64, limit: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
