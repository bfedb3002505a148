use thiserror::Error;

/// Errors raised across the constants engine, the discretization and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("exponent out of range: {0}")]
    ExponentOutOfRange(String),

    #[error("invalid constants: {0}")]
    InvalidConstants(String),

    /// `f` or `a0` vanish; the formulas for delta_1 and Z_delta divide by their norms.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("alpha - C_N^2 |a0|_r = {0} is not positive")]
    NonpositiveDelta1(f64),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("delta = {delta} lies outside [0, delta_1 = {delta1}]")]
    DeltaOutOfRange { delta: f64, delta1: f64 },

    #[error("smallness condition violated: {0}")]
    SmallnessViolated(String),

    #[error("bracket error: {0}")]
    BracketError(String),

    #[error("Phi_delta(Z_delta) = {min_value} >= 0, no two distinct zeros")]
    NoTwoZeros { min_value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("transform overflow at node {node}: delta*|u| = {value} exceeds {limit}")]
    TransformOverflow { node: usize, value: f64, limit: f64 },

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("matrix field invariant violated: {0}")]
    MatrixInvariant(String),

    #[error("conjugate gradients failed after {iterations} iterations (relative residual {residual:e})")]
    IterativeSolveFailure { iterations: usize, residual: f64 },

    #[error("Newton stalled after {iterations} iterations (residual {residual:e})")]
    NewtonStall { iterations: usize, residual: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("outer iteration did not converge in {iterations} iterations (last increment {last_increment:e})")]
    MaxOuterIterations { iterations: usize, last_increment: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
