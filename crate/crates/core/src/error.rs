use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("zero pivot at row {row} in tridiagonal elimination")]
    SingularPivot { row: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    Asymmetric { asymmetry: f64 },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("{family}: α = {alpha} is outside the admissible range")]
    FilterDomain { family: &'static str, alpha: f64 },

    #[error("λ = {0} is outside the filter domain")]
    SpectralDomain(f64),

    #[error("inner iteration budget exceeded: {required} steps required, cap is {cap}")]
    InnerBudgetExceeded { required: u64, cap: u64 },

    #[error("inner linear solve did not converge (relative residual {residual:e} after {iterations} iterations)")]
    LinearSolve { residual: f64, iterations: usize },

    #[error("schedule index {index} out of range (length {len})")]
    ScheduleIndex { index: usize, len: usize },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("scaling violation: ‖F'(x0)‖ ≈ {norm} exceeds min(1, √α₀) = {bound}")]
    ScalingViolation { norm: f64, bound: f64 },

    #[error("the problem does not provide a materialized Jacobian")]
    MissingJacobian,

    #[error("size {size} exceeds the cap of {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Short machine-readable tag used in CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidMatrix(_) => "invalid_matrix",
            Error::SingularPivot { .. } => "singular_pivot",
            Error::Asymmetric { .. } => "asymmetric",
            Error::Eigen(_) => "eigen",
            Error::FilterDomain { .. } | Error::SpectralDomain(_) => "filter_domain",
            Error::InnerBudgetExceeded { .. } => "inner_budget_exceeded",
            Error::LinearSolve { .. } => "linear_solve",
            Error::ScheduleIndex { .. } | Error::InvalidSchedule(_) => "schedule",
            Error::InvalidConfig(_) => "invalid_config",
            Error::ScalingViolation { .. } => "scaling_violation",
            Error::MissingJacobian => "missing_jacobian",
            Error::SizeCap { .. } => "size_cap",
            Error::AtStep { source, .. } => source.kind(),
            Error::Io { .. } | Error::Csv { .. } | Error::Json { .. } => "io",
        }
    }

    /// Outer iteration index attached to this error, if any.
    pub fn step(&self) -> Option<usize> {
        match self {
            Error::AtStep { step, .. } => Some(*step),
            _ => None,
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Error {
        match self {
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }
}
