use thiserror::Error;

/// Errors raised by the simulation library.
///
/// Variants are grouped by [`ErrorClass`] so front ends can map them onto
/// distinct exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KpoError {
    #[error("invalid dimension {dim}: {reason}")]
    InvalidDimension { dim: usize, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("state is not a valid density matrix: {0}")]
    InvalidState(String),

    #[error("singular Taylor expansion: E_J1^(0) = {ej0} vanishes at this flux bias")]
    SingularExpansion { ej0: f64 },

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("circuit fit did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    FitFailure { iterations: usize, residual: f64 },

    #[error("truncation guard: tail population {tail:.3e} exceeds {limit:.1e} (increase dim beyond {dim})")]
    Truncation { dim: usize, tail: f64, limit: f64 },

    #[error("displacement truncation defect {defect:.3e} at |alpha| = {alpha:.3}; enlarge the working dimension beyond {dim}")]
    EnlargeDimension { dim: usize, alpha: f64, defect: f64 },

    #[error("eigenstate tracking failed at ramp step {step}: max overlap {overlap:.3} < 0.5")]
    TrackingFailure { step: usize, overlap: f64 },

    #[error("integrator step size underflow at t = {t:.6e} s (h = {h:.3e} s)")]
    StepUnderflow { t: f64, h: f64 },

    #[error("integrator accuracy: {0}; try a smaller dt_max or tighter tolerances")]
    IntegratorAccuracy(String),

    #[error("steady state is not unique: Liouvillian kernel has dimension {kernel_dim}")]
    NonUniqueSteadyState { kernel_dim: usize },

    #[error("steady state did not converge: {0}")]
    SteadyStateConvergence(String),

    #[error("fit failed: {0}")]
    FitNonConvergence(String),

    #[error("insufficient sampling: {0}")]
    InsufficientSampling(String),

    #[error("reconstruction underdetermined: {samples} samples for {unknowns} unknowns")]
    Underdetermined { samples: usize, unknowns: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

/// Coarse classification of [`KpoError`] used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad inputs: dimensions, parameters, circuits, files.
    Config,
    /// The numerics failed (integrator, solver, fit).
    Numerics,
    /// A physical guard tripped (truncation, tracking, uniqueness).
    PhysicsGuard,
}

impl KpoError {
    pub fn class(&self) -> ErrorClass {
        use KpoError::*;
        match self {
            InvalidDimension { .. }
            | DimensionMismatch { .. }
            | InvalidParameter { .. }
            | InvalidState(_)
            | InvalidCircuit(_)
            | SingularExpansion { .. }
            | Underdetermined { .. }
            | Parse(_) => ErrorClass::Config,
            FitFailure { .. }
            | StepUnderflow { .. }
            | IntegratorAccuracy(_)
            | SteadyStateConvergence(_)
            | FitNonConvergence(_)
            | InsufficientSampling(_) => ErrorClass::Numerics,
            Truncation { .. }
            | EnlargeDimension { .. }
            | TrackingFailure { .. }
            | NonUniqueSteadyState { .. } => ErrorClass::PhysicsGuard,
        }
    }

    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        KpoError::InvalidParameter { name: name.to_string(), reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, KpoError>;
