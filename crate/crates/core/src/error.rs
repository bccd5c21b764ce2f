use thiserror::Error;

/// Errors raised by the lattice, spectral, mode and propagation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("site index {index} out of range for {len} sites")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("second-order denominator omega_0^2 - omega_f^2 = {denominator:e} is resonant")]
    ResonanceSingularity { denominator: f64 },

    #[error("coupling is zero; {0} is undefined")]
    CouplingZero(&'static str),

    #[error("continued fraction hit a pole at site {site} (denominator {denominator:e})")]
    Pole { site: usize, denominator: f64 },

    #[error("eigensolver did not converge for eigenpair {index} (residual {residual:e})")]
    ConvergenceFailure { index: usize, residual: f64 },

    #[error("special function out of its stable range at order {order} (argument {argument})")]
    SpecialFunctionDomain { order: f64, argument: f64 },

    #[error("state is not normalized: squared norm {norm_sqr}")]
    NormViolation { norm_sqr: f64 },

    #[error("time grid invalid: {0}")]
    InvalidTimeGrid(String),

    #[error("step control failed at t = {time}: step {step:e} below minimum")]
    StepControlFailure { time: f64, step: f64 },
}

pub type Result<T> = std::result::Result<T, LatticeError>;
