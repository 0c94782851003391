use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by every module of the toolkit.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("nonlinearity evaluation produced a non-finite value at |v| = {norm}")]
    NonlinearityEvaluation { norm: f64 },

    #[error("synthesis failed: {0}")]
    Synthesis(String),

    #[error("numerical conditioning: {what} (condition {condition:e})")]
    NumericalConditioning { what: String, condition: f64 },

    #[error("generator is not Hurwitz (spectral abscissa {abscissa:e})")]
    InvalidGenerator { abscissa: f64 },

    #[error("composition error: {0}")]
    Composition(String),

    #[error("signal domain error: {0}")]
    Domain(String),

    #[error("degenerate realization: {0}")]
    DegenerateRealization(String),

    #[error("Hankel singular value degeneracy: gap {gap:e} between the two largest values; reduce the order")]
    HankelDegeneracy { gap: f64 },

    #[error("DC constraint infeasible: {0}")]
    ConstraintInfeasible(String),

    #[error("projection invariant violated: |alpha_hat| = {value} exceeds {limit}")]
    InvariantViolation { value: f64, limit: f64 },

    #[error("step size too large at t = {time}: {reason}; reduce dt")]
    StepSize { time: f64, reason: String },

    #[error("simulation diverged at t = {time} (sample {sample})")]
    Divergence { time: f64, sample: usize },

    #[error("property failure: {0}")]
    PropertyFailure(String),

    #[error("configuration error: {0}")]
    Config(String),
}
