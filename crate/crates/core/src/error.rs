use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller-supplied value is outside the operation's domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// The model cannot be used for the requested operation.
    #[error("model error: {0}")]
    Model(String),
    /// Root bracketing, quadrature or a series did not converge.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// An argument lies outside the region where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// A law that does not exist for this model was requested.
    #[error("undefined law: {0}")]
    UndefinedLaw(String),
    /// Two grids with different steps were combined.
    #[error("grid mismatch: step {0} vs {1}")]
    GridMismatch(f64, f64),
    /// A precondition that the caller is responsible for was violated.
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("simulation config: {0}")]
    Config(String),
    /// A single Monte Carlo path failed.
    #[error("path {path}: {message}")]
    Simulation { path: u64, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
