use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// The CLI maps [`Error::Validation`] to exit status 2 and every numeric
/// variant to exit status 3.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside the domain of the function (e.g. `rho > 1`).
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    /// An argument lies outside the domain where the quantity is defined
    /// (e.g. the propagator at `t <= 0`).
    #[error("argument out of domain: {0}")]
    Domain(String),

    /// The result would not fit in an `f64`.
    #[error("result out of range: {0}")]
    Range(String),

    /// Malformed input such as an empty grid.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An iterative evaluation hit its work cap before reaching the target
    /// accuracy.
    #[error("accuracy target not reached: {0}")]
    Accuracy(String),

    /// The operation is defined but this implementation does not cover it.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A grid is too coarse to represent the requested band without aliasing.
    #[error("aliasing: {0}")]
    Aliasing(String),

    /// Time samples do not cover the requested interval.
    #[error("forcing coverage: {0}")]
    Coverage(String),

    /// Snapshot times are not on a uniform grid.
    #[error("time grid: {0}")]
    Grid(String),

    /// Input failed schema or consistency validation.
    #[error("validation: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
