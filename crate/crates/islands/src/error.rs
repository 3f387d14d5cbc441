use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The gap diagnostics are undefined on profiles with zero volume or
    /// zero surface energy.
    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),

    /// All columns of the requested subgraph mesh fall below the height
    /// floor; there is nothing to solve on.
    #[error("empty film: no columns above the height floor")]
    EmptyFilm,

    #[error("linear solver failed to converge: {iterations} iterations, relative residual {residual:.3e}")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    /// A diagnostic that only applies in the island regime was queried on a
    /// wetting-regime result.
    #[error("not applicable in the wetting regime")]
    NotApplicable,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
