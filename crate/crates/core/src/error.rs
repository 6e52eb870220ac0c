use thiserror::Error;

/// Errors raised by the simulation, estimation and oracle routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("erosion of the window by t = {t} contains no pixel")]
    EmptyErosion { t: f64 },

    #[error("ball of radius {t} around ({x}, {y}) is not contained in the window")]
    BallOutsideWindow { x: f64, y: f64, t: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("circulant embedding is not non-negative definite (min eigenvalue {min_eigenvalue:e}) and the dense fallback is capped at {cap} pixels")]
    EmbeddingFailure { min_eigenvalue: f64, cap: usize },

    #[error("value {value} at ({x}, {y}) lies outside [0, 1]")]
    RangeViolation { x: f64, y: f64, value: f64 },

    #[error("coupling from the past did not coalesce within {events} dominating events")]
    NonConvergence { events: u64 },

    #[error("coverage function value {value:e} at pixel {pixel} is below the positivity floor")]
    DegenerateP1 { pixel: usize, value: f64 },

    #[error("need at least {needed} replicates, got {got}")]
    TooFewReplicates { needed: usize, got: usize },

    #[error("zero denominator at t = {t}")]
    ZeroDenominator { t: f64 },

    #[error("no covered conditioning pixel at t = {t}")]
    NoConditioningPixels { t: f64 },

    #[error("no oracle is available for the {model} model")]
    NoOracle { model: String },

    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("quadrature did not reach tolerance {tol:e} (estimate {estimate:e}, error {error:e})")]
    QuadratureFailure { tol: f64, estimate: f64, error: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
