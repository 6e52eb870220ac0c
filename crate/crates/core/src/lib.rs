//! Cross summary statistics for bivariate random measures on a raster window.

pub mod error;
pub mod estimators;
pub mod grid;
pub mod laws;
pub mod measure;
pub mod models;
pub mod oracles;
pub mod quad;
pub mod randfield;
pub mod scalar;
pub mod seed;
pub mod setsim;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision field, the default for simulation and estimation.
pub type Field = grid::ScalarField<f64>;
/// Single-precision field for memory-bound workloads.
pub type Field32 = grid::ScalarField<f32>;
/// Double-precision measure pair.
pub type Measure = measure::MeasurePair<f64>;
