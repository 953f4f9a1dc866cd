//! Space-filling maps from fractal structures and fractal dimension
//! estimation of digitized sets, including the reduced pipeline that reads a
//! d-dimensional dimension off a 1-dimensional pre-image.

pub mod curve;
pub mod dim;
pub mod error;
pub mod grid;
pub mod region;

pub use curve::CurveFamily;
pub use dim::{DimReport, Estimator, EstimatorParams};
pub use error::{Error, Result};
pub use grid::{Cell, FractalStructure};
pub use region::{CellCover, RegionOracle};
