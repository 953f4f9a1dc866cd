use thiserror::Error;

/// Errors shared by the grid, curve, region, and estimator modules.
#[derive(Debug, Error)]
pub enum Error {
    /// An address or cell count would overflow the 63-bit integer keys.
    #[error("capacity exceeded for {what}: level {level} needs more than 63 address bits")]
    Capacity { what: &'static str, level: u32 },

    /// A query point lies outside the structure's carrier set.
    #[error("point {point:?} is outside the carrier of {structure}")]
    PointOutsideCarrier { structure: String, point: Vec<f64> },

    /// A curve family was asked about a level it has not generated.
    #[error("level {level} not generated for curve family (max {max}); extend the family first")]
    UnknownLevel { level: u32, max: u32 },

    /// A cover or cell belongs to a different structure or level than expected.
    #[error("structure/level mismatch: {context}")]
    Mismatch { context: String },

    /// A region oracle claimed an intersecting cell with no intersecting child.
    #[error("oracle '{oracle}' is not monotone under refinement at level {level}, cell key {key}")]
    NonMonotoneOracle {
        oracle: String,
        level: u32,
        key: u64,
    },

    /// An IFS map does not contract.
    #[error("IFS map {index} has operator norm {norm} >= 1")]
    NonContractiveMap { index: usize, norm: f64 },

    /// A regression window is unusable (too short, or constant abscissae).
    #[error("degenerate fit: {reason}")]
    DegenerateFit { reason: String },

    /// A level of the digitized set is empty although the target set is nonempty.
    #[error("empty cover at level {level}; estimators are undefined for empty sets")]
    EmptyCover { level: u32 },

    /// Bisection bracket does not straddle the growth-slope sign change.
    #[error("no sign change in s-bracket [{lo}, {hi}]: slope stays positive")]
    NoSignChange { lo: f64, hi: f64 },

    /// Invalid run configuration; `field` names the offending input.
    #[error("invalid config field '{field}': {reason}")]
    InvalidConfig { field: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
