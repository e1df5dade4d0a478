use thiserror::Error;

/// Construction errors for the domain types.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("trajectory must contain at least one point")]
    EmptyTrajectory,
    #[error("timestep must be finite and strictly positive, got {0}")]
    InvalidTimestep(f64),
    #[error("trajectory point {0} is not finite")]
    NonFinitePoint(usize),
    #[error("raster dimensions must be positive, got {width}x{height}")]
    EmptyRaster { width: usize, height: usize },
    #[error("raster has {got} cells, expected {expected}")]
    CellCount { expected: usize, got: usize },
    #[error("cell value {0} is not in the class legend")]
    UnknownClass(u8),
    #[error("invalid class legend: {0}")]
    Legend(String),
    #[error("probability raster must be non-negative and finite (cell {0})")]
    NegativeProbability(usize),
    #[error("probability raster has zero total mass")]
    ZeroMass,
    #[error("prediction set is empty")]
    EmptyPrediction,
    #[error("prediction trajectories have inconsistent lengths")]
    RaggedPrediction,
    #[error("invalid configuration: {0}")]
    Config(String),
}
