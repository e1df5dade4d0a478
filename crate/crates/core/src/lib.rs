//! Metamorphic testing for stochastic multimodal trajectory predictors.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod raster;
pub mod scalar;
pub mod scene;
pub mod scenegen;
pub mod stats;
pub mod sut;
pub mod transforms;

pub use error::CoreError;
pub use geometry::{Point2, Trajectory};
pub use raster::{Cell, ClassEntry, ClassLegend, ProbabilityMap, SegmentationMap};
pub use scalar::Scalar;
pub use scene::{validate_test_case, PredictionSet, TestCase};

pub type Point2f32 = Point2<f32>;
pub type Point2f64 = Point2<f64>;
pub type Trajectory32 = Trajectory<f32>;
pub type Trajectory64 = Trajectory<f64>;
pub type ProbabilityMap32 = ProbabilityMap<f32>;
pub type ProbabilityMap64 = ProbabilityMap<f64>;
pub type PredictionSet32 = PredictionSet<f32>;
pub type PredictionSet64 = PredictionSet<f64>;
pub type TestCase32 = TestCase<f32>;
pub type TestCase64 = TestCase<f64>;
