//! The predictor contract, built-in reference predictors and the adapter for
//! predictors running in a separate process.

mod external;
mod map_aware;
pub mod protocol;
mod reference;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, Trajectory};
use crate::raster::SegmentationMap;
use crate::scene::PredictionSet;

pub use external::{ExternalConfig, ExternalSut};
pub use map_aware::{MapAwareConfig, MapAwareReference};
pub use reference::{BiasedMutant, EquivariantReference, ReferenceConfig, SeedMode};

/// One prediction request.
#[derive(Debug, Clone, Copy)]
pub struct SutRequest<'a> {
    pub scene_id: &'a str,
    pub history: &'a Trajectory,
    pub map: &'a SegmentationMap,
    /// Number of trajectories to sample.
    pub k: usize,
    /// Prediction horizon T in steps.
    pub horizon: usize,
    pub seed: u64,
}

impl SutRequest<'_> {
    pub fn validate(&self) -> Result<(), SutError> {
        if self.k == 0 || self.horizon == 0 {
            return Err(SutError::new(
                self.scene_id,
                SutErrorKind::Contract(format!(
                    "k and horizon must be positive, got {} and {}",
                    self.k, self.horizon
                )),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum SutErrorKind {
    /// The request does not meet the predictor's preconditions.
    Contract(String),
    /// No response within the configured timeout.
    Timeout(String),
    /// The response could not be decoded or was out of protocol.
    Protocol(String),
    /// The response decoded but breaks the prediction invariants.
    InvariantBreach(String),
    /// The predictor reported an error message.
    Remote(String),
    /// The predictor process exited or could not be started.
    Process(String),
}

impl fmt::Display for SutErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Contract(m) => write!(f, "contract error: {m}"),
            Self::Timeout(m) => write!(f, "timeout: {m}"),
            Self::Protocol(m) => write!(f, "protocol error: {m}"),
            Self::InvariantBreach(m) => write!(f, "invalid prediction: {m}"),
            Self::Remote(m) => write!(f, "predictor error: {m}"),
            Self::Process(m) => write!(f, "process error: {m}"),
        }
    }
}

/// Predictor failure, tagged with the scene it happened on. `raw` keeps the
/// offending payload, if any, for debugging.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("scene {scene_id}: {kind}")]
pub struct SutError {
    pub scene_id: String,
    pub kind: SutErrorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
}

impl SutError {
    pub fn new(scene_id: &str, kind: SutErrorKind) -> Self {
        Self {
            scene_id: scene_id.to_string(),
            kind,
            raw: None,
        }
    }

    pub fn with_raw(mut self, raw: impl Into<String>) -> Self {
        let mut raw = raw.into();
        if raw.len() > 4096 {
            let mut cut = 4096;
            while !raw.is_char_boundary(cut) {
                cut -= 1;
            }
            raw.truncate(cut);
            raw.push_str("...");
        }
        self.raw = Some(raw);
        self
    }
}

/// A trajectory predictor under test.
///
/// Implementations must be pure functions of the request: the same request,
/// seed included, yields the same prediction.
pub trait Sut: Send + Sync {
    fn name(&self) -> String;

    fn provides_prob_map(&self) -> bool;

    fn predict(&self, req: &SutRequest<'_>) -> Result<PredictionSet, SutError>;
}

/// Checks a prediction against the request's `k`, horizon and map shape.
pub fn validate_response(req: &SutRequest<'_>, pred: &PredictionSet) -> Result<(), SutError> {
    let breach = |m: String| {
        Err(SutError::new(
            req.scene_id,
            SutErrorKind::InvariantBreach(m),
        ))
    };
    if pred.k() != req.k {
        return breach(format!("expected {} trajectories, got {}", req.k, pred.k()));
    }
    if pred.horizon() != req.horizon {
        return breach(format!(
            "expected {} points per trajectory, got {}",
            req.horizon,
            pred.horizon()
        ));
    }
    if let Some(m) = pred.prob_map() {
        if m.width() != req.map.width() || m.height() != req.map.height() {
            return breach(format!(
                "probability map is {}x{}, scene map is {}x{}",
                m.width(),
                m.height(),
                req.map.width(),
                req.map.height()
            ));
        }
    }
    Ok(())
}

/// Constant-velocity estimate from the first and last history points.
pub(crate) fn cv_velocity(history: &Trajectory) -> Point2 {
    let n = history.len();
    let (a, b) = (history.first(), history.last());
    let d = (n - 1) as f64;
    Point2::new((b.x - a.x) / d, (b.y - a.y) / d)
}

pub(crate) fn require_history(req: &SutRequest<'_>) -> Result<(), SutError> {
    req.validate()?;
    if req.history.len() < 2 {
        return Err(SutError::new(
            req.scene_id,
            SutErrorKind::Contract(format!(
                "history needs at least 2 points, got {}",
                req.history.len()
            )),
        ));
    }
    Ok(())
}
