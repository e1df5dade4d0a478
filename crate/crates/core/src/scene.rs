use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::geometry::Trajectory;
use crate::raster::{ProbabilityMap, SegmentationMap};
use crate::scalar::Scalar;

/// Source or follow-up input: a map plus the agent's observed history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "S: Scalar + Serialize",
    deserialize = "S: Scalar + Deserialize<'de>"
))]
pub struct TestCase<S = f64> {
    pub scene_id: String,
    pub map: SegmentationMap,
    pub history: Trajectory<S>,
    pub ground_truth: Option<Trajectory<S>>,
}

/// Output of one predictor call: K sampled futures and an optional
/// probability map over the scene raster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "S: Scalar + Serialize",
    deserialize = "S: Scalar + Deserialize<'de>"
))]
pub struct PredictionSet<S = f64> {
    trajectories: Vec<Trajectory<S>>,
    prob_map: Option<ProbabilityMap<S>>,
    sut_seed: u64,
}

impl<S: Scalar> PredictionSet<S> {
    pub fn new(
        trajectories: Vec<Trajectory<S>>,
        prob_map: Option<ProbabilityMap<S>>,
        sut_seed: u64,
    ) -> Result<Self, CoreError> {
        let first = trajectories.first().ok_or(CoreError::EmptyPrediction)?;
        if trajectories.iter().any(|t| t.len() != first.len()) {
            return Err(CoreError::RaggedPrediction);
        }
        Ok(Self {
            trajectories,
            prob_map,
            sut_seed,
        })
    }

    pub fn trajectories(&self) -> &[Trajectory<S>] {
        &self.trajectories
    }

    pub fn prob_map(&self) -> Option<&ProbabilityMap<S>> {
        self.prob_map.as_ref()
    }

    pub fn sut_seed(&self) -> u64 {
        self.sut_seed
    }

    /// Number of sampled trajectories (K).
    pub fn k(&self) -> usize {
        self.trajectories.len()
    }

    /// Shared trajectory length (T).
    pub fn horizon(&self) -> usize {
        self.trajectories[0].len()
    }

    pub fn into_parts(self) -> (Vec<Trajectory<S>>, Option<ProbabilityMap<S>>, u64) {
        (self.trajectories, self.prob_map, self.sut_seed)
    }
}

/// Lists every invariant breach of `tc` for a harness using history length
/// `history_len` and horizon `horizon`. An empty list means the case is valid.
pub fn validate_test_case<S: Scalar>(
    tc: &TestCase<S>,
    history_len: usize,
    horizon: usize,
) -> Vec<String> {
    let mut problems = Vec::new();
    if tc.scene_id.trim().is_empty() {
        problems.push("scene_id is empty".to_string());
    }
    let (w, h) = (tc.map.width() as f64, tc.map.height() as f64);
    for (i, p) in tc.history.points().iter().enumerate() {
        let (x, y) = (p.x.f64(), p.y.f64());
        if !(0.0..=w).contains(&x) || !(0.0..=h).contains(&y) {
            problems.push(format!("history point {i} outside map bounds"));
        }
    }
    if tc.history.len() != history_len {
        problems.push(format!(
            "history length {} ≠ configured {}",
            tc.history.len(),
            history_len
        ));
    }
    if let Some(gt) = &tc.ground_truth {
        if gt.len() != horizon {
            problems.push(format!(
                "ground_truth length {} ≠ horizon {}",
                gt.len(),
                horizon
            ));
        }
        if gt.dt() != tc.history.dt() {
            problems.push("ground_truth timestep differs from history timestep".to_string());
        }
    }
    problems
}
