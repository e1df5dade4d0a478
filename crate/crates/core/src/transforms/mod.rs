//! Metamorphic relations as input transformations.
//!
//! Label-preserving relations (mirror, rotate, rescale) carry an exact
//! coordinate map and its inverse so predictions can be carried between the
//! source and follow-up frames. Map-editing relations (class change,
//! obstacle) leave coordinates alone and report the region of interest they
//! modified.

mod geometric;
mod map_edit;
mod spec;
mod transitions;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::CoreError;
use crate::geometry::{Point2, Trajectory};
use crate::raster::{Cell, ProbabilityMap};
use crate::scalar::Scalar;
use crate::scene::{PredictionSet, TestCase};

pub use geometric::{mr_mirror, mr_rescale, mr_rotate, resample_nearest, MIN_RESCALED_SIDE};
pub use map_edit::{
    dodecagon, mr_class_change, mr_obstacle, rasterize_convex_polygon, ObstacleParams,
};
pub use spec::{MirrorAxis, MrSpec, DEFAULT_SCALE};
pub use transitions::{Effect, Transition, TransitionTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("rotation must be 90, 180 or 270 degrees, got {0}")]
    UnsupportedAngle(u32),
    #[error("invalid relation parameters: {0}")]
    InvalidParams(String),
    #[error("rescaled map would be {width}x{height}, below the {min}x{min} minimum")]
    Degenerate {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("relation not applicable to this scene: {0}")]
    NotApplicable(String),
    #[error("obstacle placement failed: {0}")]
    Placement(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl TransformError {
    /// Whether the error means "skip this scene" rather than a failure.
    pub fn is_skip(&self) -> bool {
        matches!(self, Self::NotApplicable(_) | Self::Placement(_))
    }
}

/// Point map between the source and follow-up frames.
///
/// Rotations are clockwise in raster coordinates (y pointing down); the
/// stored dimensions are those of the frame the map is applied in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum CoordMap<S = f64> {
    Identity,
    MirrorVertical { width: S },
    MirrorHorizontal { height: S },
    Rotate90 { height: S },
    Rotate180 { width: S, height: S },
    Rotate270 { width: S },
    Scale { factor: S },
}

impl<S: Scalar> CoordMap<S> {
    #[inline]
    pub fn apply(&self, p: Point2<S>) -> Point2<S> {
        match *self {
            Self::Identity => p,
            Self::MirrorVertical { width } => Point2::new(width - p.x, p.y),
            Self::MirrorHorizontal { height } => Point2::new(p.x, height - p.y),
            Self::Rotate90 { height } => Point2::new(height - p.y, p.x),
            Self::Rotate180 { width, height } => Point2::new(width - p.x, height - p.y),
            Self::Rotate270 { width } => Point2::new(p.y, width - p.x),
            Self::Scale { factor } => Point2::new(p.x * factor, p.y * factor),
        }
    }

    /// Linear part applied to a displacement vector.
    #[inline]
    pub fn apply_vector(&self, v: Point2<S>) -> Point2<S> {
        match *self {
            Self::Identity => v,
            Self::MirrorVertical { .. } => Point2::new(-v.x, v.y),
            Self::MirrorHorizontal { .. } => Point2::new(v.x, -v.y),
            Self::Rotate90 { .. } => Point2::new(-v.y, v.x),
            Self::Rotate180 { .. } => Point2::new(-v.x, -v.y),
            Self::Rotate270 { .. } => Point2::new(v.y, -v.x),
            Self::Scale { factor } => Point2::new(v.x * factor, v.y * factor),
        }
    }

    /// Factor by which the map stretches lengths.
    pub fn length_scale(&self) -> S {
        match *self {
            Self::Scale { factor } => factor.abs(),
            _ => S::one(),
        }
    }

    pub fn apply_trajectory(&self, t: &Trajectory<S>) -> Result<Trajectory<S>, CoreError> {
        t.map_points(|p| self.apply(p))
    }
}

/// Raster-level counterpart of a [`CoordMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RasterOp {
    Identity,
    MirrorVertical,
    MirrorHorizontal,
    Rotate90,
    Rotate180,
    Rotate270,
    /// Nearest-neighbor resample to the given dimensions.
    Resample {
        width: usize,
        height: usize,
    },
}

impl RasterOp {
    /// Output dimensions for an input raster of `width x height`.
    pub fn output_dims(&self, width: usize, height: usize) -> (usize, usize) {
        match *self {
            Self::Rotate90 | Self::Rotate270 => (height, width),
            Self::Resample {
                width: w,
                height: h,
            } => (w, h),
            _ => (width, height),
        }
    }

    /// Applies the op to a row-major raster. Mirror and rotate permute cells.
    pub fn apply<T: Copy>(&self, values: &[T], width: usize, height: usize) -> Vec<T> {
        match *self {
            Self::Identity => values.to_vec(),
            Self::Resample {
                width: nw,
                height: nh,
            } => geometric::resample_values(values, width, height, nw, nh),
            _ => {
                let (nw, nh) = self.output_dims(width, height);
                let mut out = Vec::with_capacity(values.len());
                for r2 in 0..nh {
                    for c2 in 0..nw {
                        let (c, r) = self.source_cell(c2, r2, width, height);
                        out.push(values[r * width + c]);
                    }
                }
                out
            }
        }
    }

    /// Source cell feeding output cell `(c2, r2)` of a permuting op.
    fn source_cell(&self, c2: usize, r2: usize, width: usize, height: usize) -> (usize, usize) {
        match *self {
            Self::MirrorVertical => (width - 1 - c2, r2),
            Self::MirrorHorizontal => (c2, height - 1 - r2),
            // forward: (c, r) -> (height - 1 - r, c)
            Self::Rotate90 => (r2, height - 1 - c2),
            Self::Rotate180 => (width - 1 - c2, height - 1 - r2),
            // forward: (c, r) -> (r, width - 1 - c)
            Self::Rotate270 => (width - 1 - r2, c2),
            Self::Identity | Self::Resample { .. } => (c2, r2),
        }
    }

    fn renormalizes(&self) -> bool {
        matches!(self, Self::Resample { .. })
    }
}

/// A follow-up test case together with the frame maps that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformResult<S = f64> {
    pub follow_up: TestCase<S>,
    pub label_preserving: bool,
    pub forward: CoordMap<S>,
    pub inverse: Option<CoordMap<S>>,
    /// Changed cells, sorted in raster order. Present for map edits only.
    pub roi: Option<Vec<Cell>>,
    pub expected_effect: Option<Effect>,
    pub raster_op: RasterOp,
}

/// Carries a source prediction into the follow-up frame of a
/// label-preserving transform.
///
/// Mirror and rotate permute the probability raster exactly; rescale
/// resamples it by nearest neighbor and renormalizes.
pub fn transform_prediction<S: Scalar>(
    pred: &PredictionSet<S>,
    tr: &TransformResult<S>,
) -> Result<PredictionSet<S>, TransformError> {
    if !tr.label_preserving {
        return Err(TransformError::Contract(
            "only label-preserving transforms map predictions between frames".into(),
        ));
    }
    let trajectories = pred
        .trajectories()
        .iter()
        .map(|t| tr.forward.apply_trajectory(t))
        .collect::<Result<Vec<_>, _>>()?;
    let prob_map = pred
        .prob_map()
        .map(|m| transform_prob_map(m, tr.raster_op))
        .transpose()?;
    Ok(PredictionSet::new(trajectories, prob_map, pred.sut_seed())?)
}

pub fn transform_prob_map<S: Scalar>(
    map: &ProbabilityMap<S>,
    op: RasterOp,
) -> Result<ProbabilityMap<S>, CoreError> {
    let (w, h) = (map.width(), map.height());
    let (nw, nh) = op.output_dims(w, h);
    let values = op.apply(map.values(), w, h);
    if op.renormalizes() {
        ProbabilityMap::from_weights(nw, nh, values)
    } else {
        Ok(ProbabilityMap::from_parts_unchecked(nw, nh, values))
    }
}

/// Applies `spec` to `tc`. The obstacle relation needs the source
/// prediction it anchors on.
pub fn apply_relation<S: Scalar>(
    tc: &TestCase<S>,
    spec: &MrSpec,
    table: &TransitionTable,
    source_prediction: Option<&PredictionSet<S>>,
) -> Result<TransformResult<S>, TransformError> {
    spec.validate()?;
    match spec {
        MrSpec::Mirror { axis } => mr_mirror(tc, *axis),
        MrSpec::Rotate { degrees } => mr_rotate(tc, *degrees),
        MrSpec::Rescale { s_old, s_new } => mr_rescale(tc, *s_old, *s_new),
        MrSpec::ClassChange {
            source,
            target,
            effect,
        } => {
            let effect = match effect {
                Some(e) => *e,
                None => table.lookup(source, target).ok_or_else(|| {
                    TransformError::InvalidParams(format!(
                        "no expected effect configured for transition {source} -> {target}"
                    ))
                })?,
            };
            mr_class_change(tc, source, target, effect)
        }
        MrSpec::Obstacle {
            class,
            radius,
            fraction,
        } => {
            let pred = source_prediction.ok_or_else(|| {
                TransformError::Contract("obstacle relation requires the source prediction".into())
            })?;
            mr_obstacle(
                tc,
                pred,
                &ObstacleParams {
                    class: class.clone(),
                    radius: *radius,
                    fraction: *fraction,
                },
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotate_ops_agree_with_coordinate_maps() {
        // a raster cell's center must land in the cell the raster op moves it to
        let (w, h) = (5usize, 3usize);
        let values: Vec<usize> = (0..w * h).collect();
        let cases = [
            (
                RasterOp::MirrorVertical,
                CoordMap::MirrorVertical { width: w as f64 },
            ),
            (
                RasterOp::MirrorHorizontal,
                CoordMap::MirrorHorizontal { height: h as f64 },
            ),
            (RasterOp::Rotate90, CoordMap::Rotate90 { height: h as f64 }),
            (
                RasterOp::Rotate180,
                CoordMap::Rotate180 {
                    width: w as f64,
                    height: h as f64,
                },
            ),
            (RasterOp::Rotate270, CoordMap::Rotate270 { width: w as f64 }),
        ];
        for (op, map) in cases {
            let (nw, nh) = op.output_dims(w, h);
            let out = op.apply(&values, w, h);
            for r in 0..h {
                for c in 0..w {
                    let p = map.apply(Cell::new(c, r).center::<f64>());
                    let dst = crate::raster::cell_of(p, nw, nh);
                    assert_eq!(out[dst.row * nw + dst.col], values[r * w + c], "{op:?}");
                }
            }
        }
    }

    #[test]
    fn vector_part_matches_point_differences() {
        let a = Point2::new(3.25, 7.5);
        let b = Point2::new(10.0, 1.75);
        let maps = [
            CoordMap::MirrorVertical { width: 20.0 },
            CoordMap::MirrorHorizontal { height: 12.0 },
            CoordMap::Rotate90 { height: 12.0 },
            CoordMap::Rotate180 {
                width: 20.0,
                height: 12.0,
            },
            CoordMap::Rotate270 { width: 20.0 },
            CoordMap::Scale { factor: 0.5 },
        ];
        for m in maps {
            let pa = m.apply(a);
            let pb = m.apply(b);
            let v = m.apply_vector(Point2::new(b.x - a.x, b.y - a.y));
            assert_eq!(Point2::new(pb.x - pa.x, pb.y - pa.y), v, "{m:?}");
        }
    }
}
