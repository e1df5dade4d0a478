use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::scalar::Scalar;

/// Continuous map coordinate in pixels: `x` along the width axis, `y` along
/// the height axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<S = f64> {
    pub x: S,
    pub y: S,
}

impl<S: Scalar> Point2<S> {
    pub fn new(x: S, y: S) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(&self, other: &Self) -> S {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist_sq(&self, other: &Self) -> S {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn cast<T: Scalar>(&self) -> Point2<T> {
        Point2 {
            x: T::of(self.x.f64()),
            y: T::of(self.y.f64()),
        }
    }
}

/// Timestamped 2D path. Used for histories, ground truth and predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "RawTrajectory<S>",
    bound(deserialize = "S: Scalar + Deserialize<'de>")
)]
pub struct Trajectory<S = f64> {
    points: Vec<Point2<S>>,
    dt: S,
}

#[derive(Deserialize)]
struct RawTrajectory<S> {
    points: Vec<Point2<S>>,
    dt: S,
}

impl<S: Scalar> TryFrom<RawTrajectory<S>> for Trajectory<S> {
    type Error = CoreError;

    fn try_from(raw: RawTrajectory<S>) -> Result<Self, Self::Error> {
        Trajectory::new(raw.points, raw.dt)
    }
}

impl<S: Scalar> Trajectory<S> {
    pub fn new(points: Vec<Point2<S>>, dt: S) -> Result<Self, CoreError> {
        if points.is_empty() {
            return Err(CoreError::EmptyTrajectory);
        }
        if !(dt.is_finite() && dt > S::zero()) {
            return Err(CoreError::InvalidTimestep(dt.f64()));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(CoreError::NonFinitePoint(i));
        }
        Ok(Self { points, dt })
    }

    pub fn from_xy(xy: &[(S, S)], dt: S) -> Result<Self, CoreError> {
        Self::new(xy.iter().map(|&(x, y)| Point2::new(x, y)).collect(), dt)
    }

    pub fn points(&self) -> &[Point2<S>] {
        &self.points
    }

    pub fn dt(&self) -> S {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> Point2<S> {
        self.points[0]
    }

    pub fn last(&self) -> Point2<S> {
        self.points[self.points.len() - 1]
    }

    /// Applies `f` pointwise. The closure must keep points finite.
    pub fn map_points(&self, f: impl Fn(Point2<S>) -> Point2<S>) -> Result<Self, CoreError> {
        Self::new(self.points.iter().map(|&p| f(p)).collect(), self.dt)
    }

    /// Flattened `(x0, y0, x1, y1, ...)` view as a point in R^{2T}.
    pub fn flatten(&self) -> Vec<S> {
        self.points.iter().flat_map(|p| [p.x, p.y]).collect()
    }

    /// Total polyline length.
    pub fn arc_length(&self) -> S {
        self.points
            .windows(2)
            .map(|w| w[0].dist(&w[1]))
            .fold(S::zero(), |a, b| a + b)
    }

    /// Point at fraction `f` of the polyline's arc length, measured from the
    /// first point.
    pub fn point_at_fraction(&self, f: S) -> Point2<S> {
        let total = self.arc_length();
        if total <= S::zero() || f <= S::zero() {
            return self.first();
        }
        let target = total * f.min(S::one());
        let mut walked = S::zero();
        for w in self.points.windows(2) {
            let seg = w[0].dist(&w[1]);
            if walked + seg >= target && seg > S::zero() {
                let t = (target - walked) / seg;
                return Point2::new(
                    w[0].x + (w[1].x - w[0].x) * t,
                    w[0].y + (w[1].y - w[0].y) * t,
                );
            }
            walked = walked + seg;
        }
        self.last()
    }

    pub fn cast<T: Scalar>(&self) -> Trajectory<T> {
        Trajectory {
            points: self.points.iter().map(Point2::cast).collect(),
            dt: T::of(self.dt.f64()),
        }
    }
}
