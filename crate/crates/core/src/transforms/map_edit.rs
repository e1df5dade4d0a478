use std::f64::consts::PI;

use super::{CoordMap, Effect, RasterOp, TransformError, TransformResult};
use crate::geometry::Point2;
use crate::raster::Cell;
use crate::scalar::Scalar;
use crate::scene::{PredictionSet, TestCase};

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleParams {
    /// Obstacle class name, `structure` or `tree`.
    pub class: String,
    /// Circumradius in pixels.
    pub radius: f64,
    /// Placement along the anchoring trajectory, as a fraction of its length.
    pub fraction: f64,
}

fn map_edit<S: Scalar>(
    tc: &TestCase<S>,
    cells: Vec<u8>,
    roi: Vec<Cell>,
    effect: Effect,
) -> Result<TransformResult<S>, TransformError> {
    let map = tc.map.with_cells(tc.map.width(), tc.map.height(), cells)?;
    Ok(TransformResult {
        follow_up: TestCase {
            scene_id: tc.scene_id.clone(),
            map,
            history: tc.history.clone(),
            ground_truth: tc.ground_truth.clone(),
        },
        label_preserving: false,
        forward: CoordMap::Identity,
        inverse: None,
        roi: Some(roi),
        expected_effect: Some(effect),
        raster_op: RasterOp::Identity,
    })
}

fn class_id<S: Scalar>(tc: &TestCase<S>, name: &str) -> Result<u8, TransformError> {
    tc.map.legend().id_of(name).ok_or_else(|| {
        TransformError::InvalidParams(format!("class '{name}' is not in the legend"))
    })
}

/// Replaces every cell of `source` with `target`.
pub fn mr_class_change<S: Scalar>(
    tc: &TestCase<S>,
    source: &str,
    target: &str,
    effect: Effect,
) -> Result<TransformResult<S>, TransformError> {
    let src = class_id(tc, source)?;
    let tgt = class_id(tc, target)?;
    let roi = tc.map.cells_of_class(src);
    if roi.is_empty() {
        return Err(TransformError::NotApplicable(format!(
            "scene has no '{source}' cells"
        )));
    }
    let cells = tc
        .map
        .cells()
        .iter()
        .map(|&c| if c == src { tgt } else { c })
        .collect();
    map_edit(tc, cells, roi, effect)
}

/// Vertices of a regular 12-gon with one vertex due east of `center`,
/// listed counter-clockwise in the x-right/y-up sense.
pub fn dodecagon(center: Point2<f64>, radius: f64) -> Vec<Point2<f64>> {
    (0..12)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / 12.0;
            Point2::new(center.x + radius * a.cos(), center.y + radius * a.sin())
        })
        .collect()
}

/// Cells of a `width x height` raster whose centers lie inside or on the
/// boundary of the convex polygon `vertices` (consistently ordered).
pub fn rasterize_convex_polygon(
    vertices: &[Point2<f64>],
    width: usize,
    height: usize,
) -> Vec<Cell> {
    if vertices.len() < 3 {
        return Vec::new();
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for v in vertices {
        x0 = x0.min(v.x);
        x1 = x1.max(v.x);
        y0 = y0.min(v.y);
        y1 = y1.max(v.y);
    }
    let lo = |v: f64| (v - 0.5).ceil().max(0.0) as usize;
    let hi = |v: f64, n: usize| -> Option<usize> {
        let t = (v - 0.5).floor();
        (t >= 0.0).then(|| (t as usize).min(n - 1))
    };
    let (Some(c1), Some(r1)) = (hi(x1, width), hi(y1, height)) else {
        return Vec::new();
    };
    let (c0, r0) = (lo(x0), lo(y0));
    // orientation sign of the polygon, so either winding works
    let area: f64 = vertices
        .iter()
        .zip(vertices.iter().cycle().skip(1))
        .map(|(a, b)| a.x * b.y - b.x * a.y)
        .sum();
    let sign = if area >= 0.0 { 1.0 } else { -1.0 };
    let inside = |p: Point2<f64>| {
        vertices
            .iter()
            .zip(vertices.iter().cycle().skip(1))
            .all(|(a, b)| {
                let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
                sign * cross >= -1e-12
            })
    };
    let mut cells = Vec::new();
    for r in r0..=r1 {
        for c in c0..=c1.min(width - 1) {
            let cell = Cell::new(c, r);
            if inside(cell.center()) {
                cells.push(cell);
            }
        }
    }
    cells
}

/// Places a 12-sided obstacle on the first sampled source trajectory, at
/// `fraction` of its arc length.
pub fn mr_obstacle<S: Scalar>(
    tc: &TestCase<S>,
    source_prediction: &PredictionSet<S>,
    params: &ObstacleParams,
) -> Result<TransformResult<S>, TransformError> {
    if !(params.radius >= 2.0) {
        return Err(TransformError::InvalidParams(format!(
            "obstacle radius must be at least 2 px, got {}",
            params.radius
        )));
    }
    if !(params.fraction > 0.0 && params.fraction < 1.0) {
        return Err(TransformError::InvalidParams(format!(
            "placement fraction must lie in (0, 1), got {}",
            params.fraction
        )));
    }
    let class = class_id(tc, &params.class)?;
    let anchor_traj = source_prediction
        .trajectories()
        .first()
        .ok_or_else(|| TransformError::Contract("source prediction is empty".into()))?;
    let anchor = anchor_traj
        .point_at_fraction(S::of(params.fraction))
        .cast::<f64>();
    let agent = tc.history.last().cast::<f64>();
    let gap = anchor.dist(&agent);
    if gap < params.radius {
        return Err(TransformError::Placement(format!(
            "anchor is {gap:.2} px from the agent, inside the obstacle radius {}",
            params.radius
        )));
    }
    let roi = rasterize_convex_polygon(
        &dodecagon(anchor, params.radius),
        tc.map.width(),
        tc.map.height(),
    );
    if roi.is_empty() {
        return Err(TransformError::Placement(
            "obstacle lies entirely outside the map".into(),
        ));
    }
    let mut cells = tc.map.cells().to_vec();
    for cell in &roi {
        cells[tc.map.index(*cell)] = class;
    }
    map_edit(tc, cells, roi, Effect::Avoidance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Trajectory;
    use crate::raster::{ClassLegend, SegmentationMap, PAVEMENT, ROAD, STRUCTURE, TERRAIN};

    fn scene() -> TestCase {
        // left half terrain, right half pavement
        let (w, h) = (100, 100);
        let cells = (0..w * h).map(|i| if i % w < 50 { 4 } else { 2 }).collect();
        TestCase {
            scene_id: "m".into(),
            map: SegmentationMap::new(w, h, cells, ClassLegend::standard()).unwrap(),
            history: Trajectory::from_xy(&[(0.5, 50.0), (1.0, 50.0)], 0.4).unwrap(),
            ground_truth: None,
        }
    }

    fn straight_prediction() -> PredictionSet {
        let t = Trajectory::from_xy(&[(0.0, 50.0), (100.0, 50.0)], 0.4).unwrap();
        PredictionSet::new(vec![t], None, 0).unwrap()
    }

    #[test]
    fn class_change_edits_exactly_the_roi() {
        let tc = scene();
        let tr = mr_class_change(&tc, TERRAIN, ROAD, Effect::Decrease).unwrap();
        let roi = tr.roi.as_ref().unwrap();
        assert_eq!(roi.len(), 5000);
        let road = tc.map.legend().id_of(ROAD).unwrap();
        for r in 0..100 {
            for c in 0..100 {
                let cell = Cell::new(c, r);
                let after = tr.follow_up.map.get(cell);
                if roi.binary_search(&cell).is_ok() {
                    assert_eq!(after, road);
                } else {
                    assert_eq!(after, tc.map.get(cell));
                }
            }
        }
        assert_eq!(tr.follow_up.history, tc.history);
        assert!(!tr.label_preserving);
    }

    #[test]
    fn class_change_without_source_cells_is_skipped() {
        let tc = scene();
        let err = mr_class_change(&tc, ROAD, PAVEMENT, Effect::Increase).unwrap_err();
        assert!(err.is_skip());
    }

    #[test]
    fn obstacle_centered_on_the_anchor() {
        let tc = scene();
        let params = ObstacleParams {
            class: STRUCTURE.into(),
            radius: 6.0,
            fraction: 0.5,
        };
        let tr = mr_obstacle(&tc, &straight_prediction(), &params).unwrap();
        let structure = tc.map.legend().id_of(STRUCTURE).unwrap();
        assert_eq!(tr.follow_up.map.get(Cell::new(50, 50)), structure);
        assert!(tr.roi.as_ref().unwrap().contains(&Cell::new(50, 50)));
        assert_eq!(tr.expected_effect, Some(Effect::Avoidance));
    }

    #[test]
    fn obstacle_too_close_to_the_agent() {
        let mut tc = scene();
        tc.history = Trajectory::from_xy(&[(45.0, 50.0), (48.0, 50.0)], 0.4).unwrap();
        let params = ObstacleParams {
            class: STRUCTURE.into(),
            radius: 6.0,
            fraction: 0.5,
        };
        let err = mr_obstacle(&tc, &straight_prediction(), &params).unwrap_err();
        assert!(matches!(err, TransformError::Placement(_)));
    }

    #[test]
    fn obstacle_outside_the_map() {
        let tc = scene();
        let far = Trajectory::from_xy(&[(300.0, 300.0), (400.0, 300.0)], 0.4).unwrap();
        let pred = PredictionSet::new(vec![far], None, 0).unwrap();
        let params = ObstacleParams {
            class: STRUCTURE.into(),
            radius: 6.0,
            fraction: 0.5,
        };
        assert!(matches!(
            mr_obstacle(&tc, &pred, &params).unwrap_err(),
            TransformError::Placement(_)
        ));
    }

    #[test]
    fn dodecagon_has_an_east_vertex() {
        let v = dodecagon(Point2::new(10.0, 10.0), 6.0);
        assert_eq!(v.len(), 12);
        assert_eq!(v[0], Point2::new(16.0, 10.0));
        for p in &v {
            assert!((p.dist(&Point2::new(10.0, 10.0)) - 6.0).abs() < 1e-12);
        }
    }
}
