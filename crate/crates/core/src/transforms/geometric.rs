use super::{CoordMap, MirrorAxis, RasterOp, TransformError, TransformResult};
use crate::raster::SegmentationMap;
use crate::scalar::Scalar;
use crate::scene::TestCase;

/// Smallest side length a rescaled map may have.
pub const MIN_RESCALED_SIDE: usize = 8;

fn geometric<S: Scalar>(
    tc: &TestCase<S>,
    forward: CoordMap<S>,
    inverse: CoordMap<S>,
    op: RasterOp,
) -> Result<TransformResult<S>, TransformError> {
    let (w, h) = (tc.map.width(), tc.map.height());
    let (nw, nh) = op.output_dims(w, h);
    let map = tc.map.with_cells(nw, nh, op.apply(tc.map.cells(), w, h))?;
    let follow_up = TestCase {
        scene_id: tc.scene_id.clone(),
        map,
        history: forward.apply_trajectory(&tc.history)?,
        ground_truth: tc
            .ground_truth
            .as_ref()
            .map(|g| forward.apply_trajectory(g))
            .transpose()?,
    };
    Ok(TransformResult {
        follow_up,
        label_preserving: true,
        forward,
        inverse: Some(inverse),
        roi: None,
        expected_effect: None,
        raster_op: op,
    })
}

/// Reflects map and trajectories across the vertical (`x -> W - x`) or
/// horizontal (`y -> H - y`) center line.
pub fn mr_mirror<S: Scalar>(
    tc: &TestCase<S>,
    axis: MirrorAxis,
) -> Result<TransformResult<S>, TransformError> {
    let w = S::of_usize(tc.map.width());
    let h = S::of_usize(tc.map.height());
    match axis {
        MirrorAxis::Vertical => {
            let m = CoordMap::MirrorVertical { width: w };
            geometric(tc, m, m, RasterOp::MirrorVertical)
        }
        MirrorAxis::Horizontal => {
            let m = CoordMap::MirrorHorizontal { height: h };
            geometric(tc, m, m, RasterOp::MirrorHorizontal)
        }
    }
}

/// Rotates clockwise by 90, 180 or 270 degrees. A quarter turn maps
/// `(x, y) -> (H - y, x)` and swaps the map dimensions.
pub fn mr_rotate<S: Scalar>(
    tc: &TestCase<S>,
    degrees: u32,
) -> Result<TransformResult<S>, TransformError> {
    let w = S::of_usize(tc.map.width());
    let h = S::of_usize(tc.map.height());
    match degrees {
        // the inverse of a quarter turn runs in the rotated frame, whose
        // width is the source height
        90 => geometric(
            tc,
            CoordMap::Rotate90 { height: h },
            CoordMap::Rotate270 { width: h },
            RasterOp::Rotate90,
        ),
        180 => {
            let m = CoordMap::Rotate180 {
                width: w,
                height: h,
            };
            geometric(tc, m, m, RasterOp::Rotate180)
        }
        270 => geometric(
            tc,
            CoordMap::Rotate270 { width: w },
            CoordMap::Rotate90 { height: w },
            RasterOp::Rotate270,
        ),
        d => Err(TransformError::UnsupportedAngle(d)),
    }
}

/// Changes the input scale from `s_old` to `s_new`: coordinates are
/// multiplied by `r = s_new / s_old` and the map is resampled by nearest
/// neighbor to `round(W r) x round(H r)`.
pub fn mr_rescale<S: Scalar>(
    tc: &TestCase<S>,
    s_old: f64,
    s_new: f64,
) -> Result<TransformResult<S>, TransformError> {
    let ok = |s: f64| s > 0.0 && s <= 1.0;
    if !(ok(s_old) && ok(s_new)) {
        return Err(TransformError::InvalidParams(format!(
            "rescale factors must lie in (0, 1], got {s_old} and {s_new}"
        )));
    }
    let r = s_new / s_old;
    let (w, h) = (tc.map.width(), tc.map.height());
    let nw = (w as f64 * r).round() as usize;
    let nh = (h as f64 * r).round() as usize;
    if nw < MIN_RESCALED_SIDE || nh < MIN_RESCALED_SIDE {
        return Err(TransformError::Degenerate {
            width: nw,
            height: nh,
            min: MIN_RESCALED_SIDE,
        });
    }
    let forward = CoordMap::Scale { factor: S::of(r) };
    let inverse = CoordMap::Scale {
        factor: S::of(s_old / s_new),
    };
    geometric(
        tc,
        forward,
        inverse,
        RasterOp::Resample {
            width: nw,
            height: nh,
        },
    )
}

/// Nearest-neighbor resample of a class raster. Labels are copied, never
/// blended.
pub fn resample_nearest(
    map: &SegmentationMap,
    width: usize,
    height: usize,
) -> Result<SegmentationMap, TransformError> {
    if width == 0 || height == 0 {
        return Err(TransformError::Degenerate {
            width,
            height,
            min: 1,
        });
    }
    let cells = resample_values(map.cells(), map.width(), map.height(), width, height);
    Ok(map.with_cells(width, height, cells)?)
}

pub(super) fn resample_values<T: Copy>(
    values: &[T],
    w: usize,
    h: usize,
    nw: usize,
    nh: usize,
) -> Vec<T> {
    let sx = w as f64 / nw as f64;
    let sy = h as f64 / nh as f64;
    let src =
        |i: usize, scale: f64, n: usize| (((i as f64 + 0.5) * scale).floor() as usize).min(n - 1);
    let cols: Vec<usize> = (0..nw).map(|c| src(c, sx, w)).collect();
    let mut out = Vec::with_capacity(nw * nh);
    for r in 0..nh {
        let row = src(r, sy, h) * w;
        out.extend(cols.iter().map(|&c| values[row + c]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point2, Trajectory};
    use crate::raster::ClassLegend;

    fn case(w: usize, h: usize, cells: Vec<u8>, hist: &[(f64, f64)]) -> TestCase {
        TestCase {
            scene_id: "t".into(),
            map: SegmentationMap::new(w, h, cells, ClassLegend::standard()).unwrap(),
            history: Trajectory::from_xy(hist, 0.4).unwrap(),
            ground_truth: None,
        }
    }

    #[test]
    fn mirror_vertical_reflects_x() {
        let tc = case(100, 100, vec![0; 100 * 100], &[(10.0, 20.0)]);
        let tr = mr_mirror(&tc, MirrorAxis::Vertical).unwrap();
        assert_eq!(tr.follow_up.history.first(), Point2::new(90.0, 20.0));
        assert!(tr.label_preserving);
    }

    #[test]
    fn mirror_is_an_involution() {
        let tc = case(3, 2, vec![0, 1, 2, 3, 4, 5], &[(0.5, 1.25), (2.75, 0.125)]);
        for axis in [MirrorAxis::Vertical, MirrorAxis::Horizontal] {
            let once = mr_mirror(&tc, axis).unwrap().follow_up;
            assert_ne!(once, tc);
            assert_eq!(mr_mirror(&once, axis).unwrap().follow_up, tc);
        }
    }

    #[test]
    fn mirror_horizontal_reverses_rows() {
        let tc = case(2, 2, vec![0, 1, 2, 3], &[(0.5, 0.5)]);
        let tr = mr_mirror(&tc, MirrorAxis::Horizontal).unwrap();
        assert_eq!(tr.follow_up.map.cells(), &[2, 3, 0, 1]);
    }

    #[test]
    fn quarter_turn_formula_and_dimensions() {
        let tc = case(100, 80, vec![0; 8000], &[(10.0, 20.0)]);
        let tr = mr_rotate(&tc, 90).unwrap();
        assert_eq!(tr.follow_up.history.first(), Point2::new(60.0, 10.0));
        assert_eq!(
            (tr.follow_up.map.width(), tr.follow_up.map.height()),
            (80, 100)
        );
        let back = tr.inverse.unwrap().apply(Point2::new(60.0, 10.0));
        assert_eq!(back, Point2::new(10.0, 20.0));
    }

    #[test]
    fn rotations_compose_to_identity() {
        let cells: Vec<u8> = (0..12).map(|i| (i % 6) as u8).collect();
        let tc = case(4, 3, cells, &[(0.5, 2.25), (3.875, 1.5)]);
        let mut cur = tc.clone();
        for _ in 0..4 {
            cur = mr_rotate(&cur, 90).unwrap().follow_up;
        }
        assert_eq!(cur, tc);
        let half = mr_rotate(&tc, 180).unwrap().follow_up;
        assert_eq!(mr_rotate(&half, 180).unwrap().follow_up, tc);
        let three = mr_rotate(&tc, 270).unwrap().follow_up;
        let mut thrice = tc.clone();
        for _ in 0..3 {
            thrice = mr_rotate(&thrice, 90).unwrap().follow_up;
        }
        assert_eq!(three, thrice);
    }

    #[test]
    fn rejects_other_angles() {
        let tc = case(4, 4, vec![0; 16], &[(1.0, 1.0)]);
        assert_eq!(
            mr_rotate(&tc, 45).unwrap_err(),
            TransformError::UnsupportedAngle(45)
        );
    }

    #[test]
    fn rescale_scales_coordinates() {
        let tc = case(100, 100, vec![2; 10000], &[(10.0, 20.0)]);
        let tr = mr_rescale(&tc, 0.25, 0.2).unwrap();
        let p = tr.follow_up.history.first();
        assert!((p.x - 8.0).abs() < 1e-12 && (p.y - 16.0).abs() < 1e-12);
        assert_eq!(
            (tr.follow_up.map.width(), tr.follow_up.map.height()),
            (80, 80)
        );
    }

    #[test]
    fn unit_rescale_is_identity() {
        let cells: Vec<u8> = (0..100).map(|i| (i % 6) as u8).collect();
        let tc = case(10, 10, cells, &[(1.3, 7.7), (2.2, 5.1)]);
        assert_eq!(mr_rescale(&tc, 0.25, 0.25).unwrap().follow_up, tc);
    }

    #[test]
    fn nearest_neighbor_keeps_constant_field() {
        let map = SegmentationMap::filled(4, 4, 4, ClassLegend::standard()).unwrap();
        let small = resample_nearest(&map, 2, 2).unwrap();
        assert_eq!(small.cells(), &[4, 4, 4, 4]);
    }

    #[test]
    fn rescale_below_minimum_is_degenerate() {
        let tc = case(4, 4, vec![4; 16], &[(1.0, 1.0)]);
        assert!(matches!(
            mr_rescale(&tc, 0.5, 0.25),
            Err(TransformError::Degenerate {
                width: 2,
                height: 2,
                ..
            })
        ));
    }
}
