//! Segment traversal over the raster and obstacle intersection checks.

use crate::geometry::{Point2, Trajectory};
use crate::raster::{cell_of, Cell, SegmentationMap};
use crate::scalar::Scalar;
use crate::scene::PredictionSet;

/// Cells crossed by the segment `a -> b`, in order, starting with the cell
/// of `a` (Amanatides-Woo grid walk). Cells outside the raster are skipped.
/// When the segment passes exactly through a cell corner the horizontal
/// neighbour is visited before the vertical one.
pub fn traverse_segment(a: Point2<f64>, b: Point2<f64>, width: usize, height: usize) -> Vec<Cell> {
    let mut out = vec![cell_of(a, width, height)];
    let end = cell_of(b, width, height);
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let mut cx = a.x.floor() as i64;
    let mut cy = a.y.floor() as i64;
    let axis = |p: f64, d: f64| -> (i64, f64, f64) {
        if d > 0.0 {
            (1, (p.floor() + 1.0 - p) / d, 1.0 / d)
        } else if d < 0.0 {
            (-1, (p - p.floor()) / -d, -1.0 / d)
        } else {
            (0, f64::INFINITY, f64::INFINITY)
        }
    };
    let (sx, mut tx, ddx) = axis(a.x, dx);
    let (sy, mut ty, ddy) = axis(a.y, dy);
    while tx.min(ty) <= 1.0 {
        if tx <= ty {
            cx += sx;
            tx += ddx;
        } else {
            cy += sy;
            ty += ddy;
        }
        if (0..width as i64).contains(&cx) && (0..height as i64).contains(&cy) {
            let c = Cell::new(cx as usize, cy as usize);
            if out.last() != Some(&c) {
                out.push(c);
            }
        }
    }
    if out.last() != Some(&end) {
        out.push(end);
    }
    out
}

fn trajectory_hits(
    t: &Trajectory<f64>,
    width: usize,
    height: usize,
    hit: &dyn Fn(Cell) -> bool,
) -> bool {
    let pts = t.points();
    if pts.len() == 1 {
        return hit(cell_of(pts[0], width, height));
    }
    pts.windows(2).any(|w| {
        traverse_segment(w[0], w[1], width, height)
            .into_iter()
            .any(hit)
    })
}

fn rate<S: Scalar>(
    preds: &PredictionSet<S>,
    width: usize,
    height: usize,
    hit: &dyn Fn(Cell) -> bool,
) -> f64 {
    let n = preds
        .trajectories()
        .iter()
        .filter(|t| trajectory_hits(&t.cast::<f64>(), width, height, hit))
        .count();
    n as f64 / preds.k() as f64
}

/// Fraction of predicted trajectories with a segment crossing a cell whose
/// class is in `blocked`.
pub fn intersection_rate<S: Scalar>(
    preds: &PredictionSet<S>,
    map: &SegmentationMap,
    blocked: &[u8],
) -> f64 {
    if !map.cells().iter().any(|c| blocked.contains(c)) {
        return 0.0;
    }
    rate(preds, map.width(), map.height(), &|c| {
        blocked.contains(&map.get(c))
    })
}

/// Fraction of predicted trajectories crossing any of `cells`.
pub fn intersection_rate_in<S: Scalar>(
    preds: &PredictionSet<S>,
    width: usize,
    height: usize,
    cells: &[Cell],
) -> f64 {
    let mut mask = vec![false; width * height];
    for c in cells {
        if c.col < width && c.row < height {
            mask[c.row * width + c.col] = true;
        }
    }
    rate(preds, width, height, &|c| mask[c.row * width + c.col])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::ClassLegend;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn sampled_cells(a: Point2<f64>, b: Point2<f64>, w: usize, h: usize) -> BTreeSet<Cell> {
        let len = a.dist(&b);
        let steps = (len / 0.01).ceil().max(1.0) as usize;
        (0..=steps)
            .map(|i| {
                let t = i as f64 / steps as f64;
                cell_of(
                    Point2::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t),
                    w,
                    h,
                )
            })
            .collect()
    }

    #[test]
    fn horizontal_segment_visits_middle_cell() {
        let cells = traverse_segment(Point2::new(0.5, 0.5), Point2::new(2.5, 0.5), 4, 4);
        assert_eq!(
            cells,
            vec![Cell::new(0, 0), Cell::new(1, 0), Cell::new(2, 0)]
        );
        let oracle = sampled_cells(Point2::new(0.5, 0.5), Point2::new(2.5, 0.5), 4, 4);
        assert_eq!(cells.into_iter().collect::<BTreeSet<_>>(), oracle);
    }

    #[test]
    fn rates_on_a_blocked_column() {
        let legend = ClassLegend::standard();
        let structure = legend.id_of(crate::raster::STRUCTURE).unwrap();
        let cells = (0..100)
            .map(|i| if i % 10 == 5 { structure } else { 2 })
            .collect();
        let map = SegmentationMap::new(10, 10, cells, legend).unwrap();
        let across = Trajectory::from_xy(&[(1.0, 1.0), (8.0, 1.5)], 0.4).unwrap();
        let along = Trajectory::from_xy(&[(1.0, 1.0), (1.0, 8.0)], 0.4).unwrap();
        let preds = PredictionSet::new(vec![across, along], None, 0).unwrap();
        assert_eq!(intersection_rate(&preds, &map, &[structure]), 0.5);
        assert_eq!(intersection_rate(&preds, &map, &[]), 0.0);
        assert_eq!(
            intersection_rate_in(&preds, 10, 10, &[Cell::new(1, 5)]),
            0.5
        );
    }

    proptest! {
        // every cell the dense sampling touches is visited, and the walk
        // adds at most corner-adjacent extras
        #[test]
        fn walk_covers_sampled_cells(ax in 0.0f64..20.0, ay in 0.0f64..20.0, bx in 0.0f64..20.0, by in 0.0f64..20.0) {
            let (a, b) = (Point2::new(ax, ay), Point2::new(bx, by));
            let walk: BTreeSet<Cell> = traverse_segment(a, b, 20, 20).into_iter().collect();
            let oracle = sampled_cells(a, b, 20, 20);
            prop_assert!(oracle.is_subset(&walk), "{:?} vs {:?}", oracle, walk);
            for c in &walk {
                let near = oracle.iter().any(|o| o.col.abs_diff(c.col) <= 1 && o.row.abs_diff(c.row) <= 1);
                prop_assert!(near);
            }
        }
    }
}
