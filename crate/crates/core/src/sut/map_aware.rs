//! Reference predictor that respects the semantic map: goals are drawn from
//! walkability times a Gaussian prior around the constant-velocity endpoint,
//! and paths detour around cells nobody can walk on.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{cv_velocity, require_history, Sut, SutError, SutErrorKind, SutRequest};
use crate::geometry::{Point2, Trajectory};
use crate::raster::{cell_of, Cell, ProbabilityMap, SegmentationMap};
use crate::scene::PredictionSet;
use crate::stats::traverse_segment;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapAwareConfig {
    /// Prior spread is `max(prior_sigma_min, prior_sigma_ratio * speed * T)`.
    pub prior_sigma_min: f64,
    pub prior_sigma_ratio: f64,
    /// Positional jitter (px) added to path points when it stays walkable.
    pub jitter: f64,
    /// Goal redraws when no path to a goal exists.
    pub goal_attempts: usize,
}

impl Default for MapAwareConfig {
    fn default() -> Self {
        Self {
            prior_sigma_min: 10.0,
            prior_sigma_ratio: 0.2,
            jitter: 0.5,
            goal_attempts: 8,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MapAwareReference {
    pub config: MapAwareConfig,
}

struct Grid<'a> {
    map: &'a SegmentationMap,
    walk: Vec<f64>,
}

impl<'a> Grid<'a> {
    fn new(map: &'a SegmentationMap) -> Self {
        let legend = map.legend();
        let walk = map.cells().iter().map(|&c| legend.walkability(c)).collect();
        Self { map, walk }
    }

    fn w(&self) -> usize {
        self.map.width()
    }

    fn h(&self) -> usize {
        self.map.height()
    }

    fn open(&self, c: Cell) -> bool {
        self.walk[c.row * self.w() + c.col] > 0.0
    }

    fn line_of_sight(&self, a: Point2, b: Point2) -> bool {
        traverse_segment(a, b, self.w(), self.h())
            .into_iter()
            .all(|c| self.open(c))
    }

    /// Greedy best-first search over 8-connected walkable cells. Diagonal
    /// steps need both orthogonal neighbours open so paths never squeeze
    /// between two blocked corners.
    fn search(&self, start: Cell, goal: Cell) -> Option<Vec<Cell>> {
        #[derive(PartialEq)]
        struct Node(f64, usize);
        impl Eq for Node {}
        impl Ord for Node {
            fn cmp(&self, o: &Self) -> Ordering {
                o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
            }
        }
        impl PartialOrd for Node {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }
        let (w, h) = (self.w(), self.h());
        let idx = |c: Cell| c.row * w + c.col;
        let heur = |c: Cell| {
            let dx = c.col as f64 - goal.col as f64;
            let dy = c.row as f64 - goal.row as f64;
            dx.hypot(dy)
        };
        let mut parent = vec![usize::MAX; w * h];
        let mut seen = vec![false; w * h];
        let mut heap = BinaryHeap::new();
        seen[idx(start)] = true;
        heap.push(Node(heur(start), idx(start)));
        while let Some(Node(_, i)) = heap.pop() {
            let cur = Cell::new(i % w, i / w);
            if cur == goal {
                let mut path = vec![cur];
                let mut j = i;
                while parent[j] != usize::MAX {
                    j = parent[j];
                    path.push(Cell::new(j % w, j / w));
                }
                path.reverse();
                return Some(path);
            }
            for (dc, dr) in [
                (-1i64, 0i64),
                (1, 0),
                (0, -1),
                (0, 1),
                (-1, -1),
                (1, -1),
                (-1, 1),
                (1, 1),
            ] {
                let (nc, nr) = (cur.col as i64 + dc, cur.row as i64 + dr);
                if nc < 0 || nr < 0 || nc >= w as i64 || nr >= h as i64 {
                    continue;
                }
                let next = Cell::new(nc as usize, nr as usize);
                if seen[idx(next)] || !self.open(next) {
                    continue;
                }
                if dc != 0
                    && dr != 0
                    && !(self.open(Cell::new(nc as usize, cur.row))
                        && self.open(Cell::new(cur.col, nr as usize)))
                {
                    continue;
                }
                seen[idx(next)] = true;
                parent[idx(next)] = i;
                heap.push(Node(heur(next), idx(next)));
            }
        }
        None
    }

    /// Shortcuts a cell path into waypoints with mutual line of sight.
    fn string_pull(&self, start: Point2, cells: &[Cell], goal: Point2) -> Vec<Point2> {
        let mut out = vec![start];
        let mut cur = start;
        let mut i = 0;
        while i + 1 < cells.len() {
            let mut j = cells.len() - 1;
            while j > i + 1 && !self.line_of_sight(cur, cells[j].center()) {
                j -= 1;
            }
            cur = cells[j].center();
            out.push(cur);
            i = j;
        }
        if out.last() != Some(&goal) {
            out.push(goal);
        }
        out
    }
}

/// `T` points at equal arc-length steps along `poly`, excluding its start.
/// A chord that would cut a blocked corner is pulled onto the polyline
/// vertex it skipped.
fn sample_polyline(grid: &Grid<'_>, poly: &[Point2], horizon: usize) -> Vec<Point2> {
    let mut cum = vec![0.0];
    for w in poly.windows(2) {
        cum.push(cum.last().unwrap() + w[0].dist(&w[1]));
    }
    let total = *cum.last().unwrap();
    let at = |s: f64| -> Point2 {
        if total <= 0.0 {
            return poly[0];
        }
        let k = cum.partition_point(|&c| c < s).clamp(1, poly.len() - 1);
        let seg = cum[k] - cum[k - 1];
        let t = if seg > 0.0 {
            ((s - cum[k - 1]) / seg).clamp(0.0, 1.0)
        } else {
            1.0
        };
        Point2::new(
            poly[k - 1].x + (poly[k].x - poly[k - 1].x) * t,
            poly[k - 1].y + (poly[k].y - poly[k - 1].y) * t,
        )
    };
    let mut out = Vec::with_capacity(horizon);
    let mut prev = (poly[0], 0.0);
    for t in 1..=horizon {
        let s = total * t as f64 / horizon as f64;
        let mut p = at(s);
        if !grid.line_of_sight(prev.0, p) {
            if let Some(v) = (1..poly.len()).find(|&v| cum[v] > prev.1 && cum[v] <= s) {
                p = poly[v];
                prev = (p, cum[v]);
                out.push(p);
                continue;
            }
        }
        prev = (p, s);
        out.push(p);
    }
    out
}

impl MapAwareReference {
    pub fn new(config: MapAwareConfig) -> Self {
        Self { config }
    }

    /// Walkability times the Gaussian prior, normalized; walkability alone
    /// when the product has no mass.
    pub fn prob_map(&self, req: &SutRequest<'_>) -> Result<ProbabilityMap, SutError> {
        let grid = Grid::new(req.map);
        let v = cv_velocity(req.history);
        let last = req.history.last();
        let tf = req.horizon as f64;
        let end = Point2::new(last.x + tf * v.x, last.y + tf * v.y);
        let sigma = self
            .config
            .prior_sigma_min
            .max(self.config.prior_sigma_ratio * v.x.hypot(v.y) * tf);
        let inv = 1.0 / (2.0 * sigma * sigma);
        let (w, h) = (grid.w(), grid.h());
        let mut weights = Vec::with_capacity(w * h);
        for r in 0..h {
            let dy = r as f64 + 0.5 - end.y;
            for c in 0..w {
                let dx = c as f64 + 0.5 - end.x;
                weights.push(grid.walk[r * w + c] * (-(dx * dx + dy * dy) * inv).exp());
            }
        }
        ProbabilityMap::from_weights(w, h, weights)
            .or_else(|_| ProbabilityMap::from_weights(w, h, grid.walk.clone()))
            .map_err(|_| {
                SutError::new(
                    req.scene_id,
                    SutErrorKind::Contract("map has no walkable cell".into()),
                )
            })
    }

    fn path_to(&self, grid: &Grid<'_>, start: Point2, goal: Point2) -> Option<Vec<Point2>> {
        if grid.line_of_sight(start, goal) {
            return Some(vec![start, goal]);
        }
        let (w, h) = (grid.w(), grid.h());
        let cells = grid.search(cell_of(start, w, h), cell_of(goal, w, h))?;
        Some(grid.string_pull(start, &cells, goal))
    }
}

impl Sut for MapAwareReference {
    fn name(&self) -> String {
        "map-aware".into()
    }

    fn provides_prob_map(&self) -> bool {
        true
    }

    fn predict(&self, req: &SutRequest<'_>) -> Result<PredictionSet, SutError> {
        require_history(req)?;
        let pm = self.prob_map(req)?;
        let grid = Grid::new(req.map);
        let (w, h) = (grid.w(), grid.h());
        let mut cdf = Vec::with_capacity(w * h);
        let mut acc = 0.0;
        for v in pm.values() {
            acc += v;
            cdf.push(acc);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
        let start = req.history.last();
        let mut trajectories = Vec::with_capacity(req.k);
        for _ in 0..req.k {
            let mut poly = None;
            for _ in 0..self.config.goal_attempts.max(1) {
                let u: f64 = rng.random::<f64>() * acc;
                let i = cdf.partition_point(|&c| c <= u).min(w * h - 1);
                let cell = Cell::new(i % w, i / w);
                let ox: f64 = rng.random_range(-0.4..0.4);
                let oy: f64 = rng.random_range(-0.4..0.4);
                let goal = Point2::new(cell.col as f64 + 0.5 + ox, cell.row as f64 + 0.5 + oy);
                if let Some(p) = self.path_to(&grid, start, goal) {
                    poly = Some(p);
                    break;
                }
            }
            // unreachable goals: stand still rather than walk through walls
            let poly = poly.unwrap_or_else(|| vec![start, start]);
            let mut pts = sample_polyline(&grid, &poly, req.horizon);
            let mut prev = start;
            for t in 0..pts.len() {
                let nx: f64 = rng.sample(StandardNormal);
                let ny: f64 = rng.sample(StandardNormal);
                let cand = Point2::new(
                    (pts[t].x + self.config.jitter * nx).clamp(0.0, w as f64),
                    (pts[t].y + self.config.jitter * ny).clamp(0.0, h as f64),
                );
                let ok_next = pts.get(t + 1).is_none_or(|&n| grid.line_of_sight(cand, n));
                if grid.line_of_sight(prev, cand) && ok_next {
                    pts[t] = cand;
                }
                prev = pts[t];
            }
            trajectories.push(Trajectory::new(pts, req.history.dt()).map_err(|e| {
                SutError::new(req.scene_id, SutErrorKind::InvariantBreach(e.to_string()))
            })?);
        }
        PredictionSet::new(trajectories, Some(pm), req.seed)
            .map_err(|e| SutError::new(req.scene_id, SutErrorKind::InvariantBreach(e.to_string())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{ClassLegend, STRUCTURE, TERRAIN};
    use crate::stats::{intersection_rate, intersection_rate_in};

    fn map_with(f: impl Fn(usize, usize) -> u8) -> SegmentationMap {
        let (w, h) = (120, 80);
        let cells = (0..w * h).map(|i| f(i % w, i / w)).collect();
        SegmentationMap::new(w, h, cells, ClassLegend::standard()).unwrap()
    }

    fn history() -> Trajectory {
        let pts: Vec<(f64, f64)> = (0..8).map(|i| (10.0 + 4.0 * i as f64, 40.0)).collect();
        Trajectory::from_xy(&pts, 0.4).unwrap()
    }

    fn req<'a>(map: &'a SegmentationMap, hist: &'a Trajectory, seed: u64) -> SutRequest<'a> {
        SutRequest {
            scene_id: "m",
            history: hist,
            map,
            k: 20,
            horizon: 12,
            seed,
        }
    }

    #[test]
    fn uniform_walkability_gives_the_prior() {
        let map = map_with(|_, _| 2);
        let hist = history();
        let sut = MapAwareReference::default();
        let pm = sut.prob_map(&req(&map, &hist, 0)).unwrap();
        let v = cv_velocity(&hist);
        let end = Point2::new(hist.last().x + 12.0 * v.x, hist.last().y + 12.0 * v.y);
        let sigma = 10f64.max(0.2 * 4.0 * 12.0);
        let prior: Vec<f64> = (0..map.cells().len())
            .map(|i| {
                let c = Cell::new(i % 120, i / 120).center::<f64>();
                (-c.dist_sq(&end) / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let prior = ProbabilityMap::from_weights(120, 80, prior).unwrap();
        for (a, b) in pm.values().iter().zip(prior.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn reproducible_per_seed() {
        let map = map_with(|_, _| 2);
        let hist = history();
        let sut = MapAwareReference::default();
        let a = sut.predict(&req(&map, &hist, 9)).unwrap();
        assert_eq!(a, sut.predict(&req(&map, &hist, 9)).unwrap());
        assert_ne!(a, sut.predict(&req(&map, &hist, 10)).unwrap());
    }

    #[test]
    fn blocked_cells_get_no_mass() {
        let map = map_with(|c, _| if c % 9 == 0 { 3 } else { 4 });
        let hist = history();
        let pm = MapAwareReference::default()
            .prob_map(&req(&map, &hist, 0))
            .unwrap();
        for (v, &c) in pm.values().iter().zip(map.cells()) {
            if c == 3 {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn reroutes_around_an_obstacle() {
        let structure = ClassLegend::standard().id_of(STRUCTURE).unwrap();
        // a wall across the direction of travel with room to pass above and below
        let map = map_with(|c, r| {
            if (52..60).contains(&c) && (25..55).contains(&r) {
                structure
            } else {
                2
            }
        });
        let hist = history();
        let p = MapAwareReference::default()
            .predict(&req(&map, &hist, 4))
            .unwrap();
        assert_eq!(intersection_rate(&p, &map, &[structure]), 0.0);
        let wall: Vec<Cell> = map.cells_of_class(structure);
        assert_eq!(intersection_rate_in(&p, 120, 80, &wall), 0.0);
    }

    #[test]
    fn class_change_lowers_roi_mass_by_the_walkability_ratio() {
        let legend = ClassLegend::standard();
        let terrain = legend.id_of(TERRAIN).unwrap();
        let road = legend.id_of(crate::raster::ROAD).unwrap();
        let before = map_with(|c, _| if c > 60 { terrain } else { 2 });
        let after = map_with(|c, _| if c > 60 { road } else { 2 });
        let hist = history();
        let sut = MapAwareReference::default();
        let p = sut.prob_map(&req(&before, &hist, 0)).unwrap();
        let q = sut.prob_map(&req(&after, &hist, 0)).unwrap();
        // unnormalized weights scale by 0.2 / 0.6 on every changed cell
        let ratio_p = p.values()[70] / p.values()[30];
        let ratio_q = q.values()[70] / q.values()[30];
        assert!((ratio_q / ratio_p - 1.0 / 3.0).abs() < 1e-12);
        let mass = |m: &ProbabilityMap| {
            (0..m.values().len())
                .filter(|i| i % 120 > 60)
                .map(|i| m.values()[i])
                .sum::<f64>()
        };
        assert!(mass(&q) < mass(&p));
    }
}
