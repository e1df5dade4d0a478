//! Deterministic synthetic scenes: road bands with pavement on both sides,
//! terrain patches, buildings and trees, and one pedestrian walking along a
//! pavement strip.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, Trajectory};
use crate::harness::HarnessConfig;
use crate::raster::{
    cell_of, Cell, ClassLegend, SegmentationMap, BACKGROUND, PAVEMENT, ROAD, STRUCTURE, TERRAIN,
    TREE,
};
use crate::scene::{validate_test_case, TestCase};

pub const MIN_SIDE: usize = 64;
const MAX_ATTEMPTS: usize = 200;
/// Coordinates are snapped to this grid so files round-trip exactly.
const QUANTUM: f64 = 1.0 / 1024.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneGenError {
    #[error("invalid recipe: {0}")]
    Recipe(String),
    #[error("no walkable corridor of {steps} steps found after {attempts} attempts")]
    NoCorridor { steps: usize, attempts: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecipe {
    pub scene_id: String,
    pub width: usize,
    pub height: usize,
    pub horizontal_roads: usize,
    pub vertical_roads: usize,
    /// Inclusive range of road widths in px.
    pub road_width: (usize, usize),
    pub pavement_width: (usize, usize),
    pub terrain_patches: usize,
    pub terrain_size: (usize, usize),
    pub structure_blobs: usize,
    pub structure_size: (usize, usize),
    pub tree_blobs: usize,
    pub tree_radius: (usize, usize),
    /// Walking speed in px per step.
    pub speed: (f64, f64),
    /// Start cell; picked on a pavement strip when absent.
    pub start: Option<(usize, usize)>,
    /// Heading in radians, clockwise from +x; follows the strip when absent.
    pub heading: Option<f64>,
    pub seed: u64,
}

impl Default for SceneRecipe {
    fn default() -> Self {
        Self {
            scene_id: "scene-000".into(),
            width: 192,
            height: 160,
            horizontal_roads: 1,
            vertical_roads: 1,
            road_width: (14, 22),
            pavement_width: (6, 10),
            terrain_patches: 3,
            terrain_size: (18, 44),
            structure_blobs: 3,
            structure_size: (10, 28),
            tree_blobs: 6,
            tree_radius: (3, 6),
            speed: (3.0, 5.0),
            start: None,
            heading: None,
            seed: 0,
        }
    }
}

impl SceneRecipe {
    /// The default corpus: `count` recipes with seeds derived from `seed`.
    pub fn corpus(count: usize, seed: u64) -> Vec<SceneRecipe> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|i| SceneRecipe {
                scene_id: format!("scene-{i:03}"),
                horizontal_roads: rng.random_range(1..=2),
                vertical_roads: rng.random_range(0..=2),
                seed: rng.random(),
                ..SceneRecipe::default()
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), SceneGenError> {
        let bad = |m: String| Err(SceneGenError::Recipe(m));
        if self.width < MIN_SIDE || self.height < MIN_SIDE {
            return bad(format!(
                "map must be at least {MIN_SIDE}x{MIN_SIDE}, got {}x{}",
                self.width, self.height
            ));
        }
        if self.scene_id.trim().is_empty() {
            return bad("scene_id is empty".into());
        }
        for (name, (lo, hi)) in [
            ("road_width", self.road_width),
            ("pavement_width", self.pavement_width),
            ("terrain_size", self.terrain_size),
            ("structure_size", self.structure_size),
            ("tree_radius", self.tree_radius),
        ] {
            if lo == 0 || lo > hi {
                return bad(format!("{name} range {lo}..={hi} is empty or zero"));
            }
        }
        if !(self.speed.0 > 0.0 && self.speed.0 <= self.speed.1 && self.speed.1.is_finite()) {
            return bad(format!("speed range {:?} is invalid", self.speed));
        }
        if self.horizontal_roads + self.vertical_roads == 0 && self.start.is_none() {
            return bad("without roads there is no pavement to start on; give a start cell".into());
        }
        if let Some((c, r)) = self.start {
            if c >= self.width || r >= self.height {
                return bad(format!("start cell ({c}, {r}) outside the map"));
            }
        }
        Ok(())
    }
}

struct Canvas {
    w: usize,
    h: usize,
    cells: Vec<u8>,
}

impl Canvas {
    fn paint_rect(
        &mut self,
        x0: usize,
        y0: usize,
        x1: usize,
        y1: usize,
        id: u8,
        only_on: Option<&[u8]>,
    ) {
        for r in y0.min(self.h)..y1.min(self.h) {
            for c in x0.min(self.w)..x1.min(self.w) {
                let i = r * self.w + c;
                if only_on.is_none_or(|ids| ids.contains(&self.cells[i])) {
                    self.cells[i] = id;
                }
            }
        }
    }

    fn paint_disc(&mut self, cx: f64, cy: f64, radius: f64, id: u8, only_on: &[u8]) {
        for r in 0..self.h {
            for c in 0..self.w {
                let (dx, dy) = (c as f64 + 0.5 - cx, r as f64 + 0.5 - cy);
                let i = r * self.w + c;
                if dx * dx + dy * dy <= radius * radius && only_on.contains(&self.cells[i]) {
                    self.cells[i] = id;
                }
            }
        }
    }
}

/// A straight pavement strip the pedestrian can walk along.
#[derive(Debug, Clone, Copy)]
struct Strip {
    horizontal: bool,
    /// Center line coordinate across the strip.
    center: f64,
}

fn id(legend: &ClassLegend, name: &str) -> u8 {
    legend.id_of(name).expect("standard legend class")
}

fn quantize(v: f64) -> f64 {
    (v / QUANTUM).round() * QUANTUM
}

fn layout(
    recipe: &SceneRecipe,
    legend: &ClassLegend,
    rng: &mut ChaCha8Rng,
) -> (Canvas, Vec<Strip>) {
    let (w, h) = (recipe.width, recipe.height);
    let mut canvas = Canvas {
        w,
        h,
        cells: vec![id(legend, BACKGROUND); w * h],
    };
    let (road, pave, terrain, structure, tree, bg) = (
        id(legend, ROAD),
        id(legend, PAVEMENT),
        id(legend, TERRAIN),
        id(legend, STRUCTURE),
        id(legend, TREE),
        id(legend, BACKGROUND),
    );
    let mut strips = Vec::new();
    let mut bands = Vec::new();
    for horizontal in [true, false] {
        let count = if horizontal {
            recipe.horizontal_roads
        } else {
            recipe.vertical_roads
        };
        let extent = if horizontal { h } else { w };
        for i in 0..count {
            let rw = rng.random_range(recipe.road_width.0..=recipe.road_width.1);
            let pw = rng.random_range(recipe.pavement_width.0..=recipe.pavement_width.1);
            let slot = extent / count;
            let total = rw + 2 * pw;
            let lo = i * slot + slot.saturating_sub(total) / 4;
            let hi = ((i + 1) * slot).saturating_sub(total).max(lo + 1);
            let start = rng.random_range(lo..hi).min(extent.saturating_sub(total));
            bands.push((horizontal, start, rw, pw));
            for (a, b) in [(start, start + pw), (start + pw + rw, start + total)] {
                strips.push(Strip {
                    horizontal,
                    center: (a + b) as f64 / 2.0,
                })
            }
        }
    }
    // pavement first so crossing roads cut through it
    for &(horizontal, start, rw, pw) in &bands {
        let (a, b) = (start, start + rw + 2 * pw);
        if horizontal {
            canvas.paint_rect(0, a, w, b, pave, None);
        } else {
            canvas.paint_rect(a, 0, b, h, pave, None);
        }
    }
    for &(horizontal, start, rw, pw) in &bands {
        let (a, b) = (start + pw, start + pw + rw);
        if horizontal {
            canvas.paint_rect(0, a, w, b, road, None);
        } else {
            canvas.paint_rect(a, 0, b, h, road, None);
        }
    }
    let mut rect = |canvas: &mut Canvas, size: (usize, usize), class: u8, only_on: &[u8]| {
        let sw = rng.random_range(size.0..=size.1);
        let sh = rng.random_range(size.0..=size.1);
        let x = rng.random_range(0..w);
        let y = rng.random_range(0..h);
        canvas.paint_rect(x, y, x + sw, y + sh, class, Some(only_on));
    };
    for _ in 0..recipe.terrain_patches {
        rect(&mut canvas, recipe.terrain_size, terrain, &[bg]);
    }
    for _ in 0..recipe.structure_blobs {
        rect(&mut canvas, recipe.structure_size, structure, &[bg]);
    }
    for _ in 0..recipe.tree_blobs {
        let radius = rng.random_range(recipe.tree_radius.0..=recipe.tree_radius.1) as f64;
        let (cx, cy) = (
            rng.random_range(0.0..w as f64),
            rng.random_range(0.0..h as f64),
        );
        canvas.paint_disc(cx, cy, radius, tree, &[bg, terrain]);
    }
    (canvas, strips)
}

/// Samples a walk of `steps` points starting at `start` heading along
/// `heading`, with a gentle curve and a lateral wiggle.
fn walk(
    start: Point2,
    heading: f64,
    speed: f64,
    steps: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Point2> {
    let curve = rng.random_range(-0.01..0.01);
    let amp = rng.random_range(0.2..0.6);
    let freq = rng.random_range(0.6..1.4);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let mut pts = Vec::with_capacity(steps);
    let mut base = start;
    let mut theta = heading;
    for i in 0..steps {
        let normal = (-theta.sin(), theta.cos());
        let off = amp * (freq * i as f64 + phase).sin();
        pts.push(Point2::new(
            quantize(base.x + off * normal.0),
            quantize(base.y + off * normal.1),
        ));
        let s = speed * (1.0 + 0.05 * rng.random_range(-1.0..1.0));
        base = Point2::new(base.x + s * theta.cos(), base.y + s * theta.sin());
        theta += curve;
    }
    pts
}

fn walkable_inside(map: &SegmentationMap, pts: &[Point2], margin: f64) -> bool {
    let (w, h) = (map.width() as f64, map.height() as f64);
    pts.iter().all(|p| {
        p.x >= margin
            && p.y >= margin
            && p.x <= w - margin
            && p.y <= h - margin
            && map.walkability_at(cell_of(*p, map.width(), map.height())) > 0.0
    })
}

/// Builds one scene. Deterministic per recipe.
pub fn generate_scene(
    recipe: &SceneRecipe,
    cfg: &HarnessConfig,
) -> Result<TestCase, SceneGenError> {
    recipe.validate()?;
    if cfg.history_len < 2 || cfg.horizon == 0 || !(cfg.dt > 0.0) {
        return Err(SceneGenError::Recipe(
            "configuration needs n >= 2, T >= 1 and dt > 0".into(),
        ));
    }
    let legend = ClassLegend::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
    let (canvas, strips) = layout(recipe, &legend, &mut rng);
    let map = SegmentationMap::new(canvas.w, canvas.h, canvas.cells, legend)
        .map_err(|e| SceneGenError::Recipe(e.to_string()))?;
    if let Some((c, r)) = recipe.start {
        if map.walkability_at(Cell::new(c, r)) <= 0.0 {
            return Err(SceneGenError::Recipe(format!(
                "start cell ({c}, {r}) is not walkable"
            )));
        }
    }
    let steps = cfg.history_len + cfg.horizon;
    for _ in 0..MAX_ATTEMPTS {
        let speed = rng.random_range(recipe.speed.0..=recipe.speed.1);
        let span = speed * steps as f64;
        let (start, heading) = match (recipe.start, strips.is_empty()) {
            (Some((c, r)), _) => {
                let heading = recipe
                    .heading
                    .unwrap_or_else(|| rng.random_range(0.0..std::f64::consts::TAU));
                (Point2::new(c as f64 + 0.5, r as f64 + 0.5), heading)
            }
            (None, false) => {
                let strip = strips[rng.random_range(0..strips.len())];
                let forward = rng.random_bool(0.5);
                let along_extent = if strip.horizontal {
                    map.width()
                } else {
                    map.height()
                } as f64;
                if span + 8.0 >= along_extent {
                    continue;
                }
                let along = rng.random_range(4.0..along_extent - span - 4.0);
                let along = if forward { along } else { along_extent - along };
                let lateral = strip.center + rng.random_range(-1.0..1.0);
                let tilt = rng.random_range(-0.05..0.05);
                match (strip.horizontal, forward) {
                    (true, true) => (Point2::new(along, lateral), tilt),
                    (true, false) => (Point2::new(along, lateral), std::f64::consts::PI + tilt),
                    (false, true) => (
                        Point2::new(lateral, along),
                        std::f64::consts::FRAC_PI_2 + tilt,
                    ),
                    (false, false) => (
                        Point2::new(lateral, along),
                        -std::f64::consts::FRAC_PI_2 + tilt,
                    ),
                }
            }
            (None, true) => unreachable!("validated: roads or an explicit start"),
        };
        let heading = recipe.heading.unwrap_or(heading);
        let pts = walk(start, heading, speed, steps, &mut rng);
        if !walkable_inside(&map, &pts, 1.0) {
            continue;
        }
        let history =
            Trajectory::new(pts[..cfg.history_len].to_vec(), cfg.dt).expect("finite points");
        let ground_truth =
            Trajectory::new(pts[cfg.history_len..].to_vec(), cfg.dt).expect("finite points");
        let tc = TestCase {
            scene_id: recipe.scene_id.clone(),
            map,
            history,
            ground_truth: Some(ground_truth),
        };
        debug_assert!(validate_test_case(&tc, cfg.history_len, cfg.horizon).is_empty());
        return Ok(tc);
    }
    Err(SceneGenError::NoCorridor {
        steps,
        attempts: MAX_ATTEMPTS,
    })
}

/// The default 50-scene corpus.
pub fn default_corpus(cfg: &HarnessConfig) -> Result<Vec<TestCase>, SceneGenError> {
    SceneRecipe::corpus(50, cfg.seed)
        .iter()
        .map(|r| generate_scene(r, cfg))
        .collect()
}
