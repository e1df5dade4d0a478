//! Constant-velocity reference predictor that is exactly equivariant under
//! mirror, rotate and rescale, and a mutant that deliberately is not.
//!
//! Noise is drawn in a canonical frame: the history is normalised by its
//! speed and brought into the one of the eight axis-aligned orientations
//! whose quantized shape is lexicographically largest. Transforming the
//! request transforms the history, which lands in the same canonical shape,
//! draws the same noise, and maps it back through the transformed frame.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{cv_velocity, require_history, Sut, SutError, SutErrorKind, SutRequest};
use crate::geometry::{Point2, Trajectory};
use crate::raster::ProbabilityMap;
use crate::scene::PredictionSet;

/// Where the noise seed comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedMode {
    /// Only the canonical history shape. Repeated calls on a scene agree,
    /// whatever the request seed.
    #[default]
    Canonical,
    /// Canonical shape mixed with the request seed. Runs differ, and
    /// equivariance holds only for equal request seeds.
    Request,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConfig {
    /// Per-step jitter as a fraction of the agent's speed. 0.375 gives
    /// 1.5 px at 4 px per step.
    pub jitter_ratio: f64,
    pub seed_mode: SeedMode,
    pub prob_map: bool,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            jitter_ratio: 0.375,
            seed_mode: SeedMode::Canonical,
            prob_map: true,
        }
    }
}

/// Linear part `(a, b, c, d)`: `(x, y) -> (a x + b y, c x + d y)`.
type Frame = [f64; 4];

const FRAMES: [Frame; 8] = [
    [1.0, 0.0, 0.0, 1.0],
    [0.0, -1.0, 1.0, 0.0],
    [-1.0, 0.0, 0.0, -1.0],
    [0.0, 1.0, -1.0, 0.0],
    [-1.0, 0.0, 0.0, 1.0],
    [1.0, 0.0, 0.0, -1.0],
    [0.0, 1.0, 1.0, 0.0],
    [0.0, -1.0, -1.0, 0.0],
];

fn apply(f: &Frame, p: Point2) -> Point2 {
    Point2::new(f[0] * p.x + f[1] * p.y, f[2] * p.x + f[3] * p.y)
}

fn transpose(f: &Frame) -> Frame {
    [f[0], f[2], f[1], f[3]]
}

fn quantize(v: f64) -> i64 {
    (v * 65536.0).round() as i64
}

/// Canonical orientation of a request and the seed material it yields.
struct Canonical {
    frame: Frame,
    /// Speed used as the length unit; 1 for a stationary history.
    unit: f64,
    /// Unit direction of travel in the canonical frame.
    direction: Point2,
    shape_key: Vec<i64>,
}

fn canonicalize(req: &SutRequest<'_>) -> Canonical {
    let v = cv_velocity(req.history);
    let speed = v.x.hypot(v.y);
    let unit = if speed > 0.0 { speed } else { 1.0 };
    let last = req.history.last();
    let dir = Point2::new(v.x / unit, v.y / unit);
    let offsets: Vec<Point2> = req
        .history
        .points()
        .iter()
        .map(|p| Point2::new((p.x - last.x) / unit, (p.y - last.y) / unit))
        .collect();
    let center = Point2::new(
        (last.x - req.map.width() as f64 / 2.0) / unit,
        (last.y - req.map.height() as f64 / 2.0) / unit,
    );
    let key = |f: &Frame, with_center: bool| -> Vec<i64> {
        let mut k = Vec::with_capacity(2 * offsets.len() + 4);
        let mut push = |p: Point2| {
            let q = apply(f, p);
            k.push(quantize(q.x));
            k.push(quantize(q.y));
        };
        push(dir);
        offsets.iter().for_each(|&o| push(o));
        if with_center {
            // breaks ties between frames under which the history is symmetric
            push(center);
        }
        k
    };
    let frame = *FRAMES
        .iter()
        .max_by(|a, b| key(a, true).cmp(&key(b, true)))
        .expect("eight frames");
    Canonical {
        frame,
        unit,
        direction: apply(&frame, dir),
        shape_key: key(&frame, false),
    }
}

fn derive_rng(tag: &str, shape_key: &[i64], extra: Option<u64>) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(tag.as_bytes());
    for v in shape_key {
        h.update(v.to_le_bytes());
    }
    if let Some(e) = extra {
        h.update(b"request-seed");
        h.update(e.to_le_bytes());
    }
    let digest = h.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}

/// Normalized Gaussian bump over cell centers.
pub(crate) fn gaussian_bump(
    width: usize,
    height: usize,
    mean: Point2,
    sigma: f64,
) -> ProbabilityMap {
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut logw = Vec::with_capacity(width * height);
    for r in 0..height {
        let dy = r as f64 + 0.5 - mean.y;
        for c in 0..width {
            let dx = c as f64 + 0.5 - mean.x;
            logw.push(-(dx * dx + dy * dy) * inv);
        }
    }
    // shift by the max so a bump centered far off the map cannot underflow
    let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w = logw.into_iter().map(|l| (l - m).exp()).collect();
    ProbabilityMap::from_weights(width, height, w).expect("bump has positive mass")
}

/// Constant-velocity extrapolation with random-walk jitter, seeded from the
/// canonical form of the request.
#[derive(Debug, Clone, Default)]
pub struct EquivariantReference {
    pub config: ReferenceConfig,
}

impl EquivariantReference {
    pub fn new(config: ReferenceConfig) -> Self {
        Self { config }
    }

    fn predict_with_drift(
        &self,
        req: &SutRequest<'_>,
        drift: Point2,
    ) -> Result<PredictionSet, SutError> {
        require_history(req)?;
        let cfg = &self.config;
        if !(cfg.jitter_ratio >= 0.0 && cfg.jitter_ratio.is_finite()) {
            return Err(SutError::new(
                req.scene_id,
                SutErrorKind::Contract(format!(
                    "jitter ratio must be non-negative, got {}",
                    cfg.jitter_ratio
                )),
            ));
        }
        let canon = canonicalize(req);
        let back = transpose(&canon.frame);
        let extra = match cfg.seed_mode {
            SeedMode::Canonical => None,
            SeedMode::Request => Some(req.seed),
        };
        let mut rng = derive_rng("equivariant-reference/1", &canon.shape_key, extra);
        let last = req.history.last();
        let dt = req.history.dt();
        let mut trajectories = Vec::with_capacity(req.k);
        for _ in 0..req.k {
            let mut walk = Point2::new(0.0, 0.0);
            let mut pts = Vec::with_capacity(req.horizon);
            for t in 1..=req.horizon {
                let nx: f64 = rng.sample(StandardNormal);
                let ny: f64 = rng.sample(StandardNormal);
                walk = Point2::new(
                    walk.x + cfg.jitter_ratio * nx,
                    walk.y + cfg.jitter_ratio * ny,
                );
                let tf = t as f64;
                let local = Point2::new(
                    tf * canon.direction.x + walk.x,
                    tf * canon.direction.y + walk.y,
                );
                let world = apply(&back, local);
                pts.push(Point2::new(
                    last.x + canon.unit * world.x + tf * drift.x,
                    last.y + canon.unit * world.y + tf * drift.y,
                ));
            }
            trajectories.push(Trajectory::new(pts, dt).map_err(|e| {
                SutError::new(req.scene_id, SutErrorKind::InvariantBreach(e.to_string()))
            })?);
        }
        let prob_map = cfg.prob_map.then(|| {
            let v = cv_velocity(req.history);
            let tf = req.horizon as f64;
            let end = Point2::new(last.x + tf * (v.x + drift.x), last.y + tf * (v.y + drift.y));
            let sigma = (canon.unit * cfg.jitter_ratio * tf.sqrt()).max(1.0);
            gaussian_bump(req.map.width(), req.map.height(), end, sigma)
        });
        PredictionSet::new(trajectories, prob_map, req.seed)
            .map_err(|e| SutError::new(req.scene_id, SutErrorKind::InvariantBreach(e.to_string())))
    }
}

impl Sut for EquivariantReference {
    fn name(&self) -> String {
        "equivariant".into()
    }

    fn provides_prob_map(&self) -> bool {
        self.config.prob_map
    }

    fn predict(&self, req: &SutRequest<'_>) -> Result<PredictionSet, SutError> {
        self.predict_with_drift(req, Point2::new(0.0, 0.0))
    }
}

/// The equivariant reference plus a constant world-frame drift per step.
#[derive(Debug, Clone)]
pub struct BiasedMutant {
    pub reference: EquivariantReference,
    pub drift: Point2,
}

impl Default for BiasedMutant {
    fn default() -> Self {
        Self {
            reference: EquivariantReference::default(),
            drift: Point2::new(2.0, 0.0),
        }
    }
}

impl BiasedMutant {
    pub fn new(reference: EquivariantReference, drift: Point2) -> Self {
        Self { reference, drift }
    }
}

impl Sut for BiasedMutant {
    fn name(&self) -> String {
        format!("mutant({},{})", self.drift.x, self.drift.y)
    }

    fn provides_prob_map(&self) -> bool {
        self.reference.config.prob_map
    }

    fn predict(&self, req: &SutRequest<'_>) -> Result<PredictionSet, SutError> {
        self.reference.predict_with_drift(req, self.drift)
    }
}
