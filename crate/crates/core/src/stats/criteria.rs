//! Violation criteria: Wasserstein (WVC), Hellinger (HVC) and the
//! hypothesis-testing criterion (HTC) on a region of interest.

use serde::{Deserialize, Serialize};

use super::normal::{mean_std, z_test_with, Alternative, SourceBaseline, ZTestOptions};
use super::wilcoxon::{wilcoxon_signed_rank, WilcoxonResult};
use super::StatsError;
use crate::metrics::{
    hellinger, pairwise_distances, wasserstein, Distance, OtConfig, TrajectoryDistribution,
};
use crate::raster::{Cell, ProbabilityMap};
use crate::scalar::Scalar;
use crate::scene::PredictionSet;
use crate::transforms::Effect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Wvc,
    Hvc,
    Htc,
    BonAde,
    BonFde,
    MeanAde,
    MeanFde,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: Criterion,
    pub distance: f64,
    pub p_value: f64,
    /// `p_value <= alpha`.
    pub violated: bool,
    pub alpha: f64,
    /// The source baseline had no spread.
    pub degenerate: bool,
}

impl Verdict {
    pub fn new(
        criterion: Criterion,
        distance: f64,
        p_value: f64,
        alpha: f64,
        degenerate: bool,
    ) -> Self {
        Self {
            criterion,
            distance,
            p_value,
            violated: p_value <= alpha,
            alpha,
            degenerate,
        }
    }
}

/// Verdicts of one follow-up against every source run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvcOutcome {
    pub verdicts: Vec<Verdict>,
    pub baseline: SourceBaseline,
    /// Violated verdicts over N.
    pub violation_rate: f64,
    /// Mean and sample deviation of the source-to-follow-up distances.
    pub mean_distance: f64,
    pub std_distance: f64,
}

pub fn check_alpha(alpha: f64) -> Result<(), StatsError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(StatsError::InvalidAlpha(alpha))
    }
}

/// Tests each distance against the baseline with a one-sided z-test.
pub fn pvc_verdicts(
    criterion: Criterion,
    baseline: SourceBaseline,
    distances: &[f64],
    alpha: f64,
    opts: &ZTestOptions,
) -> Result<PvcOutcome, StatsError> {
    check_alpha(alpha)?;
    if distances.is_empty() {
        return Err(StatsError::Empty);
    }
    let verdicts: Vec<Verdict> = distances
        .iter()
        .map(|&d| {
            let z = z_test_with(d, &baseline, Alternative::Greater, opts);
            Verdict::new(criterion, d, z.p_value, alpha, z.degenerate)
        })
        .collect();
    let violated = verdicts.iter().filter(|v| v.violated).count();
    let (mean_distance, std_distance) = mean_std(distances);
    Ok(PvcOutcome {
        violation_rate: violated as f64 / verdicts.len() as f64,
        verdicts,
        baseline,
        mean_distance,
        std_distance,
    })
}

/// Wasserstein violation criterion.
///
/// `source_runs` must already be carried into the follow-up frame. The
/// baseline is built from their pairwise distances, so it is measured in the
/// same units as the follow-up comparisons.
pub fn wvc<S: Scalar>(
    source_runs: &[PredictionSet<S>],
    follow_up: &PredictionSet<S>,
    alpha: f64,
    ot: &OtConfig,
    opts: &ZTestOptions,
) -> Result<PvcOutcome, StatsError> {
    if source_runs.len() < 2 {
        return Err(StatsError::TooFewRuns(source_runs.len()));
    }
    let pairwise: Vec<f64> = pairwise_distances(source_runs, &Distance::Wasserstein(*ot))?
        .into_iter()
        .map(Scalar::f64)
        .collect();
    let baseline = SourceBaseline::from_distances(&pairwise)?;
    let fu = TrajectoryDistribution::from_prediction(follow_up)?;
    let distances = source_runs
        .iter()
        .map(|s| Ok(wasserstein(&fu, &TrajectoryDistribution::from_prediction(s)?, ot)?.f64()))
        .collect::<Result<Vec<f64>, StatsError>>()?;
    pvc_verdicts(Criterion::Wvc, baseline, &distances, alpha, opts)
}

/// Hellinger violation criterion over probability maps already carried into
/// the follow-up frame.
pub fn hvc<S: Scalar>(
    source_maps: &[ProbabilityMap<S>],
    follow_up_map: &ProbabilityMap<S>,
    alpha: f64,
    opts: &ZTestOptions,
) -> Result<PvcOutcome, StatsError> {
    let n = source_maps.len();
    if n < 2 {
        return Err(StatsError::TooFewRuns(n));
    }
    let mut pairwise = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairwise.push(hellinger(&source_maps[i], &source_maps[j])?.f64());
        }
    }
    let baseline = SourceBaseline::from_distances(&pairwise)?;
    let distances = source_maps
        .iter()
        .map(|m| Ok(hellinger(follow_up_map, m)?.f64()))
        .collect::<Result<Vec<f64>, StatsError>>()?;
    pvc_verdicts(Criterion::Hvc, baseline, &distances, alpha, opts)
}

/// One-sided alternative matching an expected effect: an increase is
/// evidenced by `Q > P`, a decrease or avoidance by `Q < P`.
pub fn effect_alternative(effect: Effect) -> Alternative {
    match effect {
        Effect::Increase => Alternative::Greater,
        Effect::Decrease | Effect::Avoidance => Alternative::Less,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HtcOutcome {
    /// `violated` here means the test was significant.
    pub verdict: Verdict,
    pub alternative: Alternative,
    pub test: WilcoxonResult,
}

/// Relative difference below which two cell probabilities are treated as equal.
pub const HTC_REL_TOL: f64 = 1e-9;

/// Hypothesis-testing criterion: Wilcoxon signed-rank over the paired cell
/// values `(P(c), Q(c))` for `c` in `roi`. The reported distance is the
/// change in probability mass on the roi, `Q(roi) - P(roi)`.
pub fn htc<S: Scalar>(
    p: &ProbabilityMap<S>,
    q: &ProbabilityMap<S>,
    roi: &[Cell],
    alpha: f64,
    alternative: Alternative,
) -> Result<HtcOutcome, StatsError> {
    check_alpha(alpha)?;
    if roi.is_empty() {
        return Err(StatsError::EmptyRoi);
    }
    if !p.same_shape(q) {
        return Err(StatsError::Shape(format!(
            "probability maps are {}x{} and {}x{}",
            p.width(),
            p.height(),
            q.width(),
            q.height()
        )));
    }
    if let Some(c) = roi
        .iter()
        .find(|c| c.col >= p.width() || c.row >= p.height())
    {
        return Err(StatsError::Shape(format!(
            "roi cell ({}, {}) outside the map",
            c.col, c.row
        )));
    }
    let x: Vec<f64> = roi.iter().map(|&c| p.get(c).f64()).collect();
    // values equal up to normalization round-off count as unchanged
    let y: Vec<f64> = roi
        .iter()
        .zip(&x)
        .map(|(&c, &pv)| {
            let qv = q.get(c).f64();
            if (qv - pv).abs() <= HTC_REL_TOL * qv.abs().max(pv.abs()) {
                pv
            } else {
                qv
            }
        })
        .collect();
    let test = wilcoxon_signed_rank(&x, &y, alternative)?;
    let shift = y.iter().sum::<f64>() - x.iter().sum::<f64>();
    Ok(HtcOutcome {
        verdict: Verdict::new(Criterion::Htc, shift, test.p_value, alpha, false),
        alternative,
        test,
    })
}
