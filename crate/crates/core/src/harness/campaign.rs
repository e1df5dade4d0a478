use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_scene_all, HarnessConfig, HarnessError, SceneResult, SceneStatus};
use crate::scene::TestCase;
use crate::stats::{mean_std, Criterion};
use crate::sut::Sut;

/// Per-relation summary. Rates are fractions in [0, 1] over the scenes the
/// relation was evaluated on; `None` where the column does not apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrAggregate {
    pub mr: String,
    pub scenes: usize,
    pub evaluated: usize,
    pub skipped: usize,
    pub errored: usize,
    /// Mean of the per-scene WVC violation rates.
    pub wvc_rate: Option<f64>,
    pub bon_ade_rate: Option<f64>,
    pub bon_fde_rate: Option<f64>,
    pub mean_ade_rate: Option<f64>,
    pub mean_fde_rate: Option<f64>,
    /// Mean and spread over scenes of the mean follow-up Hellinger distance.
    pub hvc_mean: Option<f64>,
    pub hvc_std: Option<f64>,
    pub hvc_rate: Option<f64>,
    /// Fraction of scenes where the HTC found a significant change in the
    /// expected direction.
    pub htc_rate: Option<f64>,
    pub intersection_mean: Option<f64>,
    pub blocked_intersection_mean: Option<f64>,
    pub source_intersection_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub sut: String,
    pub config: HarnessConfig,
    /// Ordered by scene, then by relation in configuration order.
    pub results: Vec<SceneResult>,
    pub aggregates: Vec<MrAggregate>,
}

impl CampaignResult {
    pub fn errored_count(&self) -> usize {
        self.results.iter().filter(|r| r.is_errored()).count()
    }
}

/// Runs every configured relation on every scene. Scenes run in parallel;
/// results do not depend on scheduling.
pub fn run_campaign(
    scenes: &[TestCase],
    sut: &dyn Sut,
    cfg: &HarnessConfig,
) -> Result<CampaignResult, HarnessError> {
    cfg.validate()?;
    if scenes.is_empty() {
        return Err(HarnessError::NoScenes);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let per_scene: Vec<Vec<SceneResult>> = pool.install(|| {
        scenes
            .par_iter()
            .map(|tc| run_scene_all(tc, &cfg.mrs, sut, cfg))
            .collect()
    });
    let results: Vec<SceneResult> = per_scene.into_iter().flatten().collect();
    let aggregates = aggregate(
        &results,
        &cfg.mrs.iter().map(|m| m.label()).collect::<Vec<_>>(),
    );
    Ok(CampaignResult {
        sut: sut.name(),
        config: cfg.clone(),
        results,
        aggregates,
    })
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn rate(flags: impl Iterator<Item = bool>) -> Option<f64> {
    let v: Vec<f64> = flags.map(|b| if b { 1.0 } else { 0.0 }).collect();
    mean(&v)
}

/// One row per relation label, in the given order. Errored and skipped scenes
/// are counted but excluded from every rate.
pub fn aggregate(results: &[SceneResult], labels: &[String]) -> Vec<MrAggregate> {
    let mut seen: Vec<&String> = Vec::new();
    labels
        .iter()
        .filter(|l| {
            let fresh = !seen.contains(l);
            seen.push(l);
            fresh
        })
        .map(|label| {
            let rows: Vec<&SceneResult> =
                results.iter().filter(|r| &r.mr.label() == label).collect();
            let ok: Vec<&SceneResult> = rows.iter().copied().filter(|r| r.is_ok()).collect();
            let disp_rate = |c: Criterion| {
                rate(
                    ok.iter()
                        .filter_map(|r| r.displacement.as_ref()?.verdict(c))
                        .map(|v| v.violated),
                )
            };
            let hvc_means: Vec<f64> = ok
                .iter()
                .filter_map(|r| r.hvc.as_ref())
                .map(|h| h.mean_distance)
                .collect();
            let (hvc_mean, hvc_std) = match mean(&hvc_means) {
                Some(_) => {
                    let (m, s) = mean_std(&hvc_means);
                    (Some(m), Some(s))
                }
                None => (None, None),
            };
            let inter = |f: fn(&super::IntersectionRates) -> f64| {
                mean(
                    &ok.iter()
                        .filter_map(|r| r.intersection.as_ref())
                        .map(f)
                        .collect::<Vec<_>>(),
                )
            };
            MrAggregate {
                mr: label.clone(),
                scenes: rows.len(),
                evaluated: ok.len(),
                skipped: rows
                    .iter()
                    .filter(|r| matches!(r.status, SceneStatus::Skipped { .. }))
                    .count(),
                errored: rows.iter().filter(|r| r.is_errored()).count(),
                wvc_rate: mean(
                    &ok.iter()
                        .filter_map(|r| r.violation_rate())
                        .collect::<Vec<_>>(),
                ),
                bon_ade_rate: disp_rate(Criterion::BonAde),
                bon_fde_rate: disp_rate(Criterion::BonFde),
                mean_ade_rate: disp_rate(Criterion::MeanAde),
                mean_fde_rate: disp_rate(Criterion::MeanFde),
                hvc_mean,
                hvc_std,
                hvc_rate: mean(
                    &ok.iter()
                        .filter_map(|r| r.hvc.as_ref())
                        .map(|h| h.violation_rate)
                        .collect::<Vec<_>>(),
                ),
                htc_rate: rate(
                    ok.iter()
                        .filter_map(|r| r.htc.as_ref())
                        .map(|h| h.expectation_met),
                ),
                intersection_mean: inter(|i| i.follow_up_roi),
                blocked_intersection_mean: inter(|i| i.follow_up_blocked),
                source_intersection_mean: inter(|i| i.source_roi),
            }
        })
        .collect()
}
