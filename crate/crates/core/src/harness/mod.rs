//! The metamorphic test process: source runs, transformation, one follow-up
//! run and the violation criteria, over a corpus of scenes.

mod agreement;
mod campaign;
mod config;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{ade_fde, AdeFde};
use crate::raster::ProbabilityMap;
use crate::scene::{validate_test_case, PredictionSet, TestCase};
use crate::stats::{
    effect_alternative, htc, hvc, intersection_rate, intersection_rate_in, wvc, z_test_with,
    Alternative, Criterion, HtcOutcome, PvcOutcome, SourceBaseline, Verdict,
};
use crate::sut::{validate_response, Sut, SutError, SutRequest};
use crate::transforms::{
    apply_relation, transform_prediction, CoordMap, Effect, MrSpec, TransformResult,
};

pub use agreement::{
    agreement_analysis, confusion_scores, AgreementReport, AgreementRow, DEFAULT_THRESHOLDS,
};
pub use campaign::{aggregate, run_campaign, CampaignResult, MrAggregate};
pub use config::{derive_seed, HarnessConfig, RunTag};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("no scenes to run")]
    NoScenes,
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Where in the process a scene failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Validation,
    Source,
    Transform,
    FollowUp,
    Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SceneStatus {
    Ok,
    /// The relation does not apply to this scene; excluded from rates.
    Skipped {
        reason: String,
    },
    Errored {
        stage: Stage,
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sut_error: Option<SutError>,
    },
}

/// Map-edit hypothesis test together with the effect it was expected to show.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HtcResult {
    pub expected: Effect,
    pub outcome: HtcOutcome,
    /// The change was significant in the expected direction.
    pub expectation_met: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionRates {
    /// Follow-up trajectories crossing the edited region.
    pub follow_up_roi: f64,
    /// Follow-up trajectories crossing any non-walkable cell of the edited map.
    pub follow_up_blocked: f64,
    /// Source trajectories crossing the same region, averaged over runs.
    pub source_roi: f64,
}

/// ADE/FDE of the source runs and the follow-up, all measured in the source
/// frame against the source ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Displacement {
    pub source_runs: Vec<AdeFde>,
    pub source_mean: AdeFde,
    pub follow_up: AdeFde,
    /// Two-sided z-tests of each follow-up value against the source values,
    /// in the order B-ADE, B-FDE, M-ADE, M-FDE.
    pub verdicts: Vec<Verdict>,
}

impl Displacement {
    pub fn verdict(&self, c: Criterion) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.criterion == c)
    }
}

/// Outcome of one (scene, relation) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneResult {
    pub scene_id: String,
    pub mr: MrSpec,
    pub status: SceneStatus,
    pub wvc: Option<PvcOutcome>,
    pub hvc: Option<PvcOutcome>,
    pub hvc_skip: Option<String>,
    pub htc: Option<HtcResult>,
    pub htc_skip: Option<String>,
    pub intersection: Option<IntersectionRates>,
    pub displacement: Option<Displacement>,
    /// Predictor calls spent on this pair, shared source runs included.
    pub sut_calls: usize,
}

impl SceneResult {
    fn empty(tc: &TestCase, mr: &MrSpec, status: SceneStatus) -> Self {
        Self {
            scene_id: tc.scene_id.clone(),
            mr: mr.clone(),
            status,
            wvc: None,
            hvc: None,
            hvc_skip: None,
            htc: None,
            htc_skip: None,
            intersection: None,
            displacement: None,
            sut_calls: 0,
        }
    }

    fn errored(
        tc: &TestCase,
        mr: &MrSpec,
        stage: Stage,
        message: String,
        sut_error: Option<SutError>,
    ) -> Self {
        Self::empty(
            tc,
            mr,
            SceneStatus::Errored {
                stage,
                message,
                sut_error,
            },
        )
    }

    pub fn is_ok(&self) -> bool {
        self.status == SceneStatus::Ok
    }

    pub fn is_errored(&self) -> bool {
        matches!(self.status, SceneStatus::Errored { .. })
    }

    /// WVC violation rate: violated verdicts over N.
    pub fn violation_rate(&self) -> Option<f64> {
        self.wvc.as_ref().map(|w| w.violation_rate)
    }
}

fn request<'a>(
    tc: &'a TestCase,
    history: &'a crate::geometry::Trajectory,
    cfg: &HarnessConfig,
    seed: u64,
) -> SutRequest<'a> {
    SutRequest {
        scene_id: &tc.scene_id,
        history,
        map: &tc.map,
        k: cfg.k,
        horizon: cfg.horizon,
        seed,
    }
}

fn call(sut: &dyn Sut, req: &SutRequest<'_>) -> Result<PredictionSet, SutError> {
    req.validate()?;
    let pred = sut.predict(req)?;
    validate_response(req, &pred)?;
    Ok(pred)
}

/// Lint messages for a scene under this configuration.
pub fn scene_problems(tc: &TestCase, cfg: &HarnessConfig) -> Vec<String> {
    validate_test_case(tc, cfg.history_len, cfg.horizon)
}

/// The N source predictions of a scene.
pub fn source_runs(
    tc: &TestCase,
    sut: &dyn Sut,
    cfg: &HarnessConfig,
) -> Result<Vec<PredictionSet>, SutError> {
    (0..cfg.n_runs)
        .map(|i| {
            let seed = derive_seed(cfg.seed, &tc.scene_id, RunTag::Source(i));
            call(sut, &request(tc, &tc.history, cfg, seed))
        })
        .collect()
}

/// Runs one relation on one scene: N source calls and one follow-up.
pub fn run_scene(tc: &TestCase, mr: &MrSpec, sut: &dyn Sut, cfg: &HarnessConfig) -> SceneResult {
    run_scene_all(tc, std::slice::from_ref(mr), sut, cfg).remove(0)
}

/// Runs several relations on one scene, sharing the source runs between them.
/// Each relation still costs exactly one follow-up call.
pub fn run_scene_all(
    tc: &TestCase,
    mrs: &[MrSpec],
    sut: &dyn Sut,
    cfg: &HarnessConfig,
) -> Vec<SceneResult> {
    let problems = scene_problems(tc, cfg);
    if !problems.is_empty() {
        return mrs
            .iter()
            .map(|mr| SceneResult::errored(tc, mr, Stage::Validation, problems.join("; "), None))
            .collect();
    }
    let sources = match source_runs(tc, sut, cfg) {
        Ok(s) => s,
        Err(e) => {
            return mrs
                .iter()
                .map(|mr| {
                    SceneResult::errored(tc, mr, Stage::Source, e.to_string(), Some(e.clone()))
                })
                .collect()
        }
    };
    mrs.iter()
        .map(|mr| evaluate_relation(tc, mr, sut, cfg, &sources))
        .collect()
}

/// MT and evaluation phases of one relation given the source runs.
pub fn evaluate_relation(
    tc: &TestCase,
    mr: &MrSpec,
    sut: &dyn Sut,
    cfg: &HarnessConfig,
    sources: &[PredictionSet],
) -> SceneResult {
    let tr = match apply_relation(tc, mr, &cfg.transitions, sources.first()) {
        Ok(tr) => tr,
        Err(e) if e.is_skip() => {
            let mut r = SceneResult::empty(
                tc,
                mr,
                SceneStatus::Skipped {
                    reason: e.to_string(),
                },
            );
            r.sut_calls = sources.len();
            return r;
        }
        Err(e) => {
            let mut r = SceneResult::errored(tc, mr, Stage::Transform, e.to_string(), None);
            r.sut_calls = sources.len();
            return r;
        }
    };
    let fu_tc = &tr.follow_up;
    let seed = derive_seed(cfg.seed, &tc.scene_id, RunTag::FollowUp);
    let follow_up = match call(sut, &request(fu_tc, &fu_tc.history, cfg, seed)) {
        Ok(p) => p,
        Err(e) => {
            let mut r = SceneResult::errored(tc, mr, Stage::FollowUp, e.to_string(), Some(e));
            r.sut_calls = sources.len() + 1;
            return r;
        }
    };
    let mut result = SceneResult::empty(tc, mr, SceneStatus::Ok);
    result.sut_calls = sources.len() + 1;
    let evaluated = if tr.label_preserving {
        evaluate_label_preserving(&mut result, &tr, sources, &follow_up, cfg)
    } else {
        evaluate_map_edit(&mut result, &tr, sources, &follow_up, cfg)
    };
    let evaluated = evaluated.and_then(|()| {
        result.displacement = displacement(tc, &tr, sources, &follow_up, cfg)?;
        Ok(())
    });
    if let Err(message) = evaluated {
        let calls = result.sut_calls;
        result = SceneResult::errored(tc, mr, Stage::Evaluation, message, None);
        result.sut_calls = calls;
    }
    result
}

fn evaluate_label_preserving(
    out: &mut SceneResult,
    tr: &TransformResult,
    sources: &[PredictionSet],
    follow_up: &PredictionSet,
    cfg: &HarnessConfig,
) -> Result<(), String> {
    let carried = sources
        .iter()
        .map(|s| transform_prediction(s, tr))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    out.wvc =
        Some(wvc(&carried, follow_up, cfg.alpha, &cfg.ot, &cfg.z_test).map_err(|e| e.to_string())?);
    let maps: Option<Vec<ProbabilityMap>> = carried.iter().map(|p| p.prob_map().cloned()).collect();
    match (maps, follow_up.prob_map()) {
        (Some(maps), Some(fu)) => {
            out.hvc = Some(hvc(&maps, fu, cfg.alpha, &cfg.z_test).map_err(|e| e.to_string())?);
        }
        _ => out.hvc_skip = Some("predictor returned no probability map".into()),
    }
    Ok(())
}

fn evaluate_map_edit(
    out: &mut SceneResult,
    tr: &TransformResult,
    sources: &[PredictionSet],
    follow_up: &PredictionSet,
    cfg: &HarnessConfig,
) -> Result<(), String> {
    let roi = tr
        .roi
        .as_deref()
        .ok_or("map edit reported no region of interest")?;
    let effect = tr
        .expected_effect
        .ok_or("map edit reported no expected effect")?;
    let maps: Option<Vec<&ProbabilityMap>> = sources.iter().map(|p| p.prob_map()).collect();
    match (maps, follow_up.prob_map()) {
        (Some(maps), Some(q)) => {
            let p = ProbabilityMap::mean_of(&maps).map_err(|e| e.to_string())?;
            let outcome = htc(&p, q, roi, cfg.alpha, effect_alternative(effect))
                .map_err(|e| e.to_string())?;
            out.htc = Some(HtcResult {
                expected: effect,
                expectation_met: outcome.verdict.violated,
                outcome,
            });
        }
        _ => out.htc_skip = Some("predictor returned no probability map".into()),
    }
    if effect == Effect::Avoidance {
        let map = &tr.follow_up.map;
        let (w, h) = (map.width(), map.height());
        let source_roi = sources
            .iter()
            .map(|s| intersection_rate_in(s, w, h, roi))
            .sum::<f64>()
            / sources.len() as f64;
        out.intersection = Some(IntersectionRates {
            follow_up_roi: intersection_rate_in(follow_up, w, h, roi),
            follow_up_blocked: intersection_rate(follow_up, map, &map.legend().blocked_ids()),
            source_roi,
        });
    }
    Ok(())
}

fn map_back(pred: &PredictionSet, inverse: &CoordMap) -> Result<PredictionSet, String> {
    let ts = pred
        .trajectories()
        .iter()
        .map(|t| inverse.apply_trajectory(t))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    PredictionSet::new(ts, None, pred.sut_seed()).map_err(|e| e.to_string())
}

/// ADE/FDE verdicts. The follow-up prediction is carried back to the source
/// frame, so every value shares the ground truth's units.
fn displacement(
    tc: &TestCase,
    tr: &TransformResult,
    sources: &[PredictionSet],
    follow_up: &PredictionSet,
    cfg: &HarnessConfig,
) -> Result<Option<Displacement>, String> {
    let Some(gt) = tc.ground_truth.as_ref() else {
        return Ok(None);
    };
    let inverse = tr.inverse.unwrap_or(CoordMap::Identity);
    let back = map_back(follow_up, &inverse)?;
    let err = |e: crate::metrics::MetricError| e.to_string();
    let source_runs = sources
        .iter()
        .map(|s| ade_fde(s, gt))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let fu = ade_fde(&back, gt).map_err(err)?;
    let pick: [(Criterion, fn(&AdeFde) -> f64); 4] = [
        (Criterion::BonAde, |a| a.bon_ade),
        (Criterion::BonFde, |a| a.bon_fde),
        (Criterion::MeanAde, |a| a.mean_ade),
        (Criterion::MeanFde, |a| a.mean_fde),
    ];
    let mut verdicts = Vec::with_capacity(4);
    let mut means = [0.0; 4];
    for (i, (criterion, f)) in pick.iter().enumerate() {
        let values: Vec<f64> = source_runs.iter().map(f).collect();
        let base = SourceBaseline::from_distances(&values).map_err(|e| e.to_string())?;
        means[i] = base.mu;
        let z = z_test_with(f(&fu), &base, Alternative::TwoSided, &cfg.z_test);
        verdicts.push(Verdict::new(
            *criterion,
            f(&fu),
            z.p_value,
            cfg.alpha,
            z.degenerate,
        ));
    }
    Ok(Some(Displacement {
        source_mean: AdeFde {
            bon_ade: means[0],
            bon_fde: means[1],
            mean_ade: means[2],
            mean_fde: means[3],
        },
        source_runs,
        follow_up: fu,
        verdicts,
    }))
}
