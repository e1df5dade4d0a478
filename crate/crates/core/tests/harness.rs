use std::sync::atomic::{AtomicUsize, Ordering};

use trajtest_core::harness::{
    aggregate, agreement_analysis, confusion_scores, derive_seed, run_campaign, run_scene,
    run_scene_all, HarnessConfig, RunTag, SceneStatus, Stage,
};
use trajtest_core::scenegen::{generate_scene, SceneRecipe};
use trajtest_core::stats::Criterion;
use trajtest_core::sut::{
    BiasedMutant, EquivariantReference, MapAwareReference, Sut, SutError, SutErrorKind, SutRequest,
};
use trajtest_core::transforms::MrSpec;
use trajtest_core::{PredictionSet, TestCase};

fn scenes(n: usize) -> Vec<TestCase> {
    let cfg = HarnessConfig::short_term();
    SceneRecipe::corpus(n, 7)
        .iter()
        .map(|r| generate_scene(r, &cfg).unwrap())
        .collect()
}

/// Counts calls and records the seeds it was given.
struct Counting {
    inner: EquivariantReference,
    calls: AtomicUsize,
    seeds: std::sync::Mutex<Vec<u64>>,
}

impl Counting {
    fn new() -> Self {
        Self {
            inner: EquivariantReference::default(),
            calls: AtomicUsize::new(0),
            seeds: Default::default(),
        }
    }
}

impl Sut for Counting {
    fn name(&self) -> String {
        "counting".into()
    }
    fn provides_prob_map(&self) -> bool {
        self.inner.provides_prob_map()
    }
    fn predict(&self, req: &SutRequest<'_>) -> Result<PredictionSet, SutError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.seeds.lock().unwrap().push(req.seed);
        self.inner.predict(req)
    }
}

/// Fails on one scene only.
struct FailsOn(String);

impl Sut for FailsOn {
    fn name(&self) -> String {
        "fails-on".into()
    }
    fn provides_prob_map(&self) -> bool {
        false
    }
    fn predict(&self, req: &SutRequest<'_>) -> Result<PredictionSet, SutError> {
        if req.scene_id == self.0 {
            return Err(SutError::new(
                req.scene_id,
                SutErrorKind::Remote("boom".into()),
            ));
        }
        EquivariantReference::default().predict(req)
    }
}

#[test]
fn one_scene_costs_n_plus_one_calls_with_derived_seeds() {
    let cfg = HarnessConfig::short_term();
    let tc = &scenes(1)[0];
    let sut = Counting::new();
    let r = run_scene(tc, &MrSpec::Rotate { degrees: 90 }, &sut, &cfg);
    assert!(r.is_ok(), "{:?}", r.status);
    assert_eq!(r.sut_calls, cfg.n_runs + 1);
    assert_eq!(sut.calls.load(Ordering::SeqCst), cfg.n_runs + 1);

    let mut expected: Vec<u64> = (0..cfg.n_runs)
        .map(|i| derive_seed(cfg.seed, &tc.scene_id, RunTag::Source(i)))
        .collect();
    expected.push(derive_seed(cfg.seed, &tc.scene_id, RunTag::FollowUp));
    assert_eq!(*sut.seeds.lock().unwrap(), expected);

    let w = r.wvc.as_ref().unwrap();
    assert_eq!(w.verdicts.len(), cfg.n_runs);
    assert_eq!(w.violation_rate, 0.0);
    assert_eq!(r.displacement.as_ref().unwrap().verdicts.len(), 4);
}

#[test]
fn relations_share_source_runs() {
    let cfg = HarnessConfig::short_term();
    let tc = &scenes(1)[0];
    let sut = Counting::new();
    let mrs = MrSpec::label_preserving_set();
    let rows = run_scene_all(tc, &mrs, &sut, &cfg);
    assert_eq!(rows.len(), mrs.len());
    assert_eq!(sut.calls.load(Ordering::SeqCst), cfg.n_runs + mrs.len());
    assert!(rows.iter().all(|r| r.sut_calls == cfg.n_runs + 1));
}

#[test]
fn derived_seeds_differ_per_scene_and_tag() {
    let a = derive_seed(0, "scene-000", RunTag::Source(0));
    assert_eq!(a, derive_seed(0, "scene-000", RunTag::Source(0)));
    assert_ne!(a, derive_seed(0, "scene-000", RunTag::Source(1)));
    assert_ne!(a, derive_seed(0, "scene-001", RunTag::Source(0)));
    assert_ne!(a, derive_seed(1, "scene-000", RunTag::Source(0)));
    assert_ne!(a, derive_seed(0, "scene-000", RunTag::FollowUp));
}

#[test]
fn a_failing_scene_does_not_abort_the_campaign() {
    let s = scenes(3);
    let cfg = HarnessConfig {
        mrs: vec![MrSpec::Rotate { degrees: 180 }],
        ..HarnessConfig::short_term()
    };
    let c = run_campaign(&s, &FailsOn(s[1].scene_id.clone()), &cfg).unwrap();
    assert_eq!(c.results.len(), 3);
    assert_eq!(c.errored_count(), 1);
    match &c.results[1].status {
        SceneStatus::Errored {
            stage, sut_error, ..
        } => {
            assert_eq!(*stage, Stage::Source);
            assert!(matches!(
                sut_error.as_ref().unwrap().kind,
                SutErrorKind::Remote(_)
            ));
        }
        other => panic!("expected an error, got {other:?}"),
    }
    let a = &c.aggregates[0];
    assert_eq!((a.scenes, a.evaluated, a.errored), (3, 2, 1));
    assert_eq!(a.wvc_rate, Some(0.0));
}

#[test]
fn invalid_config_is_rejected_before_any_call() {
    let cfg = HarnessConfig {
        n_runs: 1,
        ..HarnessConfig::short_term()
    };
    let sut = Counting::new();
    assert!(run_campaign(&scenes(1), &sut, &cfg).is_err());
    assert_eq!(sut.calls.load(Ordering::SeqCst), 0);
    assert!(run_campaign(&[], &sut, &HarnessConfig::short_term()).is_err());
}

#[test]
fn aggregate_has_one_row_per_label_in_order() {
    let s = scenes(2);
    let cfg = HarnessConfig::short_term();
    let c = run_campaign(&s, &BiasedMutant::default(), &cfg).unwrap();
    let labels: Vec<String> = cfg.mrs.iter().map(MrSpec::label).collect();
    assert_eq!(c.aggregates.len(), 7);
    assert_eq!(
        c.aggregates
            .iter()
            .map(|a| a.mr.clone())
            .collect::<Vec<_>>(),
        labels
    );

    let single = aggregate(&c.results, &[labels[3].clone(), labels[3].clone()]);
    assert_eq!(single.len(), 1);
    assert_eq!(single[0].mr, "rotate-180");
    assert_eq!(single[0].evaluated, 2);
    assert_eq!(single[0].wvc_rate, Some(1.0));
}

#[test]
fn map_relations_report_htc_and_intersection() {
    let s = scenes(2);
    let cfg = HarnessConfig {
        mrs: MrSpec::map_set(),
        ..HarnessConfig::short_term()
    };
    let c = run_campaign(&s, &MapAwareReference::default(), &cfg).unwrap();
    for r in c.results.iter().filter(|r| r.is_ok()) {
        assert!(r.wvc.is_none());
        assert!(r.htc.is_some() || r.htc_skip.is_some());
    }
    let obstacle = c
        .results
        .iter()
        .find(|r| r.is_ok() && matches!(r.mr, MrSpec::Obstacle { .. }))
        .expect("an evaluated obstacle scene");
    let i = obstacle.intersection.as_ref().unwrap();
    assert!((0.0..=1.0).contains(&i.follow_up_roi));
}

#[test]
fn confusion_example_scores() {
    let (acc, prec, rec) = confusion_scores(3, 1, 1, 5);
    assert!((acc - 0.8).abs() < 1e-12);
    assert!((prec - 0.75).abs() < 1e-12);
    assert!((rec - 0.75).abs() < 1e-12);
    assert_eq!(confusion_scores(0, 0, 0, 4), (1.0, 1.0, 1.0));
}

#[test]
fn threshold_one_flags_everything() {
    let cfg = HarnessConfig {
        mrs: vec![MrSpec::Rotate { degrees: 180 }, MrSpec::identity()],
        ..HarnessConfig::short_term()
    };
    let c = run_campaign(&scenes(2), &BiasedMutant::default(), &cfg).unwrap();
    let rep = agreement_analysis(&c.results, &[1.0]).unwrap();
    let row = rep.row(Criterion::MeanAde, 1.0).unwrap();
    assert_eq!(row.recall, 1.0);
    assert_eq!(row.fn_, 0);
    assert!(agreement_analysis(&c.results, &[0.0]).is_err());
    assert!(agreement_analysis(&[], &[0.05]).is_err());
}
