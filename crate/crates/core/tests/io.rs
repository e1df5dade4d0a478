use std::fs;

use trajtest_core::harness::{agreement_analysis, run_campaign, HarnessConfig, DEFAULT_THRESHOLDS};
use trajtest_core::io::{
    load_scene, load_scenes, read_pgm, read_results, save_scene, save_scenes, write_reports,
    IoError, AGGREGATE_HEADER, AGREEMENT_HEADER, SCENES_HEADER, TRAJECTORY_FILE,
};
use trajtest_core::scenegen::{generate_scene, SceneRecipe};
use trajtest_core::sut::BiasedMutant;
use trajtest_core::transforms::MrSpec;
use trajtest_core::TestCase;

fn scenes(n: usize) -> Vec<TestCase> {
    let cfg = HarnessConfig::short_term();
    SceneRecipe::corpus(n, 3)
        .iter()
        .map(|r| generate_scene(r, &cfg).unwrap())
        .collect()
}

#[test]
fn scene_packages_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = HarnessConfig::short_term();
    let original = scenes(3);
    save_scenes(&original, dir.path()).unwrap();
    let loaded = load_scenes(dir.path(), &cfg).unwrap();
    assert_eq!(loaded, original);

    // a single package directory loads on its own too
    let one = load_scenes(&dir.path().join(&original[1].scene_id), &cfg).unwrap();
    assert_eq!(one, vec![original[1].clone()]);
}

#[test]
fn pgm_with_wrong_maxval_is_a_parse_error() {
    let mut bytes = b"P5\n2 2\n65535\n".to_vec();
    bytes.extend([0u8; 8]);
    let e = read_pgm(&bytes).unwrap_err();
    assert!(e.message.contains("255"), "{}", e.message);

    let dir = tempfile::tempdir().unwrap();
    let tc = &scenes(1)[0];
    save_scene(tc, dir.path()).unwrap();
    fs::write(dir.path().join("map.pgm"), &bytes).unwrap();
    match load_scene(dir.path(), 0.4) {
        Err(IoError::Parse { path, .. }) => assert!(path.ends_with("map.pgm")),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn out_of_order_time_index_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let tc = &scenes(1)[0];
    save_scene(tc, dir.path()).unwrap();
    let path = dir.path().join(TRAJECTORY_FILE);
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(2, 3);
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    match load_scene(dir.path(), 0.4) {
        Err(IoError::Validation { problems, .. }) => {
            assert!(problems[0].contains("t_index"), "{problems:?}")
        }
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn malformed_rows_report_their_line() {
    let dir = tempfile::tempdir().unwrap();
    let tc = &scenes(1)[0];
    save_scene(tc, dir.path()).unwrap();
    let path = dir.path().join(TRAJECTORY_FILE);
    let text = fs::read_to_string(&path).unwrap();
    let bad = text.replacen(",history,1,", ",history,1,NaN", 1);
    fs::write(&path, bad).unwrap();
    match load_scene(dir.path(), 0.4) {
        Err(IoError::Parse { error, .. }) => assert_eq!(error.line, Some(3)),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn short_history_fails_validation_against_config() {
    let dir = tempfile::tempdir().unwrap();
    save_scenes(&scenes(1), dir.path()).unwrap();
    let cfg = HarnessConfig {
        history_len: 12,
        ..HarnessConfig::short_term()
    };
    assert!(matches!(
        load_scenes(dir.path(), &cfg),
        Err(IoError::Validation { .. })
    ));
    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_scenes(empty.path(), &cfg),
        Err(IoError::Empty(_))
    ));
}

#[test]
fn reports_have_fixed_headers_and_results_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = HarnessConfig {
        mrs: vec![MrSpec::Rotate { degrees: 180 }, MrSpec::identity()],
        ..HarnessConfig::short_term()
    };
    let c = run_campaign(&scenes(2), &BiasedMutant::default(), &cfg).unwrap();
    let agreement = agreement_analysis(&c.results, &DEFAULT_THRESHOLDS).unwrap();
    write_reports(dir.path(), &c, Some(&agreement)).unwrap();

    let first_line = |f: &str| {
        fs::read_to_string(dir.path().join(f))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(
        first_line("aggregate.csv"),
        "mr,scenes,evaluated,skipped,errored,wvc_pct,bade_pct,bfde_pct,made_pct,mfde_pct,hvc_mean,hvc_std,hvc_pct,htc_pct,intersection_pct,blocked_intersection_pct,source_intersection_pct"
    );
    assert_eq!(first_line("aggregate.csv"), AGGREGATE_HEADER.join(","));
    assert_eq!(first_line("scenes.csv"), SCENES_HEADER.join(","));
    assert_eq!(
        first_line("agreement.csv"),
        "label,threshold,tp,fp,fn,tn,accuracy,precision,recall"
    );
    assert_eq!(first_line("agreement.csv"), AGREEMENT_HEADER.join(","));

    let aggregate = fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    assert_eq!(aggregate.lines().count(), 3);
    assert!(aggregate
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("rotate-180,2,2,0,0,100,"));

    let back = read_results(&dir.path().join("results.json")).unwrap();
    assert_eq!(back, c);
}
