use std::path::Path;
use std::process::{Command, Output};
use std::time::Duration;

use trajtest_core::harness::{derive_seed, HarnessConfig, RunTag};
use trajtest_core::scenegen::{generate_scene, SceneRecipe};
use trajtest_core::sut::{
    EquivariantReference, ExternalConfig, ExternalSut, Sut, SutErrorKind, SutRequest,
};

const BIN: &str = env!("CARGO_BIN_EXE_trajtest");
const STUB: &str = env!("CARGO_BIN_EXE_trajtest-stub");

fn trajtest(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("TRAJTEST_SEED")
        .output()
        .unwrap()
}

fn stub(mode: &str) -> String {
    format!("{STUB} {mode}")
}

fn gen(dir: &Path, count: usize) {
    let out = trajtest(&[
        "gen",
        "--out",
        dir.to_str().unwrap(),
        "--count",
        &count.to_string(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn gen_then_run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = dir.path().join("scenes");
    let out = dir.path().join("out");
    gen(&scenes, 3);
    let r = trajtest(&[
        "run",
        "--scenes",
        scenes.to_str().unwrap(),
        "--sut",
        "mutant",
        "--mr",
        "rotate-180,identity",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    for f in [
        "aggregate.csv",
        "scenes.csv",
        "results.json",
        "agreement.csv",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let stdout = String::from_utf8_lossy(&r.stdout);
    assert!(stdout.contains("rotate-180"), "{stdout}");

    let v = trajtest(&["validate", "--scenes", scenes.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0));
}

#[test]
fn run_through_the_line_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = dir.path().join("scenes");
    gen(&scenes, 2);
    let r = trajtest(&[
        "run",
        "--scenes",
        scenes.to_str().unwrap(),
        "--sut",
        &format!("cmd:{}", stub("reference")),
        "--mr",
        "mirror-v,rotate-90",
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(trajtest(&["run", "--out", "x"]).status.code(), Some(1));
    assert_eq!(trajtest(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(trajtest(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_scene_directory_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = trajtest(&[
        "run",
        "--scenes",
        dir.path().join("absent").to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(
        r.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
}

#[test]
fn protocol_check_passes_the_reference_stub() {
    let r = trajtest(&["protocol-check", "--cmd", &stub("reference")]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stdout)
    );
}

#[test]
fn protocol_check_flags_broken_predictors() {
    for mode in ["crash", "nan", "short", "garbage", "error"] {
        let r = trajtest(&["protocol-check", "--cmd", &stub(mode), "--timeout", "10"]);
        assert_eq!(
            r.status.code(),
            Some(2),
            "{mode}: {}",
            String::from_utf8_lossy(&r.stdout)
        );
        assert!(
            String::from_utf8_lossy(&r.stdout).contains("FAIL"),
            "{mode}"
        );
    }
}

fn request_scene() -> trajtest_core::TestCase {
    generate_scene(&SceneRecipe::default(), &HarnessConfig::short_term()).unwrap()
}

#[test]
fn external_errors_are_structured() {
    let tc = request_scene();
    let req = SutRequest {
        scene_id: &tc.scene_id,
        history: &tc.history,
        map: &tc.map,
        k: 4,
        horizon: 12,
        seed: 1,
    };
    let kind = |mode: &str, timeout: u64| {
        let cfg = ExternalConfig {
            timeout: Duration::from_secs(timeout),
            ..ExternalConfig::new(stub(mode))
        };
        ExternalSut::connect(cfg)
            .unwrap()
            .predict(&req)
            .unwrap_err()
            .kind
    };
    assert!(matches!(kind("hang", 1), SutErrorKind::Timeout(_)));
    assert!(matches!(kind("crash", 10), SutErrorKind::Process(_)));
    assert!(matches!(kind("nan", 10), SutErrorKind::InvariantBreach(_)));
    assert!(matches!(
        kind("short", 10),
        SutErrorKind::InvariantBreach(_)
    ));
    assert!(matches!(kind("garbage", 10), SutErrorKind::Protocol(_)));
    assert!(matches!(kind("error", 10), SutErrorKind::Remote(_)));
}

#[test]
fn external_reference_matches_in_process_reference() {
    let tc = request_scene();
    let cfg = HarnessConfig::short_term();
    let external = ExternalSut::connect(ExternalConfig::new(stub("reference"))).unwrap();
    let local = EquivariantReference::default();
    for i in 0..3 {
        let req = SutRequest {
            scene_id: &tc.scene_id,
            history: &tc.history,
            map: &tc.map,
            k: cfg.k,
            horizon: cfg.horizon,
            seed: derive_seed(cfg.seed, &tc.scene_id, RunTag::Source(i)),
        };
        let a = external.predict(&req).unwrap();
        let b = local.predict(&req).unwrap();
        for (ta, tb) in a.trajectories().iter().zip(b.trajectories()) {
            for (p, q) in ta.points().iter().zip(tb.points()) {
                assert!((p.x - q.x).abs() <= 1e-6 && (p.y - q.y).abs() <= 1e-6);
            }
        }
    }
}

#[test]
fn seed_environment_variable_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = dir.path().join("scenes");
    gen(&scenes, 1);
    let run = |out: &str, seed_flag: &str, env: Option<&str>| {
        let mut c = Command::new(BIN);
        c.args([
            "run",
            "--scenes",
            scenes.to_str().unwrap(),
            "--mr",
            "rotate-90",
            "--seed",
            seed_flag,
            "--out",
            dir.path().join(out).to_str().unwrap(),
        ]);
        match env {
            Some(v) => c.env("TRAJTEST_SEED", v),
            None => c.env_remove("TRAJTEST_SEED"),
        };
        let o = c.output().unwrap();
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        std::fs::read(dir.path().join(out).join("results.json")).unwrap()
    };
    let flag = run("a", "9", None);
    let env = run("b", "1", Some("9"));
    let other = run("c", "1", None);
    assert_eq!(flag, env);
    assert_ne!(flag, other);

    let mut c = Command::new(BIN);
    c.args([
        "run",
        "--scenes",
        scenes.to_str().unwrap(),
        "--out",
        dir.path().join("d").to_str().unwrap(),
    ]);
    assert_eq!(
        c.env("TRAJTEST_SEED", "abc")
            .output()
            .unwrap()
            .status
            .code(),
        Some(1)
    );
}
