use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use trajtest_core::harness::{
    agreement_analysis, run_campaign, scene_problems, CampaignResult, HarnessConfig,
    DEFAULT_THRESHOLDS,
};
use trajtest_core::io::{
    self, fmt_g, load_scene, load_scenes, read_results, save_scenes, write_agreement_csv, IoError,
};
use trajtest_core::scenegen::{generate_scene, SceneRecipe};
use trajtest_core::sut::{
    validate_response, BiasedMutant, EquivariantReference, ExternalConfig, ExternalSut,
    MapAwareReference, Sut, SutRequest,
};
use trajtest_core::transforms::{MrSpec, TransitionTable};

const EXIT_USAGE: u8 = 1;
const EXIT_FAILED: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "trajtest",
    version,
    about = "Metamorphic testing of trajectory predictors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene corpus.
    Gen(GenArgs),
    /// Run a metamorphic test campaign.
    Run(RunArgs),
    /// Agreement of WVC with Mean-ADE/FDE over a results file.
    Agree(AgreeArgs),
    /// Handshake and conformance probe of an external predictor.
    ProtocolCheck(ProtocolArgs),
    /// Lint scene packages.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct Horizon {
    /// Use the long-term setting (n=5, T=30, 1 frame per second).
    #[arg(long)]
    long_term: bool,
}

impl Horizon {
    fn config(&self) -> HarnessConfig {
        if self.long_term {
            HarnessConfig::long_term()
        } else {
            HarnessConfig::short_term()
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    horizon: Horizon,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenes: PathBuf,
    /// equivariant | mutant | map-aware | cmd:<command>
    #[arg(long, default_value = "equivariant")]
    sut: String,
    /// Comma separated relations, or label-preserving | map | all.
    #[arg(long, default_value = "label-preserving")]
    mr: String,
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Scenes in flight; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    parallel: usize,
    /// TOML overlay for the class transition table.
    #[arg(long)]
    transitions: Option<PathBuf>,
    /// Per-request timeout for external predictors, in seconds.
    #[arg(long, default_value_t = 120)]
    timeout: u64,
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[command(flatten)]
    horizon: Horizon,
}

#[derive(Args)]
struct AgreeArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProtocolArgs {
    /// Command line that starts the predictor.
    #[arg(long)]
    cmd: String,
    #[arg(long, default_value_t = 30)]
    timeout: u64,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    scenes: PathBuf,
    #[command(flatten)]
    horizon: Horizon,
}

/// A failure carrying the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(m: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: m.into(),
        }
    }

    fn failed(m: impl Into<String>) -> Self {
        Self {
            code: EXIT_FAILED,
            message: m.into(),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        let code = if e.is_io() { EXIT_IO } else { EXIT_FAILED };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn seed_override(seed: u64) -> Result<u64, Failure> {
    match std::env::var("TRAJTEST_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| {
            Failure::usage(format!(
                "TRAJTEST_SEED must be an unsigned integer, got '{v}'"
            ))
        }),
        Err(_) => Ok(seed),
    }
}

fn make_sut(spec: &str, timeout: u64) -> Result<Box<dyn Sut>, Failure> {
    Ok(match spec {
        "equivariant" => Box::new(EquivariantReference::default()),
        "mutant" => Box::new(BiasedMutant::default()),
        "map-aware" => Box::new(MapAwareReference::default()),
        _ => match spec.strip_prefix("cmd:") {
            Some(cmd) if !cmd.trim().is_empty() => {
                let config = ExternalConfig {
                    timeout: Duration::from_secs(timeout),
                    ..ExternalConfig::new(cmd)
                };
                Box::new(ExternalSut::connect(config).map_err(|e| Failure::failed(e.to_string()))?)
            }
            _ => return Err(Failure::usage(format!("unknown --sut '{spec}'"))),
        },
    })
}

fn gen(a: GenArgs) -> Result<(), Failure> {
    let cfg = HarnessConfig {
        seed: seed_override(a.seed)?,
        ..a.horizon.config()
    };
    let scenes = SceneRecipe::corpus(a.count, cfg.seed)
        .iter()
        .map(|r| generate_scene(r, &cfg))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::failed(e.to_string()))?;
    save_scenes(&scenes, &a.out)?;
    println!("wrote {} scenes to {}", scenes.len(), a.out.display());
    Ok(())
}

fn print_aggregate(c: &CampaignResult) {
    let o = |v: Option<f64>| v.map(|x| fmt_g(100.0 * x)).unwrap_or_else(|| "-".into());
    println!(
        "{:<34} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7} {:>17} {:>7} {:>7}",
        "MR",
        "scenes",
        "WVC%",
        "B-ADE%",
        "B-FDE%",
        "M-ADE%",
        "M-FDE%",
        "HVC mean±std",
        "HTC%",
        "inter%"
    );
    for a in &c.aggregates {
        let hvc = match (a.hvc_mean, a.hvc_std) {
            (Some(m), Some(s)) => format!("{}±{}", fmt_g(m), fmt_g(s)),
            _ => "-".into(),
        };
        println!(
            "{:<34} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7} {:>17} {:>7} {:>7}",
            a.mr,
            format!("{}/{}", a.evaluated, a.scenes),
            o(a.wvc_rate),
            o(a.bon_ade_rate),
            o(a.bon_fde_rate),
            o(a.mean_ade_rate),
            o(a.mean_fde_rate),
            hvc,
            o(a.htc_rate),
            o(a.intersection_mean)
        );
    }
}

fn check_thresholds(t: Option<Vec<f64>>) -> Result<Vec<f64>, Failure> {
    let t = t.unwrap_or_else(|| DEFAULT_THRESHOLDS.to_vec());
    if t.is_empty() || t.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
        return Err(Failure::usage("thresholds must lie in (0, 1]"));
    }
    Ok(t)
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let mrs = MrSpec::parse_list(&a.mr).map_err(|e| Failure::usage(e.to_string()))?;
    let thresholds = check_thresholds(a.thresholds)?;
    let transitions = match &a.transitions {
        Some(p) => TransitionTable::load_overlay(p).map_err(|e| Failure {
            code: EXIT_IO,
            message: format!("{}: {e}", p.display()),
        })?,
        None => TransitionTable::default(),
    };
    let cfg = HarnessConfig {
        n_runs: a.n,
        k: a.k,
        alpha: a.alpha,
        mrs,
        seed: seed_override(a.seed)?,
        parallelism: a.parallel,
        transitions,
        ..a.horizon.config()
    };
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let scenes = load_scenes(&a.scenes, &cfg)?;
    let sut = make_sut(&a.sut, a.timeout)?;
    let campaign =
        run_campaign(&scenes, sut.as_ref(), &cfg).map_err(|e| Failure::failed(e.to_string()))?;
    let agreement = agreement_analysis(&campaign.results, &thresholds).ok();
    io::write_reports(&a.out, &campaign, agreement.as_ref())?;
    print_aggregate(&campaign);
    let errored = campaign.errored_count();
    if errored > 0 {
        for r in campaign.results.iter().filter(|r| r.is_errored()) {
            eprintln!("{} {}: {:?}", r.scene_id, r.mr, r.status);
        }
        return Err(Failure::failed(format!("{errored} scene runs errored")));
    }
    Ok(())
}

fn agree(a: AgreeArgs) -> Result<(), Failure> {
    let thresholds = check_thresholds(a.thresholds)?;
    let campaign = read_results(&a.results)?;
    let report = agreement_analysis(&campaign.results, &thresholds)
        .map_err(|e| Failure::failed(e.to_string()))?;
    let csv = write_agreement_csv(&report);
    match a.out {
        Some(p) => std::fs::write(&p, csv).map_err(|e| Failure {
            code: EXIT_IO,
            message: format!("{}: {e}", p.display()),
        })?,
        None => print!("{}", String::from_utf8_lossy(&csv)),
    }
    Ok(())
}

fn protocol_check(a: ProtocolArgs) -> Result<(), Failure> {
    let config = ExternalConfig {
        timeout: Duration::from_secs(a.timeout),
        ..ExternalConfig::new(a.cmd.clone())
    };
    let sut = ExternalSut::connect(config)
        .map_err(|e| Failure::failed(format!("handshake failed: {e}")))?;
    println!(
        "ok   handshake (provides_prob_map={})",
        sut.provides_prob_map()
    );
    let cfg = HarnessConfig::short_term();
    let tc = generate_scene(&SceneRecipe::default(), &cfg)
        .map_err(|e| Failure::failed(e.to_string()))?;
    let req = SutRequest {
        scene_id: &tc.scene_id,
        history: &tc.history,
        map: &tc.map,
        k: cfg.k,
        horizon: cfg.horizon,
        seed: 17,
    };
    let mut failures = 0;
    let mut check = |name: &str, r: Result<(), String>| match r {
        Ok(()) => println!("ok   {name}"),
        Err(e) => {
            failures += 1;
            println!("FAIL {name}: {e}");
        }
    };
    let first = sut.predict(&req).map_err(|e| e.to_string());
    check(
        "prediction shape",
        first
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|p| validate_response(&req, p).map_err(|e| e.to_string())),
    );
    if let Ok(first) = &first {
        check(
            "probability map advertised",
            match (sut.provides_prob_map(), first.prob_map().is_some()) {
                (true, false) => Err("ready said provides_prob_map but none was sent".into()),
                _ => Ok(()),
            },
        );
        let again = sut.predict(&req).map_err(|e| e.to_string());
        check(
            "same seed, same prediction",
            again.and_then(|p| {
                if &p == first {
                    Ok(())
                } else {
                    Err("responses differ".into())
                }
            }),
        );
    }
    let other = SutRequest {
        seed: 18,
        k: 3,
        horizon: 5,
        ..req
    };
    check(
        "request parameters honored",
        sut.predict(&other)
            .map_err(|e| e.to_string())
            .and_then(|p| validate_response(&other, &p).map_err(|e| e.to_string())),
    );
    if failures > 0 {
        return Err(Failure::failed(format!(
            "{failures} conformance checks failed"
        )));
    }
    Ok(())
}

fn validate(a: ValidateArgs) -> Result<(), Failure> {
    let cfg = a.horizon.config();
    let dirs = package_dirs(&a.scenes)?;
    let mut bad = 0;
    for dir in &dirs {
        match load_scene(dir, cfg.dt) {
            Ok(tc) => {
                let problems = scene_problems(&tc, &cfg);
                if problems.is_empty() {
                    println!("ok   {}", tc.scene_id);
                } else {
                    bad += 1;
                    println!("FAIL {}: {}", tc.scene_id, problems.join("; "));
                }
            }
            Err(e) if e.is_io() => return Err(e.into()),
            Err(e) => {
                bad += 1;
                println!("FAIL {}: {e}", dir.display());
            }
        }
    }
    if bad > 0 {
        return Err(Failure::failed(format!(
            "{bad} of {} scenes invalid",
            dirs.len()
        )));
    }
    Ok(())
}

fn package_dirs(root: &Path) -> Result<Vec<PathBuf>, Failure> {
    if root.join(io::MAP_FILE).is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let rd = std::fs::read_dir(root).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", root.display()),
    })?;
    let mut dirs: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(io::MAP_FILE).is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Failure::failed(format!(
            "no scene packages under {}",
            root.display()
        )));
    }
    Ok(dirs)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Run(a) => run(a),
        Command::Agree(a) => agree(a),
        Command::ProtocolCheck(a) => protocol_check(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
