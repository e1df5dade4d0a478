//! Line-protocol predictor for exercising the external adapter.
//!
//! `trajtest-stub [MODE]` where MODE is one of
//! reference | mutant | short | nan | crash | hang | garbage | error.
//! `reference` wraps the built-in equivariant predictor; the others break
//! the protocol in one specific way on every predict request.

use std::io::{self, BufRead, Write};
use std::process::ExitCode;
use std::time::Duration;

use trajtest_core::sut::protocol::{
    decode_map, encode_prediction, Message, PredictMsg, PROTOCOL_VERSION,
};
use trajtest_core::sut::{BiasedMutant, EquivariantReference, Sut, SutRequest};
use trajtest_core::{ClassLegend, Point2, Trajectory};

const MODES: [&str; 8] = [
    "reference",
    "mutant",
    "short",
    "nan",
    "crash",
    "hang",
    "garbage",
    "error",
];

fn walkability(name: &str) -> f64 {
    let legend = ClassLegend::standard();
    legend
        .id_of(name)
        .map(|id| legend.walkability(id))
        .unwrap_or(1.0)
}

fn predict(sut: &dyn Sut, p: &PredictMsg) -> Result<Message, String> {
    let map = decode_map(&p.map, walkability)?;
    let pts = p.history.iter().map(|&[x, y]| Point2::new(x, y)).collect();
    let history = Trajectory::new(pts, p.dt).map_err(|e| e.to_string())?;
    let req = SutRequest {
        scene_id: &p.scene_id,
        history: &history,
        map: &map,
        k: p.k,
        horizon: p.horizon,
        seed: p.seed,
    };
    let pred = sut.predict(&req).map_err(|e| e.to_string())?;
    Ok(encode_prediction(&p.scene_id, &pred))
}

fn emit(out: &mut impl Write, line: &str) -> io::Result<()> {
    writeln!(out, "{line}")?;
    out.flush()
}

fn main() -> ExitCode {
    let mode = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "reference".into());
    if !MODES.contains(&mode.as_str()) {
        eprintln!(
            "unknown mode '{mode}'; expected one of {}",
            MODES.join(", ")
        );
        return ExitCode::from(1);
    }
    let sut: Box<dyn Sut> = if mode == "mutant" {
        Box::new(BiasedMutant::default())
    } else {
        Box::new(EquivariantReference::default())
    };
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let reply = match Message::parse(&line) {
            Ok(Message::Hello { version }) if version == PROTOCOL_VERSION => Message::Ready {
                provides_prob_map: sut.provides_prob_map(),
            },
            Ok(Message::Hello { version }) => Message::Error {
                message: format!("unsupported protocol version {version}"),
            },
            Ok(Message::Predict(p)) => match mode.as_str() {
                "crash" => {
                    eprintln!("stub: crashing on purpose");
                    std::process::exit(3);
                }
                "hang" => loop {
                    std::thread::sleep(Duration::from_secs(3600));
                },
                "garbage" => {
                    if emit(&mut out, "this is not json").is_err() {
                        break;
                    }
                    continue;
                }
                "error" => Message::Error {
                    message: "model failed on purpose".into(),
                },
                _ => match predict(sut.as_ref(), &p) {
                    Ok(Message::Prediction(mut pm)) => {
                        if mode == "short" {
                            for t in &mut pm.trajectories {
                                t.pop();
                            }
                        }
                        if mode == "nan" {
                            // emit the bare token a careless encoder would produce
                            pm.trajectories[0][0] = [None, None];
                            let line = Message::Prediction(pm).to_line().replacen(
                                "[null,null]",
                                "[NaN,NaN]",
                                1,
                            );
                            if emit(&mut out, &line).is_err() {
                                break;
                            }
                            continue;
                        }
                        Message::Prediction(pm)
                    }
                    Ok(other) => other,
                    Err(message) => Message::Error { message },
                },
            },
            Ok(_) => Message::Error {
                message: "unexpected message type".into(),
            },
            Err(e) => Message::Error {
                message: format!("malformed line: {e}"),
            },
        };
        if emit(&mut out, &reply.to_line()).is_err() {
            break;
        }
    }
    ExitCode::SUCCESS
}
