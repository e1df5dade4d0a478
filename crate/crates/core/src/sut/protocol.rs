//! Newline-delimited JSON protocol spoken with predictor processes.
//!
//! ```text
//! -> {"type":"hello","version":1}
//! <- {"type":"ready","provides_prob_map":true}
//! -> {"type":"predict","scene_id":..,"seed":..,"k":..,"horizon":..,"dt":..,"history":[[x,y],..],"map":{..}}
//! <- {"type":"prediction","scene_id":..,"trajectories":[[[x,y],..],..],"prob_map_b64":..}
//! <- {"type":"error","message":..}
//! ```
//!
//! Map cells travel as base64 of row-major `u8` class ids; probability maps
//! as base64 of row-major little-endian `f32`.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{validate_response, SutError, SutErrorKind, SutRequest};
use crate::geometry::{Point2, Trajectory};
use crate::raster::{ClassEntry, ClassLegend, ProbabilityMap, SegmentationMap};
use crate::scene::PredictionSet;

pub const PROTOCOL_VERSION: u32 = 1;

/// Largest deviation from unit mass accepted in a transmitted probability
/// map before it is renormalized (f32 sums drift).
pub const WIRE_MASS_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireClass {
    pub id: u8,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMap {
    pub width: usize,
    pub height: usize,
    pub legend: Vec<WireClass>,
    pub cells_b64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictMsg {
    pub scene_id: String,
    pub seed: u64,
    pub k: usize,
    pub horizon: usize,
    pub dt: f64,
    pub history: Vec<[f64; 2]>,
    pub map: WireMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMsg {
    pub scene_id: String,
    /// `None` marks a coordinate that was NaN or infinite on the wire.
    pub trajectories: Vec<Vec<[Option<f64>; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob_map_b64: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello { version: u32 },
    Ready { provides_prob_map: bool },
    Predict(PredictMsg),
    Prediction(PredictionMsg),
    Error { message: String },
}

impl Message {
    /// One protocol line, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("protocol messages serialize")
    }

    /// Parses one line. Bare `NaN` / `Infinity` tokens, which some JSON
    /// encoders emit, are read as missing values.
    pub fn parse(line: &str) -> Result<Self, String> {
        match serde_json::from_str(line) {
            Ok(m) => Ok(m),
            Err(first) => {
                let cleaned = null_non_finite(line);
                if cleaned == line {
                    return Err(first.to_string());
                }
                serde_json::from_str(&cleaned).map_err(|_| first.to_string())
            }
        }
    }
}

/// Replaces `NaN`, `Infinity` and `-Infinity` outside string literals by
/// `null`.
fn null_non_finite(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_str = false;
    let mut escaped = false;
    let mut rest = s;
    while let Some(ch) = rest.chars().next() {
        if in_str {
            if escaped {
                escaped = false;
            } else if ch == '\\' {
                escaped = true;
            } else if ch == '"' {
                in_str = false;
            }
        } else if ch == '"' {
            in_str = true;
        } else {
            let token = ["-Infinity", "Infinity", "NaN"]
                .into_iter()
                .find(|t| rest.starts_with(t));
            if let Some(t) = token {
                out.push_str("null");
                rest = &rest[t.len()..];
                continue;
            }
        }
        out.push(ch);
        rest = &rest[ch.len_utf8()..];
    }
    out
}

pub fn encode_map(map: &SegmentationMap) -> WireMap {
    WireMap {
        width: map.width(),
        height: map.height(),
        legend: map
            .legend()
            .entries()
            .iter()
            .map(|e| WireClass {
                id: e.id,
                name: e.name.clone(),
            })
            .collect(),
        cells_b64: B64.encode(map.cells()),
    }
}

/// Rebuilds a map from the wire; walkability is not transmitted, so it is
/// looked up by class name.
pub fn decode_map(
    m: &WireMap,
    walkability: impl Fn(&str) -> f64,
) -> Result<SegmentationMap, String> {
    let cells = B64
        .decode(&m.cells_b64)
        .map_err(|e| format!("cells_b64: {e}"))?;
    let entries = m
        .legend
        .iter()
        .map(|c| ClassEntry {
            id: c.id,
            name: c.name.clone(),
            walkability: walkability(&c.name),
        })
        .collect();
    let legend = ClassLegend::new(entries).map_err(|e| e.to_string())?;
    SegmentationMap::new(m.width, m.height, cells, legend).map_err(|e| e.to_string())
}

pub fn encode_request(req: &SutRequest<'_>) -> Message {
    Message::Predict(PredictMsg {
        scene_id: req.scene_id.to_string(),
        seed: req.seed,
        k: req.k,
        horizon: req.horizon,
        dt: req.history.dt(),
        history: req.history.points().iter().map(|p| [p.x, p.y]).collect(),
        map: encode_map(req.map),
    })
}

pub fn encode_prob_map(m: &ProbabilityMap) -> String {
    let mut bytes = Vec::with_capacity(4 * m.values().len());
    for v in m.values() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    B64.encode(bytes)
}

pub fn encode_prediction(scene_id: &str, pred: &PredictionSet) -> Message {
    Message::Prediction(PredictionMsg {
        scene_id: scene_id.to_string(),
        trajectories: pred
            .trajectories()
            .iter()
            .map(|t| t.points().iter().map(|p| [Some(p.x), Some(p.y)]).collect())
            .collect(),
        prob_map_b64: pred.prob_map().map(encode_prob_map),
    })
}

/// Turns a prediction message into a validated [`PredictionSet`] for `req`.
pub fn decode_prediction(
    msg: &PredictionMsg,
    req: &SutRequest<'_>,
) -> Result<PredictionSet, SutError> {
    let breach = |m: String| SutError::new(req.scene_id, SutErrorKind::InvariantBreach(m));
    if msg.scene_id != req.scene_id {
        return Err(SutError::new(
            req.scene_id,
            SutErrorKind::Protocol(format!("response is for scene '{}'", msg.scene_id)),
        ));
    }
    if msg.trajectories.len() != req.k {
        return Err(breach(format!(
            "expected {} trajectories, got {}",
            req.k,
            msg.trajectories.len()
        )));
    }
    let mut trajectories = Vec::with_capacity(msg.trajectories.len());
    for (i, t) in msg.trajectories.iter().enumerate() {
        let mut pts = Vec::with_capacity(t.len());
        for (j, p) in t.iter().enumerate() {
            match p {
                [Some(x), Some(y)] if x.is_finite() && y.is_finite() => {
                    pts.push(Point2::new(*x, *y))
                }
                _ => return Err(breach(format!("trajectory {i} point {j} is not finite"))),
            }
        }
        trajectories.push(
            Trajectory::new(pts, req.history.dt())
                .map_err(|e| breach(format!("trajectory {i}: {e}")))?,
        );
    }
    let prob_map = match &msg.prob_map_b64 {
        None => None,
        Some(b) => {
            let bytes = B64
                .decode(b)
                .map_err(|e| breach(format!("prob_map_b64: {e}")))?;
            let (w, h) = (req.map.width(), req.map.height());
            if bytes.len() != 4 * w * h {
                return Err(breach(format!(
                    "probability map has {} bytes, expected {} for {w}x{h}",
                    bytes.len(),
                    4 * w * h
                )));
            }
            let values: Vec<f64> = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            let total: f64 = values.iter().sum();
            if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(breach(
                    "probability map has negative or non-finite cells".into(),
                ));
            }
            if !((total - 1.0).abs() <= WIRE_MASS_TOLERANCE) {
                return Err(breach(format!(
                    "probability map sums to {total}, expected 1"
                )));
            }
            Some(ProbabilityMap::from_weights(w, h, values).map_err(|e| breach(e.to_string()))?)
        }
    };
    let pred =
        PredictionSet::new(trajectories, prob_map, req.seed).map_err(|e| breach(e.to_string()))?;
    validate_response(req, &pred)?;
    Ok(pred)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (SegmentationMap, Trajectory) {
        let cells: Vec<u8> = (0..12).map(|i| (i % 6) as u8).collect();
        let map = SegmentationMap::new(4, 3, cells, ClassLegend::standard()).unwrap();
        let hist = Trajectory::from_xy(&[(0.5, 0.25), (1.0, 0.75)], 0.4).unwrap();
        (map, hist)
    }

    fn request<'a>(map: &'a SegmentationMap, hist: &'a Trajectory) -> SutRequest<'a> {
        SutRequest {
            scene_id: "s1",
            history: hist,
            map,
            k: 2,
            horizon: 2,
            seed: 11,
        }
    }

    #[test]
    fn request_wire_format() {
        let (map, hist) = fixture();
        let line = encode_request(&request(&map, &hist)).to_line();
        assert!(line.starts_with(r#"{"type":"predict","scene_id":"s1","seed":11,"k":2,"horizon":2,"dt":0.4,"history":[[0.5,0.25],[1.0,0.75]],"map":{"width":4,"height":3,"legend":[{"id":0,"name":"background"}"#));
        let Message::Predict(back) = Message::parse(&line).unwrap() else {
            panic!()
        };
        let decoded = decode_map(&back.map, |n| {
            ClassLegend::standard()
                .entries()
                .iter()
                .find(|e| e.name == n)
                .unwrap()
                .walkability
        })
        .unwrap();
        assert_eq!(decoded, map);
        assert_eq!(
            Message::Hello { version: 1 }.to_line(),
            r#"{"type":"hello","version":1}"#
        );
        assert_eq!(
            Message::Ready {
                provides_prob_map: false
            }
            .to_line(),
            r#"{"type":"ready","provides_prob_map":false}"#
        );
    }

    #[test]
    fn prediction_round_trip() {
        let (map, hist) = fixture();
        let req = request(&map, &hist);
        let t = Trajectory::from_xy(&[(1.0, 1.0), (2.0, 1.5)], 0.4).unwrap();
        let pm =
            ProbabilityMap::from_weights(4, 3, (0..12).map(|i| i as f64 + 1.0).collect()).unwrap();
        let pred = PredictionSet::new(vec![t.clone(), t], Some(pm.clone()), 11).unwrap();
        let line = encode_prediction("s1", &pred).to_line();
        let Message::Prediction(msg) = Message::parse(&line).unwrap() else {
            panic!()
        };
        let back = decode_prediction(&msg, &req).unwrap();
        assert_eq!(back.trajectories(), pred.trajectories());
        for (a, b) in back.prob_map().unwrap().values().iter().zip(pm.values()) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn non_finite_and_short_responses_breach_invariants() {
        let (map, hist) = fixture();
        let req = request(&map, &hist);
        let line = r#"{"type":"prediction","scene_id":"s1","trajectories":[[[1,2],[NaN,3]],[[1,2],[2,3]]]}"#;
        let Message::Prediction(msg) = Message::parse(line).unwrap() else {
            panic!()
        };
        let err = decode_prediction(&msg, &req).unwrap_err();
        assert!(matches!(err.kind, SutErrorKind::InvariantBreach(_)));

        let line = r#"{"type":"prediction","scene_id":"s1","trajectories":[[[1,2],[2,3]]]}"#;
        let Message::Prediction(msg) = Message::parse(line).unwrap() else {
            panic!()
        };
        assert!(matches!(
            decode_prediction(&msg, &req).unwrap_err().kind,
            SutErrorKind::InvariantBreach(_)
        ));
    }

    #[test]
    fn string_contents_are_not_rewritten() {
        let line = r#"{"type":"error","message":"NaN in Infinity"}"#;
        assert_eq!(
            Message::parse(line).unwrap(),
            Message::Error {
                message: "NaN in Infinity".into()
            }
        );
        assert!(Message::parse("{not json").is_err());
    }
}
