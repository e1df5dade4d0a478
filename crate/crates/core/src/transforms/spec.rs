use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::transitions::Effect;
use super::TransformError;
use crate::raster::{PAVEMENT, ROAD, STRUCTURE, TERRAIN};

/// Scale factor the predictor is assumed to run at by default; `rescale-0.2`
/// means `s_old = 0.25, s_new = 0.2`.
pub const DEFAULT_SCALE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MirrorAxis {
    /// Reflect across a vertical line: `x -> W - x`.
    Vertical,
    /// Reflect across a horizontal line: `y -> H - y`.
    Horizontal,
}

/// One metamorphic relation with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MrSpec {
    Mirror {
        axis: MirrorAxis,
    },
    Rotate {
        degrees: u32,
    },
    Rescale {
        s_old: f64,
        s_new: f64,
    },
    ClassChange {
        source: String,
        target: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        effect: Option<Effect>,
    },
    Obstacle {
        class: String,
        radius: f64,
        fraction: f64,
    },
}

impl MrSpec {
    pub const DEFAULT_OBSTACLE_RADIUS: f64 = 10.0;
    pub const DEFAULT_OBSTACLE_FRACTION: f64 = 0.5;

    pub fn is_label_preserving(&self) -> bool {
        matches!(
            self,
            Self::Mirror { .. } | Self::Rotate { .. } | Self::Rescale { .. }
        )
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        let bad = |m: String| Err(TransformError::InvalidParams(m));
        match self {
            Self::Mirror { .. } => Ok(()),
            Self::Rotate { degrees } => match degrees {
                90 | 180 | 270 => Ok(()),
                d => Err(TransformError::UnsupportedAngle(*d)),
            },
            Self::Rescale { s_old, s_new } => {
                let ok = |s: f64| s > 0.0 && s <= 1.0;
                if ok(*s_old) && ok(*s_new) {
                    Ok(())
                } else {
                    bad(format!(
                        "rescale factors must lie in (0, 1], got {s_old} and {s_new}"
                    ))
                }
            }
            Self::ClassChange { source, target, .. } => {
                if source.is_empty() || target.is_empty() || source == target {
                    bad(format!("invalid class transition {source} -> {target}"))
                } else {
                    Ok(())
                }
            }
            Self::Obstacle {
                class,
                radius,
                fraction,
            } => {
                if class != STRUCTURE && class != crate::raster::TREE {
                    bad(format!(
                        "obstacle class must be structure or tree, got {class}"
                    ))
                } else if !(*radius >= 2.0 && radius.is_finite()) {
                    bad(format!(
                        "obstacle radius must be at least 2 px, got {radius}"
                    ))
                } else if !(*fraction > 0.0 && *fraction < 1.0) {
                    bad(format!(
                        "obstacle placement fraction must lie in (0, 1), got {fraction}"
                    ))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Short stable label used in reports, e.g. `rotate-90`.
    pub fn label(&self) -> String {
        match self {
            Self::Mirror {
                axis: MirrorAxis::Vertical,
            } => "mirror-v".into(),
            Self::Mirror {
                axis: MirrorAxis::Horizontal,
            } => "mirror-h".into(),
            Self::Rotate { degrees } => format!("rotate-{degrees}"),
            Self::Rescale { s_old, s_new } if s_old == s_new => "identity".into(),
            Self::Rescale { s_old, s_new } if *s_old == DEFAULT_SCALE => format!("rescale-{s_new}"),
            Self::Rescale { s_old, s_new } => format!("rescale-{s_old}-{s_new}"),
            Self::ClassChange { source, target, .. } => format!("class-change:{source}>{target}"),
            Self::Obstacle {
                class,
                radius,
                fraction,
            } => format!("obstacle:{class}:{radius}:{fraction}"),
        }
    }

    /// The seven label-preserving variants: mirror v/h, rotate 90/180/270,
    /// rescale to 0.2 and 0.3.
    pub fn label_preserving_set() -> Vec<MrSpec> {
        vec![
            Self::Mirror {
                axis: MirrorAxis::Vertical,
            },
            Self::Mirror {
                axis: MirrorAxis::Horizontal,
            },
            Self::Rotate { degrees: 90 },
            Self::Rotate { degrees: 180 },
            Self::Rotate { degrees: 270 },
            Self::Rescale {
                s_old: DEFAULT_SCALE,
                s_new: 0.2,
            },
            Self::Rescale {
                s_old: DEFAULT_SCALE,
                s_new: 0.3,
            },
        ]
    }

    /// Map-editing relations: one decrease, one increase, one avoidance class
    /// change, and an obstacle.
    pub fn map_set() -> Vec<MrSpec> {
        let cc = |s: &str, t: &str| Self::ClassChange {
            source: s.into(),
            target: t.into(),
            effect: None,
        };
        vec![
            cc(TERRAIN, ROAD),
            cc(TERRAIN, PAVEMENT),
            cc(PAVEMENT, STRUCTURE),
            Self::obstacle_default(),
        ]
    }

    pub fn obstacle_default() -> MrSpec {
        Self::Obstacle {
            class: STRUCTURE.into(),
            radius: Self::DEFAULT_OBSTACLE_RADIUS,
            fraction: Self::DEFAULT_OBSTACLE_FRACTION,
        }
    }

    /// Identity control: rescale with equal factors.
    pub fn identity() -> MrSpec {
        Self::Rescale {
            s_old: DEFAULT_SCALE,
            s_new: DEFAULT_SCALE,
        }
    }

    /// Parses a comma separated list; `label-preserving`, `map` and `all`
    /// expand to the preset sets.
    pub fn parse_list(s: &str) -> Result<Vec<MrSpec>, TransformError> {
        let mut out = Vec::new();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match tok {
                "label-preserving" => out.extend(Self::label_preserving_set()),
                "map" => out.extend(Self::map_set()),
                "all" => {
                    out.extend(Self::label_preserving_set());
                    out.extend(Self::map_set());
                }
                _ => out.push(tok.parse()?),
            }
        }
        if out.is_empty() {
            return Err(TransformError::InvalidParams("empty relation list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for MrSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for MrSpec {
    type Err = TransformError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TransformError::InvalidParams(format!("unrecognized relation '{s}'"));
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad());
        let spec = match s {
            "mirror-v" => Self::Mirror {
                axis: MirrorAxis::Vertical,
            },
            "mirror-h" => Self::Mirror {
                axis: MirrorAxis::Horizontal,
            },
            "identity" => Self::identity(),
            "obstacle" => Self::obstacle_default(),
            _ => {
                if let Some(deg) = s.strip_prefix("rotate-") {
                    Self::Rotate {
                        degrees: deg.parse().map_err(|_| bad())?,
                    }
                } else if let Some(rest) = s.strip_prefix("rescale-") {
                    match rest.split_once('-') {
                        Some((a, b)) => Self::Rescale {
                            s_old: num(a)?,
                            s_new: num(b)?,
                        },
                        None => Self::Rescale {
                            s_old: DEFAULT_SCALE,
                            s_new: num(rest)?,
                        },
                    }
                } else if let Some(rest) = s.strip_prefix("class-change:") {
                    let (src, tgt) = rest.split_once('>').ok_or_else(bad)?;
                    Self::ClassChange {
                        source: src.trim().into(),
                        target: tgt.trim().into(),
                        effect: None,
                    }
                } else if let Some(rest) = s.strip_prefix("obstacle:") {
                    let parts: Vec<&str> = rest.split(':').collect();
                    match parts.as_slice() {
                        [class] => Self::Obstacle {
                            class: class.to_string(),
                            radius: Self::DEFAULT_OBSTACLE_RADIUS,
                            fraction: Self::DEFAULT_OBSTACLE_FRACTION,
                        },
                        [class, radius, fraction] => Self::Obstacle {
                            class: class.to_string(),
                            radius: num(radius)?,
                            fraction: num(fraction)?,
                        },
                        _ => return Err(bad()),
                    }
                } else {
                    return Err(bad());
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip_through_parser() {
        let mut all = MrSpec::label_preserving_set();
        all.extend(MrSpec::map_set());
        all.push(MrSpec::identity());
        for spec in all {
            let parsed: MrSpec = spec.label().parse().unwrap();
            assert_eq!(parsed, spec);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(
            "rotate-45".parse::<MrSpec>(),
            Err(TransformError::UnsupportedAngle(45))
        );
        assert!("rescale-1.5".parse::<MrSpec>().is_err());
        assert!("obstacle:structure:1:0.5".parse::<MrSpec>().is_err());
        assert!("obstacle:road".parse::<MrSpec>().is_err());
        assert!("shear".parse::<MrSpec>().is_err());
    }

    #[test]
    fn list_presets_expand() {
        assert_eq!(MrSpec::parse_list("label-preserving").unwrap().len(), 7);
        assert_eq!(MrSpec::parse_list("mirror-v, rotate-90").unwrap().len(), 2);
        assert!(MrSpec::parse_list(" , ").is_err());
    }
}
