use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TransformError;
use crate::raster::{PAVEMENT, ROAD, STRUCTURE, TERRAIN, TREE};

/// Expected effect of a class change on the likelihood of the changed area
/// being entered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    Increase,
    Decrease,
    Avoidance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub source: String,
    pub target: String,
    pub effect: Effect,
}

/// Lookup table from `(source class, target class)` to the expected effect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionTable {
    transitions: Vec<Transition>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<String> {
        match self {
            Self::One(s) => vec![s],
            Self::Many(v) => v,
        }
    }
}

#[derive(Deserialize)]
struct TableRow {
    source: OneOrMany,
    target: OneOrMany,
    effect: Effect,
}

#[derive(Deserialize)]
struct TableFile {
    #[serde(default)]
    transition: Vec<TableRow>,
}

impl Default for TransitionTable {
    fn default() -> Self {
        let rows: [(&[&str], &[&str], Effect); 6] = [
            (&[PAVEMENT, TERRAIN], &[ROAD], Effect::Decrease),
            (&[ROAD], &[PAVEMENT, TERRAIN], Effect::Increase),
            (
                &[ROAD, PAVEMENT, TERRAIN],
                &[STRUCTURE, TREE],
                Effect::Avoidance,
            ),
            (
                &[STRUCTURE, TREE],
                &[ROAD, PAVEMENT, TERRAIN],
                Effect::Increase,
            ),
            (&[TERRAIN], &[PAVEMENT], Effect::Increase),
            (&[PAVEMENT], &[TERRAIN], Effect::Decrease),
        ];
        let mut table = Self {
            transitions: Vec::new(),
        };
        for (sources, targets, effect) in rows {
            for s in sources {
                for t in targets {
                    table.insert(s, t, effect);
                }
            }
        }
        table
    }
}

impl TransitionTable {
    pub fn empty() -> Self {
        Self {
            transitions: Vec::new(),
        }
    }

    /// Adds or replaces a transition.
    pub fn insert(&mut self, source: &str, target: &str, effect: Effect) {
        match self
            .transitions
            .iter_mut()
            .find(|t| t.source == source && t.target == target)
        {
            Some(t) => t.effect = effect,
            None => self.transitions.push(Transition {
                source: source.into(),
                target: target.into(),
                effect,
            }),
        }
    }

    pub fn lookup(&self, source: &str, target: &str) -> Option<Effect> {
        self.transitions
            .iter()
            .find(|t| t.source == source && t.target == target)
            .map(|t| t.effect)
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Parses a TOML table of `[[transition]]` rows. `source` and `target`
    /// accept a class name or a list of names; every pair is added.
    ///
    /// ```toml
    /// [[transition]]
    /// source = ["pavement", "terrain"]
    /// target = "road"
    /// effect = "decrease"
    /// ```
    pub fn from_toml_str(s: &str) -> Result<Self, TransformError> {
        let file: TableFile = toml::from_str(s)
            .map_err(|e| TransformError::InvalidParams(format!("transition table: {e}")))?;
        let mut table = Self::empty();
        for row in file.transition {
            let targets = row.target.into_vec();
            for s in row.source.into_vec() {
                for t in &targets {
                    if s == *t {
                        return Err(TransformError::InvalidParams(format!(
                            "transition table: {s} -> {t} is not a change"
                        )));
                    }
                    table.insert(&s, t, row.effect);
                }
            }
        }
        Ok(table)
    }

    /// Loads a table file and overlays it on the default table.
    pub fn load_overlay(path: &Path) -> Result<Self, TransformError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TransformError::InvalidParams(format!("{}: {e}", path.display())))?;
        let overrides = Self::from_toml_str(&text)?;
        let mut table = Self::default();
        for t in overrides.transitions {
            table.insert(&t.source, &t.target, t.effect);
        }
        Ok(table)
    }
}
