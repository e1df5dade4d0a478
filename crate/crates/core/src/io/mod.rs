//! Scene packages on disk and report files.
//!
//! A scene package is a directory holding `map.pgm` (one byte per cell, the
//! legend class id), `legend.json` and `trajectories.csv` with columns
//! `scene_id,role,t_index,x,y`.

mod raster;
mod report;
mod scene;

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use raster::{read_pfm, read_pgm, write_pfm, write_pgm};
pub use report::{
    fmt_g, read_results, write_aggregate_csv, write_agreement_csv, write_reports, write_scenes_csv,
    AGGREGATE_HEADER, AGREEMENT_HEADER, SCENES_HEADER,
};
pub use scene::{
    load_scene, load_scenes, save_scene, save_scenes, LEGEND_FILE, MAP_FILE, TRAJECTORY_FILE,
};

/// Position of a parse failure inside one file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: Option<u64>,
    pub byte: Option<usize>,
    pub message: String,
}

impl ParseError {
    pub fn at_byte(byte: usize, message: impl Into<String>) -> Self {
        Self {
            line: None,
            byte: Some(byte),
            message: message.into(),
        }
    }

    pub fn at_line(line: u64, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            byte: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.byte) {
            (Some(l), _) => write!(f, "line {l}: {}", self.message),
            (None, Some(b)) => write!(f, "byte {b}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {error}")]
    Parse { path: PathBuf, error: ParseError },
    #[error("scene {scene_id}: {}", problems.join("; "))]
    Validation {
        scene_id: String,
        problems: Vec<String>,
    },
    #[error("{0}")]
    Empty(String),
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn parse(path: &Path, error: ParseError) -> Self {
        Self::Parse {
            path: path.to_path_buf(),
            error,
        }
    }

    /// Whether the failure is in the file system rather than the content.
    pub fn is_io(&self) -> bool {
        matches!(self, Self::Io { .. })
    }
}
