use std::fs;
use std::path::{Path, PathBuf};

use super::{read_pgm, write_pgm, IoError, ParseError};
use crate::geometry::{Point2, Trajectory};
use crate::harness::HarnessConfig;
use crate::raster::{ClassLegend, SegmentationMap};
use crate::scene::{validate_test_case, TestCase};

pub const MAP_FILE: &str = "map.pgm";
pub const LEGEND_FILE: &str = "legend.json";
pub const TRAJECTORY_FILE: &str = "trajectories.csv";
const HEADER: [&str; 5] = ["scene_id", "role", "t_index", "x", "y"];

fn read(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|e| IoError::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

/// Writes one package into `dir`, creating it if needed.
pub fn save_scene(tc: &TestCase, dir: &Path) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    write(
        &dir.join(MAP_FILE),
        &write_pgm(tc.map.width(), tc.map.height(), tc.map.cells()),
    )?;
    let legend = serde_json::to_string_pretty(tc.map.legend()).expect("legend serializes");
    write(&dir.join(LEGEND_FILE), format!("{legend}\n").as_bytes())?;
    let path = dir.join(TRAJECTORY_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| IoError::io(&path, e.into()))?;
    let io = |e: csv::Error| IoError::io(&path, e.into());
    w.write_record(HEADER).map_err(io)?;
    let mut rows = |role: &str, t: &Trajectory| -> Result<(), csv::Error> {
        for (i, p) in t.points().iter().enumerate() {
            w.write_record([
                tc.scene_id.as_str(),
                role,
                &i.to_string(),
                &p.x.to_string(),
                &p.y.to_string(),
            ])?;
        }
        Ok(())
    };
    rows("history", &tc.history).map_err(io)?;
    if let Some(gt) = &tc.ground_truth {
        rows("ground_truth", gt).map_err(io)?;
    }
    w.flush().map_err(|e| IoError::io(&path, e))
}

/// Saves each scene into `root/<scene_id>/`.
pub fn save_scenes(scenes: &[TestCase], root: &Path) -> Result<(), IoError> {
    for tc in scenes {
        save_scene(tc, &root.join(&tc.scene_id))?;
    }
    Ok(())
}

struct Rows {
    scene_id: String,
    history: Vec<Point2>,
    ground_truth: Vec<Point2>,
}

fn parse_trajectories(path: &Path, bytes: &[u8]) -> Result<Rows, IoError> {
    let perr = |line: u64, m: String| IoError::parse(path, ParseError::at_line(line, m));
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes);
    let header = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(perr(1, format!("header must be '{}'", HEADER.join(","))));
    }
    let mut rows = Rows {
        scene_id: String::new(),
        history: Vec::new(),
        ground_truth: Vec::new(),
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            perr(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let num = |i: usize| -> Result<f64, IoError> {
            match rec[i].trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(perr(
                    line,
                    format!("column {} is not a finite number: '{}'", HEADER[i], &rec[i]),
                )),
            }
        };
        let id = rec[0].trim();
        if id.is_empty() {
            return Err(perr(line, "empty scene_id".into()));
        }
        if rows.scene_id.is_empty() {
            rows.scene_id = id.to_string();
        } else if rows.scene_id != id {
            return Err(perr(
                line,
                format!("scene_id '{id}' differs from '{}'", rows.scene_id),
            ));
        }
        let target = match rec[1].trim() {
            "history" => &mut rows.history,
            "ground_truth" => &mut rows.ground_truth,
            other => {
                return Err(perr(
                    line,
                    format!("role must be history or ground_truth, got '{other}'"),
                ))
            }
        };
        let t: usize = rec[2]
            .trim()
            .parse()
            .map_err(|_| perr(line, format!("t_index is not an integer: '{}'", &rec[2])))?;
        if t != target.len() {
            return Err(IoError::Validation {
                scene_id: rows.scene_id.clone(),
                problems: vec![format!(
                    "{}: line {line}: t_index {t} out of order, expected {}",
                    path.display(),
                    target.len()
                )],
            });
        }
        target.push(Point2::new(num(3)?, num(4)?));
    }
    if rows.history.is_empty() {
        return Err(perr(0, "no history rows".into()));
    }
    Ok(rows)
}

/// Loads one package. Checks file structure only; see [`load_scenes`] for
/// validation against a configuration.
pub fn load_scene(dir: &Path, dt: f64) -> Result<TestCase, IoError> {
    let map_path = dir.join(MAP_FILE);
    let (w, h, cells) = read_pgm(&read(&map_path)?).map_err(|e| IoError::parse(&map_path, e))?;
    let legend_path = dir.join(LEGEND_FILE);
    let legend_bytes = read(&legend_path)?;
    let legend: ClassLegend = serde_json::from_slice(&legend_bytes).map_err(|e| {
        IoError::parse(
            &legend_path,
            ParseError::at_line(e.line() as u64, e.to_string()),
        )
    })?;
    let traj_path = dir.join(TRAJECTORY_FILE);
    let rows = parse_trajectories(&traj_path, &read(&traj_path)?)?;
    let invalid = |m: String| IoError::Validation {
        scene_id: rows.scene_id.clone(),
        problems: vec![m],
    };
    let map = SegmentationMap::new(w, h, cells, legend)
        .map_err(|e| invalid(format!("{}: {e}", map_path.display())))?;
    let history = Trajectory::new(rows.history.clone(), dt).map_err(|e| invalid(e.to_string()))?;
    let ground_truth = if rows.ground_truth.is_empty() {
        None
    } else {
        Some(Trajectory::new(rows.ground_truth.clone(), dt).map_err(|e| invalid(e.to_string()))?)
    };
    Ok(TestCase {
        scene_id: rows.scene_id,
        map,
        history,
        ground_truth,
    })
}

fn package_dirs(root: &Path) -> Result<Vec<PathBuf>, IoError> {
    if root.join(MAP_FILE).is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let entries = fs::read_dir(root).map_err(|e| IoError::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let p = entry.map_err(|e| IoError::io(root, e))?.path();
        if p.is_dir() && p.join(MAP_FILE).is_file() {
            dirs.push(p);
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Loads every package under `root` (or `root` itself if it is one), in
/// directory-name order, and validates each against `cfg`.
pub fn load_scenes(root: &Path, cfg: &HarnessConfig) -> Result<Vec<TestCase>, IoError> {
    let dirs = package_dirs(root)?;
    if dirs.is_empty() {
        return Err(IoError::Empty(format!(
            "no scene packages under {}",
            root.display()
        )));
    }
    let mut scenes = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let tc = load_scene(&dir, cfg.dt)?;
        let problems = validate_test_case(&tc, cfg.history_len, cfg.horizon);
        if !problems.is_empty() {
            return Err(IoError::Validation {
                scene_id: tc.scene_id,
                problems,
            });
        }
        if scenes.iter().any(|s: &TestCase| s.scene_id == tc.scene_id) {
            return Err(IoError::Validation {
                scene_id: tc.scene_id,
                problems: vec!["duplicate scene_id".into()],
            });
        }
        scenes.push(tc);
    }
    Ok(scenes)
}
