//! Semantic and probability rasters.
//!
//! Rasters are stored row-major with `y` as the outer loop: cell `(col, row)`
//! lives at index `row * width + col` and covers `[col, col+1] x [row, row+1]`
//! in continuous map coordinates.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::geometry::Point2;
use crate::scalar::Scalar;

pub const BACKGROUND: &str = "background";
pub const ROAD: &str = "road";
pub const PAVEMENT: &str = "pavement";
pub const STRUCTURE: &str = "structure";
pub const TERRAIN: &str = "terrain";
pub const TREE: &str = "tree";

/// Raster cell address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

// raster order: row first
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.row, self.col).cmp(&(other.row, other.col))
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Cell {
    pub fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }

    pub fn center<S: Scalar>(&self) -> Point2<S> {
        Point2::new(S::of(self.col as f64 + 0.5), S::of(self.row as f64 + 0.5))
    }
}

/// Cell containing `p`: `(floor(x), floor(y))` clamped to the raster.
pub fn cell_of<S: Scalar>(p: Point2<S>, width: usize, height: usize) -> Cell {
    let clamp = |v: f64, n: usize| -> usize {
        if !(v > 0.0) {
            0
        } else {
            (v.floor() as usize).min(n - 1)
        }
    };
    Cell::new(clamp(p.x.f64(), width), clamp(p.y.f64(), height))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: u8,
    pub name: String,
    pub walkability: f64,
}

/// Ordered class table. Ids are contiguous from 0 and id 0 is `background`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ClassEntry>", into = "Vec<ClassEntry>")]
pub struct ClassLegend {
    entries: Vec<ClassEntry>,
}

impl TryFrom<Vec<ClassEntry>> for ClassLegend {
    type Error = CoreError;

    fn try_from(entries: Vec<ClassEntry>) -> Result<Self, CoreError> {
        ClassLegend::new(entries)
    }
}

impl From<ClassLegend> for Vec<ClassEntry> {
    fn from(legend: ClassLegend) -> Self {
        legend.entries
    }
}

impl Default for ClassLegend {
    fn default() -> Self {
        Self::standard()
    }
}

impl ClassLegend {
    pub fn new(mut entries: Vec<ClassEntry>) -> Result<Self, CoreError> {
        if entries.is_empty() {
            return Err(CoreError::Legend("legend is empty".into()));
        }
        entries.sort_by_key(|e| e.id);
        for (i, e) in entries.iter().enumerate() {
            if e.id as usize != i {
                return Err(CoreError::Legend(format!(
                    "class ids must be unique and contiguous from 0 (found {} at position {i})",
                    e.id
                )));
            }
            if !(0.0..=1.0).contains(&e.walkability) {
                return Err(CoreError::Legend(format!(
                    "walkability of '{}' must lie in [0, 1]",
                    e.name
                )));
            }
        }
        if entries[0].name != BACKGROUND {
            return Err(CoreError::Legend("class 0 must be 'background'".into()));
        }
        if entries.iter().filter(|e| e.name == BACKGROUND).count() != 1 {
            return Err(CoreError::Legend(
                "exactly one 'background' class required".into(),
            ));
        }
        let mut names: Vec<&str> = entries.iter().map(|e| e.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(CoreError::Legend("class names must be unique".into()));
        }
        Ok(Self { entries })
    }

    /// Background plus the five area types used throughout: road, pavement,
    /// structure, terrain, tree.
    pub fn standard() -> Self {
        let e = |id, name: &str, walkability| ClassEntry {
            id,
            name: name.to_string(),
            walkability,
        };
        Self::new(vec![
            e(0, BACKGROUND, 0.1),
            e(1, ROAD, 0.2),
            e(2, PAVEMENT, 1.0),
            e(3, STRUCTURE, 0.0),
            e(4, TERRAIN, 0.6),
            e(5, TREE, 0.0),
        ])
        .expect("standard legend is valid")
    }

    pub fn entries(&self) -> &[ClassEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: u8) -> bool {
        (id as usize) < self.entries.len()
    }

    pub fn id_of(&self, name: &str) -> Option<u8> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.id)
    }

    pub fn name_of(&self, id: u8) -> Option<&str> {
        self.entries.get(id as usize).map(|e| e.name.as_str())
    }

    pub fn walkability(&self, id: u8) -> f64 {
        self.entries.get(id as usize).map_or(0.0, |e| e.walkability)
    }

    /// Ids of classes with zero walkability.
    pub fn blocked_ids(&self) -> Vec<u8> {
        self.entries
            .iter()
            .filter(|e| e.walkability <= 0.0)
            .map(|e| e.id)
            .collect()
    }
}

/// W x H raster of class ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSegmentationMap")]
pub struct SegmentationMap {
    width: usize,
    height: usize,
    cells: Vec<u8>,
    legend: ClassLegend,
}

#[derive(Deserialize)]
struct RawSegmentationMap {
    width: usize,
    height: usize,
    cells: Vec<u8>,
    legend: ClassLegend,
}

impl TryFrom<RawSegmentationMap> for SegmentationMap {
    type Error = CoreError;

    fn try_from(raw: RawSegmentationMap) -> Result<Self, CoreError> {
        SegmentationMap::new(raw.width, raw.height, raw.cells, raw.legend)
    }
}

impl SegmentationMap {
    pub fn new(
        width: usize,
        height: usize,
        cells: Vec<u8>,
        legend: ClassLegend,
    ) -> Result<Self, CoreError> {
        if width == 0 || height == 0 {
            return Err(CoreError::EmptyRaster { width, height });
        }
        if cells.len() != width * height {
            return Err(CoreError::CellCount {
                expected: width * height,
                got: cells.len(),
            });
        }
        if let Some(&bad) = cells.iter().find(|&&c| !legend.contains(c)) {
            return Err(CoreError::UnknownClass(bad));
        }
        Ok(Self {
            width,
            height,
            cells,
            legend,
        })
    }

    pub fn filled(
        width: usize,
        height: usize,
        class: u8,
        legend: ClassLegend,
    ) -> Result<Self, CoreError> {
        Self::new(width, height, vec![class; width * height], legend)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn legend(&self) -> &ClassLegend {
        &self.legend
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    #[inline]
    pub fn get(&self, cell: Cell) -> u8 {
        self.cells[self.index(cell)]
    }

    pub fn class_at<S: Scalar>(&self, p: Point2<S>) -> u8 {
        self.get(cell_of(p, self.width, self.height))
    }

    pub fn walkability_at(&self, cell: Cell) -> f64 {
        self.legend.walkability(self.get(cell))
    }

    /// Cells holding `class`, in raster order.
    pub fn cells_of_class(&self, class: u8) -> Vec<Cell> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == class)
            .map(|(i, _)| Cell::new(i % self.width, i / self.width))
            .collect()
    }

    /// Per-class cell counts indexed by class id.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.legend.len()];
        for &c in &self.cells {
            counts[c as usize] += 1;
        }
        counts
    }

    /// Rebuilds the map with new cells; dimensions and legend are re-checked.
    pub fn with_cells(
        &self,
        width: usize,
        height: usize,
        cells: Vec<u8>,
    ) -> Result<Self, CoreError> {
        Self::new(width, height, cells, self.legend.clone())
    }
}

/// W x H raster of non-negative values summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "RawProbabilityMap<S>",
    bound(deserialize = "S: Scalar + Deserialize<'de>")
)]
pub struct ProbabilityMap<S = f64> {
    width: usize,
    height: usize,
    values: Vec<S>,
}

#[derive(Deserialize)]
struct RawProbabilityMap<S> {
    width: usize,
    height: usize,
    values: Vec<S>,
}

impl<S: Scalar> TryFrom<RawProbabilityMap<S>> for ProbabilityMap<S> {
    type Error = CoreError;

    fn try_from(raw: RawProbabilityMap<S>) -> Result<Self, CoreError> {
        let map = ProbabilityMap::from_normalized(raw.width, raw.height, raw.values)?;
        Ok(map)
    }
}

/// Absolute tolerance on the total mass of a normalized map.
pub const MASS_TOLERANCE: f64 = 1e-6;

impl<S: Scalar> ProbabilityMap<S> {
    fn check(width: usize, height: usize, values: &[S]) -> Result<S, CoreError> {
        if width == 0 || height == 0 {
            return Err(CoreError::EmptyRaster { width, height });
        }
        if values.len() != width * height {
            return Err(CoreError::CellCount {
                expected: width * height,
                got: values.len(),
            });
        }
        if let Some(i) = values
            .iter()
            .position(|v| !(v.is_finite() && *v >= S::zero()))
        {
            return Err(CoreError::NegativeProbability(i));
        }
        let total: S = values.iter().copied().sum();
        if total <= S::zero() || !total.is_finite() {
            return Err(CoreError::ZeroMass);
        }
        Ok(total)
    }

    /// Builds a map from any non-negative raster with positive mass,
    /// renormalizing to unit sum.
    pub fn from_weights(
        width: usize,
        height: usize,
        mut values: Vec<S>,
    ) -> Result<Self, CoreError> {
        let total = Self::check(width, height, &values)?;
        for v in &mut values {
            *v = *v / total;
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Accepts values that already sum to one within [`MASS_TOLERANCE`]; they
    /// are stored unchanged.
    pub fn from_normalized(width: usize, height: usize, values: Vec<S>) -> Result<Self, CoreError> {
        let total = Self::check(width, height, &values)?;
        if (total.f64() - 1.0).abs() > MASS_TOLERANCE {
            return Err(CoreError::Config(format!(
                "probability map sums to {}, expected 1",
                total
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Permutes or copies already-normalized values without renormalizing.
    pub(crate) fn from_parts_unchecked(width: usize, height: usize, values: Vec<S>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn get(&self, cell: Cell) -> S {
        self.values[cell.row * self.width + cell.col]
    }

    pub fn total(&self) -> S {
        self.values.iter().copied().sum()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Cell-wise mean of equally shaped maps, renormalized.
    pub fn mean_of(maps: &[&Self]) -> Result<Self, CoreError> {
        let first = maps.first().ok_or(CoreError::ZeroMass)?;
        if maps.iter().any(|m| !m.same_shape(first)) {
            return Err(CoreError::CellCount {
                expected: first.values.len(),
                got: maps.iter().map(|m| m.values.len()).max().unwrap_or(0),
            });
        }
        let mut acc = vec![S::zero(); first.values.len()];
        for m in maps {
            for (a, v) in acc.iter_mut().zip(&m.values) {
                *a = *a + *v;
            }
        }
        Self::from_weights(first.width, first.height, acc)
    }

    pub fn cast<T: Scalar>(&self) -> ProbabilityMap<T> {
        ProbabilityMap {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| T::of(v.f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cell_of_clamps_to_raster() {
        assert_eq!(cell_of(Point2::new(2.7, 0.2), 4, 4), Cell::new(2, 0));
        assert_eq!(cell_of(Point2::new(4.0, 4.0), 4, 4), Cell::new(3, 3));
        assert_eq!(cell_of(Point2::new(-1.0, 1.0), 4, 4), Cell::new(0, 1));
    }

    #[test]
    fn legend_rules() {
        let legend = ClassLegend::standard();
        assert_eq!(legend.id_of(TERRAIN), Some(4));
        assert_eq!(legend.blocked_ids(), vec![3, 5]);
        let gap = vec![
            ClassEntry {
                id: 0,
                name: BACKGROUND.into(),
                walkability: 0.1,
            },
            ClassEntry {
                id: 2,
                name: ROAD.into(),
                walkability: 0.2,
            },
        ];
        assert!(ClassLegend::new(gap).is_err());
        let no_bg = vec![ClassEntry {
            id: 0,
            name: ROAD.into(),
            walkability: 0.2,
        }];
        assert!(ClassLegend::new(no_bg).is_err());
    }

    #[test]
    fn segmentation_map_rejects_unknown_classes() {
        let err = SegmentationMap::new(2, 1, vec![0, 9], ClassLegend::standard()).unwrap_err();
        assert_eq!(err, CoreError::UnknownClass(9));
    }

    #[test]
    fn probability_map_rejects_bad_input() {
        assert!(ProbabilityMap::from_weights(2, 1, vec![0.0f64, 0.0]).is_err());
        assert!(ProbabilityMap::from_weights(2, 1, vec![-1.0f64, 2.0]).is_err());
        assert!(ProbabilityMap::from_normalized(2, 1, vec![0.5f64, 0.4]).is_err());
    }

    proptest! {
        #[test]
        fn renormalizes_to_unit_mass(values in prop::collection::vec(0.0f64..100.0, 1..64)) {
            prop_assume!(values.iter().any(|&v| v > 0.0));
            let n = values.len();
            let map = ProbabilityMap::from_weights(n, 1, values).unwrap();
            prop_assert!((map.total() - 1.0).abs() <= MASS_TOLERANCE);
            prop_assert!(map.values().iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn f32_maps_renormalize_too(values in prop::collection::vec(0.0f32..10.0, 1..64)) {
            prop_assume!(values.iter().any(|&v| v > 0.0));
            let n = values.len();
            let map = ProbabilityMap::from_weights(1, n, values).unwrap();
            // per-cell f32 rounding accumulates over up to 64 cells
            prop_assert!((map.total() as f64 - 1.0).abs() <= 1e-5);
        }
    }
}
