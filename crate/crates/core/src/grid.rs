//! 8-connected grid graph with costs on nodes.
//!
//! Every cell is a node; edges join cells at Chebyshev distance one. A path is
//! a sequence of adjacent, pairwise-distinct cells, and its cost is the sum of
//! the costs of every traversed cell, endpoints included.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("cell {cell} is outside a {shape} grid")]
    OutOfBounds { cell: Cell, shape: Shape },
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: Shape, found: Shape },
    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("cost at {cell} must be finite and > 0, found {value}")]
    InvalidCost { cell: Cell, value: f64 },
    #[error("invalid node sequence: {0}")]
    InvalidSequence(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

impl From<(usize, usize)> for Cell {
    fn from((row, col): (usize, usize)) -> Self {
        Cell { row, col }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(height: usize, width: usize) -> Self {
        Shape { height, width }
    }

    pub const fn square(side: usize) -> Self {
        Shape { height: side, width: side }
    }

    pub const fn len(&self) -> usize {
        self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.height && cell.col < self.width
    }

    /// Row-major index of `cell`. The cell must be in bounds.
    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        debug_assert!(self.contains(cell));
        cell.row * self.width + cell.col
    }

    #[inline]
    pub fn cell(&self, index: usize) -> Cell {
        Cell { row: index / self.width, col: index % self.width }
    }

    pub fn check(&self, cell: Cell) -> Result<(), GridError> {
        if self.contains(cell) {
            Ok(())
        } else {
            Err(GridError::OutOfBounds { cell, shape: *self })
        }
    }

    /// All cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(move |i| self.cell(i))
    }

    pub(crate) fn expect_same(&self, other: Shape) -> Result<(), GridError> {
        if *self == other {
            Ok(())
        } else {
            Err(GridError::ShapeMismatch { expected: *self, found: other })
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

/// Real value per cell, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    shape: Shape,
    values: Vec<f64>,
}

impl Field {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != shape.len() {
            return Err(GridError::LengthMismatch { expected: shape.len(), found: values.len() });
        }
        Ok(Field { shape, values })
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        Field { shape, values: vec![value; shape.len()] }
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(Cell) -> f64) -> Self {
        Field { shape, values: shape.cells().map(&mut f).collect() }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, cell: Cell) -> f64 {
        self.values[self.shape.index(cell)]
    }

    #[inline]
    pub fn set(&mut self, cell: Cell, value: f64) {
        let i = self.shape.index(cell);
        self.values[i] = value;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { shape: self.shape, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Strictly positive, finite traversal cost per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Field", into = "Field")]
pub struct GridCosts(Field);

impl GridCosts {
    pub fn new(field: Field) -> Result<Self, GridError> {
        for (i, &v) in field.values.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(GridError::InvalidCost { cell: field.shape.cell(i), value: v });
            }
        }
        Ok(GridCosts(field))
    }

    pub fn from_values(shape: Shape, values: Vec<f64>) -> Result<Self, GridError> {
        Self::new(Field::new(shape, values)?)
    }

    pub fn uniform(shape: Shape, value: f64) -> Result<Self, GridError> {
        Self::new(Field::filled(shape, value))
    }

    pub fn shape(&self) -> Shape {
        self.0.shape
    }

    #[inline]
    pub fn get(&self, cell: Cell) -> f64 {
        self.0.get(cell)
    }

    pub fn values(&self) -> &[f64] {
        &self.0.values
    }

    pub fn field(&self) -> &Field {
        &self.0
    }

    pub fn min(&self) -> f64 {
        self.0.min()
    }

    pub fn max(&self) -> f64 {
        self.0.max()
    }
}

impl TryFrom<Field> for GridCosts {
    type Error = GridError;
    fn try_from(field: Field) -> Result<Self, GridError> {
        GridCosts::new(field)
    }
}

impl From<GridCosts> for Field {
    fn from(costs: GridCosts) -> Field {
        costs.0
    }
}

/// Binary indicator per cell (paths, expansion sets).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathMask {
    shape: Shape,
    bits: Vec<bool>,
}

impl PathMask {
    pub fn empty(shape: Shape) -> Self {
        PathMask { shape, bits: vec![false; shape.len()] }
    }

    pub fn from_bits(shape: Shape, bits: Vec<bool>) -> Result<Self, GridError> {
        if bits.len() != shape.len() {
            return Err(GridError::LengthMismatch { expected: shape.len(), found: bits.len() });
        }
        Ok(PathMask { shape, bits })
    }

    pub fn from_cells(shape: Shape, cells: impl IntoIterator<Item = Cell>) -> Result<Self, GridError> {
        let mut mask = Self::empty(shape);
        for c in cells {
            shape.check(c)?;
            mask.insert(c);
        }
        Ok(mask)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn contains(&self, cell: Cell) -> bool {
        self.bits[self.shape.index(cell)]
    }

    #[inline]
    pub fn insert(&mut self, cell: Cell) {
        let i = self.shape.index(cell);
        self.bits[i] = true;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| self.shape.cell(i))
    }

    /// True when every set cell of `self` is also set in `other`.
    pub fn is_subset(&self, other: &PathMask) -> bool {
        self.shape == other.shape && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn symmetric_difference_count(&self, other: &PathMask) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }

    pub fn to_field(&self) -> Field {
        Field { shape: self.shape, values: self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect() }
    }
}

/// In-bounds 8-neighbors of `cell`, scanning the surrounding 3x3 block row-major.
pub fn neighbors(cell: Cell, shape: Shape) -> Result<Vec<Cell>, GridError> {
    shape.check(cell)?;
    let mut out = Vec::with_capacity(8);
    for_each_neighbor(cell, shape, |n| out.push(n));
    Ok(out)
}

/// Allocation-free neighbor visit used by the search loops. `cell` must be in bounds.
#[inline]
pub(crate) fn for_each_neighbor(cell: Cell, shape: Shape, mut f: impl FnMut(Cell)) {
    let r0 = cell.row.saturating_sub(1);
    let c0 = cell.col.saturating_sub(1);
    let r1 = (cell.row + 1).min(shape.height - 1);
    let c1 = (cell.col + 1).min(shape.width - 1);
    for r in r0..=r1 {
        for c in c0..=c1 {
            if r != cell.row || c != cell.col {
                f(Cell { row: r, col: c });
            }
        }
    }
}

pub fn are_adjacent(a: Cell, b: Cell) -> bool {
    a != b && a.row.abs_diff(b.row) <= 1 && a.col.abs_diff(b.col) <= 1
}

/// Inner product of costs and mask.
pub fn path_cost(costs: &GridCosts, path: &PathMask) -> Result<f64, GridError> {
    costs.shape().expect_same(path.shape())?;
    Ok(costs.values().iter().zip(path.bits()).filter(|(_, &b)| b).map(|(&c, _)| c).sum())
}

fn check_sequence(seq: &[Cell], shape: Option<Shape>) -> Result<(), GridError> {
    if seq.is_empty() {
        return Err(GridError::InvalidSequence("empty".into()));
    }
    if let Some(shape) = shape {
        for &c in seq {
            shape.check(c)?;
        }
    }
    for w in seq.windows(2) {
        if !are_adjacent(w[0], w[1]) {
            return Err(GridError::InvalidSequence(format!("{} and {} are not adjacent", w[0], w[1])));
        }
    }
    let mut seen = std::collections::HashSet::with_capacity(seq.len());
    for &c in seq {
        if !seen.insert(c) {
            return Err(GridError::InvalidSequence(format!("{c} visited twice")));
        }
    }
    Ok(())
}

pub fn sequence_to_mask(seq: &[Cell], shape: Shape) -> Result<PathMask, GridError> {
    check_sequence(seq, Some(shape))?;
    PathMask::from_cells(shape, seq.iter().copied())
}

pub fn validate_path(seq: &[Cell], source: Cell, target: Cell) -> bool {
    seq.first() == Some(&source) && seq.last() == Some(&target) && check_sequence(seq, None).is_ok()
}
