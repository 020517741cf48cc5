//! A*, weighted A* and a Dijkstra oracle over node-weighted 8-connected grids.
//!
//! All searches share one priority rule so that results are reproducible:
//! the open node with the smallest `F = G + H` is popped first, ties go to the
//! larger `G`, then to the smaller row-major index. `G(source)` is the cost of
//! the source cell, so `G(target)` equals the cost of the returned path.
//! Closed nodes are never re-opened.

use crate::grid::{for_each_neighbor, Cell, Field, GridCosts, GridError, PathMask, Shape};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("heuristic value at {cell} must be finite and >= 0, found {value}")]
    InvalidHeuristic { cell: Cell, value: f64 },
    #[error("heuristic was built for target {field_target}, search target is {target}")]
    TargetMismatch { field_target: Cell, target: Cell },
    #[error("w_min must be > 0, found {0}")]
    InvalidWmin(f64),
    #[error("epsilon must be >= 0, found {0}")]
    NegativeEpsilon(f64),
    #[error("no path from {start} to {target}")]
    NoPath { start: Cell, target: Cell },
}

/// Non-negative heuristic values for one fixed target.
#[derive(Clone, Debug, PartialEq)]
pub struct HeuristicField {
    values: Field,
    target: Cell,
}

impl HeuristicField {
    pub fn new(values: Field, target: Cell) -> Result<Self, SearchError> {
        values.shape().check(target)?;
        for (i, &v) in values.values().iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SearchError::InvalidHeuristic { cell: values.shape().cell(i), value: v });
            }
        }
        Ok(HeuristicField { values, target })
    }

    pub fn zeros(shape: Shape, target: Cell) -> Result<Self, SearchError> {
        Self::new(Field::zeros(shape), target)
    }

    pub fn target(&self) -> Cell {
        self.target
    }

    pub fn shape(&self) -> Shape {
        self.values.shape()
    }

    #[inline]
    pub fn get(&self, cell: Cell) -> f64 {
        self.values.get(cell)
    }

    pub fn field(&self) -> &Field {
        &self.values
    }

    pub fn scaled(&self, factor: f64) -> HeuristicField {
        HeuristicField { values: self.values.map(|v| v * factor), target: self.target }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    /// Source to target, inclusive.
    pub path: Vec<Cell>,
    pub path_mask: PathMask,
    /// Every popped node, target included.
    pub expansions: PathMask,
    pub pop_order: Vec<Cell>,
    /// `G(target)`, which includes the source cost.
    pub total_cost: f64,
}

impl SearchResult {
    pub fn expanded_count(&self) -> usize {
        self.pop_order.len()
    }
}

pub fn chebyshev_distance(a: Cell, b: Cell) -> usize {
    a.row.abs_diff(b.row).max(a.col.abs_diff(b.col))
}

pub fn euclidean_distance(a: Cell, b: Cell) -> f64 {
    let dr = a.row.abs_diff(b.row) as f64;
    let dc = a.col.abs_diff(b.col) as f64;
    dr.hypot(dc)
}

/// `w_min` times the Chebyshev distance to `target`; admissible and consistent
/// whenever every cost is at least `w_min`.
pub fn h_chebyshev(w_min: f64, target: Cell, shape: Shape) -> Result<HeuristicField, SearchError> {
    if !(w_min.is_finite() && w_min > 0.0) {
        return Err(SearchError::InvalidWmin(w_min));
    }
    shape.check(target)?;
    let values = Field::from_fn(shape, |n| w_min * chebyshev_distance(n, target) as f64);
    HeuristicField::new(values, target)
}

/// Unscaled Chebyshev plus a small Euclidean tie-breaker. Not admissible for
/// costs below one.
pub fn h_na(target: Cell, shape: Shape) -> Result<HeuristicField, SearchError> {
    shape.check(target)?;
    let values =
        Field::from_fn(shape, |n| chebyshev_distance(n, target) as f64 + 0.001 * euclidean_distance(n, target));
    HeuristicField::new(values, target)
}

/// Priority of an open node. `Ord` is arranged so that the node to pop next
/// is the maximum, which lets it sit directly in a `BinaryHeap`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct OpenKey {
    pub f: f64,
    pub g: f64,
    pub index: usize,
}

impl Ord for OpenKey {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for OpenKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for OpenKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenKey {}

fn check_endpoints(costs: &GridCosts, h: &HeuristicField, source: Cell, target: Cell) -> Result<(), SearchError> {
    let shape = costs.shape();
    shape.expect_same(h.shape())?;
    shape.check(source)?;
    shape.check(target)?;
    if h.target() != target {
        return Err(SearchError::TargetMismatch { field_target: h.target(), target });
    }
    Ok(())
}

pub(crate) fn trace_back(parent: &[usize], shape: Shape, target: usize) -> Vec<Cell> {
    let mut path = vec![shape.cell(target)];
    let mut cur = target;
    while parent[cur] != usize::MAX {
        cur = parent[cur];
        path.push(shape.cell(cur));
    }
    path.reverse();
    path
}

/// A* with an arbitrary heuristic field. Optimal when `h` is admissible.
pub fn astar(costs: &GridCosts, h: &HeuristicField, source: Cell, target: Cell) -> Result<SearchResult, SearchError> {
    check_endpoints(costs, h, source, target)?;
    let shape = costs.shape();
    let n = shape.len();
    let hv = h.field().values();
    let cv = costs.values();

    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut pop_order = Vec::new();
    let mut heap = BinaryHeap::new();

    let s = shape.index(source);
    let t = shape.index(target);
    g[s] = cv[s];
    heap.push(OpenKey { f: g[s] + hv[s], g: g[s], index: s });

    while let Some(key) = heap.pop() {
        let u = key.index;
        // lazy deletion: skip entries superseded by a cheaper G or already closed
        if closed[u] || key.g != g[u] {
            continue;
        }
        closed[u] = true;
        pop_order.push(shape.cell(u));
        if u == t {
            let path = trace_back(&parent, shape, t);
            let path_mask = PathMask::from_cells(shape, path.iter().copied())?;
            let expansions = PathMask::from_cells(shape, pop_order.iter().copied())?;
            return Ok(SearchResult { path, path_mask, expansions, pop_order, total_cost: g[t] });
        }
        for_each_neighbor(shape.cell(u), shape, |m| {
            let v = shape.index(m);
            if closed[v] {
                return;
            }
            let cand = g[u] + cv[v];
            if cand < g[v] {
                g[v] = cand;
                parent[v] = u;
                heap.push(OpenKey { f: cand + hv[v], g: cand, index: v });
            }
        });
    }
    Err(SearchError::NoPath { start: source, target })
}

/// A* with the heuristic inflated by `1 + eps`.
pub fn weighted_astar(
    costs: &GridCosts,
    h_admissible: &HeuristicField,
    eps: f64,
    source: Cell,
    target: Cell,
) -> Result<SearchResult, SearchError> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(SearchError::NegativeEpsilon(eps));
    }
    astar(costs, &h_admissible.scaled(1.0 + eps), source, target)
}

/// Zero-heuristic search; returns an optimal path.
pub fn dijkstra_oracle(costs: &GridCosts, source: Cell, target: Cell) -> Result<SearchResult, SearchError> {
    let h = HeuristicField::zeros(costs.shape(), target)?;
    astar(costs, &h, source, target)
}

/// Optimal path cost from `origin` to every cell, both endpoint costs included.
/// Costs live on nodes, so the field also gives the cost from every cell back
/// to `origin`.
pub fn distance_field(costs: &GridCosts, origin: Cell) -> Result<Field, SearchError> {
    let shape = costs.shape();
    shape.check(origin)?;
    let cv = costs.values();
    let mut dist = vec![f64::INFINITY; shape.len()];
    let mut heap = BinaryHeap::new();
    let o = shape.index(origin);
    dist[o] = cv[o];
    heap.push(OpenKey { f: dist[o], g: dist[o], index: o });
    while let Some(key) = heap.pop() {
        let u = key.index;
        if key.f > dist[u] {
            continue;
        }
        for_each_neighbor(shape.cell(u), shape, |m| {
            let v = shape.index(m);
            let cand = dist[u] + cv[v];
            if cand < dist[v] {
                dist[v] = cand;
                heap.push(OpenKey { f: cand, g: cand, index: v });
            }
        });
    }
    Ok(Field::new(shape, dist)?)
}
