//! Source and target sampling rules.

use super::DatagenError;
use crate::grid::{for_each_neighbor, Cell, GridCosts, Shape};
use rand::Rng;
use std::collections::VecDeque;

/// Rejection-sampling attempts allowed per pair.
pub const ATTEMPT_BUDGET: usize = 1000;

pub fn in_margin(cell: Cell, shape: Shape, margin: usize) -> bool {
    cell.row < margin || cell.col < margin || cell.row + margin >= shape.height || cell.col + margin >= shape.width
}

/// Uniform over cells within `margin` cells of some edge.
pub fn sample_target_margin<R: Rng>(shape: Shape, margin: usize, rng: &mut R) -> Result<Cell, DatagenError> {
    if margin == 0 || 2 * margin >= shape.height.min(shape.width) {
        return Err(DatagenError::ImpossibleMargin { margin, shape });
    }
    loop {
        let cell = Cell { row: rng.gen_range(0..shape.height), col: rng.gen_range(0..shape.width) };
        if in_margin(cell, shape, margin) {
            return Ok(cell);
        }
    }
}

/// Top and left halves are `row < H/2` and `col < W/2`.
pub fn quadrant(cell: Cell, shape: Shape) -> (bool, bool) {
    (cell.row < shape.height / 2, cell.col < shape.width / 2)
}

pub fn sample_source_opposite_quadrant<R: Rng>(target: Cell, shape: Shape, rng: &mut R) -> Cell {
    let (top, left) = quadrant(target, shape);
    let (mh, mw) = (shape.height / 2, shape.width / 2);
    let rows = if top { mh..shape.height } else { 0..mh };
    let cols = if left { mw..shape.width } else { 0..mw };
    Cell { row: rng.gen_range(rows), col: rng.gen_range(cols) }
}

/// Wall cells are those at the maximum cost of the range, when `wall_cost`
/// is set.
pub fn wall_mask(costs: &GridCosts, wall_cost: Option<f64>) -> Vec<bool> {
    match wall_cost {
        Some(w) => costs.values().iter().map(|&c| c >= w).collect(),
        None => vec![false; costs.shape().len()],
    }
}

/// Unweighted 8-connected step counts from `origin`, avoiding walls.
pub fn bfs_steps(shape: Shape, walls: &[bool], origin: Cell) -> Vec<Option<usize>> {
    let mut dist = vec![None; shape.len()];
    if walls[shape.index(origin)] {
        return dist;
    }
    dist[shape.index(origin)] = Some(0);
    let mut queue = VecDeque::from([origin]);
    while let Some(u) = queue.pop_front() {
        let d = dist[shape.index(u)].expect("queued cells are labelled");
        for_each_neighbor(u, shape, |v| {
            let i = shape.index(v);
            if !walls[i] && dist[i].is_none() {
                dist[i] = Some(d + 1);
                queue.push_back(v);
            }
        });
    }
    dist
}

/// A source at least `min_steps` from `target`, avoiding walls.
pub fn sample_source_min_steps<R: Rng>(
    shape: Shape,
    walls: &[bool],
    target: Cell,
    min_steps: usize,
    rng: &mut R,
) -> Option<Cell> {
    let steps = bfs_steps(shape, walls, target);
    let far: Vec<usize> = (0..shape.len()).filter(|&i| steps[i].is_some_and(|d| d >= min_steps)).collect();
    if far.is_empty() {
        None
    } else {
        Some(shape.cell(far[rng.gen_range(0..far.len())]))
    }
}

pub fn sample_pair_min_steps<R: Rng>(
    costs: &GridCosts,
    walls: &[bool],
    min_steps: usize,
    rng: &mut R,
) -> Result<(Cell, Cell), DatagenError> {
    let shape = costs.shape();
    for _ in 0..ATTEMPT_BUDGET {
        let target = Cell { row: rng.gen_range(0..shape.height), col: rng.gen_range(0..shape.width) };
        if walls[shape.index(target)] {
            continue;
        }
        let source = Cell { row: rng.gen_range(0..shape.height), col: rng.gen_range(0..shape.width) };
        if walls[shape.index(source)] {
            continue;
        }
        if bfs_steps(shape, walls, target)[shape.index(source)].is_some_and(|d| d >= min_steps) {
            return Ok((source, target));
        }
    }
    Err(DatagenError::UnusableMap { attempts: ATTEMPT_BUDGET })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::chebyshev_distance;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn margin_draws_satisfy_predicate() {
        let shape = Shape::square(12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = vec![false; shape.len()];
        for _ in 0..10_000 {
            let t = sample_target_margin(shape, 3, &mut rng).unwrap();
            let band = |x: usize| x <= 2 || x >= 9;
            assert!(band(t.row) || band(t.col), "{t}");
            seen[shape.index(t)] = true;
        }
        // every eligible cell is reachable: 144 - 36 interior
        assert_eq!(seen.iter().filter(|&&s| s).count(), 108);
    }

    #[test]
    fn margin_limits() {
        let shape = Shape::square(12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let t = sample_target_margin(shape, 1, &mut rng).unwrap();
            assert!(t.row == 0 || t.col == 0 || t.row == 11 || t.col == 11);
        }
        assert!(sample_target_margin(shape, 0, &mut rng).is_err());
        assert!(sample_target_margin(shape, 6, &mut rng).is_err());
        assert!(sample_target_margin(shape, 5, &mut rng).is_ok());
    }

    #[test]
    fn opposite_quadrant_draws() {
        let shape = Shape::square(12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let t = sample_target_margin(shape, 3, &mut rng).unwrap();
            let s = sample_source_opposite_quadrant(t, shape, &mut rng);
            let (qt, qs) = (quadrant(t, shape), quadrant(s, shape));
            assert!(qt.0 != qs.0 && qt.1 != qs.1);
            assert_ne!(s, t);
        }
        let s = sample_source_opposite_quadrant(Cell { row: 0, col: 1 }, shape, &mut rng);
        assert!(s.row >= 6 && s.col >= 6);
    }

    #[test]
    fn opposite_quadrant_on_odd_grid() {
        let shape = Shape { height: 5, width: 7 };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for cell in shape.cells() {
            for _ in 0..20 {
                let s = sample_source_opposite_quadrant(cell, shape, &mut rng);
                assert!(shape.contains(s));
                assert_ne!(s, cell);
            }
        }
    }

    proptest! {
        #[test]
        fn bfs_equals_chebyshev_without_walls(h in 1usize..9, w in 1usize..9, r in 0usize..9, c in 0usize..9) {
            let shape = Shape { height: h, width: w };
            let origin = Cell { row: r % h, col: c % w };
            let steps = bfs_steps(shape, &vec![false; shape.len()], origin);
            for cell in shape.cells() {
                prop_assert_eq!(steps[shape.index(cell)], Some(chebyshev_distance(origin, cell)));
            }
        }
    }

    #[test]
    fn bfs_goes_around_walls() {
        // column 2 walled except the bottom row
        let shape = Shape::square(5);
        let walls: Vec<bool> = shape.cells().map(|c| c.col == 2 && c.row < 4).collect();
        let steps = bfs_steps(shape, &walls, Cell { row: 0, col: 0 });
        assert_eq!(steps[shape.index(Cell { row: 0, col: 4 })], Some(8));
        assert_eq!(steps[shape.index(Cell { row: 0, col: 2 })], None);
    }

    #[test]
    fn min_step_pairs_avoid_walls() {
        let shape = Shape::square(20);
        let mut values = vec![1.0; shape.len()];
        for i in (0..shape.len()).step_by(7) {
            values[i] = 25.0;
        }
        let costs = GridCosts::from_values(shape, values).unwrap();
        let walls = wall_mask(&costs, Some(25.0));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (s, t) = sample_pair_min_steps(&costs, &walls, 12, &mut rng).unwrap();
            assert!(costs.get(s) < 25.0 && costs.get(t) < 25.0);
            assert!(bfs_steps(shape, &walls, t)[shape.index(s)].unwrap() >= 12);
            let s2 = sample_source_min_steps(shape, &walls, t, 12, &mut rng).unwrap();
            assert!(costs.get(s2) < 25.0);
            assert!(bfs_steps(shape, &walls, t)[shape.index(s2)].unwrap() >= 12);
        }
    }

    #[test]
    fn impossible_min_steps_is_reported() {
        let costs = GridCosts::uniform(Shape::square(8), 1.0).unwrap();
        let walls = wall_mask(&costs, None);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert!(matches!(
            sample_pair_min_steps(&costs, &walls, 12, &mut rng),
            Err(DatagenError::UnusableMap { .. })
        ));
    }
}
