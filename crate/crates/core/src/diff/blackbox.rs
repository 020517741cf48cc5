//! A* with black-box differentiation with respect to the node costs.
//!
//! Forward is plain A* with the admissible Chebyshev heuristic. Backward
//! perturbs the costs along the incoming gradient, re-solves, and returns the
//! difference of the two solutions scaled by `1 / lambda`: the gradient of a
//! piecewise-linear interpolation of the piecewise-constant solver map.

use crate::grid::{Cell, Field, GridCosts, PathMask};
use crate::search::{astar, h_chebyshev, HeuristicField, SearchError};

/// Lower clamp applied to perturbed costs so the re-solve stays well posed.
pub const PERTURBED_COST_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct BlackBoxContext {
    pub costs_in: GridCosts,
    pub y_forward: PathMask,
    pub lambda: f64,
    pub source: Cell,
    pub target: Cell,
    pub w_min: f64,
    pub h_field: HeuristicField,
}

/// Solves with `H_C(w_min)` and keeps what the backward pass needs.
pub fn blackbox_forward(
    costs: &GridCosts,
    w_min: f64,
    source: Cell,
    target: Cell,
    lambda: f64,
) -> Result<(PathMask, BlackBoxContext), SearchError> {
    assert!(lambda > 0.0, "lambda must be positive");
    let h_field = h_chebyshev(w_min, target, costs.shape())?;
    let y = astar(costs, &h_field, source, target)?.path_mask;
    let ctx = BlackBoxContext {
        costs_in: costs.clone(),
        y_forward: y.clone(),
        lambda,
        source,
        target,
        w_min,
        h_field,
    };
    Ok((y, ctx))
}

impl BlackBoxContext {
    /// Costs after the `W + lambda * grad_y` step, clamped at the floor.
    pub fn perturbed_costs(&self, grad_y: &Field) -> Result<GridCosts, SearchError> {
        self.costs_in.shape().expect_same(grad_y.shape())?;
        let values = self
            .costs_in
            .values()
            .iter()
            .zip(grad_y.values())
            .map(|(&w, &g)| (w + self.lambda * g).max(PERTURBED_COST_FLOOR))
            .collect();
        Ok(GridCosts::from_values(self.costs_in.shape(), values)?)
    }

    /// Solution of the perturbed problem. The heuristic is rebuilt from the
    /// smallest perturbed cost so the re-solve stays optimal.
    pub fn perturbed_solution(&self, grad_y: &Field) -> Result<PathMask, SearchError> {
        let perturbed = self.perturbed_costs(grad_y)?;
        let w_min = self.w_min.min(perturbed.min());
        let h = h_chebyshev(w_min, self.target, perturbed.shape())?;
        Ok(astar(&perturbed, &h, self.source, self.target)?.path_mask)
    }
}

/// `dL/dW = (Y' - Y) / lambda` where `Y'` solves the perturbed costs.
/// Every entry lies in `{-1/lambda, 0, 1/lambda}`.
pub fn blackbox_backward(ctx: &BlackBoxContext, grad_y: &Field) -> Result<Field, SearchError> {
    if grad_y.values().iter().all(|&g| g == 0.0) {
        ctx.costs_in.shape().expect_same(grad_y.shape())?;
        return Ok(Field::zeros(grad_y.shape()));
    }
    let y_perturbed = ctx.perturbed_solution(grad_y)?;
    let inv = 1.0 / ctx.lambda;
    let values = y_perturbed
        .bits()
        .iter()
        .zip(ctx.y_forward.bits())
        .map(|(&yp, &y)| match (yp, y) {
            (true, false) => inv,
            (false, true) => -inv,
            _ => 0.0,
        })
        .collect();
    Ok(Field::new(grad_y.shape(), values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Shape;
    use crate::search::dijkstra_oracle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, side: usize) -> (GridCosts, Cell, Cell) {
        let s = Shape::square(side);
        let costs = GridCosts::from_values(s, (0..s.len()).map(|_| rng.gen_range(1.0..10.0)).collect()).unwrap();
        let src = Cell::new(rng.gen_range(0..side), rng.gen_range(0..side));
        let tgt = Cell::new(rng.gen_range(0..side), rng.gen_range(0..side));
        (costs, src, tgt)
    }

    #[test]
    fn forward_is_plain_astar() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (costs, s, t) = random_instance(&mut rng, 8);
            let (y, ctx) = blackbox_forward(&costs, 1.0, s, t, 20.0).unwrap();
            let h = h_chebyshev(1.0, t, costs.shape()).unwrap();
            assert_eq!(y, astar(&costs, &h, s, t).unwrap().path_mask);
            assert_eq!(ctx.y_forward, y);
        }
        let s = Shape::square(3);
        let (y, _) = blackbox_forward(&GridCosts::uniform(s, 1.0).unwrap(), 1.0, Cell::new(0, 0), Cell::new(2, 2), 20.0)
            .unwrap();
        assert_eq!(y.cells().collect::<Vec<_>>(), vec![Cell::new(0, 0), Cell::new(1, 1), Cell::new(2, 2)]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (costs, s, t) = random_instance(&mut rng, 6);
        let (_, ctx) = blackbox_forward(&costs, 1.0, s, t, 20.0).unwrap();
        let g = blackbox_backward(&ctx, &Field::zeros(costs.shape())).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unchanged_argmin_gives_zero_gradient() {
        // uniform costs, tiny push toward the current path: solution is unchanged
        let s = Shape::square(3);
        let costs = GridCosts::uniform(s, 1.0).unwrap();
        let (y, ctx) = blackbox_forward(&costs, 1.0, Cell::new(0, 0), Cell::new(2, 2), 20.0).unwrap();
        let grad = y.to_field().map(|v| -1e-4 * v);
        let g = blackbox_backward(&ctx, &grad).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_sits_on_symmetric_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lambda = 20.0;
        let mut nonzero_seen = 0;
        for _ in 0..50 {
            let (costs, s, t) = random_instance(&mut rng, 4);
            let (y, ctx) = blackbox_forward(&costs, 1.0, s, t, lambda).unwrap();
            // a different target path: the optimum of random unrelated costs
            let (other, _, _) = random_instance(&mut rng, 4);
            let y_gt = dijkstra_oracle(&other, s, t).unwrap().path_mask;
            // Hamming upstream: +1 where predicting 1 would be wrong, -1 otherwise
            let grad = y_gt.to_field().map(|v| 1.0 - 2.0 * v);
            let g = blackbox_backward(&ctx, &grad).unwrap();
            let y_prime = ctx.perturbed_solution(&grad).unwrap();
            assert_eq!(g.values().iter().filter(|&&v| v != 0.0).count(), y.symmetric_difference_count(&y_prime));
            for (i, &v) in g.values().iter().enumerate() {
                assert!(v == 0.0 || (v.abs() - 1.0 / lambda).abs() < 1e-15);
                let cell = costs.shape().cell(i);
                if y_prime.contains(cell) && !y.contains(cell) {
                    assert!(v > 0.0);
                }
            }
            if y != y_gt {
                nonzero_seen += 1;
            }
        }
        assert!(nonzero_seen > 0);
    }

    #[test]
    fn descent_step_moves_path_toward_target_path() {
        // costs where the optimum goes through the middle; supervision wants the top row
        let s = Shape::new(3, 5);
        let mut v = vec![5.0; 15];
        for c in 5..10 {
            v[c] = 1.0;
        }
        let costs = GridCosts::from_values(s, v).unwrap();
        let (src, tgt) = (Cell::new(1, 0), Cell::new(1, 4));
        let (y, ctx) = blackbox_forward(&costs, 1.0, src, tgt, 20.0).unwrap();
        let gt = PathMask::from_cells(s, [src, Cell::new(0, 1), Cell::new(0, 2), Cell::new(0, 3), tgt]).unwrap();
        let grad = gt.to_field().map(|x| 1.0 - 2.0 * x);
        let g = blackbox_backward(&ctx, &grad).unwrap();
        let stepped: Vec<f64> = costs.values().iter().zip(g.values()).map(|(&w, &d)| (w - 100.0 * d).max(0.01)).collect();
        let stepped = GridCosts::from_values(s, stepped).unwrap();
        let y_new = dijkstra_oracle(&stepped, src, tgt).unwrap().path_mask;
        assert!(y_new.symmetric_difference_count(&gt) < y.symmetric_difference_count(&gt));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let s = Shape::square(3);
        let costs = GridCosts::uniform(s, 1.0).unwrap();
        let (_, ctx) = blackbox_forward(&costs, 1.0, Cell::new(0, 0), Cell::new(2, 2), 20.0).unwrap();
        assert!(blackbox_backward(&ctx, &Field::zeros(Shape::square(4))).is_err());
        assert!(blackbox_backward(&ctx, &Field::filled(Shape::square(4), 1.0)).is_err());
    }
}
