//! A* whose node selection is relaxed into a softmax, making the expansion
//! map differentiable with respect to the heuristic.
//!
//! The forward pass runs the same search as [`crate::search::astar`]: the hard
//! selection at every step is the open node with the best priority under the
//! shared tie-breaking rule, so the expansion set is identical. Alongside it,
//! every step records the softmax of `-(G + H) / tau` over the open set. The
//! backward pass is straight-through: the expansion map is the sum of the hard
//! one-hot selections, its gradient is that of the sum of the soft weights.

use crate::grid::{for_each_neighbor, Cell, Field, GridCosts, GridError, PathMask, Shape};
use crate::search::{trace_back, HeuristicField, OpenKey, SearchError};

/// One selection step of the relaxed search.
#[derive(Clone, Debug)]
pub struct SoftStep {
    /// Open nodes (row-major indices) at the time of selection.
    pub open: Vec<usize>,
    /// `G` of each open node at that time.
    pub g: Vec<f64>,
    /// Parent of each open node at that time.
    pub parent: Vec<usize>,
    /// Softmax weights over `open`; they sum to one.
    pub weights: Vec<f64>,
    /// Position in `open` of the hard selection.
    pub chosen: usize,
}

impl SoftStep {
    pub fn chosen_index(&self) -> usize {
        self.open[self.chosen]
    }
}

#[derive(Clone, Debug)]
pub struct SoftSearchTrace {
    pub shape: Shape,
    pub tau: f64,
    pub steps: Vec<SoftStep>,
    /// Sum over steps of the soft selection weights.
    pub soft_expansions: Field,
    /// Parents of closed nodes, fixed once closed.
    pub closed_parent: Vec<usize>,
    pub path: Vec<Cell>,
}

impl SoftSearchTrace {
    pub fn path_mask(&self) -> PathMask {
        PathMask::from_cells(self.shape, self.path.iter().copied()).expect("path cells are in bounds")
    }

    pub fn expansions(&self) -> PathMask {
        PathMask::from_cells(self.shape, self.steps.iter().map(|s| self.shape.cell(s.chosen_index())))
            .expect("expanded cells are in bounds")
    }
}

fn softmax_neg(f: &[f64], tau: f64) -> Vec<f64> {
    let best = f.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = f.iter().map(|&x| (-(x - best) / tau).exp()).collect();
    let z: f64 = w.iter().sum();
    for x in &mut w {
        *x /= z;
    }
    w
}

/// Runs the relaxed search and returns the hard expansion map with its trace.
pub fn neural_astar_forward(
    costs: &GridCosts,
    h_eps: &HeuristicField,
    source: Cell,
    target: Cell,
    tau: f64,
) -> Result<(PathMask, SoftSearchTrace), SearchError> {
    assert!(tau > 0.0, "tau must be positive");
    let shape = costs.shape();
    shape.expect_same(h_eps.shape())?;
    shape.check(source)?;
    shape.check(target)?;
    if h_eps.target() != target {
        return Err(SearchError::TargetMismatch { field_target: h_eps.target(), target });
    }
    let n = shape.len();
    let cv = costs.values();
    let hv = h_eps.field().values();

    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    // open list kept as an ordered vector; selection scans it
    let mut open: Vec<usize> = Vec::new();
    let mut steps = Vec::new();
    let mut soft = vec![0.0; n];

    let s = shape.index(source);
    let t = shape.index(target);
    g[s] = cv[s];
    open.push(s);

    loop {
        if open.is_empty() {
            return Err(SearchError::NoPath { start: source, target });
        }
        let f: Vec<f64> = open.iter().map(|&i| g[i] + hv[i]).collect();
        let weights = softmax_neg(&f, tau);
        let chosen = (0..open.len())
            .max_by_key(|&k| OpenKey { f: f[k], g: g[open[k]], index: open[k] })
            .expect("open list is not empty");
        for (&i, &w) in open.iter().zip(&weights) {
            soft[i] += w;
        }
        let u = open[chosen];
        steps.push(SoftStep {
            open: open.clone(),
            g: open.iter().map(|&i| g[i]).collect(),
            parent: open.iter().map(|&i| parent[i]).collect(),
            weights,
            chosen,
        });
        open.swap_remove(chosen);
        closed[u] = true;
        if u == t {
            break;
        }
        for_each_neighbor(shape.cell(u), shape, |m| {
            let v = shape.index(m);
            if closed[v] {
                return;
            }
            let cand = g[u] + cv[v];
            if cand < g[v] {
                if g[v].is_infinite() {
                    open.push(v);
                }
                g[v] = cand;
                parent[v] = u;
            }
        });
    }

    let path = trace_back(&parent, shape, t);
    let trace = SoftSearchTrace {
        shape,
        tau,
        soft_expansions: Field::new(shape, soft)?,
        closed_parent: parent,
        steps,
        path,
    };
    Ok((trace.expansions(), trace))
}

/// Per step and per open node, the gradient of `<grad_e, soft weights>` with
/// respect to that node's logit `-(G + H) / tau`, already multiplied by
/// `d logit / d F = -1 / tau`. Returned flat, step-major.
fn priority_gradients(trace: &SoftSearchTrace, grad_e: &Field) -> Result<Vec<Vec<f64>>, GridError> {
    trace.shape.expect_same(grad_e.shape())?;
    let ge = grad_e.values();
    let inv_tau = 1.0 / trace.tau;
    Ok(trace
        .steps
        .iter()
        .map(|step| {
            let mean: f64 = step.open.iter().zip(&step.weights).map(|(&i, &w)| w * ge[i]).sum();
            step.open.iter().zip(&step.weights).map(|(&i, &w)| -inv_tau * w * (ge[i] - mean)).collect()
        })
        .collect())
}

/// `dL/dH` given `dL/dE`. `G` is held constant, so nothing flows to the costs.
pub fn neural_astar_backward(trace: &SoftSearchTrace, grad_e: &Field) -> Result<Field, GridError> {
    let mut out = vec![0.0; trace.shape.len()];
    for (step, grads) in trace.steps.iter().zip(priority_gradients(trace, grad_e)?) {
        for (&i, gr) in step.open.iter().zip(grads) {
            out[i] += gr;
        }
    }
    Field::new(trace.shape, out)
}

/// `dL/dW` given `dL/dE`, flowing through `G`: the `G` of an open node is the
/// sum of the costs along its parent chain at that step. Only used by models
/// whose sole learned quantity is the cost map.
pub fn neural_astar_backward_costs(trace: &SoftSearchTrace, grad_e: &Field) -> Result<Field, GridError> {
    let n = trace.shape.len();
    let mut out = vec![0.0; n];
    // gradient waiting at closed nodes, to be pushed down their (fixed) chains
    let mut pending = vec![0.0; n];
    for (step, grads) in trace.steps.iter().zip(priority_gradients(trace, grad_e)?) {
        for ((&i, &p), gr) in step.open.iter().zip(&step.parent).zip(grads) {
            out[i] += gr;
            if p != usize::MAX {
                pending[p] += gr;
            }
        }
    }
    // closed nodes appear after their parents in selection order
    for step in trace.steps.iter().rev() {
        let u = step.chosen_index();
        out[u] += pending[u];
        let p = trace.closed_parent[u];
        if p != usize::MAX {
            pending[p] += pending[u];
        }
    }
    Field::new(trace.shape, out)
}

/// Identity forward, zero backward.
#[derive(Clone, Copy, Debug, Default)]
pub struct StopGradient;

impl StopGradient {
    pub fn forward(&self, x: &Field) -> Field {
        x.clone()
    }

    pub fn backward(&self, upstream: &Field) -> Field {
        Field::zeros(upstream.shape())
    }
}

pub fn stop_gradient(x: &Field) -> Field {
    StopGradient.forward(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{astar, h_chebyshev};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_case(rng: &mut ChaCha8Rng, side: usize) -> (GridCosts, HeuristicField, Cell, Cell) {
        let s = Shape::square(side);
        let costs = GridCosts::from_values(s, (0..s.len()).map(|_| rng.gen_range(1.0..10.0)).collect()).unwrap();
        let src = Cell::new(rng.gen_range(0..side), rng.gen_range(0..side));
        let tgt = Cell::new(rng.gen_range(0..side), rng.gen_range(0..side));
        let hc = h_chebyshev(1.0, tgt, s).unwrap();
        let eps = rng.gen_range(0.0..9.0);
        let h = HeuristicField::new(
            Field::from_fn(s, |c| (1.0 + eps * rng.gen_range(0.0..1.0)) * hc.get(c)),
            tgt,
        )
        .unwrap();
        (costs, h, src, tgt)
    }

    #[test]
    fn hard_expansions_match_astar() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let (costs, h, s, t) = random_case(&mut rng, 9);
            let (e, trace) = neural_astar_forward(&costs, &h, s, t, 3.0).unwrap();
            let r = astar(&costs, &h, s, t).unwrap();
            assert_eq!(e, r.expansions);
            assert_eq!(trace.path, r.path);
            let order: Vec<Cell> = trace.steps.iter().map(|st| costs.shape().cell(st.chosen_index())).collect();
            assert_eq!(order, r.pop_order);
        }
    }

    #[test]
    fn ties_follow_the_shared_rule() {
        // uniform costs create many equal priorities
        let s = Shape::square(7);
        let costs = GridCosts::uniform(s, 1.0).unwrap();
        for t in [Cell::new(6, 6), Cell::new(0, 6), Cell::new(3, 0)] {
            let h = crate::search::HeuristicField::zeros(s, t).unwrap();
            let (e, _) = neural_astar_forward(&costs, &h, Cell::new(3, 3), t, 1.0).unwrap();
            assert_eq!(e, astar(&costs, &h, Cell::new(3, 3), t).unwrap().expansions);
        }
    }

    #[test]
    fn weights_are_distributions_and_sharpen() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let (costs, h, s, t) = random_case(&mut rng, 6);
        let (_, trace) = neural_astar_forward(&costs, &h, s, t, 3.0).unwrap();
        for st in &trace.steps {
            assert!((st.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(st.weights.iter().all(|&w| (0.0..=1.0).contains(&w)));
        }

        let s3 = Shape::square(3);
        let uni = GridCosts::uniform(s3, 1.0).unwrap();
        let hc = h_chebyshev(1.0, Cell::new(2, 2), s3).unwrap();
        let (e, trace) = neural_astar_forward(&uni, &hc, Cell::new(0, 0), Cell::new(2, 2), 0.01).unwrap();
        for st in &trace.steps {
            assert!(st.weights[st.chosen] > 1.0 - 1e-12);
        }
        for c in [Cell::new(0, 0), Cell::new(1, 1), Cell::new(2, 2)] {
            assert!(e.contains(c));
        }
    }

    #[test]
    fn argmax_is_the_hard_choice_without_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let (costs, h, s, t) = random_case(&mut rng, 6);
            let (_, trace) = neural_astar_forward(&costs, &h, s, t, 2.0).unwrap();
            for st in &trace.steps {
                let best = (0..st.weights.len()).max_by(|&a, &b| st.weights[a].total_cmp(&st.weights[b])).unwrap();
                assert_eq!(st.open[best], st.chosen_index());
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let (costs, h, s, t) = random_case(&mut rng, 5);
        let (_, trace) = neural_astar_forward(&costs, &h, s, t, 2.0).unwrap();
        let z = Field::zeros(costs.shape());
        assert!(neural_astar_backward(&trace, &z).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(neural_astar_backward_costs(&trace, &z).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(neural_astar_backward(&trace, &Field::zeros(Shape::square(2))).is_err());
    }

    fn soft_objective(costs: &GridCosts, h: &HeuristicField, s: Cell, t: Cell, tau: f64, up: &Field) -> f64 {
        let (_, trace) = neural_astar_forward(costs, h, s, t, tau).unwrap();
        trace.soft_expansions.values().iter().zip(up.values()).map(|(a, b)| a * b).sum()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn adjacent_pair_matches_closed_form() {
        // s next to t: step 1 selects s alone, step 2 is a softmax over s's neighbors
        let s3 = Shape::square(3);
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let costs = GridCosts::from_values(s3, (0..9).map(|_| rng.gen_range(1.0..5.0)).collect()).unwrap();
        let (src, tgt) = (Cell::new(0, 0), Cell::new(1, 1));
        let h = HeuristicField::new(Field::from_fn(s3, |c| if c == tgt { 0.0 } else { rng.gen_range(0.5..2.0) }), tgt)
            .unwrap();
        let up = Field::from_fn(s3, |_| rng.gen_range(-1.0..1.0));
        let tau = 1.5;
        let (_, trace) = neural_astar_forward(&costs, &h, src, tgt, tau).unwrap();
        let analytic = neural_astar_backward(&trace, &up).unwrap();
        let step = &trace.steps[1];
        let mean: f64 = step.open.iter().zip(&step.weights).map(|(&i, &w)| w * up.values()[i]).sum();
        for (&i, &w) in step.open.iter().zip(&step.weights) {
            let expected = -w * (up.values()[i] - mean) / tau;
            assert!((analytic.values()[i] - expected).abs() < 1e-14);
        }
        for n in s3.cells() {
            let mut hp = h.field().clone();
            let mut hm = h.field().clone();
            hp.set(n, h.get(n) + 1e-4);
            hm.set(n, (h.get(n) - 1e-4).max(0.0));
            let dh = hp.get(n) - hm.get(n);
            let fd = (soft_objective(&costs, &HeuristicField::new(hp, tgt).unwrap(), src, tgt, tau, &up)
                - soft_objective(&costs, &HeuristicField::new(hm, tgt).unwrap(), src, tgt, tau, &up))
                / dh;
            assert!(rel_err(analytic.get(n), fd) < 1e-3 || (analytic.get(n) - fd).abs() < 1e-9, "{n}");
        }
    }

    #[test]
    fn heuristic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for _ in 0..10 {
            let (costs, h, s, t) = random_case(&mut rng, 4);
            let up = Field::from_fn(costs.shape(), |_| rng.gen_range(-1.0..1.0));
            let tau = 2.0;
            let (_, trace) = neural_astar_forward(&costs, &h, s, t, tau).unwrap();
            let analytic = neural_astar_backward(&trace, &up).unwrap();
            for n in costs.shape().cells() {
                if n == t {
                    continue;
                }
                let mut hp = h.field().clone();
                let mut hm = h.field().clone();
                hp.set(n, h.get(n) + 1e-4);
                hm.set(n, h.get(n) - 1e-4);
                let fd = (soft_objective(&costs, &HeuristicField::new(hp, t).unwrap(), s, t, tau, &up)
                    - soft_objective(&costs, &HeuristicField::new(hm, t).unwrap(), s, t, tau, &up))
                    / 2e-4;
                assert!(rel_err(analytic.get(n), fd) < 1e-3 || (analytic.get(n) - fd).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cost_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        for _ in 0..10 {
            let (costs, h, s, t) = random_case(&mut rng, 4);
            let up = Field::from_fn(costs.shape(), |_| rng.gen_range(-1.0..1.0));
            let tau = 2.0;
            let (_, trace) = neural_astar_forward(&costs, &h, s, t, tau).unwrap();
            let analytic = neural_astar_backward_costs(&trace, &up).unwrap();
            for n in costs.shape().cells() {
                let bump = |d: f64| {
                    let mut f = costs.field().clone();
                    f.set(n, costs.get(n) + d);
                    GridCosts::new(f).unwrap()
                };
                let fd = (soft_objective(&bump(1e-4), &h, s, t, tau, &up)
                    - soft_objective(&bump(-1e-4), &h, s, t, tau, &up))
                    / 2e-4;
                assert!(rel_err(analytic.get(n), fd) < 1e-3 || (analytic.get(n) - fd).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn raising_heuristic_lowers_own_weight() {
        // upstream one-hot on a non-selected open cell: d weight / d h <= 0
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let (costs, h, s, t) = random_case(&mut rng, 6);
        let (_, trace) = neural_astar_forward(&costs, &h, s, t, 2.0).unwrap();
        let step = &trace.steps[trace.steps.len() / 2];
        let k = (0..step.open.len()).find(|&k| k != step.chosen).unwrap_or(step.chosen);
        let cell = costs.shape().cell(step.open[k]);
        let mut up = Field::zeros(costs.shape());
        up.set(cell, 1.0);
        let g = neural_astar_backward(&trace, &up).unwrap();
        assert!(g.get(cell) <= 0.0);
    }

    #[test]
    fn stop_gradient_blocks_backward() {
        let x = Field::from_fn(Shape::square(3), |c| c.row as f64 - c.col as f64);
        assert_eq!(stop_gradient(&x), x);
        let up = Field::filled(Shape::square(3), 7.0);
        assert!(StopGradient.backward(&up).values().iter().all(|&v| v == 0.0));
    }
}
