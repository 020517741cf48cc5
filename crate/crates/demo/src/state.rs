//! Demo logic without any browser types, so it can be tested natively.

use nwa_core::datagen::{generate_map, DatagenConfig, Image};
use nwa_core::grid::{path_cost, Cell, Field, GridCosts, Shape};
use nwa_core::pipeline::{EpsilonParam, Model, Prediction, Variant};
use nwa_core::search::{astar, dijkstra_oracle, h_chebyshev, HeuristicField};
use serde::Serialize;

/// Which costs and heuristic the planner uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// A loaded checkpoint predicts costs (and, for the learned-heuristic
    /// variant, the heuristic) from the image.
    Model,
    /// True terrain costs with the plain `(1 + eps)` inflated Chebyshev
    /// heuristic, for comparison.
    GroundTruth,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanView {
    pub mode: &'static str,
    pub variant: Option<&'static str>,
    pub eps: f64,
    /// Flat row-major indices from source to target.
    pub path: Vec<usize>,
    pub expanded: Vec<usize>,
    pub cost: f64,
    pub optimal_cost: f64,
    pub true_cost: f64,
    pub true_optimal_cost: f64,
}

pub struct DemoState {
    pub hard: bool,
    pub seed: u64,
    pub shape: Shape,
    pub tile: usize,
    pub image: Image,
    pub costs: GridCosts,
    pub model: Option<Model>,
    cache: Option<(Cell, Cell, Prediction)>,
}

fn config(hard: bool) -> DatagenConfig {
    if hard {
        DatagenConfig::hard(0)
    } else {
        DatagenConfig::easy(0)
    }
}

impl DemoState {
    pub fn new(seed: u64, hard: bool) -> Self {
        let cfg = config(hard);
        let tileset = cfg.tileset().expect("preset configs are valid");
        let (image, costs) = generate_map(seed, cfg.shape(), &tileset);
        DemoState { hard, seed, shape: cfg.shape(), tile: cfg.tile, image, costs, model: None, cache: None }
    }

    /// Replaces the map and keeps the model.
    pub fn regenerate(&mut self, seed: u64, hard: bool) {
        let model = self.model.take();
        *self = DemoState::new(seed, hard);
        self.model = model;
    }

    /// Loads a checkpoint; it must match the map geometry to be used.
    pub fn load_model(&mut self, bytes: &[u8]) -> Result<String, String> {
        let m = Model::from_bytes(bytes).map_err(|e| e.to_string())?;
        let text = format!("{} model, {} grid, tile {}, {} parameters, {} epochs", m.variant(), m.grid, m.tile, m.num_params(), m.epochs);
        self.model = Some(m);
        self.cache = None;
        Ok(text)
    }

    /// The model when it fits the current map.
    pub fn usable_model(&self) -> Option<&Model> {
        self.model.as_ref().filter(|m| m.grid == self.shape && m.tile == self.tile)
    }

    pub fn mode(&self) -> Mode {
        if self.usable_model().is_some() {
            Mode::Model
        } else {
            Mode::GroundTruth
        }
    }

    /// `H x W` pixels as RGBA bytes for a canvas.
    pub fn image_rgba(&self) -> Vec<u8> {
        self.image.data.chunks_exact(3).flat_map(|p| [to_byte(p[0]), to_byte(p[1]), to_byte(p[2]), 255]).collect()
    }

    fn cell(&self, row: usize, col: usize) -> Result<Cell, String> {
        let c = Cell::new(row, col);
        if self.shape.contains(c) {
            Ok(c)
        } else {
            Err(format!("{c} is outside the {} grid", self.shape))
        }
    }

    /// Runs the networks once per (source, target) and reuses the result
    /// while only eps changes.
    fn prediction(&mut self, source: Cell, target: Cell) -> Result<Option<Prediction>, String> {
        let Some(model) = self.usable_model() else { return Ok(None) };
        if let Some((s, t, p)) = &self.cache {
            let same_source = *s == source || !model.variant().sees_source();
            if *t == target && same_source {
                return Ok(Some(p.clone()));
            }
        }
        let p = model.predict(&self.image.to_tensor(), source, target).map_err(|e| e.to_string())?;
        self.cache = Some((source, target, p.clone()));
        Ok(Some(p))
    }

    fn ground_truth_heuristic(&self, target: Cell, eps: EpsilonParam) -> Result<HeuristicField, String> {
        let h = h_chebyshev(self.costs.min(), target, self.shape).map_err(|e| e.to_string())?;
        Ok(h.scaled(1.0 + eps.value()))
    }

    pub fn plan(&mut self, source: (usize, usize), target: (usize, usize), eps: f64) -> Result<PlanView, String> {
        let eps = EpsilonParam::new(eps).map_err(|e| e.to_string())?;
        let (s, t) = (self.cell(source.0, source.1)?, self.cell(target.0, target.1)?);
        let (result, costs, variant) = match self.prediction(s, t)? {
            Some(p) => (p.plan(s, eps).map_err(|e| e.to_string())?, p.costs.clone(), Some(p.variant)),
            None => {
                let h = self.ground_truth_heuristic(t, eps)?;
                (astar(&self.costs, &h, s, t).map_err(|e| e.to_string())?, self.costs.clone(), None)
            }
        };
        let optimal = dijkstra_oracle(&costs, s, t).map_err(|e| e.to_string())?.total_cost;
        let true_optimal = dijkstra_oracle(&self.costs, s, t).map_err(|e| e.to_string())?.total_cost;
        Ok(PlanView {
            mode: if variant.is_some() { "model" } else { "ground truth" },
            variant: variant.map(Variant::name),
            eps: eps.value(),
            path: result.path.iter().map(|&c| self.shape.index(c)).collect(),
            expanded: result.expansions.cells().map(|c| self.shape.index(c)).collect(),
            cost: path_cost(&costs, &result.path_mask).map_err(|e| e.to_string())?,
            optimal_cost: optimal,
            true_cost: path_cost(&self.costs, &result.path_mask).map_err(|e| e.to_string())?,
            true_optimal_cost: true_optimal,
        })
    }

    /// A per-cell layer for display: `"costs"`, `"true-costs"`,
    /// `"h-neural"` or `"h-eps"`.
    pub fn layer(&mut self, name: &str, source: (usize, usize), target: (usize, usize), eps: f64) -> Result<Vec<f64>, String> {
        let eps = EpsilonParam::new(eps).map_err(|e| e.to_string())?;
        let (s, t) = (self.cell(source.0, source.1)?, self.cell(target.0, target.1)?);
        let p = self.prediction(s, t)?;
        let field: Field = match (name, &p) {
            ("true-costs", _) | ("costs", None) => self.costs.field().clone(),
            ("costs", Some(p)) => p.costs.field().clone(),
            ("h-neural", Some(Prediction { h_neural: Some(h), .. })) => h.clone(),
            ("h-neural", _) => return Err("only the learned-heuristic model predicts a heuristic".into()),
            ("h-eps", Some(p)) => p.heuristic(eps).map_err(|e| e.to_string())?.field().clone(),
            ("h-eps", None) => self.ground_truth_heuristic(t, eps)?.field().clone(),
            _ => return Err(format!("unknown layer {name:?}")),
        };
        Ok(field.into_values())
    }
}

fn to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
