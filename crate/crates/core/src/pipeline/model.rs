use super::{build_h_epsilon, EpsilonParam, NwaConfig, PipelineError, Variant};
use crate::grid::{Cell, Field, GridCosts, Shape};
use crate::nn::checkpoint::{decode_checkpoint, encode_checkpoint};
use crate::nn::{Encoder, EncoderConfig, EncoderTape, Tensor};
use crate::search::{astar, h_chebyshev, h_na, HeuristicField, SearchResult};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MODEL_FORMAT: &str = "nwa-model/1";

/// Predicted costs of the neural-solver baselines are raw sigmoid outputs;
/// this keeps them strictly positive when the sigmoid underflows.
pub const RAW_COST_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: NwaConfig,
    pub grid: Shape,
    pub tile: usize,
    pub seed: u64,
    /// Optimiser steps taken.
    pub step: u64,
    pub epochs: usize,
    pub cost_encoder: Encoder,
    pub heuristic_encoder: Option<Encoder>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format: String,
    pub variant: Variant,
    pub config: NwaConfig,
    pub grid: Shape,
    pub tile: usize,
    pub seed: u64,
    pub step: u64,
    pub epochs: usize,
    pub cost_encoder: EncoderConfig,
    pub heuristic_encoder: Option<EncoderConfig>,
    /// Parameter count per encoder, in blob order.
    pub parameter_counts: Vec<usize>,
    pub parameter_order: String,
}

const PARAMETER_ORDER: &str = "cost encoder then heuristic encoder; per encoder, layers input to output; \
per layer, kernel [out, in, k, k] row-major then bias [out]";

/// One-hot channel marking the tile of `cell`, shaped `[1, H*tile, W*tile]`.
pub fn cell_channel(grid: Shape, tile: usize, cell: Cell) -> Tensor {
    let (h, w) = (grid.height * tile, grid.width * tile);
    let mut v = vec![0.0; h * w];
    for y in cell.row * tile..(cell.row + 1) * tile {
        for x in cell.col * tile..(cell.col + 1) * tile {
            v[y * w + x] = 1.0;
        }
    }
    Tensor::new(vec![1, h, w], v).expect("channel shape")
}

pub(crate) fn field_from_map(map: Tensor, grid: Shape) -> Field {
    Field::new(grid, map.into_values()).expect("encoder output matches the grid")
}

impl Model {
    pub fn new(config: &NwaConfig, grid: Shape, tile: usize, seed: u64) -> Result<Self, PipelineError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let variant = config.variant;
        let enc = |channels: usize, context: usize| EncoderConfig { in_channels: channels, widths: config.encoder_widths.clone(), tile, context };
        let cost_encoder = Encoder::new(enc(variant.cost_channels(), config.cost_context), &mut rng)?;
        let heuristic_encoder =
            if variant.has_heuristic_encoder() { Some(Encoder::new(enc(4, config.heuristic_context), &mut rng)?) } else { None };
        Ok(Model { config: config.clone(), grid, tile, seed, step: 0, epochs: 0, cost_encoder, heuristic_encoder })
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn tau(&self) -> f64 {
        self.config.tau_for(self.grid.width)
    }

    pub fn num_params(&self) -> usize {
        self.cost_encoder.num_params() + self.heuristic_encoder.as_ref().map_or(0, Encoder::num_params)
    }

    pub fn check_image(&self, image: &Tensor) -> Result<(), PipelineError> {
        let expected = [3, self.grid.height * self.tile, self.grid.width * self.tile];
        if image.shape() != expected {
            return Err(PipelineError::Incompatible(format!(
                "model expects a {:?} image ({} grid, tile {}), found {:?}",
                expected,
                self.grid,
                self.tile,
                image.shape()
            )));
        }
        Ok(())
    }

    /// Input of the cost encoder for this variant.
    pub fn cost_input(&self, image: &Tensor, source: Cell, target: Cell) -> Result<Tensor, PipelineError> {
        let v = self.variant();
        let mut parts = vec![image.clone()];
        if v.sees_source() {
            parts.push(cell_channel(self.grid, self.tile, source));
        }
        if v.sees_target() {
            parts.push(cell_channel(self.grid, self.tile, target));
        }
        let refs: Vec<&Tensor> = parts.iter().collect();
        Ok(Tensor::concat_channels(&refs)?)
    }

    pub fn heuristic_input(&self, image: &Tensor, target: Cell) -> Result<Tensor, PipelineError> {
        Ok(Tensor::concat_channels(&[image, &cell_channel(self.grid, self.tile, target)])?)
    }

    /// Maps the sigmoid output of the cost encoder to search costs. Fails
    /// when the network produced non-finite values.
    pub fn costs_from_sigmoid(&self, sig: &Tensor) -> Result<GridCosts, PipelineError> {
        self.check_finite("cost", sig)?;
        let (lo, hi) = (self.config.w_min, self.config.w_max);
        let values = if self.variant().scales_costs() {
            sig.values().iter().map(|&s| lo + (hi - lo) * s).collect()
        } else {
            sig.values().iter().map(|&s| s.max(RAW_COST_FLOOR)).collect()
        };
        Ok(GridCosts::from_values(self.grid, values)?)
    }

    fn check_finite(&self, what: &str, out: &Tensor) -> Result<(), PipelineError> {
        if out.values().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(PipelineError::Divergent { step: self.step, detail: format!("non-finite {what} encoder output") })
        }
    }

    /// `dL/d sigmoid` given `dL/dW`.
    pub fn cost_grad_to_sigmoid(&self, grad_w: &Field) -> Tensor {
        let scale = if self.variant().scales_costs() { self.config.w_max - self.config.w_min } else { 1.0 };
        Tensor::new(vec![self.grid.height, self.grid.width], grad_w.values().iter().map(|g| g * scale).collect())
            .expect("grid-shaped gradient")
    }

    pub fn forward_costs(&self, image: &Tensor, source: Cell, target: Cell) -> Result<(GridCosts, EncoderTape), PipelineError> {
        self.check_image(image)?;
        let (sig, tape) = self.cost_encoder.forward(&self.cost_input(image, source, target)?)?;
        Ok((self.costs_from_sigmoid(&sig)?, tape))
    }

    pub fn forward_heuristic(&self, image: &Tensor, target: Cell) -> Result<Option<(Field, EncoderTape)>, PipelineError> {
        let Some(enc) = &self.heuristic_encoder else { return Ok(None) };
        self.check_image(image)?;
        let (h, tape) = enc.forward(&self.heuristic_input(image, target)?)?;
        self.check_finite("heuristic", &h)?;
        Ok(Some((field_from_map(h, self.grid), tape)))
    }

    pub fn predict(&self, image: &Tensor, source: Cell, target: Cell) -> Result<Prediction, PipelineError> {
        self.grid.check(source)?;
        self.grid.check(target)?;
        let (costs, _) = self.forward_costs(image, source, target)?;
        let h_neural = self.forward_heuristic(image, target)?.map(|(h, _)| h);
        Ok(Prediction {
            variant: self.variant(),
            w_min: self.config.w_min,
            costs,
            h_neural,
            source: self.variant().sees_source().then_some(source),
            target,
        })
    }

    pub fn manifest(&self) -> ModelManifest {
        let mut counts = vec![self.cost_encoder.num_params()];
        counts.extend(self.heuristic_encoder.as_ref().map(Encoder::num_params));
        ModelManifest {
            format: MODEL_FORMAT.into(),
            variant: self.variant(),
            config: self.config.clone(),
            grid: self.grid,
            tile: self.tile,
            seed: self.seed,
            step: self.step,
            epochs: self.epochs,
            cost_encoder: self.cost_encoder.config().clone(),
            heuristic_encoder: self.heuristic_encoder.as_ref().map(|e| e.config().clone()),
            parameter_counts: counts,
            parameter_order: PARAMETER_ORDER.into(),
        }
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut p = self.cost_encoder.flat_params();
        if let Some(h) = &self.heuristic_encoder {
            p.extend(h.flat_params());
        }
        p
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, PipelineError> {
        Ok(encode_checkpoint(&self.manifest(), &self.flat_params())?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PipelineError> {
        let (m, params): (ModelManifest, Vec<f64>) = decode_checkpoint(bytes)?;
        if m.format != MODEL_FORMAT {
            return Err(PipelineError::Incompatible(format!("unknown checkpoint format {}", m.format)));
        }
        if m.variant != m.config.variant {
            return Err(PipelineError::Incompatible("manifest variant disagrees with its config".into()));
        }
        let mut model = Model::new(&m.config, m.grid, m.tile, m.seed)?;
        if model.cost_encoder.config() != &m.cost_encoder
            || model.heuristic_encoder.as_ref().map(|e| e.config().clone()) != m.heuristic_encoder
        {
            return Err(PipelineError::Incompatible("encoder layout disagrees with the variant".into()));
        }
        if params.len() != model.num_params() {
            return Err(PipelineError::Incompatible(format!(
                "checkpoint holds {} parameters, the model has {}",
                params.len(),
                model.num_params()
            )));
        }
        let n = model.cost_encoder.num_params();
        model.cost_encoder.set_flat_params(&params[..n])?;
        if let Some(h) = &mut model.heuristic_encoder {
            h.set_flat_params(&params[n..])?;
        }
        model.step = m.step;
        model.epochs = m.epochs;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| PipelineError::Io { path: path.to_path_buf(), source: e })
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let bytes = std::fs::read(path).map_err(|e| PipelineError::Io { path: path.to_path_buf(), source: e })?;
        Self::from_bytes(&bytes)
    }
}

/// Network outputs for one (map, target) pair, and for the source too when
/// the variant reads it. Planning with different `eps` reuses them.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub variant: Variant,
    pub w_min: f64,
    pub costs: GridCosts,
    pub h_neural: Option<Field>,
    /// Set when the costs depend on the source.
    pub source: Option<Cell>,
    pub target: Cell,
}

impl Prediction {
    /// The heuristic the variant searches with. Only the learned heuristic
    /// reads `eps`.
    pub fn heuristic(&self, eps: EpsilonParam) -> Result<HeuristicField, PipelineError> {
        let shape = self.costs.shape();
        Ok(match self.variant {
            Variant::Nwa => {
                let hc = h_chebyshev(self.w_min, self.target, shape)?;
                let hn = self.h_neural.as_ref().expect("the learned-heuristic variant predicts one");
                build_h_epsilon(hn, &hc, eps)?
            }
            Variant::Bba => h_chebyshev(self.w_min, self.target, shape)?,
            Variant::Na => h_na(self.target, shape)?,
            Variant::AdmNa | Variant::NsNa => h_chebyshev(self.costs.min(), self.target, shape)?,
        })
    }

    /// A single standard A* over the predicted costs.
    pub fn plan(&self, source: Cell, eps: EpsilonParam) -> Result<SearchResult, PipelineError> {
        if let Some(s) = self.source {
            if s != source {
                return Err(PipelineError::Incompatible(format!(
                    "prediction was made for source {s}; re-predict for {source}"
                )));
            }
        }
        Ok(astar(&self.costs, &self.heuristic(eps)?, source, self.target)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Inference {
    pub result: SearchResult,
    pub costs: GridCosts,
    pub heuristic: HeuristicField,
    pub h_neural: Option<Field>,
}

pub fn infer(model: &Model, image: &Tensor, source: Cell, target: Cell, eps: EpsilonParam) -> Result<Inference, PipelineError> {
    let p = model.predict(image, source, target)?;
    let result = p.plan(source, eps)?;
    Ok(Inference { result, heuristic: p.heuristic(eps)?, costs: p.costs, h_neural: p.h_neural })
}

/// A freshly initialised model of the given variant; training is
/// [`super::train`].
pub fn run_variant(variant: Variant, base: &NwaConfig, grid: Shape, tile: usize, seed: u64) -> Result<Model, PipelineError> {
    Model::new(&NwaConfig { variant, ..base.clone() }, grid, tile, seed)
}
