use super::model::field_from_map;
use super::{build_h_epsilon, hamming_grad, hamming_loss, EpsilonParam, LossParts, Model, NwaConfig, PipelineError, Variant};
use crate::datagen::{Dataset, MapSample};
use crate::diff::{blackbox_backward, blackbox_forward, neural_astar_backward, neural_astar_backward_costs, neural_astar_forward, stop_gradient};
use crate::grid::{Cell, Field, GridCosts, PathMask, Shape};
use crate::nn::{Adam, Encoder, Tensor};
use crate::search::{h_chebyshev, h_na};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One (source, target, ground-truth path) triple on a shared map.
#[derive(Clone, Copy, Debug)]
pub struct PairRef<'a> {
    pub source: Cell,
    pub target: Cell,
    pub gt_path: &'a PathMask,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairOutcome {
    pub y: PathMask,
    pub e: PathMask,
    pub loss: LossParts,
}

/// Summed over the pairs of one map. Gradients are flat, in checkpoint order.
#[derive(Clone, Debug, PartialEq)]
pub struct MapGradients {
    pub outcomes: Vec<PairOutcome>,
    pub cost_grad: Vec<f64>,
    pub heuristic_grad: Vec<f64>,
}

fn add_into(acc: &mut [f64], g: &[f64]) {
    for (a, b) in acc.iter_mut().zip(g) {
        *a += b;
    }
}

/// Removes from `g` its component along `dir`.
fn project_out(g: &mut Field, dir: &Field) {
    let norm: f64 = dir.values().iter().map(|d| d * d).sum();
    if norm == 0.0 {
        return;
    }
    let c = g.values().iter().zip(dir.values()).map(|(a, d)| a * d).sum::<f64>() / norm;
    for (a, d) in g.values_mut().iter_mut().zip(dir.values()) {
        *a -= c * d;
    }
}

fn nonzero(f: &Field) -> bool {
    f.values().iter().any(|&v| v != 0.0)
}

fn backward_into(enc: &Encoder, tape: &crate::nn::EncoderTape, grad: Tensor, acc: &mut [f64]) -> Result<(), PipelineError> {
    let (_, flat) = enc.backward(tape, &grad)?;
    add_into(acc, &flat);
    Ok(())
}

fn grid_tensor(shape: Shape, f: &Field) -> Tensor {
    Tensor::new(vec![shape.height, shape.width], f.values().to_vec()).expect("grid-shaped field")
}

/// Groups pair indices by target, keeping first-appearance order.
fn by_target(pairs: &[PairRef<'_>]) -> Vec<(Cell, Vec<usize>)> {
    let mut groups: Vec<(Cell, Vec<usize>)> = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        match groups.iter_mut().find(|(t, _)| *t == p.target) {
            Some((_, v)) => v.push(i),
            None => groups.push((p.target, vec![i])),
        }
    }
    groups
}

/// Forward and backward for every pair of one map.
pub fn map_gradients(model: &Model, image: &Tensor, pairs: &[PairRef<'_>], eps: EpsilonParam) -> Result<MapGradients, PipelineError> {
    model.check_image(image)?;
    let cfg = &model.config;
    let shape = model.grid;
    let n = shape.len() as f64;
    let tau = model.tau();
    let mut cost_grad = vec![0.0; model.cost_encoder.num_params()];
    let mut heuristic_grad = vec![0.0; model.heuristic_encoder.as_ref().map_or(0, Encoder::num_params)];
    let mut outcomes = Vec::with_capacity(pairs.len());

    match model.variant() {
        Variant::Nwa | Variant::Bba => {
            // target-agnostic costs: one cost forward per map
            let (costs, tape_w) = model.forward_costs(image, pairs[0].source, pairs[0].target)?;
            let mut grad_w = Field::zeros(shape);
            let mut ys = Vec::with_capacity(pairs.len());
            for p in pairs {
                let (y, ctx) = blackbox_forward(&costs, cfg.w_min, p.source, p.target, cfg.lambda)?;
                if cfg.alpha > 0.0 {
                    // the perturbation follows a Hamming loss summed over the
                    // pairs of a map and averaged over the maps of a batch;
                    // the result is rescaled to the per-cell mean loss that
                    // is reported
                    let per_map = cfg.alpha * pairs.len() as f64 / cfg.batch_size as f64;
                    let g = blackbox_backward(&ctx, &hamming_grad(p.gt_path, per_map, false))?;
                    let k = n / cfg.batch_size as f64;
                    for (a, b) in grad_w.values_mut().iter_mut().zip(g.values()) {
                        *a += b / k;
                    }
                }
                ys.push(y);
            }
            let mut es: Vec<Option<PathMask>> = vec![None; pairs.len()];
            if let Some(enc_h) = &model.heuristic_encoder {
                let w_const = GridCosts::new(stop_gradient(costs.field()))?;
                for (target, idx) in by_target(pairs) {
                    let (h_map, tape_h) = enc_h.forward(&model.heuristic_input(image, target)?)?;
                    let h_neural = field_from_map(h_map, shape);
                    let hc = h_chebyshev(cfg.w_min, target, shape)?;
                    let h_eps = build_h_epsilon(&h_neural, &hc, eps)?;
                    let mut grad_h = Field::zeros(shape);
                    for i in idx {
                        let p = &pairs[i];
                        let (e, trace) = neural_astar_forward(&w_const, &h_eps, p.source, p.target, tau)?;
                        if cfg.beta > 0.0 && eps.value() > 0.0 {
                            let g_heps = neural_astar_backward(&trace, &hamming_grad(p.gt_path, cfg.beta, true))?;
                            // dH_eps/dh = eps * H_C
                            for ((a, g), c) in grad_h.values_mut().iter_mut().zip(g_heps.values()).zip(hc.field().values()) {
                                *a += eps.value() * c * g;
                            }
                        }
                        es[i] = Some(e);
                    }
                    if nonzero(&grad_h) {
                        backward_into(enc_h, &tape_h, grid_tensor(shape, &grad_h), &mut heuristic_grad)?;
                    }
                }
            }
            // scaling every cost by the same factor leaves the solution
            // unchanged, so that direction carries no signal; without this
            // the costs drift down to w_min
            project_out(&mut grad_w, costs.field());
            if nonzero(&grad_w) {
                backward_into(&model.cost_encoder, &tape_w, model.cost_grad_to_sigmoid(&grad_w), &mut cost_grad)?;
            }
            for ((p, y), e) in pairs.iter().zip(ys).zip(es) {
                let gt = p.gt_path.to_field();
                let path = hamming_loss(&gt, &y.to_field())?;
                let (exp, e) = match e {
                    Some(e) => (hamming_loss(&gt, &e.to_field())?, e),
                    // the black-box-only baseline has no expansion term
                    None => (0.0, PathMask::empty(shape)),
                };
                let total = match model.variant() {
                    Variant::Nwa => cfg.alpha * path + cfg.beta * exp,
                    _ => cfg.alpha * path,
                };
                outcomes.push(PairOutcome { y, e, loss: LossParts { total, path, exp } });
            }
        }
        Variant::Na | Variant::AdmNa | Variant::NsNa => {
            // costs depend on the target (and source): one forward per pair
            for p in pairs {
                let (costs, tape) = model.forward_costs(image, p.source, p.target)?;
                let h = match model.variant() {
                    Variant::Na => h_na(p.target, shape)?,
                    _ => h_chebyshev(costs.min(), p.target, shape)?,
                };
                let (e, trace) = neural_astar_forward(&costs, &h, p.source, p.target, tau)?;
                if cfg.beta > 0.0 {
                    let g = neural_astar_backward_costs(&trace, &hamming_grad(p.gt_path, cfg.beta, true))?;
                    if nonzero(&g) {
                        backward_into(&model.cost_encoder, &tape, model.cost_grad_to_sigmoid(&g), &mut cost_grad)?;
                    }
                }
                let gt = p.gt_path.to_field();
                let y = trace.path_mask();
                let path = hamming_loss(&gt, &y.to_field())?;
                let exp = hamming_loss(&gt, &e.to_field())?;
                outcomes.push(PairOutcome { y, e, loss: LossParts { total: cfg.beta * exp, path, exp } });
            }
        }
    }
    Ok(MapGradients { outcomes, cost_grad, heuristic_grad })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutput {
    pub y: PathMask,
    pub e: PathMask,
    pub loss: LossParts,
    pub cost_grad: Vec<f64>,
    pub heuristic_grad: Vec<f64>,
}

/// Loss and parameter gradients for a single sample.
pub fn forward_train(model: &Model, sample: &MapSample<'_>, eps: EpsilonParam) -> Result<TrainOutput, PipelineError> {
    let image = sample.image.to_tensor();
    let pair = PairRef { source: sample.source, target: sample.target, gt_path: sample.gt_path };
    let mut g = map_gradients(model, &image, &[pair], eps)?;
    let o = g.outcomes.pop().expect("one pair in, one outcome out");
    Ok(TrainOutput { y: o.y, e: o.e, loss: o.loss, cost_grad: g.cost_grad, heuristic_grad: g.heuristic_grad })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub step: u64,
    pub epoch: usize,
    pub eps: f64,
    pub loss_total: f64,
    pub loss_path: f64,
    pub loss_exp: f64,
}

pub fn write_loss_csv<W: std::io::Write>(rows: &[LossRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

struct Optimisers {
    cost: Adam,
    heuristic: Adam,
}

fn apply(model: &mut Model, opt: &mut Optimisers, cost_grad: &[f64], heuristic_grad: &[f64]) {
    model.cost_encoder.zero_grad();
    model.cost_encoder.accumulate_flat_grad(cost_grad);
    opt.cost.step(model.cost_encoder.params_mut());
    if let Some(h) = &mut model.heuristic_encoder {
        h.zero_grad();
        h.accumulate_flat_grad(heuristic_grad);
        opt.heuristic.step(h.params_mut());
    }
}

/// Trains a fresh model of `cfg.variant`.
pub fn train(data: &Dataset, cfg: &NwaConfig, epochs: usize, seed: u64) -> Result<(Model, Vec<LossRow>), PipelineError> {
    let first = data.maps.first().ok_or(PipelineError::EmptyDataset)?;
    let tile = first.image.height / data.shape.height;
    let mut model = Model::new(cfg, data.shape, tile, seed)?;
    let log = train_with(&mut model, data, epochs, seed, |_| {})?;
    Ok((model, log))
}

/// Continues training `model` for `epochs` epochs. Each optimiser step uses a
/// batch of whole maps with all their pairs and a single `eps` drawn
/// uniformly from the configured range. Map order is reshuffled every epoch.
pub fn train_with(
    model: &mut Model,
    data: &Dataset,
    epochs: usize,
    seed: u64,
    mut on_step: impl FnMut(&LossRow),
) -> Result<Vec<LossRow>, PipelineError> {
    if data.is_empty() || data.maps.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    if data.shape != model.grid {
        return Err(PipelineError::Incompatible(format!("dataset grid {} but model grid {}", data.shape, model.grid)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let images: Vec<Tensor> = data.maps.iter().map(|m| m.image.to_tensor()).collect();
    let mut pairs_of: Vec<Vec<PairRef<'_>>> = vec![Vec::new(); data.maps.len()];
    for p in &data.pairs {
        pairs_of[p.map].push(PairRef { source: p.source, target: p.target, gt_path: &p.path });
    }
    let usable: Vec<usize> = (0..data.maps.len()).filter(|&m| !pairs_of[m].is_empty()).collect();
    let per_map = data.len() as f64 / usable.len() as f64;
    let maps_per_batch = ((model.config.batch_size as f64 / per_map).round() as usize).max(1);
    let (lo, hi) = model.config.eps_train_range;
    let mut opt = Optimisers { cost: Adam::new(model.config.adam()), heuristic: Adam::new(model.config.adam()) };
    let mut log = Vec::new();

    for epoch in 0..epochs {
        let mut order = usable.clone();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        for batch in order.chunks(maps_per_batch) {
            let eps = EpsilonParam::new(if hi > lo { rng.gen_range(lo..=hi) } else { lo })?;
            let results = batch
                .par_iter()
                .map(|&m| map_gradients(model, &images[m], &pairs_of[m], eps))
                .collect::<Result<Vec<_>, _>>()?;
            // fixed reduction order keeps runs identical across thread counts
            let mut cost_grad = vec![0.0; model.cost_encoder.num_params()];
            let mut heuristic_grad = vec![0.0; model.heuristic_encoder.as_ref().map_or(0, Encoder::num_params)];
            let mut sum = LossParts::default();
            let mut count = 0usize;
            for r in &results {
                add_into(&mut cost_grad, &r.cost_grad);
                add_into(&mut heuristic_grad, &r.heuristic_grad);
                for o in &r.outcomes {
                    sum.total += o.loss.total;
                    sum.path += o.loss.path;
                    sum.exp += o.loss.exp;
                    count += 1;
                }
            }
            let inv = 1.0 / count as f64;
            for g in cost_grad.iter_mut().chain(heuristic_grad.iter_mut()) {
                *g *= inv;
            }
            let row = LossRow {
                step: model.step + 1,
                epoch: model.epochs,
                eps: eps.value(),
                loss_total: sum.total * inv,
                loss_path: sum.path * inv,
                loss_exp: sum.exp * inv,
            };
            let finite = row.loss_total.is_finite() && cost_grad.iter().chain(&heuristic_grad).all(|g| g.is_finite());
            if !finite {
                return Err(PipelineError::Divergent {
                    step: row.step,
                    detail: format!("loss {} at epoch {epoch}, eps {}", row.loss_total, row.eps),
                });
            }
            apply(model, &mut opt, &cost_grad, &heuristic_grad);
            if !model.flat_params().iter().all(|p| p.is_finite()) {
                return Err(PipelineError::Divergent { step: row.step, detail: "non-finite parameters after update".into() });
            }
            model.step += 1;
            on_step(&row);
            log.push(row);
        }
        model.epochs += 1;
    }
    Ok(log)
}
