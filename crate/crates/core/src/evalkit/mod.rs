//! Path-quality and search-effort metrics, source resampling for the
//! generalized metrics, and eps sweeps over one or more trained restarts.

use crate::datagen::{resample_source, Dataset, DatasetManifest, MapSample};
use crate::grid::{path_cost, Cell, GridCosts, GridError, PathMask};
use crate::pipeline::{EpsilonParam, Model, PipelineError, Prediction, Variant};
use crate::search::{dijkstra_oracle, SearchError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Ratios below `1 - ORACLE_TOLERANCE` mean the reference path was not optimal.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

/// The grid used for the tradeoff curves.
pub const DEFAULT_EPS: [f64; 6] = [0.0, 1.0, 4.0, 9.0, 11.0, 14.0];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("reference path is not optimal: cost ratio {ratio}")]
    BrokenOracle { ratio: f64 },
    #[error("incompatible inputs: {0}")]
    Incompatible(String),
    #[error("eps list must be non-empty, non-negative and non-decreasing, got {0:?}")]
    EpsList(Vec<f64>),
}

/// `<W_gt, Y> / <W_gt, Y_gt>` for a reference path `y_gt` optimal under `gt_costs`.
pub fn cost_ratio(gt_costs: &GridCosts, y_pred: &PathMask, y_gt: &PathMask) -> Result<f64, EvalError> {
    let ratio = path_cost(gt_costs, y_pred)? / path_cost(gt_costs, y_gt)?;
    if ratio < 1.0 - ORACLE_TOLERANCE {
        return Err(EvalError::BrokenOracle { ratio });
    }
    Ok(ratio)
}

pub fn expanded_nodes(e: &PathMask) -> usize {
    e.count()
}

/// Plans on `prediction` with `eps` and scores against the ground truth.
fn score(prediction: &Prediction, sample: &MapSample<'_>, source: Cell, gt: &PathMask, eps: EpsilonParam) -> Result<(f64, usize), EvalError> {
    let r = prediction.plan(source, eps)?;
    Ok((cost_ratio(sample.gt_costs, &r.path_mask, gt)?, expanded_nodes(&r.expansions)))
}

/// The resampled source for instance `index` and its oracle path. Each
/// instance has its own rng stream, so draws do not depend on evaluation
/// order. The original source is kept when the rule admits no other cell.
pub fn resampled_instance(manifest: &DatasetManifest, sample: &MapSample<'_>, index: usize, seed: u64) -> Result<(Cell, PathMask), EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let source = resample_source(manifest, sample.gt_costs, sample.target, &mut rng).unwrap_or(sample.source);
    let gt = dijkstra_oracle(sample.gt_costs, source, sample.target)?.path_mask;
    Ok((source, gt))
}

/// Cost ratio after replacing the source with a fresh draw from the
/// dataset's sampling rule; the reference path is recomputed by the oracle.
pub fn generalized_cost_ratio(
    model: &Model,
    manifest: &DatasetManifest,
    sample: &MapSample<'_>,
    index: usize,
    eps: EpsilonParam,
    seed: u64,
) -> Result<f64, EvalError> {
    Ok(generalized(model, manifest, sample, index, eps, seed)?.0)
}

/// Expanded nodes after the same resampling as [`generalized_cost_ratio`].
pub fn generalized_expanded_nodes(
    model: &Model,
    manifest: &DatasetManifest,
    sample: &MapSample<'_>,
    index: usize,
    eps: EpsilonParam,
    seed: u64,
) -> Result<usize, EvalError> {
    Ok(generalized(model, manifest, sample, index, eps, seed)?.1)
}

fn generalized(
    model: &Model,
    manifest: &DatasetManifest,
    sample: &MapSample<'_>,
    index: usize,
    eps: EpsilonParam,
    seed: u64,
) -> Result<(f64, usize), EvalError> {
    let (source, gt) = resampled_instance(manifest, sample, index, seed)?;
    let p = model.predict(&sample.image.to_tensor(), source, sample.target)?;
    score(&p, sample, source, &gt, eps)
}

/// All four metrics of one test instance at one eps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance_id: usize,
    pub eps: f64,
    pub cr: f64,
    pub en: usize,
    pub gen_cr: f64,
    pub gen_en: usize,
}

/// Scores one model on every instance for every eps. The networks run once
/// per instance (twice when the costs read the source); only the search
/// is repeated per eps.
pub fn evaluate_model(
    model: &Model,
    test: &Dataset,
    manifest: &DatasetManifest,
    eps_list: &[f64],
    seed: u64,
) -> Result<Vec<InstanceRecord>, EvalError> {
    let eps = check_eps(eps_list)?;
    check_compatible(model, test)?;
    let per_instance = (0..test.len())
        .into_par_iter()
        .map(|i| {
            let s = test.sample(i);
            let image = s.image.to_tensor();
            let p = model.predict(&image, s.source, s.target)?;
            let (gen_source, gen_gt) = resampled_instance(manifest, &s, i, seed)?;
            let gen_p = if p.source.is_some() { model.predict(&image, gen_source, s.target)? } else { p.clone() };
            eps.iter()
                .map(|&e| {
                    let (cr, en) = score(&p, &s, s.source, s.gt_path, e)?;
                    let (gen_cr, gen_en) = score(&gen_p, &s, gen_source, &gen_gt, e)?;
                    Ok(InstanceRecord { instance_id: i, eps: e.value(), cr, en, gen_cr, gen_en })
                })
                .collect::<Result<Vec<_>, EvalError>>()
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    // eps-major order
    let mut out = Vec::with_capacity(test.len() * eps.len());
    for k in 0..eps.len() {
        out.extend(per_instance.iter().map(|v| v[k].clone()));
    }
    Ok(out)
}

fn check_eps(eps_list: &[f64]) -> Result<Vec<EpsilonParam>, EvalError> {
    let ok = !eps_list.is_empty() && eps_list.windows(2).all(|w| w[0] <= w[1]);
    let parsed: Result<Vec<_>, _> = eps_list.iter().map(|&e| EpsilonParam::new(e)).collect();
    match parsed {
        Ok(v) if ok => Ok(v),
        _ => Err(EvalError::EpsList(eps_list.to_vec())),
    }
}

fn check_compatible(model: &Model, test: &Dataset) -> Result<(), EvalError> {
    if model.grid != test.shape {
        return Err(EvalError::Incompatible(format!("model grid {} but dataset grid {}", model.grid, test.shape)));
    }
    if let Some(m) = test.maps.first() {
        let expected = model.grid.height * model.tile;
        if m.image.height != expected || m.image.width != model.grid.width * model.tile {
            return Err(EvalError::Incompatible(format!(
                "model expects {expected}-pixel images but dataset has {}x{}",
                m.image.height, m.image.width
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Mean and sample standard deviation; the spread of a single value is 0.
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 { (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        Stat { mean, std }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    CostRatio,
    GenCostRatio,
    Expanded,
    GenExpanded,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::CostRatio, Metric::GenCostRatio, Metric::Expanded, Metric::GenExpanded];

    pub fn name(self) -> &'static str {
        match self {
            Metric::CostRatio => "cost_ratio",
            Metric::GenCostRatio => "gen_cost_ratio",
            Metric::Expanded => "expanded",
            Metric::GenExpanded => "gen_expanded",
        }
    }

    fn of(self, r: &InstanceRecord) -> f64 {
        match self {
            Metric::CostRatio => r.cr,
            Metric::GenCostRatio => r.gen_cr,
            Metric::Expanded => r.en as f64,
            Metric::GenExpanded => r.gen_en as f64,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Means over the test instances, with the spread taken across restarts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub variant: Variant,
    pub eps: f64,
    pub cost_ratio: Stat,
    pub gen_cost_ratio: Stat,
    pub expanded: Stat,
    pub gen_expanded: Stat,
    pub n_instances: usize,
    pub n_restarts: usize,
}

impl MetricRow {
    pub fn get(&self, metric: Metric) -> Stat {
        match metric {
            Metric::CostRatio => self.cost_ratio,
            Metric::GenCostRatio => self.gen_cost_ratio,
            Metric::Expanded => self.expanded,
            Metric::GenExpanded => self.gen_expanded,
        }
    }
}

/// Rows of a sweep plus, per restart, the per-instance records behind them.
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub rows: Vec<MetricRow>,
    pub instances: Vec<Vec<InstanceRecord>>,
}

/// Evaluates every restart of one variant at every eps. Restarts are
/// independently trained checkpoints; all of them see the same resampled
/// sources.
pub fn epsilon_sweep(
    restarts: &[Model],
    test: &Dataset,
    manifest: &DatasetManifest,
    eps_list: &[f64],
    seed: u64,
) -> Result<Sweep, EvalError> {
    let first = restarts.first().ok_or_else(|| EvalError::Incompatible("no checkpoints to evaluate".into()))?;
    if test.is_empty() {
        return Err(EvalError::Incompatible("test split is empty".into()));
    }
    let variant = first.variant();
    if let Some(m) = restarts.iter().find(|m| m.variant() != variant) {
        return Err(EvalError::Incompatible(format!("restarts mix variants {variant} and {}", m.variant())));
    }
    let instances = restarts.iter().map(|m| evaluate_model(m, test, manifest, eps_list, seed)).collect::<Result<Vec<_>, _>>()?;
    let n = test.len();
    let rows = eps_list
        .iter()
        .enumerate()
        .map(|(k, &eps)| {
            let stat = |metric: Metric| {
                let means: Vec<f64> =
                    instances.iter().map(|recs| recs[k * n..(k + 1) * n].iter().map(|r| metric.of(r)).sum::<f64>() / n as f64).collect();
                Stat::of(&means)
            };
            MetricRow {
                variant,
                eps,
                cost_ratio: stat(Metric::CostRatio),
                gen_cost_ratio: stat(Metric::GenCostRatio),
                expanded: stat(Metric::Expanded),
                gen_expanded: stat(Metric::GenExpanded),
                n_instances: n,
                n_restarts: restarts.len(),
            }
        })
        .collect();
    Ok(Sweep { rows, instances })
}

#[derive(Serialize)]
struct LongRow<'a> {
    variant: &'a str,
    eps: f64,
    metric: &'a str,
    mean: f64,
    std: f64,
    n: usize,
}

/// Long-format CSV, `variant,eps,metric,mean,std,n`; `n` counts instances.
pub fn write_sweep_csv<W: std::io::Write>(rows: &[MetricRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        for m in Metric::ALL {
            let s = r.get(m);
            w.serialize(LongRow { variant: r.variant.name(), eps: r.eps, metric: m.name(), mean: s.mean, std: s.std, n: r.n_instances })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One line per instance and eps: `instance_id,eps,cr,en,gen_cr,gen_en`.
pub fn write_instances_csv<W: std::io::Write>(records: &[InstanceRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
