use super::{EpsilonParam, PipelineError};
use crate::grid::{Field, PathMask};
use crate::search::HeuristicField;

/// `H_eps = (1 + eps * h_neural) * H_C`, cellwise.
pub fn build_h_epsilon(h_neural: &Field, h_c: &HeuristicField, eps: EpsilonParam) -> Result<HeuristicField, PipelineError> {
    h_c.shape().expect_same(h_neural.shape())?;
    let e = eps.value();
    let values = h_neural.values().iter().zip(h_c.field().values()).map(|(&h, &c)| (1.0 + e * h) * c).collect();
    Ok(HeuristicField::new(Field::new(h_c.shape(), values)?, h_c.target())?)
}

/// Mean absolute difference; on binary masks, the fraction of differing cells.
pub fn hamming_loss(a: &Field, b: &Field) -> Result<f64, PipelineError> {
    a.shape().expect_same(b.shape())?;
    let sum: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / a.values().len() as f64)
}

/// Gradient of `hamming_loss(target, x)` with respect to binary `x`,
/// scaled by `weight`: `weight * (1 - 2 target) / N` per cell.
pub fn hamming_grad(target: &PathMask, weight: f64, mean: bool) -> Field {
    let n = if mean { target.bits().len() as f64 } else { 1.0 };
    let values = target.bits().iter().map(|&t| weight * if t { -1.0 } else { 1.0 } / n).collect();
    Field::new(target.shape(), values).expect("mask shape")
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub total: f64,
    /// `L_H(Y_gt, Y)`.
    pub path: f64,
    /// `L_H(Y_gt, E)`.
    pub exp: f64,
}

pub fn total_loss(y_gt: &PathMask, y: &PathMask, e: &Field, alpha: f64, beta: f64) -> Result<LossParts, PipelineError> {
    let gt = y_gt.to_field();
    let path = hamming_loss(&gt, &y.to_field())?;
    let exp = hamming_loss(&gt, e)?;
    Ok(LossParts { total: alpha * path + beta * exp, path, exp })
}
