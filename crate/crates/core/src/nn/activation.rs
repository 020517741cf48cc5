use super::{NnError, Tensor};

pub fn relu_forward(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// `x` is the forward input.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Result<Tensor, NnError> {
    x.zip_map(grad_out, |v, g| if v > 0.0 { g } else { 0.0 })
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_forward(x: &Tensor) -> Tensor {
    x.map(sigmoid)
}

/// `y` is the forward output.
pub fn sigmoid_backward(y: &Tensor, grad_out: &Tensor) -> Result<Tensor, NnError> {
    y.zip_map(grad_out, |s, g| g * s * (1.0 - s))
}

/// Affine map of `[0, 1]` onto `[lo, hi]`.
pub fn minmax_scale(x: &Tensor, lo: f64, hi: f64) -> Result<Tensor, NnError> {
    check_range(lo, hi)?;
    Ok(x.map(|v| lo + (hi - lo) * v))
}

pub fn minmax_scale_backward(grad_out: &Tensor, lo: f64, hi: f64) -> Result<Tensor, NnError> {
    check_range(lo, hi)?;
    Ok(grad_out.map(|g| (hi - lo) * g))
}

fn check_range(lo: f64, hi: f64) -> Result<(), NnError> {
    if !(lo > 0.0) {
        return Err(NnError::Invalid(format!("lower bound must be > 0, found {lo}")));
    }
    if !(hi > lo) {
        return Err(NnError::Invalid(format!("upper bound {hi} must exceed lower bound {lo}")));
    }
    Ok(())
}
