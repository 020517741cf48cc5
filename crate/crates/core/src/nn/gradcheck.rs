//! Central-difference gradient checking.

use super::Tensor;

/// Below this magnitude, differences are compared absolutely rather than
/// relative to the gradient size.
pub const RELATIVE_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Largest relative error between the analytic gradient returned by `f` and
/// central differences of its scalar output, perturbing every input entry by
/// `step`.
pub fn grad_check<F>(f: F, input: &Tensor, step: f64) -> f64
where
    F: Fn(&Tensor) -> (f64, Tensor),
{
    let (_, analytic) = f(input);
    assert_eq!(analytic.len(), input.len(), "gradient shape must match the input");
    let mut worst: f64 = 0.0;
    let mut probe = input.clone();
    for i in 0..input.len() {
        let orig = input.values()[i];
        probe.values_mut()[i] = orig + step;
        let plus = f(&probe).0;
        probe.values_mut()[i] = orig - step;
        let minus = f(&probe).0;
        probe.values_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * step);
        worst = worst.max(relative_error(analytic.values()[i], numeric));
    }
    worst
}
