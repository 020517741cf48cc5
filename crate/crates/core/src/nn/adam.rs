use super::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, cfg: &AdamConfig) {
    assert_eq!(params.len(), grads.len());
    if state.m.len() != params.len() {
        *state = AdamState::new(params.len());
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Adam over a fixed, ordered list of parameter tensors, reading their
/// accumulated gradients.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam { config, states: Vec::new() }
    }

    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Tensor>) {
        for (k, tensor) in params.into_iter().enumerate() {
            if self.states.len() <= k {
                self.states.push(AdamState::new(tensor.len()));
            }
            let (values, grad) = tensor.values_and_grad_mut();
            adam_step(values, grad, &mut self.states[k], &self.config);
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.states.first().map_or(0, |s| s.step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_sign() {
        let cfg = AdamConfig::default();
        let mut p = vec![1.0, -2.0, 0.5];
        let g = [3.0, -0.2, 50.0];
        let mut st = AdamState::new(3);
        adam_step(&mut p, &g, &mut st, &cfg);
        for (after, (before, gi)) in p.iter().zip([1.0, -2.0, 0.5].iter().zip(g)) {
            let expected = before - cfg.lr * gi.signum();
            assert!((after - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![0.3, 0.7];
        let mut st = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut st, &AdamConfig::default());
        assert_eq!(p, vec![0.3, 0.7]);
    }

    #[test]
    fn deterministic_trajectory() {
        let run = || {
            let mut p = vec![1.0, 2.0, 3.0];
            let mut st = AdamState::new(3);
            for k in 0..100 {
                let g: Vec<f64> = p.iter().map(|x| 2.0 * x + (k as f64).sin()).collect();
                adam_step(&mut p, &g, &mut st, &AdamConfig::default());
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut t = Tensor::new(vec![2], vec![3.0, -4.0]).unwrap();
        let mut opt = Adam::new(AdamConfig { lr: 0.05, ..AdamConfig::default() });
        for _ in 0..2000 {
            let g: Vec<f64> = t.values().iter().map(|x| 2.0 * x).collect();
            t.zero_grad();
            t.accumulate_grad(&g);
            opt.step([&mut t]);
        }
        assert!(t.values().iter().all(|x| x.abs() < 1e-2));
        assert_eq!(opt.steps_taken(), 2000);
    }
}
