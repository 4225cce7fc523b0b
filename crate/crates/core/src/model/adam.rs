use serde::{Deserialize, Serialize};

use super::ModelParams;
use crate::numerics::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    /// Coupled L2: added to the gradient before the moment updates.
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            weight_decay: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of every tensor using the gradients stored
/// in the params. `t` is the 1-based step count.
pub fn adam_step<T: Scalar>(params: &mut ModelParams<T>, cfg: &AdamConfig, t: u64) {
    assert!(t >= 1, "adam step count starts at 1");
    let c = |v: f64| T::from(v).unwrap();
    let (b1, b2) = (c(cfg.beta1), c(cfg.beta2));
    let (one, wd, lr, eps) = (T::one(), c(cfg.weight_decay), c(cfg.lr), c(cfg.eps));
    let bc1 = c(1.0 - cfg.beta1.powf(t as f64));
    let bc2 = c(1.0 - cfg.beta2.powf(t as f64));

    for p in params.tensors_mut() {
        let n = p.value.len();
        let (value, grad) = (p.value.as_mut_slice(), p.grad.as_slice());
        let (m, v) = (p.m.as_mut_slice(), p.v.as_mut_slice());
        for i in 0..n {
            let g = grad[i] + wd * value[i];
            m[i] = b1 * m[i] + (one - b1) * g;
            v[i] = b2 * v[i] + (one - b2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            value[i] = value[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    fn scalar_params(theta: f64, grad: f64) -> ModelParams<f64> {
        let mut p = ModelParams::from_values(std::array::from_fn(|_| Matrix::filled(1, 1, theta)));
        for t in p.tensors_mut() {
            t.grad = Matrix::filled(1, 1, grad);
        }
        p
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = scalar_params(1.0, 1.0);
        let cfg = AdamConfig {
            lr: 0.1,
            weight_decay: 0.0,
            ..Default::default()
        };
        adam_step(&mut p, &cfg, 1);
        // m̂ = 1, v̂ = 1 after bias correction
        let expected = 1.0 - 0.1 / (1.0 + 1e-8);
        for t in p.tensors() {
            assert!((t.value[(0, 0)] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn second_step_hand_trace() {
        let mut p = scalar_params(1.0, 1.0);
        let cfg = AdamConfig {
            lr: 0.1,
            weight_decay: 0.0,
            ..Default::default()
        };
        adam_step(&mut p, &cfg, 1);
        for t in p.tensors_mut() {
            t.grad = Matrix::filled(1, 1, -2.0);
        }
        adam_step(&mut p, &cfg, 2);
        let m = 0.9 * 0.1 + 0.1 * -2.0;
        let v = 0.999 * 0.001 + 0.001 * 4.0;
        let m_hat = m / (1.0 - 0.81);
        let v_hat = v / (1.0 - 0.999f64.powi(2));
        let expected = 1.0 - 0.1 / (1.0 + 1e-8) - 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p.w1.value[(0, 0)] - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut p = scalar_params(0.7, 0.0);
        let before = p.clone();
        adam_step(
            &mut p,
            &AdamConfig {
                weight_decay: 0.0,
                ..Default::default()
            },
            1,
        );
        for (a, b) in p.tensors().iter().zip(before.tensors()) {
            assert_eq!(a.value, b.value);
        }
    }

    #[test]
    fn weight_decay_is_coupled_into_gradient() {
        let mut p = scalar_params(2.0, 0.0);
        adam_step(
            &mut p,
            &AdamConfig {
                lr: 0.01,
                weight_decay: 0.5,
                ..Default::default()
            },
            1,
        );
        // g = 0 + 0.5·2 = 1 > 0, so the step shrinks θ by ≈ lr
        assert!((p.v.value[(0, 0)] - (2.0 - 0.01 / (1.0 + 1e-8))).abs() < 1e-12);
    }

    #[test]
    fn identical_tensors_evolve_identically() {
        let mut p = scalar_params(0.3, 0.25);
        for step in 1..=5 {
            adam_step(&mut p, &AdamConfig::default(), step);
        }
        let first = p.w1.value[(0, 0)];
        assert!(p.tensors().iter().all(|t| t.value[(0, 0)] == first));
    }
}
