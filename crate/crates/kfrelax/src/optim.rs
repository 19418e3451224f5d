//! First-order optimizers: plain SGD and bias-corrected Adam.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Adam moment accumulators for one flat parameter block.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step_count: u64,
}

impl AdamState {
    /// Standard defaults: β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(len: usize) -> Self {
        AdamState::with_betas(len, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(len: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        assert!((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2));
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            beta1,
            beta2,
            eps,
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// `p ← p − lr·g`, elementwise.
pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64) {
    assert_eq!(params.len(), grads.len(), "sgd_step: shape mismatch");
    assert!(lr > 0.0, "sgd_step: learning rate must be positive");
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
}

/// Bias-corrected Adam update: `p ← p − lr·m̂/(√v̂ + ε)`.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64], lr: f64) {
    assert_eq!(params.len(), grads.len(), "adam_step: shape mismatch");
    assert_eq!(params.len(), state.m.len(), "adam_step: state shape mismatch");
    assert!(lr > 0.0, "adam_step: learning rate must be positive");
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - powi(state.beta1, t);
    let bc2 = 1.0 - powi(state.beta2, t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let mhat = state.m[i] / bc1;
        let vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (math::sqrt(vhat) + state.eps);
    }
}

fn powi(base: f64, exp: i32) -> f64 {
    let mut out = 1.0;
    for _ in 0..exp {
        out *= base;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sgd_cases() {
        let mut p = [1.0];
        sgd_step(&mut p, &[0.5], 0.1);
        assert!((p[0] - 0.95).abs() < 1e-15);

        let mut p = [0.3, -0.7];
        sgd_step(&mut p, &[0.0, 0.0], 0.1);
        assert_eq!(p, [0.3, -0.7]);

        let mut p = [0.0];
        sgd_step(&mut p, &[1.0], 0.1);
        sgd_step(&mut p, &[1.0], 0.1);
        assert!((p[0] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        for g in [0.3, -2.0, 100.0] {
            let mut st = AdamState::with_betas(1, 0.9, 0.999, 1e-12);
            let mut p = [0.0];
            adam_step(&mut st, &mut p, &[g], 0.01);
            assert!(
                (p[0] + 0.01 * g.signum()).abs() < 1e-9,
                "g={g} gave step {}",
                p[0]
            );
        }
    }

    #[test]
    fn adam_zero_gradient_never_moves() {
        let mut st = AdamState::new(2);
        let mut p = [1.5, -0.5];
        for _ in 0..50 {
            adam_step(&mut st, &mut p, &[0.0, 0.0], 0.1);
        }
        assert_eq!(p, [1.5, -0.5]);
    }

    #[test]
    fn adam_two_identical_steps() {
        let mut st = AdamState::new(1);
        let mut p = [0.0];
        adam_step(&mut st, &mut p, &[1.0], 0.01);
        adam_step(&mut st, &mut p, &[1.0], 0.01);
        assert!((p[0] + 0.02).abs() < 1e-6, "cumulative {}", p[0]);
    }

    proptest! {
        // For constant-magnitude gradient streams the per-coordinate step is
        // bounded by lr.
        #[test]
        fn adam_constant_gradient_step_bounded_by_lr(
            g in -50.0f64..50.0,
            lr in 1e-4f64..0.5,
            steps in 1usize..60,
        ) {
            prop_assume!(g.abs() > 1e-6);
            let mut st = AdamState::new(1);
            let mut p = [0.0f64];
            for _ in 0..steps {
                let before = p[0];
                adam_step(&mut st, &mut p, &[g], lr);
                prop_assert!((p[0] - before).abs() <= lr * (1.0 + 1e-9));
            }
        }

        // For arbitrary gradient streams the worst-case per-step bound is
        // lr·(1−β1)/√(1−β2) (≈ 3.163·lr at the defaults), attained after a
        // long quiet stretch followed by a spike.
        #[test]
        fn adam_step_bounded_worst_case(
            gs in proptest::collection::vec(-100.0f64..100.0, 1..40),
            lr in 1e-4f64..0.5,
        ) {
            let mut st = AdamState::new(1);
            let mut p = [0.0f64];
            let bound = lr * (1.0f64).max(0.1 / (0.001f64).sqrt()) * (1.0 + 1e-9);
            for g in gs {
                let before = p[0];
                adam_step(&mut st, &mut p, &[g], lr);
                prop_assert!((p[0] - before).abs() <= bound);
            }
        }

        #[test]
        fn sgd_linear_in_lr_and_grads(
            g in -10.0f64..10.0,
            lr in 1e-4f64..1.0,
            scale in 0.1f64..10.0,
        ) {
            let mut p1 = [0.0f64];
            sgd_step(&mut p1, &[g * scale], lr);
            let mut p2 = [0.0f64];
            sgd_step(&mut p2, &[g], lr * scale);
            prop_assert!((p1[0] - p2[0]).abs() <= 1e-12 * p1[0].abs().max(1.0));
        }
    }
}
