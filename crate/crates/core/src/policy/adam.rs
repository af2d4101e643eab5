//! Adaptive-moment optimizer over flat parameter vectors.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimizerState {
    pub fn new(n_params: usize, step_size: f64) -> Self {
        OptimizerState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            step_size,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam step, descending along `grad`.
pub fn apply_gradient(params: &mut [f64], grad: &[f64], opt: &mut OptimizerState) -> Result<()> {
    if params.len() != grad.len() || opt.m.len() != grad.len() || opt.v.len() != grad.len() {
        return Err(Error::invalid(format!(
            "shape mismatch: {} params, {} grads, {} moments",
            params.len(),
            grad.len(),
            opt.m.len()
        )));
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("non-finite gradient at index {i}")));
    }
    opt.t += 1;
    let bc1 = 1.0 - opt.beta1.powi(opt.t as i32);
    let bc2 = 1.0 - opt.beta2.powi(opt.t as i32);
    for i in 0..params.len() {
        let g = grad[i];
        opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * g;
        opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * g * g;
        let m_hat = opt.m[i] / bc1;
        let v_hat = opt.v[i] / bc2;
        params[i] -= opt.step_size * m_hat / (v_hat.sqrt() + opt.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut p = vec![1.0, -2.0];
        let mut opt = OptimizerState::new(2, 0.1);
        opt.m = vec![0.5, 0.5];
        opt.v = vec![0.25, 0.25];
        apply_gradient(&mut p, &[0.0, 0.0], &mut opt).unwrap();
        assert_eq!(opt.m, vec![0.45, 0.45]);
        assert!(opt.v[0] < 0.25);
        // the bias-corrected moment still moves p
        assert_ne!(p, vec![1.0, -2.0]);

        let mut p = vec![1.0, -2.0];
        let mut fresh = OptimizerState::new(2, 0.1);
        apply_gradient(&mut p, &[0.0, 0.0], &mut fresh).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(fresh.t, 1);
    }

    #[test]
    fn first_step_moves_by_step_size() {
        let mut p = vec![0.0];
        let mut opt = OptimizerState::new(1, 0.01);
        apply_gradient(&mut p, &[1.0], &mut opt).unwrap();
        assert!((p[0].abs() - 0.01).abs() < 1e-6);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = vec![0.3, 0.1, -0.7];
            let mut opt = OptimizerState::new(3, 0.05);
            for i in 0..5 {
                apply_gradient(&mut p, &[0.1 * i as f64, -1.0, 2.0], &mut opt).unwrap();
            }
            (p, opt)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn nan_gradient_rejected() {
        let mut p = vec![0.0];
        let mut opt = OptimizerState::new(1, 0.01);
        assert!(matches!(apply_gradient(&mut p, &[f64::NAN], &mut opt), Err(Error::Numeric(_))));
        assert_eq!(p, vec![0.0]);
        assert_eq!(opt.t, 0);
    }
}
