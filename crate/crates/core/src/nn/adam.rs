//! Adam with an L2 penalty folded into the gradient.

use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParameterStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Added to the gradient as `l2 * theta` before the moment updates.
    pub l2: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            l2: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new(params: &ParameterStore, config: AdamConfig) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|(_, _, v)| Tensor::zeros(v.rows(), v.cols()))
                .collect::<Vec<_>>()
        };
        OptimizerState {
            config,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update of every parameter in `params`.
pub fn adam_step(
    params: &mut ParameterStore,
    grads: &Gradients,
    state: &mut OptimizerState,
) -> Result<()> {
    if state.first.len() != params.len() {
        return Err(Error::Contract(format!(
            "optimizer tracks {} parameters, store has {}",
            state.first.len(),
            params.len()
        )));
    }
    let ids: Vec<_> = params.ids().collect();
    for &id in &ids {
        let i = id.index();
        let (p, g) = (params.get(id), grads.get(id));
        if p.shape() != g.shape() || state.first[i].shape() != p.shape() {
            return Err(Error::Contract(format!(
                "shape mismatch for `{}`: param {:?}, grad {:?}, moments {:?}",
                params.name(id),
                p.shape(),
                g.shape(),
                state.first[i].shape()
            )));
        }
    }

    state.step += 1;
    let AdamConfig {
        learning_rate: lr,
        beta1,
        beta2,
        epsilon,
        l2,
    } = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);

    for id in ids {
        let i = id.index();
        let g = grads.get(id).data();
        let m = state.first[i].data_mut();
        let v = state.second[i].data_mut();
        let p = params.get_mut(id).data_mut();
        for k in 0..p.len() {
            let gk = g[k] + l2 * p[k];
            m[k] = beta1 * m[k] + (1.0 - beta1) * gk;
            v[k] = beta2 * v[k] + (1.0 - beta2) * gk * gk;
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            p[k] -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(value: f64) -> ParameterStore {
        let mut s = ParameterStore::new();
        s.insert("x", Tensor::scalar(value)).unwrap();
        s
    }

    fn no_l2() -> AdamConfig {
        AdamConfig {
            l2: 0.0,
            ..AdamConfig::default()
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut p = single(0.7);
        let mut st = OptimizerState::new(&p, no_l2());
        let g = p.zero_grads();
        for _ in 0..5 {
            adam_step(&mut p, &g, &mut st).unwrap();
        }
        assert_eq!(p.get(p.id("x").unwrap()).item(), 0.7);
    }

    #[test]
    fn first_step_moves_by_learning_rate_against_gradient_sign() {
        // m̂ = g, v̂ = g², so Δ = -lr·g/(|g|+ε).
        for g0 in [3.0, -0.02, 1e-3] {
            let mut p = single(0.0);
            let mut st = OptimizerState::new(&p, no_l2());
            let mut g = p.zero_grads();
            let id = p.id("x").unwrap();
            g.get_mut(id).data_mut()[0] = g0;
            adam_step(&mut p, &g, &mut st).unwrap();
            let expected = -1e-5 * g0 / (g0.abs() + 1e-8);
            let got = p.get(id).item();
            assert!((got - expected).abs() < 1e-15, "g={g0}: {got} vs {expected}");
            assert!((got + 1e-5 * g0.signum()).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_gradient_update_approaches_learning_rate() {
        let mut p = single(0.0);
        let mut st = OptimizerState::new(&p, no_l2());
        let id = p.id("x").unwrap();
        let mut g = p.zero_grads();
        g.get_mut(id).data_mut()[0] = 0.5;
        let mut prev = 0.0;
        let mut last_delta = 0.0;
        for _ in 0..2000 {
            adam_step(&mut p, &g, &mut st).unwrap();
            let now = p.get(id).item();
            last_delta = prev - now;
            prev = now;
        }
        assert!((last_delta - 1e-5).abs() < 1e-9, "{last_delta}");
    }

    #[test]
    fn shape_mismatch_is_a_contract_violation() {
        let mut p = single(1.0);
        let mut st = OptimizerState::new(&p, no_l2());
        let mut other = ParameterStore::new();
        other.insert("x", Tensor::zeros(2, 2)).unwrap();
        let bad = other.zero_grads();
        assert!(matches!(
            adam_step(&mut p, &bad, &mut st),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn l2_penalty_pulls_toward_zero() {
        let mut p = single(2.0);
        let mut st = OptimizerState::new(
            &p,
            AdamConfig {
                l2: 0.1,
                ..AdamConfig::default()
            },
        );
        let g = p.zero_grads();
        adam_step(&mut p, &g, &mut st).unwrap();
        assert!(p.get(p.id("x").unwrap()).item() < 2.0);
    }
}
