use serde::{Deserialize, Serialize};

use crate::rnn::ForecastModel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment accumulators shaped exactly like the model they update.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m1: Vec<Vec<f64>>,
    pub m2: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(model: &ForecastModel, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = model.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        AdamState {
            config,
            m1: zeros.clone(),
            m2: zeros,
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `model` in place.
pub fn adam_step(model: &mut ForecastModel, grads: &ForecastModel, state: &mut AdamState) {
    state.t += 1;
    let AdamConfig {
        alpha,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.t as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    let grad_tensors = grads.tensors();
    for (((theta, g), m1), m2) in model
        .tensors_mut()
        .into_iter()
        .zip(grad_tensors)
        .zip(state.m1.iter_mut())
        .zip(state.m2.iter_mut())
    {
        for j in 0..theta.len() {
            let gj = g[j];
            m1[j] = beta1 * m1[j] + (1.0 - beta1) * gj;
            m2[j] = beta2 * m2[j] + (1.0 - beta2) * gj * gj;
            let m_hat = m1[j] / bc1;
            let v_hat = m2[j] / bc2;
            theta[j] -= alpha * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}
