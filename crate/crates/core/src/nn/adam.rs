//! Adam optimizer with bias correction.

use serde::{Deserialize, Serialize};

use super::{MlpGrads, MlpParams};

/// First/second moment accumulators for one network, stored flat in layer
/// order (weights, then biases, per layer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(params: &MlpParams) -> Self {
        let n = params.param_count();
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
        }
    }
}

/// One Adam update over every parameter of the network.
pub fn adam_step(params: &mut MlpParams, grads: &MlpGrads, state: &mut AdamState, learning_rate: f64) {
    assert_eq!(params.layers.len(), grads.layers.len(), "gradient layout mismatch");
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - state.beta1.powi(t);
    let bias2 = 1.0 - state.beta2.powi(t);

    let mut offset = 0;
    for (layer, layer_grads) in params.layers.iter_mut().zip(&grads.layers) {
        let values = layer.weights.iter_mut().chain(layer.biases.iter_mut());
        let grads = layer_grads.d_weights.iter().chain(layer_grads.d_biases.iter());
        for (value, grad) in values.zip(grads) {
            let m = &mut state.first_moment[offset];
            let v = &mut state.second_moment[offset];
            *m = state.beta1 * *m + (1.0 - state.beta1) * grad;
            *v = state.beta2 * *v + (1.0 - state.beta2) * grad * grad;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *value -= learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
            offset += 1;
        }
    }
    debug_assert_eq!(offset, state.first_moment.len());
}
