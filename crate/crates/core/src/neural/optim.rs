//! Global-norm gradient clipping and Adam with bias correction.

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;
pub const DEFAULT_CLIP_THRESHOLD: f64 = 1.0;
pub const DEFAULT_L2_ALPHA: f64 = 1e-4;
pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;

/// Global L2 norm of a gradient vector.
pub fn global_norm(grads: &[f64]) -> f64 {
    grads.iter().map(|g| g * g).sum::<f64>().sqrt()
}

/// Scales `grads` so its global L2 norm does not exceed `threshold`.
/// Returns the norm before clipping.
pub fn clip_gradients(grads: &mut [f64], threshold: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > threshold {
        let scale = threshold / norm;
        grads.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}

/// Adds the gradient of `alpha · Σθ²`.
pub fn add_l2_gradient(grads: &mut [f64], params: &[f64], alpha: f64) {
    for (g, p) in grads.iter_mut().zip(params) {
        *g += 2.0 * alpha * p;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}
