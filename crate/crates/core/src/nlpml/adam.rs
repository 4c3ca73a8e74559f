use super::model::AdamConfig;

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, hyper: &AdamConfig) {
    state.t += 1;
    let c1 = 1.0 - hyper.beta1.powi(state.t as i32);
    let c2 = 1.0 - hyper.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
    }
}
