//! Adam on flat parameter vectors. The splat and flow modules both wrap
//! this with their own parameter layouts.

/// First/second moment state plus the shared step counter.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            step: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Grows the state with zero moments for newly appended parameters.
    pub fn grow(&mut self, dim: usize) {
        if dim > self.m.len() {
            self.m.resize(dim, 0.0);
            self.v.resize(dim, 0.0);
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamParams {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update over the full vector. Increments the step counter.
///
/// Non-finite gradient entries leave the corresponding parameter and its
/// moments untouched; the number of skipped entries is returned.
pub fn adam_step_flat(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    cfg: &AdamParams,
) -> usize {
    assert_eq!(params.len(), grads.len(), "grad/param length mismatch");
    assert_eq!(params.len(), state.len(), "state/param length mismatch");
    state.step += 1;
    let t = state.step as f64;
    let bias1 = 1.0 - cfg.beta1.powf(t);
    let bias2 = 1.0 - cfg.beta2.powf(t);
    let mut skipped = 0;
    for i in 0..params.len() {
        let g = grads[i];
        if !g.is_finite() {
            skipped += 1;
            continue;
        }
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / bias1;
        let v_hat = state.v[i] / bias2;
        params[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    skipped
}
