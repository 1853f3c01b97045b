use crate::linalg::DenseMatrix;
use crate::propagate::Param;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// One Adam update of a single tensor at step `t` (1-based). Weight decay is
/// decoupled: `p ← p − lr·wd·p` before the moment update.
pub fn adam_update(
    param: &mut DenseMatrix,
    grad: &DenseMatrix,
    m: &mut DenseMatrix,
    v: &mut DenseMatrix,
    t: u64,
    cfg: &AdamConfig,
    decay: bool,
) {
    assert_eq!(param.shape(), grad.shape(), "gradient shape must match parameter");
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    let wd = if decay { cfg.lr * cfg.weight_decay } else { 0.0 };
    let p = param.data_mut().iter_mut();
    for (((p, g), m), v) in p.zip(grad.data()).zip(m.data_mut()).zip(v.data_mut()) {
        *p -= wd * *p;
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

/// Optimiser state for a fixed list of tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<DenseMatrix>,
    v: Vec<DenseMatrix>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Update every `(param, decay)` pair from its gradient slot.
    pub fn step(&mut self, tensors: Vec<(&mut Param, bool)>) {
        if self.m.is_empty() {
            for (p, _) in &tensors {
                self.m.push(DenseMatrix::zeros(p.value.rows(), p.value.cols()));
                self.v.push(DenseMatrix::zeros(p.value.rows(), p.value.cols()));
            }
        }
        assert_eq!(self.m.len(), tensors.len(), "tensor list changed between steps");
        self.t += 1;
        for (k, (p, decay)) in tensors.into_iter().enumerate() {
            adam_update(
                &mut p.value,
                &p.grad,
                &mut self.m[k],
                &mut self.v[k],
                self.t,
                &self.config,
                decay,
            );
        }
    }
}
