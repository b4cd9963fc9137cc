//! Named parameters and the Adam optimizer.

use crate::tensor::Tensor2;

/// A trainable tensor with its gradient accumulator. Gradients are zeroed at
/// step boundaries by the optimizer.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor2,
    pub grad: Tensor2,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor2) -> Self {
        let grad = Tensor2::zeros(value.rows(), value.cols());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn accumulate(&mut self, grad: &Tensor2) {
        debug_assert_eq!(self.value.shape(), grad.shape());
        self.grad.add_assign(grad);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Standard Adam with bias correction. Moment buffers are indexed by the
/// position of each parameter in the slice handed to `step`, so the same
/// parameter order must be used on every call.
#[derive(Debug)]
pub struct Adam {
    pub cfg: AdamConfig,
    step: u64,
    m: Vec<Tensor2>,
    v: Vec<Tensor2>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, params: &[&Parameter]) -> Self {
        let m = params
            .iter()
            .map(|p| Tensor2::zeros(p.value.rows(), p.value.cols()))
            .collect();
        let v = params
            .iter()
            .map(|p| Tensor2::zeros(p.value.rows(), p.value.cols()))
            .collect();
        Self {
            cfg,
            step: 0,
            m,
            v,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update from the accumulated gradients; gradients are zeroed after.
    pub fn step(&mut self, params: &mut [&mut Parameter]) {
        assert_eq!(params.len(), self.m.len(), "parameter set changed size");
        self.step += 1;
        let t = self.step as i32;
        let c = &self.cfg;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            for ((mv, vv), (pv, gv)) in m
                .data_mut()
                .iter_mut()
                .zip(v.data_mut())
                .zip(p.value.data_mut().iter_mut().zip(p.grad.data()))
            {
                *mv = c.beta1 * *mv + (1.0 - c.beta1) * gv;
                *vv = c.beta2 * *vv + (1.0 - c.beta2) * gv * gv;
                let m_hat = *mv / bc1;
                let v_hat = *vv / bc2;
                *pv -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
            }
            p.zero_grad();
        }
    }
}
