use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Bias-corrected Adam moments for a fixed list of parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step_count: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new(2e-5)
    }
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update of every parameter from its accumulated `grad`.
    ///
    /// A parameter without a gradient buffer is treated as having zero
    /// gradient. Moment buffers are created on the first call and must keep
    /// matching the parameter shapes afterwards.
    pub fn step<T: Real>(&mut self, params: &mut [Tensor<T>]) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.numel()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::shape(
                "adam_step",
                format!("state tracks {} parameters, got {}", self.m.len(), params.len()),
            ));
        }
        for (i, p) in params.iter().enumerate() {
            if self.m[i].len() != p.numel() || p.grad().is_some_and(|g| g.len() != p.numel()) {
                return Err(Error::shape(
                    "adam_step",
                    format!("parameter {i} does not match its moment buffers"),
                ));
            }
        }

        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            let (data, grad) = p.data_and_grad_mut();
            let Some(grad) = grad else {
                // zero gradient: moments decay, and the update is zero only
                // while they are still zero
                let (m, v) = (&mut self.m[i], &mut self.v[i]);
                for j in 0..data.len() {
                    m[j] *= self.beta1;
                    v[j] *= self.beta2;
                    if m[j] != 0.0 {
                        let upd = self.lr * (m[j] / bc1) / ((v[j] / bc2).sqrt() + self.eps);
                        data[j] = T::from_f64(data[j].to_f64() - upd);
                    }
                }
                continue;
            };
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..data.len() {
                let g = grad[j].to_f64();
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                if m[j] == 0.0 {
                    continue;
                }
                let upd = self.lr * (m[j] / bc1) / ((v[j] / bc2).sqrt() + self.eps);
                data[j] = T::from_f64(data[j].to_f64() - upd);
            }
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step<T: Real>(params: &mut [Tensor<T>], state: &mut AdamState) -> Result<()> {
    state.step(params)
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<T: Real>(params: &mut [Tensor<T>], max_norm: f64) -> f64 {
    let norm = params
        .iter()
        .filter_map(|p| p.grad())
        .flat_map(|g| g.iter())
        .map(|&x| x.to_f64() * x.to_f64())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = T::from_f64(max_norm / norm);
        for p in params.iter_mut() {
            if let Some(g) = p.grad_mut() {
                g.iter_mut().for_each(|x| *x *= s);
            }
        }
    }
    norm
}
