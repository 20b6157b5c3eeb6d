use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 5e-5;

/// Adam moments for a fixed list of parameters.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(learning_rate: f64, params: &[Tensor]) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            second: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one bias-corrected Adam update in place and clears the
    /// gradients. `names` is only used for error messages.
    pub fn step(&mut self, params: &mut [Tensor], names: &[String]) -> Result<()> {
        if params.len() != self.first.len() {
            return Err(Error::shape(
                "optimizer_step",
                format!("state tracks {} parameters, got {}", self.first.len(), params.len()),
            ));
        }
        for (i, p) in params.iter().enumerate() {
            if p.grad().is_none() {
                let name = names.get(i).cloned().unwrap_or_else(|| format!("#{i}"));
                return Err(Error::MissingGrad(name));
            }
            if p.numel() != self.first[i].len() {
                return Err(Error::shape(
                    "optimizer_step",
                    format!("parameter #{i} changed size"),
                ));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            let grad = p.grad().expect("checked above").to_vec();
            let (m, v) = (&mut self.first[i], &mut self.second[i]);
            for (j, w) in p.values_mut().iter_mut().enumerate() {
                let g = grad[j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                *w -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
            }
            p.clear_grad();
        }
        Ok(())
    }
}
