use super::nn::ParameterStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(store: &ParameterStore, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = store.iter().map(|(_, t)| vec![0.0; t.numel()]).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update from the gradients currently on `store`.
    /// Every parameter must carry a gradient.
    pub fn step(&mut self, store: &ParameterStore) -> Result<()> {
        if store.len() != self.m.len() {
            return Err(Error::Consistency(format!(
                "optimizer tracks {} tensors, store has {}",
                self.m.len(),
                store.len()
            )));
        }
        if let Some((name, _)) = store.iter().find(|(_, t)| t.with_grad(|g| g.is_none())) {
            return Err(Error::MissingGrad(name.to_string()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((_, p), m), v) in store.iter().zip(&mut self.m).zip(&mut self.v) {
            p.with_grad(|g| {
                let g = g.expect("checked above");
                p.update_data(|x| {
                    for i in 0..x.len() {
                        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                        x[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                    }
                });
            });
        }
        Ok(())
    }
}
