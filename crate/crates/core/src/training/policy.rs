use serde::{Deserialize, Serialize};

use crate::error::{Result, SpiceError};

/// Linear softmax policy head `π(a | h) ∝ exp(W_a·h + b_a)`. Training-only
/// signal; never used for control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyHead {
    num_actions: usize,
    input_dim: usize,
    /// `[a][i]` weights followed by `A` biases.
    params: Vec<f64>,
}

impl PolicyHead {
    /// Zero-initialized, i.e. uniform.
    pub fn new(num_actions: usize, input_dim: usize) -> Self {
        Self {
            num_actions,
            input_dim,
            params: vec![0.0; num_actions * (input_dim + 1)],
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn log_probs(&self, h: &[f64]) -> Vec<f64> {
        let d = self.input_dim;
        let bias = &self.params[self.num_actions * d..];
        let logits: Vec<f64> = (0..self.num_actions)
            .map(|a| self.params[a * d..(a + 1) * d].iter().zip(h).map(|(w, x)| w * x).sum::<f64>() + bias[a])
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        logits.iter().map(|l| l - lse).collect()
    }

    pub fn probs(&self, h: &[f64]) -> Vec<f64> {
        self.log_probs(h).into_iter().map(f64::exp).collect()
    }

    /// `ω · (1/H) Σ_t −log π(label | h_t)` and its gradient.
    pub fn loss_grad(&self, inputs: &[Vec<f64>], label: usize, omega: f64) -> Result<(f64, Vec<f64>)> {
        if label >= self.num_actions {
            return Err(SpiceError::ActionOutOfRange {
                action: label,
                num_actions: self.num_actions,
            });
        }
        if inputs.is_empty() {
            return Err(SpiceError::Empty("policy inputs"));
        }
        let d = self.input_dim;
        let hf = inputs.len() as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for h in inputs {
            if h.len() != d {
                return Err(SpiceError::DimensionMismatch { expected: d, got: h.len() });
            }
            let lp = self.log_probs(h);
            loss -= omega * lp[label] / hf;
            for a in 0..self.num_actions {
                let coef = omega * (lp[a].exp() - if a == label { 1.0 } else { 0.0 }) / hf;
                for i in 0..d {
                    grad[a * d + i] += coef * h[i];
                }
                grad[self.num_actions * d + a] += coef;
            }
        }
        Ok((loss, grad))
    }
}
