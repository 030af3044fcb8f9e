use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{PriorEstimate, PriorProvider, StateFeatures};
use crate::error::{finite, invalid, Result, SpiceError};
use crate::seed::mix;

/// Head function family shared by `f_k` and `p_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeadArch {
    /// `w·x + b`.
    Linear,
    /// `w₂·tanh(W₁x + b₁) + b₂`.
    Hidden { width: usize },
}

impl HeadArch {
    pub fn num_params(&self, input_dim: usize) -> usize {
        match *self {
            HeadArch::Linear => input_dim + 1,
            HeadArch::Hidden { width } => width * input_dim + 2 * width + 1,
        }
    }

    fn forward(&self, params: &[f64], x: &[f64]) -> f64 {
        let d = x.len();
        match *self {
            HeadArch::Linear => dot(&params[..d], x) + params[d],
            HeadArch::Hidden { width } => {
                let (w1, rest) = params.split_at(width * d);
                let (b1, rest) = rest.split_at(width);
                let (w2, b2) = rest.split_at(width);
                let mut out = b2[0];
                for j in 0..width {
                    out += w2[j] * (dot(&w1[j * d..(j + 1) * d], x) + b1[j]).tanh();
                }
                out
            }
        }
    }

    /// Output and its gradient with respect to `params`.
    fn forward_grad(&self, params: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
        let d = x.len();
        match *self {
            HeadArch::Linear => {
                let mut g = x.to_vec();
                g.push(1.0);
                (self.forward(params, x), g)
            }
            HeadArch::Hidden { width } => {
                let (w1, rest) = params.split_at(width * d);
                let (b1, rest) = rest.split_at(width);
                let (w2, b2) = rest.split_at(width);
                let mut g = vec![0.0; params.len()];
                let mut out = b2[0];
                for j in 0..width {
                    let h = (dot(&w1[j * d..(j + 1) * d], x) + b1[j]).tanh();
                    out += w2[j] * h;
                    let dz = w2[j] * (1.0 - h * h);
                    for i in 0..d {
                        g[j * d + i] = dz * x[i];
                    }
                    g[width * d + j] = dz;
                    g[width * d + width + j] = h;
                }
                g[width * d + 2 * width] = 1.0;
                (out, g)
            }
        }
    }

    /// Fan-in of each parameter, for initialization scale.
    fn fan_ins(&self, input_dim: usize) -> Vec<usize> {
        match *self {
            HeadArch::Linear => vec![input_dim; input_dim + 1],
            HeadArch::Hidden { width } => {
                let mut f = vec![input_dim; width * input_dim + width];
                f.extend(std::iter::repeat_n(width, width + 1));
                f
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub num_heads: usize,
    pub num_actions: usize,
    pub features: StateFeatures,
    pub arch: HeadArch,
    pub alpha: f64,
    pub seed: u64,
}

impl EnsembleConfig {
    pub fn new(num_heads: usize, num_actions: usize, features: StateFeatures) -> Self {
        Self {
            num_heads,
            num_actions,
            features,
            arch: HeadArch::Linear,
            alpha: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_heads < 2 {
            return Err(invalid(format!("ensemble needs at least 2 heads, got {}", self.num_heads)));
        }
        if self.num_actions == 0 {
            return Err(invalid("ensemble needs at least one action"));
        }
        if let HeadArch::Hidden { width: 0 } = self.arch {
            return Err(invalid("hidden width must be positive"));
        }
        finite(self.alpha, "alpha")?;
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.features.dim() + self.num_actions
    }
}

/// Per-action ensemble mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Anchored ensemble of `K` value heads with frozen randomized priors:
/// `Q_k(x, a) = f_k([x; onehot(a)]) + α·p_k([x; onehot(a)])`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePrior {
    config: EnsembleConfig,
    params: Vec<Vec<f64>>,
    anchors: Vec<Vec<f64>>,
    priors: Vec<Vec<f64>>,
}

fn init_params(arch: HeadArch, input_dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    arch.fan_ins(input_dim)
        .into_iter()
        .map(|fan_in| {
            Normal::new(0.0, 1.0 / (fan_in as f64).sqrt())
                .expect("positive scale")
                .sample(&mut rng)
        })
        .collect()
}

impl EnsemblePrior {
    pub fn new(config: EnsembleConfig) -> Result<Self> {
        config.validate()?;
        let d = config.input_dim();
        let mut params = Vec::with_capacity(config.num_heads);
        let mut priors = Vec::with_capacity(config.num_heads);
        for k in 0..config.num_heads as u64 {
            params.push(init_params(config.arch, d, mix(config.seed, 2 * k)));
            priors.push(init_params(config.arch, d, mix(config.seed, 2 * k + 1)));
        }
        Ok(Self {
            config,
            anchors: params.clone(),
            params,
            priors,
        })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn num_heads(&self) -> usize {
        self.config.num_heads
    }

    pub fn num_actions(&self) -> usize {
        self.config.num_actions
    }

    pub fn alpha(&self) -> f64 {
        self.config.alpha
    }

    pub fn num_params(&self) -> usize {
        self.config.arch.num_params(self.config.input_dim())
    }

    pub fn encode(&self, state: &[f64]) -> Vec<f64> {
        self.config.features.encode(state)
    }

    /// Trainable parameters of head `k`.
    pub fn params(&self, k: usize) -> &[f64] {
        &self.params[k]
    }

    pub fn params_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.params[k]
    }

    /// Initial trainable parameters of head `k` (anchor targets).
    pub fn anchor(&self, k: usize) -> &[f64] {
        &self.anchors[k]
    }

    /// Frozen prior parameters of head `k`.
    pub fn prior_params(&self, k: usize) -> &[f64] {
        &self.priors[k]
    }

    fn input(&self, features: &[f64], action: usize) -> Result<Vec<f64>> {
        let dim = self.config.features.dim();
        if features.len() != dim {
            return Err(SpiceError::DimensionMismatch {
                expected: dim,
                got: features.len(),
            });
        }
        if action >= self.config.num_actions {
            return Err(SpiceError::ActionOutOfRange {
                action,
                num_actions: self.config.num_actions,
            });
        }
        let mut x = Vec::with_capacity(dim + self.config.num_actions);
        x.extend_from_slice(features);
        x.extend((0..self.config.num_actions).map(|b| if b == action { 1.0 } else { 0.0 }));
        Ok(x)
    }

    fn check_head(&self, k: usize) -> Result<()> {
        if k >= self.config.num_heads {
            return Err(invalid(format!("head {k} out of range for {} heads", self.config.num_heads)));
        }
        Ok(())
    }

    /// `Q_k` at encoded `features` for `action`.
    pub fn head_value(&self, k: usize, features: &[f64], action: usize) -> Result<f64> {
        self.check_head(k)?;
        let x = self.input(features, action)?;
        let arch = self.config.arch;
        Ok(arch.forward(&self.params[k], &x) + self.config.alpha * arch.forward(&self.priors[k], &x))
    }

    /// `Q_k` and `∂Q_k/∂φ_k` (trainable parameters only).
    pub fn head_value_grad(&self, k: usize, features: &[f64], action: usize) -> Result<(f64, Vec<f64>)> {
        self.check_head(k)?;
        let x = self.input(features, action)?;
        let arch = self.config.arch;
        let (f, g) = arch.forward_grad(&self.params[k], &x);
        Ok((f + self.config.alpha * arch.forward(&self.priors[k], &x), g))
    }

    /// All head values, `[k][a]`.
    pub fn head_values(&self, features: &[f64]) -> Result<Vec<Vec<f64>>> {
        (0..self.config.num_heads)
            .map(|k| (0..self.config.num_actions).map(|a| self.head_value(k, features, a)).collect())
            .collect()
    }

    /// Per-action mean and K−1 sample std over heads.
    pub fn ensemble_stats(&self, features: &[f64]) -> Result<ActionStats> {
        let values = self.head_values(features)?;
        let k = self.config.num_heads as f64;
        let a_count = self.config.num_actions;
        let mut mean = vec![0.0; a_count];
        let mut std = vec![0.0; a_count];
        for a in 0..a_count {
            let m = values.iter().map(|v| v[a]).sum::<f64>() / k;
            let ss = values.iter().map(|v| (v[a] - m).powi(2)).sum::<f64>();
            mean[a] = m;
            std[a] = (ss / (k - 1.0)).sqrt();
        }
        Ok(ActionStats { mean, std })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            num_heads: self.config.num_heads,
            num_actions: self.config.num_actions,
            alpha: self.config.alpha,
            feature_dim: self.config.features.dim(),
            features: self.config.features,
            arch: self.config.arch,
            master_seed: self.config.seed,
            params: self.params.clone(),
            anchors: self.anchors.clone(),
            priors: self.priors.clone(),
        }
    }

    pub fn from_checkpoint(cp: Checkpoint) -> Result<Self> {
        let config = EnsembleConfig {
            num_heads: cp.num_heads,
            num_actions: cp.num_actions,
            features: cp.features,
            arch: cp.arch,
            alpha: cp.alpha,
            seed: cp.master_seed,
        };
        config.validate()?;
        if cp.feature_dim != cp.features.dim() {
            return Err(SpiceError::DimensionMismatch {
                expected: cp.features.dim(),
                got: cp.feature_dim,
            });
        }
        let n = config.arch.num_params(config.input_dim());
        for set in [&cp.params, &cp.anchors, &cp.priors] {
            if set.len() != cp.num_heads {
                return Err(invalid("checkpoint head count mismatch"));
            }
            if let Some(bad) = set.iter().find(|p| p.len() != n) {
                return Err(SpiceError::DimensionMismatch {
                    expected: n,
                    got: bad.len(),
                });
            }
        }
        Ok(Self {
            config,
            params: cp.params,
            anchors: cp.anchors,
            priors: cp.priors,
        })
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), &self.checkpoint())?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_checkpoint(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

impl PriorProvider for EnsemblePrior {
    fn num_actions(&self) -> usize {
        self.config.num_actions
    }

    fn estimate(&self, state: &[f64]) -> Result<Vec<PriorEstimate>> {
        let stats = self.ensemble_stats(&self.encode(state))?;
        Ok(stats
            .mean
            .into_iter()
            .zip(stats.std)
            .map(|(mean, s)| PriorEstimate::Moments { mean, variance: s * s })
            .collect())
    }
}

/// Serialized ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub num_heads: usize,
    pub num_actions: usize,
    pub alpha: f64,
    pub feature_dim: usize,
    pub features: StateFeatures,
    pub arch: HeadArch,
    pub master_seed: u64,
    pub params: Vec<Vec<f64>>,
    pub anchors: Vec<Vec<f64>>,
    pub priors: Vec<Vec<f64>>,
}
