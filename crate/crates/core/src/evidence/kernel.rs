use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SpiceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Uniform,
    Rbf,
    Cosine,
}

/// Space the kernel compares states in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSpace {
    #[default]
    RawState,
    /// States are mapped through a caller-supplied [`FeatureMap`] first.
    Encoded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// RBF bandwidth τ; ignored by the other kernels.
    #[serde(default = "default_bandwidth")]
    pub bandwidth: f64,
    #[serde(default)]
    pub feature_space: FeatureSpace,
}

fn default_bandwidth() -> f64 {
    1.0
}

impl KernelSpec {
    pub fn uniform() -> Self {
        Self {
            kind: KernelKind::Uniform,
            bandwidth: 1.0,
            feature_space: FeatureSpace::RawState,
        }
    }

    pub fn rbf(bandwidth: f64) -> Self {
        Self {
            kind: KernelKind::Rbf,
            bandwidth,
            feature_space: FeatureSpace::RawState,
        }
    }

    pub fn cosine() -> Self {
        Self {
            kind: KernelKind::Cosine,
            bandwidth: 1.0,
            feature_space: FeatureSpace::RawState,
        }
    }

    pub fn encoded(mut self) -> Self {
        self.feature_space = FeatureSpace::Encoded;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == KernelKind::Rbf && !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(invalid(format!("rbf bandwidth must be > 0, got {}", self.bandwidth)));
        }
        Ok(())
    }
}

/// State → feature vector map used by encoded kernels and value heads.
pub trait FeatureMap: Send + Sync {
    fn features(&self, state: &[f64]) -> Vec<f64>;
}

impl<F> FeatureMap for F
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn features(&self, state: &[f64]) -> Vec<f64> {
        self(state)
    }
}

/// Similarity in `[0, 1]` between query and context features.
///
/// RBF is `exp(-‖q - x‖²/(2τ²))`; cosine is clamped at zero and defined as 0
/// when either vector is zero.
pub fn kernel_weight(spec: &KernelSpec, query: &[f64], context: &[f64]) -> Result<f64> {
    if query.len() != context.len() {
        return Err(SpiceError::DimensionMismatch {
            expected: query.len(),
            got: context.len(),
        });
    }
    match spec.kind {
        KernelKind::Uniform => Ok(1.0),
        KernelKind::Rbf => {
            spec.validate()?;
            let d2: f64 = query.iter().zip(context).map(|(a, b)| (a - b) * (a - b)).sum();
            let tau = spec.bandwidth;
            Ok((-d2 / (2.0 * tau * tau)).exp())
        }
        KernelKind::Cosine => {
            let dot: f64 = query.iter().zip(context).map(|(a, b)| a * b).sum();
            let nq: f64 = query.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nc: f64 = context.iter().map(|a| a * a).sum::<f64>().sqrt();
            if nq == 0.0 || nc == 0.0 {
                return Ok(0.0);
            }
            Ok((dot / (nq * nc)).clamp(0.0, 1.0))
        }
    }
}
