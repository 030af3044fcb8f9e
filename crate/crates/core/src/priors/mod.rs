//! Value-prior providers.

mod ensemble;
mod features;
mod tabular;

pub use ensemble::{ActionStats, Checkpoint, EnsembleConfig, EnsemblePrior, HeadArch};
pub use features::StateFeatures;
pub use tabular::TabularPrior;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fusion::{floor_prior, ValuePrior};

/// Raw (unfloored) prior for one action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorEstimate {
    Moments { mean: f64, variance: f64 },
    Flat,
}

impl PriorEstimate {
    /// Apply the variance floor `v_min`.
    pub fn floor(self, v_min: f64) -> Result<ValuePrior> {
        match self {
            PriorEstimate::Moments { mean, variance } => Ok(ValuePrior::Gaussian(floor_prior(mean, variance, v_min)?)),
            PriorEstimate::Flat => Ok(ValuePrior::Flat),
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match self {
            PriorEstimate::Moments { mean, .. } => Some(*mean),
            PriorEstimate::Flat => None,
        }
    }
}

/// Produces per-action value priors at a query state.
pub trait PriorProvider: Send + Sync {
    fn num_actions(&self) -> usize;

    fn estimate(&self, state: &[f64]) -> Result<Vec<PriorEstimate>>;

    /// Floored priors, one per action.
    fn prior(&self, state: &[f64], v_min: f64) -> Result<Vec<ValuePrior>> {
        self.estimate(state)?.into_iter().map(|e| e.floor(v_min)).collect()
    }

    /// `max_a Q̄(state, a)`, used as the TD(n) bootstrap. Flat entries count as 0.
    fn max_mean(&self, state: &[f64]) -> Result<f64> {
        Ok(self
            .estimate(state)?
            .iter()
            .map(|e| e.mean().unwrap_or(0.0))
            .fold(f64::NEG_INFINITY, f64::max))
    }
}

impl<P: PriorProvider + ?Sized> PriorProvider for std::sync::Arc<P> {
    fn num_actions(&self) -> usize {
        (**self).num_actions()
    }

    fn estimate(&self, state: &[f64]) -> Result<Vec<PriorEstimate>> {
        (**self).estimate(state)
    }

    fn max_mean(&self, state: &[f64]) -> Result<f64> {
        (**self).max_mean(state)
    }
}

impl<P: PriorProvider + ?Sized> PriorProvider for Box<P> {
    fn num_actions(&self) -> usize {
        (**self).num_actions()
    }

    fn estimate(&self, state: &[f64]) -> Result<Vec<PriorEstimate>> {
        (**self).estimate(state)
    }

    fn max_mean(&self, state: &[f64]) -> Result<f64> {
        (**self).max_mean(state)
    }
}
