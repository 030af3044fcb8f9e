use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PriorEstimate, PriorProvider};
use crate::error::{invalid, Result, SpiceError};
use crate::evidence::StateKey;
use crate::fusion::PseudoCount;

/// Exact per-(state key, action) Gaussian prior table with a default entry
/// for unseen keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPrior {
    num_actions: usize,
    key: StateKey,
    default: PriorEstimate,
    entries: BTreeMap<u64, Vec<PriorEstimate>>,
}

impl TabularPrior {
    pub fn new(num_actions: usize, key: StateKey, default: PriorEstimate) -> Self {
        Self {
            num_actions,
            key,
            default,
            entries: BTreeMap::new(),
        }
    }

    /// Flat prior everywhere.
    pub fn flat(num_actions: usize, key: StateKey) -> Self {
        Self::new(num_actions, key, PriorEstimate::Flat)
    }

    /// Bandit prior with the given per-arm means and a common pseudo-count,
    /// i.e. prior variance `σ²/N_pri` for every arm.
    pub fn bandit(means: &[f64], pseudo: PseudoCount, noise_variance: f64) -> Result<Self> {
        let mut prior = Self::flat(means.len(), StateKey::Shared);
        if let Some(variance) = pseudo.prior_variance(noise_variance) {
            for (a, &mean) in means.iter().enumerate() {
                prior.set(0, a, PriorEstimate::Moments { mean, variance })?;
            }
        }
        Ok(prior)
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn state_key(&self) -> StateKey {
        self.key
    }

    pub fn default_estimate(&self) -> PriorEstimate {
        self.default
    }

    pub fn set(&mut self, state_key: u64, action: usize, estimate: PriorEstimate) -> Result<()> {
        if action >= self.num_actions {
            return Err(SpiceError::ActionOutOfRange {
                action,
                num_actions: self.num_actions,
            });
        }
        let default = self.default;
        let row = self
            .entries
            .entry(state_key)
            .or_insert_with(|| vec![default; self.num_actions]);
        row[action] = estimate;
        Ok(())
    }

    pub fn set_state(&mut self, state: &[f64], action: usize, estimate: PriorEstimate) -> Result<()> {
        self.set(self.key.key(state), action, estimate)
    }

    /// Stored estimate, or the default for unseen keys or actions.
    pub fn lookup(&self, state_key: u64, action: usize) -> PriorEstimate {
        self.entries
            .get(&state_key)
            .and_then(|row| row.get(action))
            .copied()
            .unwrap_or(self.default)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Empirical-Bayes fit: per (key, action) mean and variance of observed
    /// targets. Cells with fewer than `min_samples` observations keep the
    /// default.
    pub fn fit<I>(num_actions: usize, key: StateKey, default: PriorEstimate, samples: I, min_samples: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, usize, f64)>,
    {
        let mut acc: BTreeMap<(u64, usize), (f64, f64, f64)> = BTreeMap::new();
        for (k, a, y) in samples {
            if a >= num_actions {
                return Err(SpiceError::ActionOutOfRange { action: a, num_actions });
            }
            // Welford
            let e = acc.entry((k, a)).or_insert((0.0, 0.0, 0.0));
            e.0 += 1.0;
            let delta = y - e.1;
            e.1 += delta / e.0;
            e.2 += delta * (y - e.1);
        }
        let mut prior = Self::new(num_actions, key, default);
        for ((k, a), (n, mean, m2)) in acc {
            if (n as usize) < min_samples.max(2) {
                continue;
            }
            prior.set(k, a, PriorEstimate::Moments { mean, variance: m2 / (n - 1.0) })?;
        }
        Ok(prior)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let prior: Self = serde_json::from_reader(std::io::BufReader::new(file))?;
        if prior.entries.values().any(|row| row.len() != prior.num_actions) {
            return Err(invalid("tabular prior row length does not match action count"));
        }
        Ok(prior)
    }
}

impl PriorProvider for TabularPrior {
    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn estimate(&self, state: &[f64]) -> Result<Vec<PriorEstimate>> {
        let k = self.key.key(state);
        Ok((0..self.num_actions).map(|a| self.lookup(k, a)).collect())
    }
}
