//! Decision agents behind one contract.

mod baselines;
mod spice;

pub use baselines::{EmpAgent, ImitationAgent, LcbAgent, RandomAgent, TsAgent, UcbAgent, UcbBonus};
pub use spice::{spice_posteriors, EvidenceMode, SpiceAgent, SpiceConfig, SpiceMode};

use rand::RngCore;

use crate::error::{Result, SpiceError};
use crate::evidence::{Context, Transition};

/// What an agent may know about a task. Ground truth is never included.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskInfo {
    pub num_actions: usize,
    pub state_dim: usize,
}

pub trait Agent: Send {
    fn name(&self) -> &str;

    /// Forget everything observed so far.
    fn reset(&mut self, info: &TaskInfo) -> Result<()>;

    /// Online decision at step `t` (1-based).
    fn act(&mut self, query: &[f64], t: u64, rng: &mut dyn RngCore) -> Result<usize>;

    /// Absorb the transition produced by the last action.
    fn observe(&mut self, transition: &Transition) -> Result<()>;

    /// Pick one action from a fixed context without touching internal state.
    fn decide_offline(&self, query: &[f64], ctx: &Context, rng: &mut dyn RngCore) -> Result<usize>;

    /// Only verification oracles read task ground truth.
    fn reads_ground_truth(&self) -> bool {
        false
    }
}

/// Per-arm pull counts and reward sums.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmStats {
    pub counts: Vec<u64>,
    pub sums: Vec<f64>,
}

impl ArmStats {
    pub fn new(num_arms: usize) -> Self {
        Self {
            counts: vec![0; num_arms],
            sums: vec![0.0; num_arms],
        }
    }

    pub fn from_context(ctx: &Context, num_arms: usize) -> Result<Self> {
        let mut s = Self::new(num_arms);
        for tr in ctx {
            s.record(tr.action, tr.reward)?;
        }
        Ok(s)
    }

    pub fn record(&mut self, arm: usize, reward: f64) -> Result<()> {
        if arm >= self.counts.len() {
            return Err(SpiceError::ActionOutOfRange {
                action: arm,
                num_actions: self.counts.len(),
            });
        }
        self.counts[arm] += 1;
        self.sums[arm] += reward;
        Ok(())
    }

    pub fn num_arms(&self) -> usize {
        self.counts.len()
    }

    pub fn mean(&self, arm: usize) -> Option<f64> {
        (self.counts[arm] > 0).then(|| self.sums[arm] / self.counts[arm] as f64)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Lowest-index arm never pulled.
    pub fn first_unpulled(&self) -> Option<usize> {
        self.counts.iter().position(|&c| c == 0)
    }
}
