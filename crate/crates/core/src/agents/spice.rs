use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{Agent, TaskInfo};
use crate::error::{invalid, Result, SpiceError};
use crate::evidence::{extract, ActionEvidence, Context, FeatureMap, KernelSpec, KeyedEvidence, StateKey, TdSpec, Transition};
use crate::fusion::{fuse_prior, select_action, BetaSchedule, PosteriorSet, TieBreak};
use crate::priors::{PriorProvider, StateFeatures};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpiceMode {
    /// `argmax m`.
    OfflineGreedy,
    /// `argmax m + β_t √v`.
    #[default]
    OnlineUcb,
}

/// How online evidence is gathered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvidenceMode {
    /// Recompute kernel-weighted evidence over the whole context each step.
    #[default]
    Kernel,
    /// Exact-match evidence maintained incrementally per state key.
    Keyed { key: StateKey },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpiceConfig {
    pub kernel: KernelSpec,
    /// Feature map for encoded kernels.
    #[serde(default)]
    pub encoder: Option<StateFeatures>,
    pub td: TdSpec,
    pub noise_variance: f64,
    pub v_min: f64,
    pub beta: BetaSchedule,
    #[serde(default)]
    pub mode: SpiceMode,
    #[serde(default)]
    pub tie_break: TieBreak,
    #[serde(default)]
    pub evidence: EvidenceMode,
}

impl SpiceConfig {
    /// Bandit defaults: uniform kernel, immediate rewards, `β_t = √(2 ln t)`.
    pub fn bandit(noise_variance: f64) -> Self {
        Self {
            kernel: KernelSpec::uniform(),
            encoder: None,
            td: TdSpec::immediate(),
            noise_variance,
            v_min: 1e-2,
            beta: BetaSchedule::BanditLog,
            mode: SpiceMode::OnlineUcb,
            tie_break: TieBreak::LowestIndex,
            evidence: EvidenceMode::Kernel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_variance > 0.0) || !self.noise_variance.is_finite() {
            return Err(invalid(format!("noise variance must be > 0, got {}", self.noise_variance)));
        }
        if !(self.v_min > 0.0) || !self.v_min.is_finite() {
            return Err(invalid(format!("v_min must be > 0, got {}", self.v_min)));
        }
        self.kernel.validate()?;
        self.td.validate()?;
        self.beta.beta(1)?;
        Ok(())
    }
}

/// Prior → evidence → per-action fusion at one query.
pub fn spice_posteriors(
    config: &SpiceConfig,
    prior: &dyn PriorProvider,
    evidence: &ActionEvidence,
    query: &[f64],
) -> Result<PosteriorSet> {
    let priors = prior.prior(query, config.v_min)?;
    if priors.len() != evidence.num_actions() {
        return Err(SpiceError::DimensionMismatch {
            expected: priors.len(),
            got: evidence.num_actions(),
        });
    }
    let posts = priors
        .iter()
        .zip(evidence.counts.iter().zip(&evidence.targets))
        .map(|(p, (&c, &y))| fuse_prior(p, c, y, config.noise_variance))
        .collect::<Result<Vec<_>>>()?;
    PosteriorSet::new(posts)
}

/// SPICE: value prior fused with context evidence, posterior-UCB control.
pub struct SpiceAgent {
    name: String,
    config: SpiceConfig,
    prior: Arc<dyn PriorProvider>,
    num_actions: usize,
    context: Context,
    keyed: Option<KeyedEvidence>,
}

impl SpiceAgent {
    pub fn new(name: impl Into<String>, config: SpiceConfig, prior: Arc<dyn PriorProvider>) -> Result<Self> {
        config.validate()?;
        let num_actions = prior.num_actions();
        let mut agent = Self {
            name: name.into(),
            config,
            prior,
            num_actions,
            context: Context::new(),
            keyed: None,
        };
        agent.reset(&TaskInfo {
            num_actions,
            state_dim: 0,
        })?;
        Ok(agent)
    }

    pub fn config(&self) -> &SpiceConfig {
        &self.config
    }

    pub fn context(&self) -> &Context {
        &self.context
    }

    fn encoder(&self) -> Option<&dyn FeatureMap> {
        self.config.encoder.as_ref().map(|e| e as &dyn FeatureMap)
    }

    fn batch_evidence(&self, query: &[f64], ctx: &Context) -> Result<ActionEvidence> {
        let prior = &self.prior;
        extract(
            ctx,
            query,
            &self.config.kernel,
            self.encoder(),
            &self.config.td,
            |s| prior.max_mean(s).unwrap_or(0.0),
            self.num_actions,
        )
    }

    /// Posteriors at `query` given everything observed online.
    pub fn posteriors(&self, query: &[f64]) -> Result<PosteriorSet> {
        let evidence = match &self.keyed {
            Some(k) => k.evidence(query),
            None => self.batch_evidence(query, &self.context)?,
        };
        spice_posteriors(&self.config, self.prior.as_ref(), &evidence, query)
    }

    /// Posteriors at `query` from a fixed context.
    pub fn posteriors_for(&self, query: &[f64], ctx: &Context) -> Result<PosteriorSet> {
        let evidence = self.batch_evidence(query, ctx)?;
        spice_posteriors(&self.config, self.prior.as_ref(), &evidence, query)
    }

    fn beta_at(&self, t: u64) -> Result<f64> {
        match self.config.mode {
            SpiceMode::OfflineGreedy => Ok(0.0),
            SpiceMode::OnlineUcb => self.config.beta.beta(t.max(1)),
        }
    }
}

impl Agent for SpiceAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn reset(&mut self, info: &TaskInfo) -> Result<()> {
        if info.num_actions != self.num_actions {
            return Err(SpiceError::DimensionMismatch {
                expected: self.num_actions,
                got: info.num_actions,
            });
        }
        self.context = Context::new();
        self.keyed = match self.config.evidence {
            EvidenceMode::Kernel => None,
            EvidenceMode::Keyed { key } => Some(KeyedEvidence::new(key, self.config.td, self.num_actions)?),
        };
        Ok(())
    }

    fn act(&mut self, query: &[f64], t: u64, rng: &mut dyn RngCore) -> Result<usize> {
        let beta = self.beta_at(t)?;
        select_action(&self.posteriors(query)?, beta, self.config.tie_break, rng)
    }

    fn observe(&mut self, transition: &Transition) -> Result<()> {
        if let Some(k) = self.keyed.as_mut() {
            let prior = &self.prior;
            k.push(transition, |s| prior.max_mean(s).unwrap_or(0.0))?;
        } else {
            if transition.action >= self.num_actions {
                return Err(SpiceError::ActionOutOfRange {
                    action: transition.action,
                    num_actions: self.num_actions,
                });
            }
            self.context.push(transition.clone());
        }
        Ok(())
    }

    fn decide_offline(&self, query: &[f64], ctx: &Context, rng: &mut dyn RngCore) -> Result<usize> {
        let beta = match self.config.mode {
            SpiceMode::OfflineGreedy => 0.0,
            SpiceMode::OnlineUcb => self.config.beta.beta(ctx.len().max(1) as u64)?,
        };
        select_action(&self.posteriors_for(query, ctx)?, beta, self.config.tie_break, rng)
    }
}
