use std::collections::HashMap;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Agent, ArmStats, TaskInfo};
use crate::error::{invalid, Result, SpiceError};
use crate::evidence::{Context, LabelledContext, StateKey, Transition};
use crate::fusion::{argmax_with, fuse, GaussianBelief, TieBreak};

fn uniform(num_arms: usize, rng: &mut dyn RngCore) -> usize {
    rng.random_range(0..num_arms)
}

/// Greedy on empirical means. Online it first pulls every arm once.
#[derive(Debug, Clone)]
pub struct EmpAgent {
    stats: ArmStats,
}

impl EmpAgent {
    pub fn new(num_arms: usize) -> Self {
        Self {
            stats: ArmStats::new(num_arms),
        }
    }

    /// Best empirical mean among pulled arms; uniform when nothing is pulled.
    pub fn pick(stats: &ArmStats, rng: &mut dyn RngCore) -> Result<usize> {
        let scores: Vec<f64> = (0..stats.num_arms())
            .map(|a| stats.mean(a).unwrap_or(f64::NEG_INFINITY))
            .collect();
        if stats.total() == 0 {
            return Ok(uniform(stats.num_arms(), rng));
        }
        argmax_with(&scores, TieBreak::LowestIndex, rng)
    }
}

impl Agent for EmpAgent {
    fn name(&self) -> &str {
        "emp"
    }

    fn reset(&mut self, info: &TaskInfo) -> Result<()> {
        self.stats = ArmStats::new(info.num_actions);
        Ok(())
    }

    fn act(&mut self, _query: &[f64], _t: u64, rng: &mut dyn RngCore) -> Result<usize> {
        match self.stats.first_unpulled() {
            Some(a) => Ok(a),
            None => Self::pick(&self.stats, rng),
        }
    }

    fn observe(&mut self, tr: &Transition) -> Result<()> {
        self.stats.record(tr.action, tr.reward)
    }

    fn decide_offline(&self, _query: &[f64], ctx: &Context, rng: &mut dyn RngCore) -> Result<usize> {
        Self::pick(&ArmStats::from_context(ctx, self.stats.num_arms())?, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UcbBonus {
    /// `√(1/n)`.
    Hoeffding,
    /// `σ√(2 ln t / n)`.
    Theory { sigma: f64 },
}

/// Optimistic index policy. Untried arms score `+∞`.
#[derive(Debug, Clone)]
pub struct UcbAgent {
    bonus: UcbBonus,
    stats: ArmStats,
}

impl UcbAgent {
    pub fn new(num_arms: usize, bonus: UcbBonus) -> Self {
        Self {
            bonus,
            stats: ArmStats::new(num_arms),
        }
    }

    pub fn scores(stats: &ArmStats, bonus: UcbBonus, t: u64) -> Vec<f64> {
        (0..stats.num_arms())
            .map(|a| match stats.mean(a) {
                None => f64::INFINITY,
                Some(m) => {
                    let n = stats.counts[a] as f64;
                    match bonus {
                        UcbBonus::Hoeffding => m + (1.0 / n).sqrt(),
                        UcbBonus::Theory { sigma } => m + sigma * (2.0 * (t as f64).ln() / n).sqrt(),
                    }
                }
            })
            .collect()
    }
}

impl Agent for UcbAgent {
    fn name(&self) -> &str {
        match self.bonus {
            UcbBonus::Hoeffding => "ucb",
            UcbBonus::Theory { .. } => "ucb_theory",
        }
    }

    fn reset(&mut self, info: &TaskInfo) -> Result<()> {
        self.stats = ArmStats::new(info.num_actions);
        Ok(())
    }

    fn act(&mut self, _query: &[f64], t: u64, rng: &mut dyn RngCore) -> Result<usize> {
        argmax_with(&Self::scores(&self.stats, self.bonus, t.max(1)), TieBreak::LowestIndex, rng)
    }

    fn observe(&mut self, tr: &Transition) -> Result<()> {
        self.stats.record(tr.action, tr.reward)
    }

    fn decide_offline(&self, _query: &[f64], ctx: &Context, rng: &mut dyn RngCore) -> Result<usize> {
        let stats = ArmStats::from_context(ctx, self.stats.num_arms())?;
        let t = stats.total().max(1);
        argmax_with(&Self::scores(&stats, self.bonus, t), TieBreak::LowestIndex, rng)
    }
}

/// Pessimistic `μ̂ − √(1/n)`; untried arms score `−∞`.
#[derive(Debug, Clone)]
pub struct LcbAgent {
    stats: ArmStats,
}

impl LcbAgent {
    pub fn new(num_arms: usize) -> Self {
        Self {
            stats: ArmStats::new(num_arms),
        }
    }

    pub fn pick(stats: &ArmStats, rng: &mut dyn RngCore) -> Result<usize> {
        if stats.total() == 0 {
            return Ok(uniform(stats.num_arms(), rng));
        }
        let scores: Vec<f64> = (0..stats.num_arms())
            .map(|a| match stats.mean(a) {
                None => f64::NEG_INFINITY,
                Some(m) => m - (1.0 / stats.counts[a] as f64).sqrt(),
            })
            .collect();
        argmax_with(&scores, TieBreak::LowestIndex, rng)
    }
}

impl Agent for LcbAgent {
    fn name(&self) -> &str {
        "lcb"
    }

    fn reset(&mut self, info: &TaskInfo) -> Result<()> {
        self.stats = ArmStats::new(info.num_actions);
        Ok(())
    }

    fn act(&mut self, _query: &[f64], _t: u64, rng: &mut dyn RngCore) -> Result<usize> {
        Self::pick(&self.stats, rng)
    }

    fn observe(&mut self, tr: &Transition) -> Result<()> {
        self.stats.record(tr.action, tr.reward)
    }

    fn decide_offline(&self, _query: &[f64], ctx: &Context, rng: &mut dyn RngCore) -> Result<usize> {
        Self::pick(&ArmStats::from_context(ctx, self.stats.num_arms())?, rng)
    }
}

/// Gaussian Thompson sampling with prior `N(1/2, 1/12)` and known noise.
#[derive(Debug, Clone)]
pub struct TsAgent {
    sigma: f64,
    stats: ArmStats,
}

impl TsAgent {
    pub const PRIOR_MEAN: f64 = 0.5;
    pub const PRIOR_VARIANCE: f64 = 1.0 / 12.0;

    pub fn new(num_arms: usize, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(invalid(format!("noise std must be finite and >= 0, got {sigma}")));
        }
        Ok(Self {
            sigma,
            stats: ArmStats::new(num_arms),
        })
    }

    /// Posterior for one arm; `None` means a point mass at the empirical mean
    /// (noiseless rewards).
    pub fn posterior(&self, stats: &ArmStats, arm: usize) -> Result<Option<GaussianBelief>> {
        let prior = GaussianBelief::new(Self::PRIOR_MEAN, Self::PRIOR_VARIANCE)?;
        let n = stats.counts[arm] as f64;
        match stats.mean(arm) {
            None => Ok(Some(prior)),
            Some(_) if self.sigma == 0.0 => Ok(None),
            Some(m) => fuse(&prior, n, m, self.sigma * self.sigma).map(Some),
        }
    }

    fn pick(&self, stats: &ArmStats, rng: &mut dyn RngCore) -> Result<usize> {
        let mut draws = Vec::with_capacity(stats.num_arms());
        for a in 0..stats.num_arms() {
            draws.push(match self.posterior(stats, a)? {
                None => stats.mean(a).expect("pulled"),
                Some(b) => Normal::new(b.mean(), b.std_dev())
                    .map_err(|e| invalid(e.to_string()))?
                    .sample(rng),
            });
        }
        argmax_with(&draws, TieBreak::LowestIndex, rng)
    }
}

impl Agent for TsAgent {
    fn name(&self) -> &str {
        "ts"
    }

    fn reset(&mut self, info: &TaskInfo) -> Result<()> {
        self.stats = ArmStats::new(info.num_actions);
        Ok(())
    }

    fn act(&mut self, _query: &[f64], _t: u64, rng: &mut dyn RngCore) -> Result<usize> {
        let stats = self.stats.clone();
        self.pick(&stats, rng)
    }

    fn observe(&mut self, tr: &Transition) -> Result<()> {
        self.stats.record(tr.action, tr.reward)
    }

    fn decide_offline(&self, _query: &[f64], ctx: &Context, rng: &mut dyn RngCore) -> Result<usize> {
        self.pick(&ArmStats::from_context(ctx, self.stats.num_arms())?, rng)
    }
}

/// Uniformly random actions.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    num_actions: usize,
}

impl RandomAgent {
    pub fn new(num_actions: usize) -> Self {
        Self { num_actions }
    }
}

impl Agent for RandomAgent {
    fn name(&self) -> &str {
        "random"
    }

    fn reset(&mut self, info: &TaskInfo) -> Result<()> {
        self.num_actions = info.num_actions;
        Ok(())
    }

    fn act(&mut self, _query: &[f64], _t: u64, rng: &mut dyn RngCore) -> Result<usize> {
        Ok(uniform(self.num_actions, rng))
    }

    fn observe(&mut self, _tr: &Transition) -> Result<()> {
        Ok(())
    }

    fn decide_offline(&self, _query: &[f64], _ctx: &Context, rng: &mut dyn RngCore) -> Result<usize> {
        Ok(uniform(self.num_actions, rng))
    }
}

/// Modal training label per state key; uniform on unseen keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImitationAgent {
    num_actions: usize,
    key: StateKey,
    table: HashMap<u64, Vec<u64>>,
}

impl ImitationAgent {
    pub fn fit(data: &[LabelledContext], key: StateKey, num_actions: usize) -> Result<Self> {
        let mut table: HashMap<u64, Vec<u64>> = HashMap::new();
        for s in data {
            if s.label >= num_actions {
                return Err(SpiceError::ActionOutOfRange {
                    action: s.label,
                    num_actions,
                });
            }
            table.entry(key.key(&s.query)).or_insert_with(|| vec![0; num_actions])[s.label] += 1;
        }
        Ok(Self { num_actions, key, table })
    }

    pub fn modal(&self, query: &[f64]) -> Option<usize> {
        let hist = self.table.get(&self.key.key(query))?;
        let best = *hist.iter().max()?;
        hist.iter().position(|&c| c == best)
    }

    fn pick(&self, query: &[f64], rng: &mut dyn RngCore) -> usize {
        self.modal(query).unwrap_or_else(|| uniform(self.num_actions, rng))
    }
}

impl Agent for ImitationAgent {
    fn name(&self) -> &str {
        "imitation"
    }

    fn reset(&mut self, info: &TaskInfo) -> Result<()> {
        if info.num_actions != self.num_actions {
            return Err(SpiceError::DimensionMismatch {
                expected: self.num_actions,
                got: info.num_actions,
            });
        }
        Ok(())
    }

    fn act(&mut self, query: &[f64], _t: u64, rng: &mut dyn RngCore) -> Result<usize> {
        Ok(self.pick(query, rng))
    }

    fn observe(&mut self, _tr: &Transition) -> Result<()> {
        Ok(())
    }

    fn decide_offline(&self, query: &[f64], _ctx: &Context, rng: &mut dyn RngCore) -> Result<usize> {
        Ok(self.pick(query, rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::bandit::bandit_transition;
    use crate::envs::BANDIT_STATE;
    use crate::seed;

    fn ctx(pulls: &[(usize, f64)]) -> Context {
        Context::from_transitions(pulls.iter().map(|&(a, r)| bandit_transition(a, r)).collect())
    }

    #[test]
    fn ucb_equal_bonuses_pick_higher_mean() {
        let a = UcbAgent::new(2, UcbBonus::Hoeffding)
            .decide_offline(&BANDIT_STATE, &ctx(&[(0, 0.2), (1, 0.3)]), &mut seed::rng(0))
            .unwrap();
        assert_eq!(a, 1);
    }

    #[test]
    fn lcb_prefers_well_sampled_arm() {
        let mut pulls = vec![(0, 0.6); 100];
        pulls.push((1, 0.9));
        let a = LcbAgent::new(2).decide_offline(&BANDIT_STATE, &ctx(&pulls), &mut seed::rng(0)).unwrap();
        assert_eq!(a, 0);
    }

    #[test]
    fn warm_start_pulls_each_arm_once() {
        for mut agent in [
            Box::new(EmpAgent::new(4)) as Box<dyn Agent>,
            Box::new(UcbAgent::new(4, UcbBonus::Hoeffding)),
        ] {
            let mut rng = seed::rng(0);
            for t in 1..=4u64 {
                let a = agent.act(&BANDIT_STATE, t, &mut rng).unwrap();
                assert_eq!(a as u64, t - 1);
                agent.observe(&bandit_transition(a, 0.1 * t as f64)).unwrap();
            }
        }
    }

    #[test]
    fn emp_is_greedy() {
        let a = EmpAgent::new(3)
            .decide_offline(&BANDIT_STATE, &ctx(&[(0, 0.9), (1, 0.1), (2, 0.5)]), &mut seed::rng(0))
            .unwrap();
        assert_eq!(a, 0);
    }

    #[test]
    fn ts_prior_choice_is_uniform() {
        let agent = TsAgent::new(5, 0.3).unwrap();
        let mut rng = seed::rng(7);
        let mut counts = [0.0; 5];
        for _ in 0..10_000 {
            counts[agent.decide_offline(&BANDIT_STATE, &Context::new(), &mut rng).unwrap()] += 1.0;
        }
        let chi: f64 = counts.iter().map(|c| (c - 2000.0f64).powi(2) / 2000.0).sum();
        assert!(chi < 18.47, "{counts:?}");
    }

    #[test]
    fn ts_posterior_is_conjugate_and_handles_zero_noise() {
        let agent = TsAgent::new(2, 0.3).unwrap();
        let stats = ArmStats::from_context(&ctx(&[(0, 1.0), (0, 0.0)]), 2).unwrap();
        let b = agent.posterior(&stats, 0).unwrap().unwrap();
        let prec = 12.0 + 2.0 / 0.09;
        assert!((b.variance() - 1.0 / prec).abs() < 1e-15);
        assert!((b.mean() - (12.0 * 0.5 + 2.0 * 0.5 / 0.09) / prec).abs() < 1e-12);
        let noiseless = TsAgent::new(2, 0.0).unwrap();
        let stats = ArmStats::from_context(&ctx(&[(0, 0.7), (1, 0.2)]), 2).unwrap();
        assert!(noiseless.decide_offline(&BANDIT_STATE, &Context::new(), &mut seed::rng(1)).is_ok());
        assert!(noiseless.posterior(&stats, 0).unwrap().is_none());
        let a = noiseless
            .decide_offline(&BANDIT_STATE, &ctx(&[(0, 0.7), (1, 0.2)]), &mut seed::rng(1))
            .unwrap();
        assert_eq!(a, 0);
    }

    #[test]
    fn imitation_table() {
        let sample = |q: f64, label| LabelledContext {
            context: Context::new(),
            query: vec![q, 0.0],
            label,
            behaviour_prob: 0.2,
        };
        let data = vec![sample(1.0, 3), sample(1.0, 3), sample(1.0, 2), sample(2.0, 4)];
        let agent = ImitationAgent::fit(&data, StateKey::GridXY, 5).unwrap();
        assert_eq!(agent.decide_offline(&[1.0, 0.0], &Context::new(), &mut seed::rng(0)).unwrap(), 3);
        assert_eq!(agent.decide_offline(&[2.0, 0.0], &Context::new(), &mut seed::rng(0)).unwrap(), 4);
        let mut counts = [0usize; 5];
        let mut rng = seed::rng(5);
        for _ in 0..500 {
            counts[agent.decide_offline(&[7.0, 7.0], &Context::new(), &mut rng).unwrap()] += 1;
        }
        assert!(counts.iter().all(|&c| c > 50));
    }

    #[test]
    fn no_agent_reads_ground_truth() {
        let agents: Vec<Box<dyn Agent>> = vec![
            Box::new(EmpAgent::new(2)),
            Box::new(UcbAgent::new(2, UcbBonus::Hoeffding)),
            Box::new(LcbAgent::new(2)),
            Box::new(TsAgent::new(2, 0.3).unwrap()),
            Box::new(RandomAgent::new(2)),
        ];
        assert!(agents.iter().all(|a| !a.reads_ground_truth()));
    }
}
