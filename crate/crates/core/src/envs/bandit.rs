use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{finite, invalid, Result, SpiceError};
use crate::evidence::{Context, LabelledContext, Transition};
use crate::seed;

/// Bandits are stateless; every transition carries this placeholder state.
pub const BANDIT_STATE: [f64; 1] = [0.0];

/// Gaussian multi-armed bandit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditTask {
    pub means: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
}

impl BanditTask {
    pub fn new(means: Vec<f64>, sigma: f64) -> Result<Self> {
        if means.len() < 2 {
            return Err(invalid(format!("bandit needs at least 2 arms, got {}", means.len())));
        }
        for &m in &means {
            finite(m, "arm mean")?;
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(invalid(format!("reward noise must be finite and non-negative, got {sigma}")));
        }
        Ok(Self { means, sigma, seed: 0 })
    }

    pub fn num_arms(&self) -> usize {
        self.means.len()
    }

    /// Lowest-index arm with the largest mean.
    pub fn best_arm(&self) -> usize {
        let mut best = 0;
        for (a, &m) in self.means.iter().enumerate() {
            if m > self.means[best] {
                best = a;
            }
        }
        best
    }

    pub fn best_mean(&self) -> f64 {
        self.means[self.best_arm()]
    }

    pub fn gaps(&self) -> Vec<f64> {
        let best = self.best_mean();
        self.means.iter().map(|m| best - m).collect()
    }

    /// `μ* − μ_arm`.
    pub fn regret(&self, arm: usize) -> f64 {
        self.best_mean() - self.means[arm]
    }

    /// Same means, different noise level.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        let mut t = Self::new(self.means.clone(), sigma)?;
        t.seed = self.seed;
        Ok(t)
    }
}

/// Arm means i.i.d. Unif[0, 1], a pure function of `seed`.
pub fn sample_bandit(seed: u64, num_arms: usize, sigma: f64) -> Result<BanditTask> {
    if num_arms < 2 {
        return Err(invalid(format!("bandit needs at least 2 arms, got {num_arms}")));
    }
    let mut rng = seed::rng(seed);
    let means = (0..num_arms).map(|_| rng.random::<f64>()).collect();
    let mut task = BanditTask::new(means, sigma)?;
    task.seed = seed;
    Ok(task)
}

/// `μ_arm + N(0, σ²)`.
pub fn pull<R: Rng + ?Sized>(task: &BanditTask, arm: usize, rng: &mut R) -> Result<f64> {
    let mean = *task.means.get(arm).ok_or(SpiceError::ActionOutOfRange {
        action: arm,
        num_actions: task.num_arms(),
    })?;
    if task.sigma == 0.0 {
        return Ok(mean);
    }
    let noise = Normal::new(0.0, task.sigma).map_err(|e| invalid(e.to_string()))?;
    Ok(mean + noise.sample(rng))
}

/// How the training label is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelMode {
    /// The concentrated arm `i*`, itself uniform over arms.
    RandomArm,
    /// The true optimal arm with probability `q`, otherwise a draw from `p`.
    Mix { q: f64 },
}

/// Behaviour distribution `p = (1−ω)·Dirichlet(1) + ω·δ_{i*}` and label rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviourSpec {
    pub omega: f64,
    /// Concentrated arm; drawn uniformly when `None`.
    pub star: Option<usize>,
    pub label: LabelMode,
}

impl Default for BehaviourSpec {
    fn default() -> Self {
        Self {
            omega: 0.5,
            star: None,
            label: LabelMode::RandomArm,
        }
    }
}

/// A generated bandit context together with everything needed to recompute
/// its sampling probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditContext {
    pub context: Context,
    pub label: usize,
    pub star: usize,
    pub dirichlet: Vec<f64>,
    pub probs: Vec<f64>,
    /// `p(a_t)` for each logged step.
    pub step_probs: Vec<f64>,
}

impl BanditContext {
    /// `p(label)`.
    pub fn label_prob(&self) -> f64 {
        self.probs[self.label]
    }

    pub fn to_labelled(&self) -> LabelledContext {
        LabelledContext {
            context: self.context.clone(),
            query: BANDIT_STATE.to_vec(),
            label: self.label,
            behaviour_prob: self.label_prob(),
        }
    }
}

pub fn behaviour_distribution(dirichlet: &[f64], omega: f64, star: usize) -> Vec<f64> {
    dirichlet
        .iter()
        .enumerate()
        .map(|(a, &d)| (1.0 - omega) * d + if a == star { omega } else { 0.0 })
        .collect()
}

pub fn bandit_transition(arm: usize, reward: f64) -> Transition {
    Transition::new(BANDIT_STATE.to_vec(), arm, reward, BANDIT_STATE.to_vec(), true)
}

/// Roll `h` i.i.d. pulls from the behaviour distribution and draw a label.
pub fn gen_bandit_context<R: Rng + ?Sized>(
    task: &BanditTask,
    spec: &BehaviourSpec,
    h: usize,
    rng: &mut R,
) -> Result<BanditContext> {
    let arms = task.num_arms();
    if !(0.0..=1.0).contains(&spec.omega) {
        return Err(invalid(format!("omega must lie in [0, 1], got {}", spec.omega)));
    }
    let star = match spec.star {
        Some(s) if s >= arms => return Err(SpiceError::ActionOutOfRange { action: s, num_actions: arms }),
        Some(s) => s,
        None => rng.random_range(0..arms),
    };
    let raw: Vec<f64> = (0..arms).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    let dirichlet: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let probs = behaviour_distribution(&dirichlet, spec.omega, star);
    let dist = WeightedIndex::new(&probs).map_err(|e| invalid(e.to_string()))?;
    let mut context = Context::new();
    let mut step_probs = Vec::with_capacity(h);
    for _ in 0..h {
        let a = dist.sample(rng);
        context.push(bandit_transition(a, pull(task, a, rng)?));
        step_probs.push(probs[a]);
    }
    let label = match spec.label {
        LabelMode::RandomArm => star,
        LabelMode::Mix { q } => {
            if !(0.0..=1.0).contains(&q) {
                return Err(invalid(format!("label mix q must lie in [0, 1], got {q}")));
            }
            if rng.random::<f64>() < q {
                task.best_arm()
            } else {
                dist.sample(rng)
            }
        }
    };
    Ok(BanditContext {
        context,
        label,
        star,
        dirichlet,
        probs,
        step_probs,
    })
}
