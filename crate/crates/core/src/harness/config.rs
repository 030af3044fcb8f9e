use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::agents::{SpiceConfig, SpiceMode, UcbBonus};
use crate::envs::BehaviourSpec;
use crate::error::{Result, SpiceError};
use crate::evidence::{KernelSpec, TdSpec};
use crate::fusion::BetaSchedule;
use crate::priors::StateFeatures;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    BanditOffline,
    BanditOnline,
    BanditNoiseSweep,
    DarkroomOnline,
    Theorem1Verify,
    Theorem2Verify,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::BanditOffline,
        ExperimentKind::BanditOnline,
        ExperimentKind::BanditNoiseSweep,
        ExperimentKind::DarkroomOnline,
        ExperimentKind::Theorem1Verify,
        ExperimentKind::Theorem2Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::BanditOffline => "bandit_offline",
            ExperimentKind::BanditOnline => "bandit_online",
            ExperimentKind::BanditNoiseSweep => "bandit_noise_sweep",
            ExperimentKind::DarkroomOnline => "darkroom_online",
            ExperimentKind::Theorem1Verify => "theorem1_verify",
            ExperimentKind::Theorem2Verify => "theorem2_verify",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = SpiceError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        let norm = match norm.as_str() {
            "theorem1" => "theorem1_verify",
            "theorem2" => "theorem2_verify",
            other => other,
        };
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| SpiceError::Config(format!("unknown experiment '{s}'")))
    }
}

/// Where a SPICE agent's value prior comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    /// `N_pri = 0` everywhere.
    Flat,
    /// The same Gaussian for every action.
    Constant { mean: f64, variance: f64 },
    /// Harness-built from the task's true arm means at pseudo-count `N_pri`.
    Calibrated { pseudo_count: f64 },
    /// As `Calibrated` with the best and worst arm means swapped.
    Miscalibrated { pseudo_count: f64 },
    /// Saved [`crate::priors::TabularPrior`] JSON.
    Tabular { path: PathBuf },
    /// Saved ensemble checkpoint JSON.
    Ensemble { path: PathBuf },
    /// Per-(cell, action) moments of TD targets on the training-goal dataset.
    DarkroomFitted,
}

impl PriorSpec {
    /// Harness-built priors read the task's arm means.
    pub fn uses_task_means(&self) -> bool {
        matches!(self, PriorSpec::Calibrated { .. } | PriorSpec::Miscalibrated { .. })
    }
}

fn default_spice_name() -> String {
    "spice".to_string()
}

fn default_imitation_contexts() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentSpec {
    Spice {
        #[serde(default = "default_spice_name")]
        name: String,
        prior: PriorSpec,
        /// Experiment-specific defaults when absent.
        #[serde(default)]
        config: Option<SpiceConfig>,
    },
    Emp,
    /// Hoeffding bonus `√(1/n)`.
    Ucb,
    /// `σ√(2 ln t / n)`.
    UcbTheory { sigma: f64 },
    Lcb,
    /// Known noise; the task's own σ when absent.
    Ts {
        #[serde(default)]
        sigma: Option<f64>,
    },
    Random,
    /// Modal-label table. Bandits fit it on `contexts` freshly generated
    /// training contexts; darkroom uses the prior-fitting dataset.
    Imitation {
        #[serde(default = "default_imitation_contexts")]
        contexts: usize,
    },
}

impl AgentSpec {
    pub fn spice(name: &str, prior: PriorSpec) -> Self {
        AgentSpec::Spice {
            name: name.to_string(),
            prior,
            config: None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            AgentSpec::Spice { name, .. } => name.clone(),
            AgentSpec::Emp => "emp".into(),
            AgentSpec::Ucb => "ucb".into(),
            AgentSpec::UcbTheory { .. } => "ucb_theory".into(),
            AgentSpec::Lcb => "lcb".into(),
            AgentSpec::Ts { .. } => "ts".into(),
            AgentSpec::Random => "random".into(),
            AgentSpec::Imitation { .. } => "imitation".into(),
        }
    }

    pub fn ucb_bonus(&self) -> Option<UcbBonus> {
        match *self {
            AgentSpec::Ucb => Some(UcbBonus::Hoeffding),
            AgentSpec::UcbTheory { sigma } => Some(UcbBonus::Theory { sigma }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditSettings {
    pub num_arms: usize,
    pub sigma: f64,
    /// Offline context sizes `h`.
    pub context_lengths: Vec<usize>,
    /// Noise levels for the sweep.
    pub sigmas: Vec<f64>,
    pub behaviour: BehaviourSpec,
    /// Length of the contexts used to fit the imitation table.
    pub train_context_length: usize,
    /// Noise variance assumed by SPICE.
    pub noise_variance: f64,
}

impl Default for BanditSettings {
    fn default() -> Self {
        Self {
            num_arms: 5,
            sigma: 0.3,
            context_lengths: vec![0, 1, 2, 5, 10, 25, 50, 100, 200, 500],
            sigmas: vec![0.0, 0.3, 0.5],
            behaviour: BehaviourSpec::default(),
            train_context_length: 50,
            noise_variance: 0.09,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarkroomSettings {
    pub size: usize,
    /// Uniform-random training episodes per training goal.
    pub train_episodes_per_goal: usize,
    pub train_episode_length: usize,
    /// Targets used to fit the tabular prior.
    pub prior_td: TdSpec,
    pub prior_min_samples: usize,
    pub spice: SpiceConfig,
}

impl Default for DarkroomSettings {
    fn default() -> Self {
        Self {
            size: 10,
            train_episodes_per_goal: 100,
            train_episode_length: 100,
            prior_td: TdSpec { n: 5, gamma: 0.95 },
            prior_min_samples: 2,
            spice: SpiceConfig {
                kernel: KernelSpec::rbf(0.5).encoded(),
                encoder: Some(StateFeatures::GridOneHot { size: 10 }),
                td: TdSpec { n: 5, gamma: 0.5 },
                noise_variance: 0.09,
                v_min: 1e-2,
                beta: BetaSchedule::constant(1.0),
                mode: SpiceMode::OnlineUcb,
                tie_break: crate::fusion::TieBreak::LowestIndex,
                evidence: crate::agents::EvidenceMode::Kernel,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem1Settings {
    pub pseudo_count: f64,
    /// First `t` of the log-fit window.
    pub fit_start: usize,
    /// Allowed second-half growth as a fraction of the total gap.
    pub plateau_tolerance: f64,
}

impl Default for Theorem1Settings {
    fn default() -> Self {
        Self {
            pseudo_count: 5.0,
            fit_start: 50,
            plateau_tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem2Settings {
    pub size: usize,
    /// Steps per episode.
    pub episode_length: usize,
    pub gamma: f64,
    pub noise_variance: f64,
    pub v_min: f64,
    pub pseudo_count: f64,
    /// `C_β`; the admissible floor for `N_max = pseudo_count` when absent.
    pub c_beta: Option<f64>,
    /// First `K` of the √K fit window.
    pub fit_start: usize,
    pub plateau_tolerance: f64,
}

impl Default for Theorem2Settings {
    fn default() -> Self {
        Self {
            size: 5,
            episode_length: 10,
            gamma: 0.5,
            noise_variance: 0.09,
            v_min: 1e-2,
            pseudo_count: 5.0,
            c_beta: None,
            fit_start: 20,
            plateau_tolerance: 0.1,
        }
    }
}

/// One experiment, fully determined by this document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    /// `N`.
    pub num_tasks: usize,
    /// Replicate seeds per task.
    pub seeds_per_task: usize,
    /// Steps per run (`H`), or episodes (`K`) for the grid verification.
    pub horizon: usize,
    pub agents: Vec<AgentSpec>,
    pub bandit: BanditSettings,
    pub darkroom: DarkroomSettings,
    pub theorem1: Theorem1Settings,
    pub theorem2: Theorem2Settings,
    pub output_dir: Option<PathBuf>,
    /// Worker threads; rayon's default when absent.
    pub workers: Option<usize>,
    /// Keep every n-th point (and the last) of each curve in the CSV outputs.
    pub record_every: usize,
}

impl ExperimentConfig {
    /// Desk-scale defaults for `kind`.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let bandit_online_agents = vec![
            AgentSpec::spice("spice", PriorSpec::Flat),
            AgentSpec::Ucb,
            AgentSpec::UcbTheory { sigma: 0.3 },
            AgentSpec::Ts { sigma: None },
            AgentSpec::Emp,
            AgentSpec::Random,
            AgentSpec::Imitation {
                contexts: default_imitation_contexts(),
            },
        ];
        let base = Self {
            experiment: kind,
            seed: 0,
            num_tasks: 200,
            seeds_per_task: 1,
            horizon: 500,
            agents: bandit_online_agents,
            bandit: BanditSettings::default(),
            darkroom: DarkroomSettings::default(),
            theorem1: Theorem1Settings::default(),
            theorem2: Theorem2Settings::default(),
            output_dir: None,
            workers: None,
            record_every: 1,
        };
        match kind {
            ExperimentKind::BanditOnline | ExperimentKind::BanditNoiseSweep => base,
            ExperimentKind::BanditOffline => Self {
                agents: vec![
                    AgentSpec::spice("spice", PriorSpec::Flat),
                    AgentSpec::Emp,
                    AgentSpec::Lcb,
                    AgentSpec::Random,
                    AgentSpec::Imitation {
                        contexts: default_imitation_contexts(),
                    },
                ],
                ..base
            },
            ExperimentKind::DarkroomOnline => Self {
                num_tasks: 100,
                seeds_per_task: 3,
                horizon: 100,
                agents: vec![
                    AgentSpec::spice("spice", PriorSpec::Flat),
                    AgentSpec::spice("spice_fitted", PriorSpec::DarkroomFitted),
                    AgentSpec::Random,
                    AgentSpec::Imitation {
                        contexts: default_imitation_contexts(),
                    },
                ],
                ..base
            },
            ExperimentKind::Theorem1Verify => Self {
                horizon: 2000,
                agents: Vec::new(),
                record_every: 10,
                ..base
            },
            ExperimentKind::Theorem2Verify => Self {
                num_tasks: 100,
                horizon: 500,
                agents: Vec::new(),
                ..base
            },
        }
    }

    /// Parse a JSON document; absent fields take the defaults of its
    /// `experiment` kind.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(s)?;
        let kind = user
            .get("experiment")
            .ok_or_else(|| SpiceError::Config("config is missing the 'experiment' field".into()))?;
        let kind: ExperimentKind = serde_json::from_value(kind.clone())
            .map_err(|e| SpiceError::Config(format!("bad experiment kind: {e}")))?;
        let mut merged = serde_json::to_value(Self::default_for(kind))?;
        merge(&mut merged, user);
        let cfg: Self = serde_json::from_value(merged).map_err(|e| SpiceError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Hex SHA-256 of the canonical JSON encoding, ignoring the output
    /// directory and worker count, which never change results.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = None;
        c.workers = None;
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(&c)?)))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SpiceError::Config(m));
        if self.num_tasks == 0 {
            return bad("num_tasks must be >= 1".into());
        }
        if self.seeds_per_task == 0 {
            return bad("seeds_per_task must be >= 1".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be >= 1".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be >= 1".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be >= 1".into());
        }
        if self.bandit.num_arms < 2 {
            return bad("bandits need at least two arms".into());
        }
        if !(self.bandit.sigma >= 0.0) || self.bandit.sigmas.iter().any(|s| !(*s >= 0.0)) {
            return bad("noise levels must be >= 0".into());
        }
        let mut names = BTreeSet::new();
        for a in &self.agents {
            if !names.insert(a.name()) {
                return bad(format!("duplicate agent name '{}'", a.name()));
            }
            if let AgentSpec::Spice { config: Some(c), .. } = a {
                c.validate()?;
            }
        }
        match self.experiment {
            ExperimentKind::BanditOffline if self.bandit.context_lengths.is_empty() => {
                bad("context_lengths must not be empty".into())
            }
            ExperimentKind::BanditNoiseSweep if self.bandit.sigmas.is_empty() => bad("sigmas must not be empty".into()),
            ExperimentKind::Theorem1Verify if self.horizon < 2 * self.theorem1.fit_start.max(2) => {
                bad(format!("theorem1 horizon must be at least twice fit_start ({})", self.theorem1.fit_start))
            }
            ExperimentKind::Theorem2Verify if self.horizon <= self.theorem2.fit_start => {
                bad("theorem2 horizon must exceed fit_start".into())
            }
            ExperimentKind::Theorem2Verify if self.theorem2.size < 2 || self.theorem2.size > 10 => {
                bad("theorem2 grid size must lie in [2, 10]".into())
            }
            ExperimentKind::DarkroomOnline if self.darkroom.size < 2 || self.darkroom.size > 10 => {
                bad("darkroom size must lie in [2, 10]".into())
            }
            _ => Ok(()),
        }
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() && !is_tagged(slot) => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Tagged enums are replaced wholesale rather than merged field by field.
fn is_tagged(v: &Value) -> bool {
    v.get("kind").is_some()
}
