//! Experiment orchestration, metrics and persistence.

mod bandit;
mod config;
mod darkroom;
mod output;
mod records;
pub mod stats;
mod theory;
pub mod verification;

pub use bandit::{
    bandit_instance, bandit_offline_with, bandit_online_with, bandit_roster, calibrated_prior, miscalibrated_prior,
    noise_sweep_with, run_bandit_episode, run_bandit_offline, run_bandit_online, run_noise_sweep,
};
pub use config::{
    AgentSpec, BanditSettings, DarkroomSettings, ExperimentConfig, ExperimentKind, PriorSpec, Theorem1Settings,
    Theorem2Settings,
};
pub use darkroom::{
    darkroom_eval_tasks, darkroom_online_with, darkroom_roster, fit_darkroom_prior, optimal_return,
    run_darkroom_episode, run_darkroom_online,
};
pub use output::{read_manifest, write_outputs, Manifest, OutputFile};
pub use records::{
    read_series_csv, summarize, task_means, write_series_csv, write_summary_csv, CurveSummary, RunRecord, Series,
    StepRecord,
};
pub use theory::{
    grid_q_values, theorem1_rhs, verify_theorem1, verify_theorem2, GridEpisodeRecord, RhsCheck, Theorem1Report,
    Theorem2Report,
};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::envs::{BanditTask, DarkroomTask};
use crate::error::{Result, SpiceError};

/// Ground truth of the task being evaluated. Factories may hand parts of it
/// to harness-built priors; agents themselves never receive it.
#[derive(Debug, Clone, Copy)]
pub enum Truth<'a> {
    Bandit(&'a BanditTask),
    Darkroom(&'a DarkroomTask),
}

pub type AgentFactory = Arc<dyn Fn(&Truth) -> Result<Box<dyn Agent>> + Send + Sync>;

/// Named agent factories evaluated side by side on matched seeds.
#[derive(Clone, Default)]
pub struct Roster {
    entries: Vec<(String, AgentFactory)>,
    allow_ground_truth: bool,
}

impl Roster {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, factory: AgentFactory) -> Result<()> {
        let name = name.into();
        if self.entries.iter().any(|(n, _)| *n == name) {
            return Err(SpiceError::Config(format!("duplicate agent name '{name}'")));
        }
        self.entries.push((name, factory));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Fresh agent `i` for one run.
    pub fn build(&self, i: usize, truth: &Truth) -> Result<Box<dyn Agent>> {
        let agent = (self.entries[i].1)(truth)?;
        if agent.reads_ground_truth() && !self.allow_ground_truth {
            return Err(SpiceError::Config(format!(
                "agent '{}' reads task ground truth; only verification runs may use it",
                self.entries[i].0
            )));
        }
        Ok(agent)
    }
}

/// Everything one experiment produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub kind: ExperimentKind,
    pub series: Vec<Series>,
    pub summaries: Vec<CurveSummary>,
    /// Experiment-specific analysis.
    pub analysis: serde_json::Value,
    pub report: String,
}

impl ExperimentResult {
    /// Keep every `every`-th point and the last of each curve.
    pub fn thin(&mut self, every: usize) {
        if every <= 1 {
            return;
        }
        let keep = |i: usize, len: usize| (i + 1).is_multiple_of(every) || i + 1 == len;
        for s in &mut self.series {
            let len = s.t.len();
            let idx: Vec<usize> = (0..len).filter(|&i| keep(i, len)).collect();
            s.t = idx.iter().map(|&i| s.t[i]).collect();
            s.values = idx.iter().map(|&i| s.values[i]).collect();
        }
        for s in &mut self.summaries {
            let len = s.t.len();
            let idx: Vec<usize> = (0..len).filter(|&i| keep(i, len)).collect();
            s.t = idx.iter().map(|&i| s.t[i]).collect();
            s.mean = idx.iter().map(|&i| s.mean[i]).collect();
            s.sem = idx.iter().map(|&i| s.sem[i]).collect();
        }
    }

    pub fn summary(&self, metric: &str, agent: &str) -> Option<&CurveSummary> {
        self.summaries.iter().find(|s| s.metric == metric && s.agent == agent)
    }
}

/// Dispatch on `config.experiment`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let mut result = match config.experiment {
        ExperimentKind::BanditOffline => run_bandit_offline(config),
        ExperimentKind::BanditOnline => run_bandit_online(config),
        ExperimentKind::BanditNoiseSweep => run_noise_sweep(config),
        ExperimentKind::DarkroomOnline => run_darkroom_online(config),
        ExperimentKind::Theorem1Verify => Ok(verify_theorem1(config)?.into_result()),
        ExperimentKind::Theorem2Verify => Ok(verify_theorem2(config)?.into_result()),
    }?;
    result.thin(config.record_every);
    Ok(result)
}

/// Run `f` on a pool of `workers` threads (rayon's global pool when `None`).
pub(crate) fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| SpiceError::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// `(task, replicate)` grid in deterministic order.
pub(crate) fn job_grid(config: &ExperimentConfig) -> Vec<(usize, usize)> {
    (0..config.num_tasks)
        .flat_map(|task| (0..config.seeds_per_task).map(move |rep| (task, rep)))
        .collect()
}

/// Seed of task instance `task` (means, goal, start).
pub(crate) fn instance_seed(master: u64, task: usize) -> u64 {
    crate::seed::task_seed(master, task as u64, 0)
}

/// Seed of replicate `rep` on task `task`.
pub(crate) fn run_seed(master: u64, task: usize, rep: usize) -> u64 {
    crate::seed::task_seed(master, task as u64, rep as u64 + 1)
}

/// Fixed-width text table: agent, final mean, SEM.
pub(crate) fn final_table(summaries: &[CurveSummary], metric: &str) -> String {
    let mut out = format!("{:<24} {:>12} {:>10}\n", "agent", metric, "sem");
    for s in summaries.iter().filter(|s| s.metric == metric) {
        out.push_str(&format!("{:<24} {:>12.4} {:>10.4}\n", s.agent, s.last_mean(), s.last_sem()));
    }
    out
}
