use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use super::bandit::transpose;
use super::config::{AgentSpec, DarkroomSettings, ExperimentConfig, PriorSpec};
use super::records::{summarize, RunRecord, Series, StepRecord};
use super::stats::{mean, sem};
use super::{final_table, instance_seed, job_grid, run_seed, with_pool, AgentFactory, ExperimentResult, Roster, Truth};
use crate::agents::{Agent, ImitationAgent, RandomAgent, SpiceAgent, TaskInfo};
use crate::envs::darkroom::NUM_ACTIONS;
use crate::envs::{
    cell_state, darkroom_step, gen_darkroom_dataset, greedy_action, optimal_action_reward, Cell, DarkroomManifest,
    DarkroomTask,
};
use crate::error::{invalid, Result, SpiceError};
use crate::evidence::{td_targets, LabelledContext, StateKey, Transition};
use crate::priors::{EnsemblePrior, PriorEstimate, PriorProvider, TabularPrior};
use crate::seed::{mix, rng};

const DATASET_STREAM: u64 = 0xD7;

/// `n` evaluation tasks cycling over the held-out goals, each with its own
/// seeded start cell.
pub fn darkroom_eval_tasks(manifest: &DarkroomManifest, n: usize, seed: u64) -> Result<Vec<DarkroomTask>> {
    if manifest.held_out.is_empty() {
        return Err(SpiceError::Empty("held-out goals"));
    }
    (0..n)
        .map(|i| {
            let base = &manifest.held_out[i % manifest.held_out.len()];
            let mut r = rng(instance_seed(seed, i));
            let start = (r.random_range(0..manifest.size), r.random_range(0..manifest.size));
            DarkroomTask::new(manifest.size, base.goal, manifest.horizon, base.split, start)
        })
        .collect()
}

/// Empirical-Bayes tabular prior from uniform-random episodes on the training
/// goals: per (cell, action) moments of TD(n) targets bootstrapped from zero.
/// Also returns the dataset it was fitted on.
pub fn fit_darkroom_prior(
    manifest: &DarkroomManifest,
    settings: &DarkroomSettings,
    seed: u64,
) -> Result<(TabularPrior, Vec<LabelledContext>)> {
    let data = gen_darkroom_dataset(
        &manifest.train,
        settings.train_episodes_per_goal,
        settings.train_episode_length,
        &mut rng(mix(seed, DATASET_STREAM)),
    )?;
    let mut samples = Vec::new();
    for lc in &data {
        let targets = td_targets(&lc.context, &settings.prior_td, |_| 0.0)?;
        for (tr, y) in lc.context.iter().zip(targets) {
            samples.push((StateKey::GridXY.key(&tr.state), tr.action, y));
        }
    }
    if samples.is_empty() {
        return Err(SpiceError::Empty("darkroom training targets"));
    }
    let ys: Vec<f64> = samples.iter().map(|s| s.2).collect();
    let m = mean(&ys);
    let var = ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / (ys.len().max(2) - 1) as f64;
    let default = PriorEstimate::Moments { mean: m, variance: var };
    let prior = TabularPrior::fit(NUM_ACTIONS, StateKey::GridXY, default, samples, settings.prior_min_samples)?;
    Ok((prior, data))
}

fn manifest_for(config: &ExperimentConfig) -> Result<DarkroomManifest> {
    DarkroomManifest::generate(config.seed, config.darkroom.size, config.horizon)
}

/// Factories for the darkroom agents listed in `config`.
pub fn darkroom_roster(config: &ExperimentConfig, manifest: &DarkroomManifest) -> Result<Roster> {
    let needs_data = config.agents.iter().any(|a| {
        matches!(a, AgentSpec::Imitation { .. } | AgentSpec::Spice { prior: PriorSpec::DarkroomFitted, .. })
    });
    let fitted = if needs_data {
        Some(fit_darkroom_prior(manifest, &config.darkroom, config.seed)?)
    } else {
        None
    };
    let mut roster = Roster::new();
    for spec in &config.agents {
        let factory: AgentFactory = match spec {
            AgentSpec::Spice { name, prior, config: sc } => {
                let sc = sc.unwrap_or(config.darkroom.spice);
                sc.validate()?;
                let prior: Arc<dyn PriorProvider> = match prior {
                    PriorSpec::DarkroomFitted => Arc::new(fitted.as_ref().expect("fitted above").0.clone()),
                    PriorSpec::Flat => Arc::new(TabularPrior::flat(NUM_ACTIONS, StateKey::GridXY)),
                    &PriorSpec::Constant { mean, variance } => Arc::new(TabularPrior::new(
                        NUM_ACTIONS,
                        StateKey::GridXY,
                        PriorEstimate::Moments { mean, variance },
                    )),
                    PriorSpec::Tabular { path } => Arc::new(TabularPrior::load_json(path)?),
                    PriorSpec::Ensemble { path } => Arc::new(EnsemblePrior::load_json(path)?),
                    PriorSpec::Calibrated { .. } | PriorSpec::Miscalibrated { .. } => {
                        return Err(SpiceError::Config(
                            "calibrated priors are built by theorem2_verify, not darkroom_online".into(),
                        ))
                    }
                };
                if prior.num_actions() != NUM_ACTIONS {
                    return Err(SpiceError::DimensionMismatch {
                        expected: NUM_ACTIONS,
                        got: prior.num_actions(),
                    });
                }
                let name = name.clone();
                Arc::new(move |_| Ok(Box::new(SpiceAgent::new(name.clone(), sc, prior.clone())?) as Box<dyn Agent>))
            }
            AgentSpec::Random => Arc::new(|_| Ok(Box::new(RandomAgent::new(NUM_ACTIONS)) as Box<dyn Agent>)),
            AgentSpec::Imitation { .. } => {
                let table = ImitationAgent::fit(&fitted.as_ref().expect("fitted above").1, StateKey::GridXY, NUM_ACTIONS)?;
                Arc::new(move |_| Ok(Box::new(table.clone()) as Box<dyn Agent>))
            }
            other => {
                return Err(SpiceError::Config(format!(
                    "agent '{}' is bandit-only and cannot run on darkroom",
                    other.name()
                )))
            }
        };
        roster.push(spec.name(), factory)?;
    }
    Ok(roster)
}

/// Return of the shortest-path policy from `start` over the task horizon.
pub fn optimal_return(task: &DarkroomTask, start: Cell) -> Result<f64> {
    let mut cell = start;
    let mut total = 0.0;
    for _ in 0..task.horizon {
        let (next, r) = darkroom_step(task, cell, greedy_action(task, cell))?;
        total += r;
        cell = next;
    }
    Ok(total)
}

/// One online episode of `task.horizon` steps from `task.start`; the context
/// grows by one transition per step.
pub fn run_darkroom_episode(agent: &mut dyn Agent, task: &DarkroomTask, seed: u64) -> Result<Vec<StepRecord>> {
    agent.reset(&TaskInfo {
        num_actions: NUM_ACTIONS,
        state_dim: 2,
    })?;
    let mut agent_rng = rng(mix(seed, 1));
    let mut cell = task.start;
    let mut steps = Vec::with_capacity(task.horizon);
    for t in 1..=task.horizon as u64 {
        let state = cell_state(cell);
        let a = agent.act(&state, t, &mut agent_rng)?;
        let (next, r) = darkroom_step(task, cell, a)?;
        let best = optimal_action_reward(task, cell)?;
        agent.observe(&Transition::new(state, a, r, cell_state(next), t == task.horizon as u64))?;
        steps.push(StepRecord {
            t,
            action: a,
            reward: r,
            regret: best - r,
        });
        cell = next;
    }
    Ok(steps)
}

pub fn run_darkroom_online(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let manifest = manifest_for(config)?;
    darkroom_online_with(config, &darkroom_roster(config, &manifest)?, &manifest)
}

/// Cumulative return and regret curves over held-out goals.
pub fn darkroom_online_with(
    config: &ExperimentConfig,
    roster: &Roster,
    manifest: &DarkroomManifest,
) -> Result<ExperimentResult> {
    let tasks = darkroom_eval_tasks(manifest, config.num_tasks, config.seed)?;
    let jobs = job_grid(config);
    let names = roster.names();
    let per_job: Vec<Vec<RunRecord>> = with_pool(config.workers, || {
        jobs.par_iter()
            .map(|&(task, rep)| {
                let inst = &tasks[task];
                let seed = run_seed(config.seed, task, rep);
                (0..roster.len())
                    .map(|i| {
                        let mut agent = roster.build(i, &Truth::Darkroom(inst))?;
                        Ok(RunRecord {
                            agent: names[i].clone(),
                            task,
                            seed: rep,
                            steps: run_darkroom_episode(agent.as_mut(), inst, seed)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let runs = transpose(per_job, roster.len());
    let mut series = Vec::new();
    for r in runs.iter().flatten() {
        series.push(Series::from_run("return", r, r.cumulative_return()));
    }
    for r in runs.iter().flatten() {
        series.push(Series::from_run("regret", r, r.cumulative_regret()));
    }
    let summaries = summarize(&series)?;

    let window = 20.min(config.horizon / 2);
    let mut report = format!(
        "darkroom_online: {}x{} grid, N={} held-out tasks x {} seeds, H={}\n\n",
        manifest.size, manifest.size, config.num_tasks, config.seeds_per_task, config.horizon
    );
    report.push_str(&final_table(&summaries, "return"));
    report.push('\n');
    report.push_str(&final_table(&summaries, "regret"));
    report.push('\n');
    let mut agents = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let flattening = flattening(&runs[i], config.num_tasks, window)?;
        let ret = summaries.iter().find(|s| s.metric == "return" && s.agent == *name).expect("summarized");
        report.push_str(&format!(
            "{name}: regret first {window} steps {:.3}, last {window} steps {:.3}, difference {:.3} ± {:.3}\n",
            flattening.0, flattening.1, flattening.2, flattening.3
        ));
        agents.push(json!({
            "agent": name,
            "final_return": ret.last_mean(),
            "final_return_sem": ret.last_sem(),
            "regret_first_window": flattening.0,
            "regret_last_window": flattening.1,
            "first_minus_last": flattening.2,
            "first_minus_last_sem": flattening.3,
        }));
    }
    Ok(ExperimentResult {
        kind: config.experiment,
        series,
        summaries,
        analysis: json!({ "window": window, "agents": agents, "tasks": tasks }),
        report,
    })
}

/// Per-task (seed-averaged) regret in the first and last `window` steps:
/// means, and the mean and SEM of their difference.
fn flattening(runs: &[RunRecord], num_tasks: usize, window: usize) -> Result<(f64, f64, f64, f64)> {
    if window == 0 {
        return Err(invalid("horizon too short for a flattening window"));
    }
    let mut first = vec![(0.0, 0usize); num_tasks];
    let mut last = vec![0.0; num_tasks];
    for r in runs {
        let n = r.steps.len();
        first[r.task].0 += r.steps[..window].iter().map(|s| s.regret).sum::<f64>();
        first[r.task].1 += 1;
        last[r.task] += r.steps[n - window..].iter().map(|s| s.regret).sum::<f64>();
    }
    let f: Vec<f64> = first.iter().map(|(s, k)| s / *k as f64).collect();
    let l: Vec<f64> = last.iter().zip(&first).map(|(s, (_, k))| s / *k as f64).collect();
    let d: Vec<f64> = f.iter().zip(&l).map(|(a, b)| a - b).collect();
    Ok((mean(&f), mean(&l), mean(&d), sem(&d)))
}
