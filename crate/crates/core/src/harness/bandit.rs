use std::sync::Arc;

use rayon::prelude::*;
use serde_json::json;

use super::config::{AgentSpec, ExperimentConfig, ExperimentKind, PriorSpec};
use super::records::{summarize, RunRecord, Series, StepRecord};
use super::{final_table, instance_seed, job_grid, run_seed, with_pool, AgentFactory, ExperimentResult, Roster, Truth};
use crate::agents::{
    Agent, EmpAgent, ImitationAgent, LcbAgent, RandomAgent, SpiceAgent, SpiceConfig, SpiceMode, TaskInfo, TsAgent,
    UcbAgent, UcbBonus,
};
use crate::envs::{bandit_transition, gen_bandit_context, pull, sample_bandit, BanditTask, BANDIT_STATE};
use crate::error::{Result, SpiceError};
use crate::evidence::StateKey;
use crate::fusion::PseudoCount;
use crate::priors::{EnsemblePrior, PriorEstimate, PriorProvider, TabularPrior};
use crate::seed::{mix, rng};

const IMITATION_STREAM: u64 = 0x1417;

/// Task `task` of the experiment: means from its instance seed.
pub fn bandit_instance(config: &ExperimentConfig, task: usize) -> Result<BanditTask> {
    sample_bandit(instance_seed(config.seed, task), config.bandit.num_arms, config.bandit.sigma)
}

/// `μ_pri = μ_a` at pseudo-count `N_pri`.
pub fn calibrated_prior(task: &BanditTask, pseudo_count: f64, noise_variance: f64) -> Result<TabularPrior> {
    TabularPrior::bandit(&task.means, PseudoCount::new(pseudo_count)?, noise_variance)
}

/// Calibrated prior with the best and worst arm means swapped.
pub fn miscalibrated_prior(task: &BanditTask, pseudo_count: f64, noise_variance: f64) -> Result<TabularPrior> {
    let best = task.best_arm();
    let worst = (0..task.num_arms())
        .min_by(|&a, &b| task.means[a].total_cmp(&task.means[b]))
        .expect("at least two arms");
    let mut means = task.means.clone();
    means.swap(best, worst);
    TabularPrior::bandit(&means, PseudoCount::new(pseudo_count)?, noise_variance)
}

fn load_prior(spec: &PriorSpec, num_actions: usize) -> Result<Option<Arc<dyn PriorProvider>>> {
    let prior: Arc<dyn PriorProvider> = match spec {
        PriorSpec::Flat => Arc::new(TabularPrior::flat(num_actions, StateKey::Shared)),
        &PriorSpec::Constant { mean, variance } => Arc::new(TabularPrior::new(
            num_actions,
            StateKey::Shared,
            PriorEstimate::Moments { mean, variance },
        )),
        PriorSpec::Tabular { path } => Arc::new(TabularPrior::load_json(path)?),
        PriorSpec::Ensemble { path } => Arc::new(EnsemblePrior::load_json(path)?),
        PriorSpec::Calibrated { .. } | PriorSpec::Miscalibrated { .. } => return Ok(None),
        PriorSpec::DarkroomFitted => {
            return Err(SpiceError::Config("darkroom_fitted priors only apply to darkroom experiments".into()))
        }
    };
    if prior.num_actions() != num_actions {
        return Err(SpiceError::DimensionMismatch {
            expected: num_actions,
            got: prior.num_actions(),
        });
    }
    Ok(Some(prior))
}

fn fit_bandit_imitation(config: &ExperimentConfig, contexts: usize) -> Result<ImitationAgent> {
    let base = mix(config.seed, IMITATION_STREAM);
    let data = (0..contexts)
        .map(|j| {
            let s = mix(base, j as u64);
            let task = sample_bandit(s, config.bandit.num_arms, config.bandit.sigma)?;
            let ctx = gen_bandit_context(&task, &config.bandit.behaviour, config.bandit.train_context_length, &mut rng(mix(s, 1)))?;
            Ok(ctx.to_labelled())
        })
        .collect::<Result<Vec<_>>>()?;
    ImitationAgent::fit(&data, StateKey::Shared, config.bandit.num_arms)
}

fn bandit_of<'a>(truth: &Truth<'a>) -> Result<&'a BanditTask> {
    match *truth {
        Truth::Bandit(t) => Ok(t),
        Truth::Darkroom(_) => Err(SpiceError::Config("bandit agent asked to run on a darkroom task".into())),
    }
}

/// Factories for the bandit agents listed in `config`.
pub fn bandit_roster(config: &ExperimentConfig) -> Result<Roster> {
    let arms = config.bandit.num_arms;
    let mut roster = Roster::new();
    for spec in &config.agents {
        let factory: AgentFactory = match spec {
            AgentSpec::Spice { name, prior, config: sc } => {
                let mut sc = sc.unwrap_or_else(|| SpiceConfig::bandit(config.bandit.noise_variance));
                if sc_is_default(spec) && config.experiment == ExperimentKind::BanditOffline {
                    sc.mode = SpiceMode::OfflineGreedy;
                }
                sc.validate()?;
                let name = name.clone();
                match (load_prior(prior, arms)?, prior.clone()) {
                    (Some(p), _) => Arc::new(move |_| Ok(Box::new(SpiceAgent::new(name.clone(), sc, p.clone())?) as Box<dyn Agent>)),
                    (None, PriorSpec::Calibrated { pseudo_count }) => Arc::new(move |truth| {
                        let p = calibrated_prior(bandit_of(truth)?, pseudo_count, sc.noise_variance)?;
                        Ok(Box::new(SpiceAgent::new(name.clone(), sc, Arc::new(p))?) as Box<dyn Agent>)
                    }),
                    (None, PriorSpec::Miscalibrated { pseudo_count }) => Arc::new(move |truth| {
                        let p = miscalibrated_prior(bandit_of(truth)?, pseudo_count, sc.noise_variance)?;
                        Ok(Box::new(SpiceAgent::new(name.clone(), sc, Arc::new(p))?) as Box<dyn Agent>)
                    }),
                    (None, _) => unreachable!("load_prior returns None only for task-built priors"),
                }
            }
            AgentSpec::Emp => Arc::new(move |_| Ok(Box::new(EmpAgent::new(arms)) as Box<dyn Agent>)),
            AgentSpec::Ucb => Arc::new(move |_| Ok(Box::new(UcbAgent::new(arms, UcbBonus::Hoeffding)) as Box<dyn Agent>)),
            &AgentSpec::UcbTheory { sigma } => {
                Arc::new(move |_| Ok(Box::new(UcbAgent::new(arms, UcbBonus::Theory { sigma })) as Box<dyn Agent>))
            }
            AgentSpec::Lcb => Arc::new(move |_| Ok(Box::new(LcbAgent::new(arms)) as Box<dyn Agent>)),
            &AgentSpec::Ts { sigma } => Arc::new(move |truth| {
                let s = match sigma {
                    Some(s) => s,
                    None => bandit_of(truth)?.sigma,
                };
                Ok(Box::new(TsAgent::new(arms, s)?) as Box<dyn Agent>)
            }),
            AgentSpec::Random => Arc::new(move |_| Ok(Box::new(RandomAgent::new(arms)) as Box<dyn Agent>)),
            &AgentSpec::Imitation { contexts } => {
                let fitted = fit_bandit_imitation(config, contexts)?;
                Arc::new(move |_| Ok(Box::new(fitted.clone()) as Box<dyn Agent>))
            }
        };
        roster.push(spec.name(), factory)?;
    }
    Ok(roster)
}

fn sc_is_default(spec: &AgentSpec) -> bool {
    matches!(spec, AgentSpec::Spice { config: None, .. })
}

/// `horizon` online steps from an empty context. Rewards come from
/// `mix(seed, 0)` and agent randomness from `mix(seed, 1)`, so matched seeds
/// give every agent the same streams.
pub fn run_bandit_episode(agent: &mut dyn Agent, task: &BanditTask, horizon: usize, seed: u64) -> Result<Vec<StepRecord>> {
    agent.reset(&TaskInfo {
        num_actions: task.num_arms(),
        state_dim: BANDIT_STATE.len(),
    })?;
    let mut env = rng(mix(seed, 0));
    let mut agent_rng = rng(mix(seed, 1));
    let mut steps = Vec::with_capacity(horizon);
    for t in 1..=horizon as u64 {
        let a = agent.act(&BANDIT_STATE, t, &mut agent_rng)?;
        if a >= task.num_arms() {
            return Err(SpiceError::ActionOutOfRange {
                action: a,
                num_actions: task.num_arms(),
            });
        }
        let r = pull(task, a, &mut env)?;
        agent.observe(&bandit_transition(a, r))?;
        steps.push(StepRecord {
            t,
            action: a,
            reward: r,
            regret: task.regret(a),
        });
    }
    Ok(steps)
}

/// Online runs for every (task, replicate) job; indexed `[agent][job]`.
pub(crate) fn bandit_online_runs<F>(config: &ExperimentConfig, roster: &Roster, instance: F) -> Result<Vec<Vec<RunRecord>>>
where
    F: Fn(usize) -> Result<BanditTask> + Sync,
{
    let jobs = job_grid(config);
    let names = roster.names();
    let per_job: Vec<Vec<RunRecord>> = with_pool(config.workers, || {
        jobs.par_iter()
            .map(|&(task, rep)| {
                let inst = instance(task)?;
                let seed = run_seed(config.seed, task, rep);
                (0..roster.len())
                    .map(|i| {
                        let mut agent = roster.build(i, &Truth::Bandit(&inst))?;
                        let steps = run_bandit_episode(agent.as_mut(), &inst, config.horizon, seed)?;
                        Ok(RunRecord {
                            agent: names[i].clone(),
                            task,
                            seed: rep,
                            steps,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(transpose(per_job, roster.len()))
}

pub(crate) fn transpose<T>(per_job: Vec<Vec<T>>, agents: usize) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = (0..agents).map(|_| Vec::with_capacity(per_job.len())).collect();
    for job in per_job {
        for (i, r) in job.into_iter().enumerate() {
            out[i].push(r);
        }
    }
    out
}

pub(crate) fn regret_series(runs: &[Vec<RunRecord>]) -> Vec<Series> {
    runs.iter()
        .flatten()
        .map(|r| Series::from_run("regret", r, r.cumulative_regret()))
        .collect()
}

pub fn run_bandit_online(config: &ExperimentConfig) -> Result<ExperimentResult> {
    bandit_online_with(config, &bandit_roster(config)?)
}

pub fn bandit_online_with(config: &ExperimentConfig, roster: &Roster) -> Result<ExperimentResult> {
    let runs = bandit_online_runs(config, roster, |task| bandit_instance(config, task))?;
    let series = regret_series(&runs);
    let summaries = summarize(&series)?;
    let half = config.horizon / 2;
    let mut agents = Vec::new();
    let mut report = format!(
        "bandit_online: N={} tasks x {} seeds, A={}, sigma={}, H={}\n\n",
        config.num_tasks, config.seeds_per_task, config.bandit.num_arms, config.bandit.sigma, config.horizon
    );
    report.push_str(&final_table(&summaries, "regret"));
    report.push('\n');
    for s in &summaries {
        let ratio = (half >= 1).then(|| s.last_mean() / s.mean[half - 1]);
        if let Some(r) = ratio {
            report.push_str(&format!("{}: regret(H)/regret(H/2) = {:.4}\n", s.agent, r));
        }
        agents.push(json!({
            "agent": s.agent,
            "final_mean": s.last_mean(),
            "final_sem": s.last_sem(),
            "half_ratio": ratio,
        }));
    }
    Ok(ExperimentResult {
        kind: config.experiment,
        series,
        summaries,
        analysis: json!({ "agents": agents }),
        report,
    })
}

pub fn run_noise_sweep(config: &ExperimentConfig) -> Result<ExperimentResult> {
    noise_sweep_with(config, &bandit_roster(config)?)
}

/// Final regret per σ with arm means held fixed across levels.
pub fn noise_sweep_with(config: &ExperimentConfig, roster: &Roster) -> Result<ExperimentResult> {
    let sigmas = &config.bandit.sigmas;
    // [sigma][agent][job]
    let mut finals: Vec<Vec<Vec<RunRecord>>> = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        finals.push(bandit_online_runs(config, roster, |task| bandit_instance(config, task)?.with_sigma(sigma))?);
    }
    let names = roster.names();
    let jobs = job_grid(config);
    let mut series = Vec::new();
    for (i, name) in names.iter().enumerate() {
        for (j, &(task, rep)) in jobs.iter().enumerate() {
            series.push(Series {
                metric: "final_regret".into(),
                agent: name.clone(),
                task,
                seed: rep,
                t: sigmas.clone(),
                values: finals.iter().map(|per_sigma| per_sigma[i][j].total_regret()).collect(),
            });
        }
    }
    let summaries = summarize(&series)?;
    let mut report = format!(
        "bandit_noise_sweep: N={} tasks x {} seeds, A={}, H={}, means fixed across sigma\n\n{:<24}",
        config.num_tasks, config.seeds_per_task, config.bandit.num_arms, config.horizon, "agent"
    );
    for s in sigmas {
        report.push_str(&format!(" {:>18}", format!("sigma={s}")));
    }
    report.push('\n');
    let mut rows = Vec::new();
    for s in &summaries {
        report.push_str(&format!("{:<24}", s.agent));
        for (m, e) in s.mean.iter().zip(&s.sem) {
            report.push_str(&format!(" {:>18}", format!("{m:.3} ± {e:.3}")));
        }
        report.push('\n');
        rows.push(json!({ "agent": s.agent, "sigma": s.t, "mean": s.mean, "sem": s.sem }));
    }
    Ok(ExperimentResult {
        kind: config.experiment,
        series,
        summaries,
        analysis: json!({ "final_regret": rows }),
        report,
    })
}

pub fn run_bandit_offline(config: &ExperimentConfig) -> Result<ExperimentResult> {
    bandit_offline_with(config, &bandit_roster(config)?)
}

/// Suboptimality `μ* − μ_â` of one offline pick per context size.
pub fn bandit_offline_with(config: &ExperimentConfig, roster: &Roster) -> Result<ExperimentResult> {
    let jobs = job_grid(config);
    let names = roster.names();
    let grid = &config.bandit.context_lengths;
    let per_job: Vec<Vec<Series>> = with_pool(config.workers, || {
        jobs.par_iter()
            .map(|&(task, rep)| {
                let inst = bandit_instance(config, task)?;
                let seed = run_seed(config.seed, task, rep);
                let agents = (0..roster.len())
                    .map(|i| roster.build(i, &Truth::Bandit(&inst)))
                    .collect::<Result<Vec<_>>>()?;
                let mut values = vec![Vec::with_capacity(grid.len()); agents.len()];
                for (hi, &h) in grid.iter().enumerate() {
                    let ctx = gen_bandit_context(&inst, &config.bandit.behaviour, h, &mut rng(mix(seed, 100 + hi as u64)))?;
                    for (agent, v) in agents.iter().zip(values.iter_mut()) {
                        let a = agent.decide_offline(&BANDIT_STATE, &ctx.context, &mut rng(mix(seed, 200 + hi as u64)))?;
                        if a >= inst.num_arms() {
                            return Err(SpiceError::ActionOutOfRange {
                                action: a,
                                num_actions: inst.num_arms(),
                            });
                        }
                        v.push(inst.regret(a));
                    }
                }
                Ok(values
                    .into_iter()
                    .zip(&names)
                    .map(|(values, name)| Series {
                        metric: "suboptimality".into(),
                        agent: name.clone(),
                        task,
                        seed: rep,
                        t: grid.iter().map(|&h| h as f64).collect(),
                        values,
                    })
                    .collect())
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let series: Vec<Series> = transpose(per_job, roster.len()).into_iter().flatten().collect();
    let summaries = summarize(&series)?;
    let mut report = format!(
        "bandit_offline: N={} tasks x {} seeds, A={}, sigma={}\nsuboptimality (mean ± sem) by context size h\n\n{:<8}",
        config.num_tasks, config.seeds_per_task, config.bandit.num_arms, config.bandit.sigma, "h"
    );
    for s in &summaries {
        report.push_str(&format!(" {:>18}", s.agent));
    }
    report.push('\n');
    for (k, h) in grid.iter().enumerate() {
        report.push_str(&format!("{h:<8}"));
        for s in &summaries {
            report.push_str(&format!(" {:>18}", format!("{:.4} ± {:.4}", s.mean[k], s.sem[k])));
        }
        report.push('\n');
    }
    let rows: Vec<_> = summaries
        .iter()
        .map(|s| json!({ "agent": s.agent, "h": s.t, "mean": s.mean, "sem": s.sem }))
        .collect();
    Ok(ExperimentResult {
        kind: config.experiment,
        series,
        summaries,
        analysis: json!({ "suboptimality": rows }),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::default_for(kind);
        c.num_tasks = 6;
        c.horizon = 60;
        c.agents.retain(|a| !matches!(a, AgentSpec::Imitation { .. }));
        c.agents.push(AgentSpec::Imitation { contexts: 50 });
        c
    }

    #[test]
    fn online_bookkeeping_is_consistent() {
        let cfg = small(ExperimentKind::BanditOnline);
        let res = run_bandit_online(&cfg).unwrap();
        assert_eq!(res.series.len(), cfg.agents.len() * 6);
        for s in &res.series {
            assert_eq!(s.values.len(), 60);
            assert!(s.values.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn miscalibrated_prior_swaps_extremes() {
        let task = BanditTask::new(vec![0.2, 0.9, 0.5, 0.1], 0.3).unwrap();
        let p = miscalibrated_prior(&task, 5.0, 0.09).unwrap();
        let means: Vec<f64> = p.estimate(&BANDIT_STATE).unwrap().iter().map(|e| e.mean().unwrap()).collect();
        assert_eq!(means, vec![0.2, 0.1, 0.5, 0.9]);
        let PriorEstimate::Moments { variance, .. } = p.estimate(&BANDIT_STATE).unwrap()[0] else { panic!() };
        assert!((variance - 0.09 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn offline_grid_shapes() {
        let mut cfg = small(ExperimentKind::BanditOffline);
        cfg.bandit.context_lengths = vec![0, 3, 20];
        let res = run_bandit_offline(&cfg).unwrap();
        for s in &res.summaries {
            assert_eq!(s.t, vec![0.0, 3.0, 20.0]);
            assert!(s.mean.iter().all(|m| *m >= 0.0));
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut cfg = small(ExperimentKind::BanditOnline);
        cfg.workers = Some(1);
        let a = run_bandit_online(&cfg).unwrap();
        cfg.workers = Some(3);
        let b = run_bandit_online(&cfg).unwrap();
        assert_eq!(a.series, b.series);
    }

    #[test]
    fn sweep_holds_means_fixed() {
        let mut cfg = small(ExperimentKind::BanditNoiseSweep);
        cfg.agents = vec![AgentSpec::Ucb];
        let res = run_noise_sweep(&cfg).unwrap();
        assert_eq!(res.summaries[0].t, vec![0.0, 0.3, 0.5]);
        let base = bandit_instance(&cfg, 2).unwrap();
        assert_eq!(base.with_sigma(0.5).unwrap().means, base.means);
    }
}
