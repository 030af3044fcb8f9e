use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bandit::{bandit_instance, bandit_online_runs, bandit_roster, regret_series, transpose};
use super::config::{AgentSpec, ExperimentConfig, ExperimentKind, PriorSpec};
use super::darkroom::optimal_return;
use super::records::{running_sum, summarize, task_means, CurveSummary, Series};
use super::stats::{linear_fit, log_fit, mean, plateau, sem, sqrt_fit, LinearFit, PlateauStat};
use super::{instance_seed, job_grid, run_seed, with_pool, ExperimentResult};
use crate::agents::{Agent, EvidenceMode, SpiceAgent, SpiceConfig, SpiceMode, TaskInfo};
use crate::envs::darkroom::NUM_ACTIONS;
use crate::envs::{cell_state, darkroom_step, move_cell, BanditTask, Cell, DarkroomTask, Split};
use crate::error::{invalid, Result};
use crate::evidence::{KernelSpec, StateKey, TdSpec, Transition};
use crate::fusion::{BetaSchedule, PseudoCount, TieBreak};
use crate::priors::{PriorEstimate, TabularPrior};
use crate::seed::{mix, rng};

pub const FLAT: &str = "spice_flat";
pub const CALIBRATED: &str = "spice_calibrated";
pub const MISCALIBRATED: &str = "spice_miscalibrated";

/// Right-hand side of the logarithmic regret bound at horizon `t` for a prior
/// with means `prior_means` and pseudo-count `N_pri`; the `O(1)` term is
/// `Σ_{a≠*} Δ_a`. Arms with zero gap are skipped.
pub fn theorem1_rhs(task: &BanditTask, sigma: f64, pseudo_count: f64, prior_means: &[f64], t: f64) -> f64 {
    let star = task.best_arm();
    let log_t = t.max(1.0).ln();
    task.gaps()
        .iter()
        .enumerate()
        .filter(|&(a, &d)| a != star && d > 0.0)
        .map(|(a, &d)| {
            32.0 * sigma * sigma * log_t / (d * d) + 4.0 * pseudo_count * (prior_means[a] - task.means[a]).abs() + d
        })
        .sum()
}

/// Empirical regret against the bound at every step of every run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhsCheck {
    pub checked: usize,
    pub violations: usize,
    /// Largest `regret(t) / RHS(t)`.
    pub worst_ratio: f64,
}

/// Mean over tasks of `a(t) − b(t)` stays within `3·SEM` of zero from above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominanceCheck {
    /// `max_t (mean − 3·sem)`; `≤ 0` means `a ≤ b` holds within tolerance.
    pub max_margin: f64,
    pub worst_t: usize,
    pub holds: bool,
}

fn dominance(a: &BTreeMap<usize, Vec<f64>>, b: &BTreeMap<usize, Vec<f64>>) -> Result<DominanceCheck> {
    let diffs: Vec<Vec<f64>> = a
        .iter()
        .map(|(task, ca)| {
            let cb = b.get(task).ok_or_else(|| invalid(format!("task {task} missing from comparison")))?;
            Ok(ca.iter().zip(cb).map(|(x, y)| x - y).collect())
        })
        .collect::<Result<_>>()?;
    let len = diffs.first().map(|d| d.len()).unwrap_or(0);
    let mut worst = (f64::NEG_INFINITY, 0);
    let mut column = vec![0.0; diffs.len()];
    for t in 0..len {
        for (c, d) in column.iter_mut().zip(&diffs) {
            *c = d[t];
        }
        let margin = mean(&column) - 3.0 * sem(&column);
        if margin > worst.0 {
            worst = (margin, t + 1);
        }
    }
    Ok(DominanceCheck {
        max_margin: worst.0,
        worst_t: worst.1,
        holds: worst.0 <= 0.0,
    })
}

fn gap_curves(a: &BTreeMap<usize, Vec<f64>>, b: &BTreeMap<usize, Vec<f64>>) -> Vec<Vec<f64>> {
    a.iter()
        .map(|(task, ca)| ca.iter().zip(&b[task]).map(|(x, y)| x - y).collect())
        .collect()
}

fn window(s: &CurveSummary, from: usize) -> (Vec<f64>, Vec<f64>) {
    let idx: Vec<usize> = (0..s.t.len()).filter(|&i| s.t[i] >= from as f64).collect();
    (idx.iter().map(|&i| s.t[i]).collect(), idx.iter().map(|&i| s.mean[i]).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub num_tasks: usize,
    pub seeds_per_task: usize,
    pub horizon: usize,
    pub sigma: f64,
    pub pseudo_count: f64,
    /// Flat-prior `regret(t) = a + b·ln t` on `[fit_start, K]`.
    pub log_fit: LinearFit,
    pub fit_start: usize,
    pub flat_final: f64,
    pub flat_final_sem: f64,
    pub ucb_final: f64,
    pub ucb_final_sem: f64,
    /// Flat-prior final regret over Hoeffding-UCB final regret.
    pub ucb_ratio: f64,
    pub calibrated_final: f64,
    pub miscalibrated_final: f64,
    /// Calibrated ≤ flat at every `t`.
    pub calibrated_vs_flat: DominanceCheck,
    /// Miscalibrated − flat gap.
    pub gap: PlateauStat,
    pub rhs: BTreeMap<String, RhsCheck>,
    /// Steps where flat SPICE and `σ√(2 ln t/n)` UCB chose differently.
    pub reduction_mismatches: usize,
    #[serde(skip)]
    pub series: Vec<Series>,
    #[serde(skip)]
    pub summaries: Vec<CurveSummary>,
}

impl Theorem1Report {
    pub fn render(&self) -> String {
        let mut s = format!(
            "theorem1_verify: A-armed Gaussian bandits, N={} tasks x {} seeds, sigma={}, K={}, N_pri={}\n\n",
            self.num_tasks, self.seeds_per_task, self.sigma, self.horizon, self.pseudo_count
        );
        s.push_str(&format!(
            "(a) flat-prior log fit on t in [{}, {}]: regret = {:.4} + {:.4} ln t, R^2 = {:.5}\n",
            self.fit_start, self.horizon, self.log_fit.intercept, self.log_fit.slope, self.log_fit.r2
        ));
        s.push_str(&format!(
            "    final regret: flat {:.3} ± {:.3}, ucb {:.3} ± {:.3}, ratio {:.3}\n",
            self.flat_final, self.flat_final_sem, self.ucb_final, self.ucb_final_sem, self.ucb_ratio
        ));
        s.push_str(&format!(
            "(b) miscalibrated - flat gap: total {:.3} ± {:.3}, growth over [{}, {}] {:.3} ± {:.3} ({:.1}% of total, tolerance {:.0}%): {}\n",
            self.gap.total,
            self.gap.total_sem,
            self.gap.half,
            self.gap.horizon,
            self.gap.growth,
            self.gap.growth_sem,
            100.0 * self.gap.fraction,
            100.0 * self.gap.tolerance,
            pass(self.gap.passes)
        ));
        s.push_str("(c) regret vs bound at every step:\n");
        for (agent, c) in &self.rhs {
            s.push_str(&format!(
                "    {agent}: {} violations in {} checks, worst regret/bound {:.4}\n",
                c.violations, c.checked, c.worst_ratio
            ));
        }
        s.push_str(&format!(
            "calibrated <= flat at every t (3 SEM): max margin {:.4} at t={}: {}\n",
            self.calibrated_vs_flat.max_margin,
            self.calibrated_vs_flat.worst_t,
            pass(self.calibrated_vs_flat.holds)
        ));
        s.push_str(&format!(
            "final regret: calibrated {:.3}, miscalibrated {:.3}\nreduction to sigma-UCB: {} mismatched steps\n",
            self.calibrated_final, self.miscalibrated_final, self.reduction_mismatches
        ));
        s
    }

    pub fn into_result(self) -> ExperimentResult {
        let analysis = serde_json::to_value(&self).expect("plain data serializes");
        let report = self.render();
        ExperimentResult {
            kind: ExperimentKind::Theorem1Verify,
            series: self.series,
            summaries: self.summaries,
            analysis,
            report,
        }
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn theorem1_agents(config: &ExperimentConfig) -> Vec<AgentSpec> {
    let n = config.theorem1.pseudo_count;
    let mut sc = SpiceConfig::bandit(config.bandit.noise_variance);
    sc.evidence = EvidenceMode::Keyed { key: StateKey::Shared };
    let spice = |name: &str, prior| AgentSpec::Spice {
        name: name.into(),
        prior,
        config: Some(sc),
    };
    let mut agents = vec![
        spice(FLAT, PriorSpec::Flat),
        spice(CALIBRATED, PriorSpec::Calibrated { pseudo_count: n }),
        spice(MISCALIBRATED, PriorSpec::Miscalibrated { pseudo_count: n }),
        AgentSpec::Ucb,
        AgentSpec::UcbTheory {
            sigma: config.bandit.noise_variance.sqrt(),
        },
    ];
    let names: Vec<String> = agents.iter().map(|a| a.name()).collect();
    agents.extend(config.agents.iter().filter(|a| !names.contains(&a.name())).cloned());
    agents
}

/// Flat, calibrated and miscalibrated priors against UCB on matched seeds.
pub fn verify_theorem1(config: &ExperimentConfig) -> Result<Theorem1Report> {
    let mut cfg = config.clone();
    cfg.agents = theorem1_agents(config);
    cfg.validate()?;
    let roster = bandit_roster(&cfg)?;
    let names = roster.names();
    let runs = bandit_online_runs(&cfg, &roster, |task| bandit_instance(&cfg, task))?;
    let series = regret_series(&runs);
    let summaries = summarize(&series)?;
    let by_name = |n: &str| names.iter().position(|x| x == n).expect("theorem agents present");
    let curves = |n: &str| -> Result<BTreeMap<usize, Vec<f64>>> {
        let idx = by_name(n);
        task_means(&series.iter().filter(|s| s.agent == names[idx]).collect::<Vec<_>>())
    };
    let summary = |n: &str| summaries.iter().find(|s| s.agent == n).expect("summarized");
    let flat = curves(FLAT)?;
    let calibrated = curves(CALIBRATED)?;
    let miscal = curves(MISCALIBRATED)?;

    let fit_start = cfg.theorem1.fit_start;
    let (t, y) = window(summary(FLAT), fit_start);
    let log = log_fit(&t, &y)?;

    let gap = plateau(&gap_curves(&miscal, &flat), cfg.theorem1.plateau_tolerance)?;
    let calibrated_vs_flat = dominance(&calibrated, &flat)?;

    let sigma = cfg.bandit.sigma;
    let n = cfg.theorem1.pseudo_count;
    let mut rhs = BTreeMap::new();
    for (agent, pseudo, swap) in [(FLAT, 0.0, false), (CALIBRATED, n, false), (MISCALIBRATED, n, true)] {
        let mut check = RhsCheck {
            checked: 0,
            violations: 0,
            worst_ratio: 0.0,
        };
        for run in &runs[by_name(agent)] {
            let task = bandit_instance(&cfg, run.task)?;
            let mut prior_means = task.means.clone();
            if swap {
                let worst = (0..task.num_arms())
                    .min_by(|&a, &b| task.means[a].total_cmp(&task.means[b]))
                    .expect("arms");
                prior_means.swap(task.best_arm(), worst);
            }
            for (k, r) in run.cumulative_regret().iter().enumerate() {
                let bound = theorem1_rhs(&task, sigma, pseudo, &prior_means, (k + 1) as f64);
                check.checked += 1;
                if *r > bound {
                    check.violations += 1;
                }
                if bound > 0.0 {
                    check.worst_ratio = check.worst_ratio.max(r / bound);
                }
            }
        }
        rhs.insert(agent.to_string(), check);
    }

    let reduction_mismatches = runs[by_name(FLAT)]
        .iter()
        .zip(&runs[by_name("ucb_theory")])
        .map(|(a, b)| a.steps.iter().zip(&b.steps).filter(|(x, y)| x.action != y.action).count())
        .sum();

    let flat_s = summary(FLAT);
    let ucb_s = summary("ucb");
    Ok(Theorem1Report {
        num_tasks: cfg.num_tasks,
        seeds_per_task: cfg.seeds_per_task,
        horizon: cfg.horizon,
        sigma,
        pseudo_count: n,
        log_fit: log,
        fit_start,
        flat_final: flat_s.last_mean(),
        flat_final_sem: flat_s.last_sem(),
        ucb_final: ucb_s.last_mean(),
        ucb_final_sem: ucb_s.last_sem(),
        ucb_ratio: flat_s.last_mean() / ucb_s.last_mean(),
        calibrated_final: summary(CALIBRATED).last_mean(),
        miscalibrated_final: summary(MISCALIBRATED).last_mean(),
        calibrated_vs_flat,
        gap,
        rhs,
        reduction_mismatches,
        series,
        summaries,
    })
}

/// Discounted optimal action values on an open grid with reward 1 on entering
/// (or staying on) `goal`: `Q(s, a) = γ^{d(s')}/(1 − γ)`. Indexed
/// `[x·size + y][a]`.
pub fn grid_q_values(size: usize, goal: Cell, gamma: f64) -> Result<Vec<[f64; NUM_ACTIONS]>> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(invalid(format!("grid values need gamma in [0, 1), got {gamma}")));
    }
    let mut q = vec![[0.0; NUM_ACTIONS]; size * size];
    for x in 0..size {
        for y in 0..size {
            for (a, slot) in q[x * size + y].iter_mut().enumerate() {
                let (nx, ny) = move_cell(size, (x, y), a)?;
                let d = nx.abs_diff(goal.0) + ny.abs_diff(goal.1);
                *slot = gamma.powi(d as i32) / (1.0 - gamma);
            }
        }
    }
    Ok(q)
}

fn grid_prior(size: usize, values_goal: Cell, gamma: f64, pseudo_count: f64, noise_variance: f64) -> Result<TabularPrior> {
    let variance = PseudoCount::new(pseudo_count)?
        .prior_variance(noise_variance)
        .ok_or_else(|| invalid("grid priors need a positive pseudo-count"))?;
    let q = grid_q_values(size, values_goal, gamma)?;
    let mut prior = TabularPrior::flat(NUM_ACTIONS, StateKey::GridXY);
    for x in 0..size {
        for y in 0..size {
            for (a, &mean) in q[x * size + y].iter().enumerate() {
                prior.set_state(&cell_state((x, y)), a, PriorEstimate::Moments { mean, variance })?;
            }
        }
    }
    Ok(prior)
}

/// Corner farthest from `goal`; the decoy for a miscalibrated grid prior.
fn decoy_goal(size: usize, goal: Cell) -> Cell {
    let m = size - 1;
    [(0, 0), (0, m), (m, 0), (m, m)]
        .into_iter()
        .max_by_key(|&(x, y): &Cell| (x.abs_diff(goal.0) + y.abs_diff(goal.1), std::cmp::Reverse((x, y))))
        .expect("four corners")
}

fn grid_task(config: &ExperimentConfig, task: usize) -> Result<DarkroomTask> {
    let s = &config.theorem2;
    let mut r = rng(instance_seed(config.seed, task));
    let goal = (r.random_range(0..s.size), r.random_range(0..s.size));
    let start = loop {
        let c = (r.random_range(0..s.size), r.random_range(0..s.size));
        if c != goal {
            break c;
        }
    };
    DarkroomTask::new(s.size, goal, s.episode_length, Split::HeldOut, start)
}

/// Per-episode regret `V*(s₀) − return` of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEpisodeRecord {
    pub agent: String,
    pub task: usize,
    pub seed: usize,
    pub episode_regret: Vec<f64>,
}

fn run_grid_episodes(agent: &mut dyn Agent, task: &DarkroomTask, episodes: usize, seed: u64) -> Result<Vec<f64>> {
    agent.reset(&TaskInfo {
        num_actions: NUM_ACTIONS,
        state_dim: 2,
    })?;
    let mut agent_rng = rng(mix(seed, 1));
    let best = optimal_return(task, task.start)?;
    let mut t = 0u64;
    let mut out = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut cell = task.start;
        let mut ret = 0.0;
        for h in 0..task.horizon {
            t += 1;
            let state = cell_state(cell);
            let a = agent.act(&state, t, &mut agent_rng)?;
            let (next, r) = darkroom_step(task, cell, a)?;
            agent.observe(&Transition::new(state, a, r, cell_state(next), h + 1 == task.horizon))?;
            ret += r;
            cell = next;
        }
        out.push(best - ret);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Theorem2Report {
    pub num_tasks: usize,
    pub seeds_per_task: usize,
    pub size: usize,
    pub episode_length: usize,
    pub episodes: usize,
    pub beta: f64,
    /// Cumulative regret `= d + c·√K` on `[fit_start, K]`, per agent.
    pub sqrt_fits: BTreeMap<String, LinearFit>,
    pub fit_start: usize,
    /// Mean per-episode regret over the first and last tenth of episodes.
    pub early_episode_regret: BTreeMap<String, f64>,
    pub late_episode_regret: BTreeMap<String, f64>,
    /// Slope of per-episode regret against `k`.
    pub episode_slope: BTreeMap<String, f64>,
    pub final_regret: BTreeMap<String, f64>,
    pub gap: PlateauStat,
    pub calibrated_vs_flat: DominanceCheck,
    #[serde(skip)]
    pub series: Vec<Series>,
    #[serde(skip)]
    pub summaries: Vec<CurveSummary>,
}

impl Theorem2Report {
    pub fn render(&self) -> String {
        let mut s = format!(
            "theorem2_verify: {}x{} grid, N={} tasks x {} seeds, {} steps per episode, K={} episodes, beta={:.4}\n\n",
            self.size, self.size, self.num_tasks, self.seeds_per_task, self.episode_length, self.episodes, self.beta
        );
        s.push_str(&format!("cumulative regret fit d + c sqrt(K) on K in [{}, {}]:\n", self.fit_start, self.episodes));
        for (agent, f) in &self.sqrt_fits {
            s.push_str(&format!(
                "    {agent}: d = {:.3}, c = {:.3}, R^2 = {:.5}; final {:.3}; per-episode regret {:.4} -> {:.4} (slope {:.2e})\n",
                f.intercept,
                f.slope,
                f.r2,
                self.final_regret[agent],
                self.early_episode_regret[agent],
                self.late_episode_regret[agent],
                self.episode_slope[agent]
            ));
        }
        s.push_str(&format!(
            "miscalibrated - flat gap: total {:.3} ± {:.3}, growth over [{}, {}] {:.3} ± {:.3} ({:.1}% of total, tolerance {:.0}%): {}\n",
            self.gap.total,
            self.gap.total_sem,
            self.gap.half,
            self.gap.horizon,
            self.gap.growth,
            self.gap.growth_sem,
            100.0 * self.gap.fraction,
            100.0 * self.gap.tolerance,
            pass(self.gap.passes)
        ));
        s.push_str(&format!(
            "calibrated <= flat at every K (3 SEM): max margin {:.4} at K={}: {}\n",
            self.calibrated_vs_flat.max_margin,
            self.calibrated_vs_flat.worst_t,
            pass(self.calibrated_vs_flat.holds)
        ));
        s
    }

    pub fn into_result(self) -> ExperimentResult {
        let analysis = serde_json::to_value(&self).expect("plain data serializes");
        let report = self.render();
        ExperimentResult {
            kind: ExperimentKind::Theorem2Verify,
            series: self.series,
            summaries: self.summaries,
            analysis,
            report,
        }
    }
}

/// Episodic SPICE on a small grid with exact-match per-cell evidence,
/// Monte-Carlo TD targets and the `C_β√ln(SAT)` schedule.
pub fn verify_theorem2(config: &ExperimentConfig) -> Result<Theorem2Report> {
    config.validate()?;
    let s = config.theorem2.clone();
    let episodes = config.horizon;
    let beta = BetaSchedule::MdpLog {
        states: (s.size * s.size) as u64,
        actions: NUM_ACTIONS as u64,
        total_steps: (episodes * s.episode_length) as u64,
        n_max: s.pseudo_count,
        c_beta: s.c_beta,
    };
    let sc = SpiceConfig {
        kernel: KernelSpec::uniform(),
        encoder: None,
        td: TdSpec::new(s.episode_length, s.gamma)?,
        noise_variance: s.noise_variance,
        v_min: s.v_min,
        beta,
        mode: SpiceMode::OnlineUcb,
        tie_break: TieBreak::LowestIndex,
        evidence: EvidenceMode::Keyed { key: StateKey::GridXY },
    };
    sc.validate()?;
    let names = [FLAT, CALIBRATED, MISCALIBRATED];
    let jobs = job_grid(config);
    let per_job: Vec<Vec<GridEpisodeRecord>> = with_pool(config.workers, || {
        jobs.par_iter()
            .map(|&(task, rep)| {
                let inst = grid_task(config, task)?;
                let seed = run_seed(config.seed, task, rep);
                let priors = [
                    TabularPrior::flat(NUM_ACTIONS, StateKey::GridXY),
                    grid_prior(s.size, inst.goal, s.gamma, s.pseudo_count, s.noise_variance)?,
                    grid_prior(s.size, decoy_goal(s.size, inst.goal), s.gamma, s.pseudo_count, s.noise_variance)?,
                ];
                priors
                    .into_iter()
                    .zip(names)
                    .map(|(p, name)| {
                        let mut agent = SpiceAgent::new(name, sc, Arc::new(p))?;
                        Ok(GridEpisodeRecord {
                            agent: name.to_string(),
                            task,
                            seed: rep,
                            episode_regret: run_grid_episodes(&mut agent, &inst, episodes, seed)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let runs = transpose(per_job, names.len());
    let ks: Vec<f64> = (1..=episodes).map(|k| k as f64).collect();
    let mut series = Vec::new();
    for r in runs.iter().flatten() {
        series.push(Series {
            metric: "regret".into(),
            agent: r.agent.clone(),
            task: r.task,
            seed: r.seed,
            t: ks.clone(),
            values: running_sum(r.episode_regret.iter().copied()),
        });
    }
    for r in runs.iter().flatten() {
        series.push(Series {
            metric: "episode_regret".into(),
            agent: r.agent.clone(),
            task: r.task,
            seed: r.seed,
            t: ks.clone(),
            values: r.episode_regret.clone(),
        });
    }
    let summaries = summarize(&series)?;
    let tenth = (episodes / 10).max(1);
    let mut sqrt_fits = BTreeMap::new();
    let mut early = BTreeMap::new();
    let mut late = BTreeMap::new();
    let mut slope = BTreeMap::new();
    let mut finals = BTreeMap::new();
    for name in names {
        let cum = summaries.iter().find(|x| x.metric == "regret" && x.agent == name).expect("summarized");
        let per = summaries
            .iter()
            .find(|x| x.metric == "episode_regret" && x.agent == name)
            .expect("summarized");
        let (t, y) = window(cum, s.fit_start);
        sqrt_fits.insert(name.to_string(), sqrt_fit(&t, &y)?);
        early.insert(name.to_string(), mean(&per.mean[..tenth]));
        late.insert(name.to_string(), mean(&per.mean[episodes - tenth..]));
        slope.insert(name.to_string(), linear_fit(&per.t, &per.mean)?.slope);
        finals.insert(name.to_string(), cum.last_mean());
    }
    let curves = |name: &str| task_means(&series.iter().filter(|x| x.metric == "regret" && x.agent == name).collect::<Vec<_>>());
    let flat = curves(FLAT)?;
    let gap = plateau(&gap_curves(&curves(MISCALIBRATED)?, &flat), s.plateau_tolerance)?;
    let calibrated_vs_flat = dominance(&curves(CALIBRATED)?, &flat)?;
    Ok(Theorem2Report {
        num_tasks: config.num_tasks,
        seeds_per_task: config.seeds_per_task,
        size: s.size,
        episode_length: s.episode_length,
        episodes,
        beta: beta.beta(1)?,
        sqrt_fits,
        fit_start: s.fit_start,
        early_episode_regret: early,
        late_episode_regret: late,
        episode_slope: slope,
        final_regret: finals,
        gap,
        calibrated_vs_flat,
        series,
        summaries,
    })
}
