use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::stats::{mean, sem};
use crate::error::{invalid, Result};

/// One environment step as logged by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub action: usize,
    pub reward: f64,
    pub regret: f64,
}

/// Per-step log of one evaluation episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub agent: String,
    pub task: usize,
    pub seed: usize,
    pub steps: Vec<StepRecord>,
}

impl RunRecord {
    pub fn cumulative_regret(&self) -> Vec<f64> {
        running_sum(self.steps.iter().map(|s| s.regret))
    }

    pub fn cumulative_return(&self) -> Vec<f64> {
        running_sum(self.steps.iter().map(|s| s.reward))
    }

    pub fn total_regret(&self) -> f64 {
        self.steps.iter().map(|s| s.regret).sum()
    }
}

pub(crate) fn running_sum(xs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    xs.map(|x| {
        acc += x;
        acc
    })
    .collect()
}

/// One curve for one (agent, task, seed); the long-form CSV unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub metric: String,
    pub agent: String,
    pub task: usize,
    pub seed: usize,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn from_run(metric: &str, run: &RunRecord, values: Vec<f64>) -> Self {
        Self {
            metric: metric.to_string(),
            agent: run.agent.clone(),
            task: run.task,
            seed: run.seed,
            t: run.steps.iter().map(|s| s.t as f64).collect(),
            values,
        }
    }
}

/// Per-step mean and SEM over tasks, seeds averaged within each task first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub metric: String,
    pub agent: String,
    pub num_tasks: usize,
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub sem: Vec<f64>,
}

impl CurveSummary {
    pub fn last_mean(&self) -> f64 {
        self.mean.last().copied().unwrap_or(f64::NAN)
    }

    pub fn last_sem(&self) -> f64 {
        self.sem.last().copied().unwrap_or(f64::NAN)
    }

    /// Value at the grid point `t`, if present.
    pub fn at(&self, t: f64) -> Option<(f64, f64)> {
        self.t.iter().position(|&x| x == t).map(|i| (self.mean[i], self.sem[i]))
    }
}

/// Seed-averaged curve per task, keyed by task id.
pub fn task_means(series: &[&Series]) -> Result<BTreeMap<usize, Vec<f64>>> {
    let mut per_task: BTreeMap<usize, Vec<&Series>> = BTreeMap::new();
    for s in series {
        per_task.entry(s.task).or_default().push(s);
    }
    let mut out = BTreeMap::new();
    for (task, runs) in per_task {
        let len = runs[0].values.len();
        if runs.iter().any(|r| r.values.len() != len || r.t != runs[0].t) {
            return Err(invalid(format!("task {task}: replicate curves are not aligned")));
        }
        let avg = (0..len)
            .map(|i| runs.iter().map(|r| r.values[i]).sum::<f64>() / runs.len() as f64)
            .collect();
        out.insert(task, avg);
    }
    Ok(out)
}

/// Summarize every (metric, agent) pair found in `series`, in first-seen order.
pub fn summarize(series: &[Series]) -> Result<Vec<CurveSummary>> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String), Vec<&Series>> = BTreeMap::new();
    for s in series {
        let key = (s.metric.clone(), s.agent.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(s);
    }
    order
        .into_iter()
        .map(|key| {
            let group = &groups[&key];
            let tasks = task_means(group)?;
            let t = group[0].t.clone();
            if group.iter().any(|s| s.t != t) {
                return Err(invalid(format!("{}/{}: curves use different grids", key.0, key.1)));
            }
            let curves: Vec<&Vec<f64>> = tasks.values().collect();
            let mut means = Vec::with_capacity(t.len());
            let mut sems = Vec::with_capacity(t.len());
            let mut column = vec![0.0; curves.len()];
            for i in 0..t.len() {
                for (c, curve) in column.iter_mut().zip(&curves) {
                    *c = curve[i];
                }
                means.push(mean(&column));
                sems.push(sem(&column));
            }
            Ok(CurveSummary {
                metric: key.0,
                agent: key.1,
                num_tasks: curves.len(),
                t,
                mean: means,
                sem: sems,
            })
        })
        .collect()
}

pub fn write_series_csv<W: Write>(series: &[Series], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "agent", "task", "seed", "t", "value"])?;
    for s in series {
        for (t, v) in s.t.iter().zip(&s.values) {
            w.write_record([
                s.metric.as_str(),
                s.agent.as_str(),
                &s.task.to_string(),
                &s.seed.to_string(),
                &t.to_string(),
                &v.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(summaries: &[CurveSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "agent", "t", "mean", "sem", "n"])?;
    for s in summaries {
        let n = s.num_tasks.to_string();
        for i in 0..s.t.len() {
            w.write_record([
                s.metric.as_str(),
                s.agent.as_str(),
                &s.t[i].to_string(),
                &s.mean[i].to_string(),
                &s.sem[i].to_string(),
                &n,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct SeriesRow {
    metric: String,
    agent: String,
    task: usize,
    seed: usize,
    t: f64,
    value: f64,
}

/// Inverse of [`write_series_csv`]; rows of one curve must be contiguous.
pub fn read_series_csv<R: std::io::Read>(input: R) -> Result<Vec<Series>> {
    let mut out: Vec<Series> = Vec::new();
    for row in csv::Reader::from_reader(input).deserialize() {
        let row: SeriesRow = row?;
        match out.last_mut() {
            Some(s) if s.metric == row.metric && s.agent == row.agent && s.task == row.task && s.seed == row.seed => {
                s.t.push(row.t);
                s.values.push(row.value);
            }
            _ => out.push(Series {
                metric: row.metric,
                agent: row.agent,
                task: row.task,
                seed: row.seed,
                t: vec![row.t],
                values: vec![row.value],
            }),
        }
    }
    Ok(out)
}
