//! Ground-truth oracles for calibrating the pipeline. The standard runners
//! refuse these agents; only rosters built here accept them.

use std::sync::Arc;

use rand::RngCore;

use super::{AgentFactory, Roster, Truth};
use crate::agents::{Agent, TaskInfo};
use crate::envs::{greedy_action, state_cell, BanditTask, DarkroomTask};
use crate::error::{Result, SpiceError};
use crate::evidence::{Context, Transition};

/// Always pulls the best arm.
#[derive(Debug, Clone)]
pub struct BanditOracle {
    best: usize,
}

impl BanditOracle {
    pub fn new(task: &BanditTask) -> Self {
        Self { best: task.best_arm() }
    }
}

impl Agent for BanditOracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn reset(&mut self, _info: &TaskInfo) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, _query: &[f64], _t: u64, _rng: &mut dyn RngCore) -> Result<usize> {
        Ok(self.best)
    }

    fn observe(&mut self, _tr: &Transition) -> Result<()> {
        Ok(())
    }

    fn decide_offline(&self, _query: &[f64], _ctx: &Context, _rng: &mut dyn RngCore) -> Result<usize> {
        Ok(self.best)
    }

    fn reads_ground_truth(&self) -> bool {
        true
    }
}

/// Shortest-path walker that knows the goal.
#[derive(Debug, Clone)]
pub struct DarkroomOracle {
    task: DarkroomTask,
}

impl DarkroomOracle {
    pub fn new(task: &DarkroomTask) -> Self {
        Self { task: *task }
    }
}

impl Agent for DarkroomOracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn reset(&mut self, _info: &TaskInfo) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, query: &[f64], _t: u64, _rng: &mut dyn RngCore) -> Result<usize> {
        Ok(greedy_action(&self.task, state_cell(query, self.task.size)?))
    }

    fn observe(&mut self, _tr: &Transition) -> Result<()> {
        Ok(())
    }

    fn decide_offline(&self, query: &[f64], _ctx: &Context, _rng: &mut dyn RngCore) -> Result<usize> {
        Ok(greedy_action(&self.task, state_cell(query, self.task.size)?))
    }

    fn reads_ground_truth(&self) -> bool {
        true
    }
}

/// Oracle for whichever task kind it is handed.
pub fn oracle_factory() -> AgentFactory {
    Arc::new(|truth| match *truth {
        Truth::Bandit(t) => Ok(Box::new(BanditOracle::new(t)) as Box<dyn Agent>),
        Truth::Darkroom(t) => Ok(Box::new(DarkroomOracle::new(t)) as Box<dyn Agent>),
    })
}

/// `base` plus the oracle, with ground-truth agents allowed.
pub fn with_oracle(base: Roster) -> Result<Roster> {
    let mut r = base;
    r.allow_ground_truth = true;
    if r.names().iter().any(|n| n == "oracle") {
        return Err(SpiceError::Config("roster already has an agent named 'oracle'".into()));
    }
    r.push("oracle", oracle_factory())?;
    Ok(r)
}
