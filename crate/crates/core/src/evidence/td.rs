use serde::{Deserialize, Serialize};

use super::Context;
use crate::error::{finite, invalid, Result};

/// TD(n) target settings. `n = 1, γ = 0` is the immediate-reward target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdSpec {
    pub n: usize,
    pub gamma: f64,
}

impl TdSpec {
    pub fn new(n: usize, gamma: f64) -> Result<Self> {
        let spec = Self { n, gamma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn immediate() -> Self {
        Self { n: 1, gamma: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("TD(n) requires n >= 1"));
        }
        finite(self.gamma, "gamma")?;
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn is_immediate(&self) -> bool {
        self.n == 1 && self.gamma == 0.0
    }
}

/// `Σ_{i<m} γ^i r_i + γ^n·bootstrap`, where `m = rewards.len() ≤ n` and the
/// bootstrap term is present only when the n-th successor state exists.
pub fn n_step_return(rewards: &[f64], gamma: f64, n: usize, bootstrap: Option<f64>) -> f64 {
    let mut y = 0.0;
    for (i, &r) in rewards.iter().enumerate() {
        y += gamma.powi(i as i32) * r;
    }
    if let Some(b) = bootstrap {
        let discount = gamma.powi(n as i32);
        if discount != 0.0 {
            y += discount * b;
        }
    }
    y
}

/// n-step targets for every transition of `ctx`.
///
/// Rewards are summed forward within the transition's own episode, truncating
/// at the episode boundary. The bootstrap `γ^n·max_a' Q̄(s_{t+n}, a')` is added
/// only when transition `t+n` exists in the same episode; `max_q` maps that
/// state to `max_a' Q̄`.
pub fn td_targets<B>(ctx: &Context, td: &TdSpec, mut max_q: B) -> Result<Vec<f64>>
where
    B: FnMut(&[f64]) -> f64,
{
    td.validate()?;
    let trs = ctx.transitions();
    let len = trs.len();
    // index of the last transition of each transition's episode
    let mut episode_end = vec![0usize; len];
    let mut end = len.saturating_sub(1);
    for t in (0..len).rev() {
        if trs[t].done {
            end = t;
        }
        episode_end[t] = end;
    }
    let mut rewards = Vec::with_capacity(td.n);
    let mut out = Vec::with_capacity(len);
    for t in 0..len {
        let last = episode_end[t];
        let stop = (t + td.n).min(last + 1);
        rewards.clear();
        rewards.extend(trs[t..stop].iter().map(|tr| tr.reward));
        let bootstrap = if t + td.n <= last {
            Some(max_q(&trs[t + td.n].state))
        } else {
            None
        };
        out.push(n_step_return(&rewards, td.gamma, td.n, bootstrap));
    }
    Ok(out)
}
