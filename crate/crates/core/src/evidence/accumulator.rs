use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{n_step_return, ActionEvidence, TdSpec, Transition};
use crate::error::{Result, SpiceError};

/// Discrete key identifying "the same state" for exact-match evidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKey {
    /// Every state shares one key (bandits).
    #[default]
    Shared,
    /// Grid cell `x·10 + y` from the first two state coordinates.
    GridXY,
}

impl StateKey {
    pub fn key(&self, state: &[f64]) -> u64 {
        match self {
            StateKey::Shared => 0,
            StateKey::GridXY => {
                let x = state.first().copied().unwrap_or(0.0).round() as u64;
                let y = state.get(1).copied().unwrap_or(0.0).round() as u64;
                x * 10 + y
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Stats {
    counts: Vec<f64>,
    sums: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Pending {
    key: u64,
    action: usize,
    reward: f64,
}

/// Incrementally maintained evidence under an exact-match kernel: weight 1
/// for context states with the query's key, 0 otherwise.
///
/// Produces the same numbers as [`super::extract`] with a uniform kernel (for
/// [`StateKey::Shared`]) or an RBF kernel over one-hot cell features in the
/// `τ → 0` limit (for [`StateKey::GridXY`]), but costs `O(n)` per transition
/// instead of `O(|context|)` per query. Targets of the last `n` transitions
/// of the running episode are provisional until their successor arrives.
#[derive(Debug, Clone)]
pub struct KeyedEvidence {
    key: StateKey,
    td: TdSpec,
    num_actions: usize,
    finalized: HashMap<u64, Stats>,
    open: VecDeque<(Pending, Vec<f64>)>,
    len: usize,
}

impl KeyedEvidence {
    pub fn new(key: StateKey, td: TdSpec, num_actions: usize) -> Result<Self> {
        td.validate()?;
        Ok(Self {
            key,
            td,
            num_actions,
            finalized: HashMap::new(),
            open: VecDeque::with_capacity(td.n + 1),
            len: 0,
        })
    }

    /// Number of transitions absorbed so far.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn clear(&mut self) {
        self.finalized.clear();
        self.open.clear();
        self.len = 0;
    }

    /// Append the next transition of the context.
    pub fn push<B>(&mut self, tr: &Transition, mut max_q: B) -> Result<()>
    where
        B: FnMut(&[f64]) -> f64,
    {
        if tr.action >= self.num_actions {
            return Err(SpiceError::ActionOutOfRange {
                action: tr.action,
                num_actions: self.num_actions,
            });
        }
        let n = self.td.n;
        if self.open.len() == n {
            let (first, _) = self.open.pop_front().expect("open window is full");
            let mut rewards = Vec::with_capacity(n);
            rewards.push(first.reward);
            rewards.extend(self.open.iter().map(|(p, _)| p.reward));
            let bootstrap = if self.td.gamma.powi(n as i32) != 0.0 {
                Some(max_q(&tr.state))
            } else {
                None
            };
            let y = n_step_return(&rewards, self.td.gamma, n, bootstrap);
            self.absorb(first.key, first.action, y);
        }
        self.open.push_back((
            Pending {
                key: self.key.key(&tr.state),
                action: tr.action,
                reward: tr.reward,
            },
            tr.state.clone(),
        ));
        self.len += 1;
        if tr.done {
            while !self.open.is_empty() {
                let rewards: Vec<f64> = self.open.iter().take(n).map(|(p, _)| p.reward).collect();
                let (first, _) = self.open.pop_front().expect("non-empty");
                let y = n_step_return(&rewards, self.td.gamma, n, None);
                self.absorb(first.key, first.action, y);
            }
        }
        Ok(())
    }

    fn absorb(&mut self, key: u64, action: usize, y: f64) {
        let num_actions = self.num_actions;
        let stats = self.finalized.entry(key).or_insert_with(|| Stats {
            counts: vec![0.0; num_actions],
            sums: vec![0.0; num_actions],
        });
        stats.counts[action] += 1.0;
        stats.sums[action] += y;
    }

    /// Evidence at `query` given everything pushed so far.
    pub fn evidence(&self, query: &[f64]) -> ActionEvidence {
        let key = self.key.key(query);
        let (mut counts, mut sums) = match self.finalized.get(&key) {
            Some(s) => (s.counts.clone(), s.sums.clone()),
            None => (vec![0.0; self.num_actions], vec![0.0; self.num_actions]),
        };
        let open: Vec<&Pending> = self.open.iter().map(|(p, _)| p).collect();
        for (i, p) in open.iter().enumerate() {
            if p.key != key {
                continue;
            }
            let rewards: Vec<f64> = open[i..].iter().take(self.td.n).map(|q| q.reward).collect();
            counts[p.action] += 1.0;
            sums[p.action] += n_step_return(&rewards, self.td.gamma, self.td.n, None);
        }
        let targets = counts
            .iter()
            .zip(&sums)
            .map(|(&c, &s)| if c == 0.0 { 0.0 } else { s / c.max(1.0) })
            .collect();
        ActionEvidence { counts, targets }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::{extract, Context, KernelSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_hot(state: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; 100];
        v[(state[0] as usize) * 10 + state[1] as usize] = 1.0;
        v
    }

    fn max_q(state: &[f64]) -> f64 {
        0.1 * state[0] - 0.05 * state[1]
    }

    #[test]
    fn matches_batch_extraction_on_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for &(n, gamma) in &[(1, 0.0), (1, 0.9), (3, 0.95), (5, 1.0)] {
            let td = TdSpec::new(n, gamma).unwrap();
            let mut acc = KeyedEvidence::new(StateKey::GridXY, td, 5).unwrap();
            let mut ctx = Context::new();
            let mut s = [rng.random_range(0..3) as f64, rng.random_range(0..3) as f64];
            for step in 0..120 {
                let a = rng.random_range(0..5);
                let next = [rng.random_range(0..3) as f64, rng.random_range(0..3) as f64];
                let tr = Transition::new(s.to_vec(), a, rng.random::<f64>(), next.to_vec(), step % 17 == 16);
                acc.push(&tr, max_q).unwrap();
                ctx.push(tr);
                s = next;
                let q = [rng.random_range(0..3) as f64, rng.random_range(0..3) as f64];
                let spec = KernelSpec::rbf(0.01).encoded();
                let batch = extract(&ctx, &q, &spec, Some(&one_hot), &td, max_q, 5).unwrap();
                assert_eq!(acc.evidence(&q), batch, "n={n} gamma={gamma} step={step}");
            }
        }
    }

    #[test]
    fn shared_key_matches_uniform_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut acc = KeyedEvidence::new(StateKey::Shared, TdSpec::immediate(), 3).unwrap();
        let mut ctx = Context::new();
        for _ in 0..50 {
            let tr = Transition::new(vec![1.0], rng.random_range(0..3), rng.random::<f64>(), vec![1.0], false);
            acc.push(&tr, |_| 0.0).unwrap();
            ctx.push(tr);
            let batch = extract(&ctx, &[1.0], &KernelSpec::uniform(), None, &TdSpec::immediate(), |_| 0.0, 3).unwrap();
            assert_eq!(acc.evidence(&[1.0]), batch);
        }
        assert_eq!(acc.len(), 50);
    }

    #[test]
    fn rejects_out_of_range_action() {
        let mut acc = KeyedEvidence::new(StateKey::Shared, TdSpec::immediate(), 2).unwrap();
        let tr = Transition::new(vec![1.0], 2, 0.0, vec![1.0], false);
        assert!(acc.push(&tr, |_| 0.0).is_err());
    }
}
