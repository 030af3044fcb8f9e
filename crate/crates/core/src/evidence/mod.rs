//! Context evidence: kernel similarity weights, weighted per-action counts and
//! targets, and TD(n) targets.

mod accumulator;
pub mod io;
mod kernel;
mod td;

pub use accumulator::{KeyedEvidence, StateKey};
pub use kernel::{kernel_weight, FeatureMap, FeatureSpace, KernelKind, KernelSpec};
pub use io::LabelledContext;
pub use td::{n_step_return, td_targets, TdSpec};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SpiceError};

/// One logged `(s, a, r, s')` tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Last transition of its episode.
    #[serde(default)]
    pub done: bool,
}

impl Transition {
    pub fn new(state: Vec<f64>, action: usize, reward: f64, next_state: Vec<f64>, done: bool) -> Self {
        Self {
            state,
            action,
            reward,
            next_state,
            done,
        }
    }
}

/// Chronological buffer of transitions, optionally bounded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Context {
    transitions: Vec<Transition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    capacity: Option<usize>,
}

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bounded buffer; pushing beyond `capacity` evicts the oldest transition.
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            transitions: Vec::with_capacity(capacity.min(4096)),
            capacity: Some(capacity),
        }
    }

    pub fn from_transitions(transitions: Vec<Transition>) -> Self {
        Self {
            transitions,
            capacity: None,
        }
    }

    pub fn push(&mut self, transition: Transition) {
        if let Some(cap) = self.capacity {
            if cap == 0 {
                return;
            }
            if self.transitions.len() == cap {
                self.transitions.remove(0);
            }
        }
        self.transitions.push(transition);
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Transition> {
        self.transitions.iter()
    }

    pub fn last(&self) -> Option<&Transition> {
        self.transitions.last()
    }

    /// Checks action range and state dimensionality of every transition.
    pub fn validate(&self, num_actions: usize, state_dim: usize) -> Result<()> {
        for tr in &self.transitions {
            if tr.action >= num_actions {
                return Err(SpiceError::ActionOutOfRange {
                    action: tr.action,
                    num_actions,
                });
            }
            for s in [&tr.state, &tr.next_state] {
                if s.len() != state_dim {
                    return Err(SpiceError::DimensionMismatch {
                        expected: state_dim,
                        got: s.len(),
                    });
                }
            }
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a Context {
    type Item = &'a Transition;
    type IntoIter = std::slice::Iter<'a, Transition>;

    fn into_iter(self) -> Self::IntoIter {
        self.transitions.iter()
    }
}

/// Per-action weighted count `c_a` and weighted target `ỹ_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEvidence {
    pub counts: Vec<f64>,
    pub targets: Vec<f64>,
}

impl ActionEvidence {
    pub fn empty(num_actions: usize) -> Self {
        Self {
            counts: vec![0.0; num_actions],
            targets: vec![0.0; num_actions],
        }
    }

    pub fn num_actions(&self) -> usize {
        self.counts.len()
    }
}

/// `c_a = Σ w_t·1[a_t=a]`, `ỹ_a = Σ w_t·1[a_t=a]·y_t / max(1, c_a)`.
pub fn weighted_evidence(
    ctx: &Context,
    weights: &[f64],
    targets: &[f64],
    num_actions: usize,
) -> Result<ActionEvidence> {
    if weights.len() != ctx.len() {
        return Err(SpiceError::DimensionMismatch {
            expected: ctx.len(),
            got: weights.len(),
        });
    }
    if targets.len() != ctx.len() {
        return Err(SpiceError::DimensionMismatch {
            expected: ctx.len(),
            got: targets.len(),
        });
    }
    let mut counts = vec![0.0; num_actions];
    let mut sums = vec![0.0; num_actions];
    for ((tr, &w), &y) in ctx.iter().zip(weights).zip(targets) {
        if tr.action >= num_actions {
            return Err(SpiceError::ActionOutOfRange {
                action: tr.action,
                num_actions,
            });
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(invalid(format!("kernel weight {w} outside [0, 1]")));
        }
        counts[tr.action] += w;
        sums[tr.action] += w * y;
    }
    let targets = counts
        .iter()
        .zip(&sums)
        .map(|(&c, &s)| if c == 0.0 { 0.0 } else { s / c.max(1.0) })
        .collect();
    Ok(ActionEvidence { counts, targets })
}

/// Kernel weights of every context transition relative to `query`.
pub fn context_weights(
    ctx: &Context,
    query: &[f64],
    spec: &KernelSpec,
    encoder: Option<&dyn FeatureMap>,
) -> Result<Vec<f64>> {
    if spec.kind == KernelKind::Uniform {
        return Ok(vec![1.0; ctx.len()]);
    }
    let encode = |s: &[f64]| -> Result<Vec<f64>> {
        match spec.feature_space {
            FeatureSpace::RawState => Ok(s.to_vec()),
            FeatureSpace::Encoded => match encoder {
                Some(e) => Ok(e.features(s)),
                None => Err(invalid("encoded feature space requires an encoder")),
            },
        }
    };
    let q = encode(query)?;
    ctx.iter()
        .map(|tr| kernel_weight(spec, &q, &encode(&tr.state)?))
        .collect()
}

/// Kernel weights, TD(n) targets and weighted evidence composed for one query.
pub fn extract<B>(
    ctx: &Context,
    query: &[f64],
    spec: &KernelSpec,
    encoder: Option<&dyn FeatureMap>,
    td: &TdSpec,
    bootstrap: B,
    num_actions: usize,
) -> Result<ActionEvidence>
where
    B: FnMut(&[f64]) -> f64,
{
    if spec.feature_space == FeatureSpace::Encoded && encoder.is_none() {
        return Err(invalid("encoded feature space requires an encoder"));
    }
    let weights = context_weights(ctx, query, spec, encoder)?;
    let targets = td_targets(ctx, td, bootstrap)?;
    weighted_evidence(ctx, &weights, &targets, num_actions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(action: usize, reward: f64) -> Transition {
        Transition::new(vec![0.0], action, reward, vec![0.0], false)
    }

    #[test]
    fn weighted_evidence_cases() {
        let ctx = Context::from_transitions(vec![tr(0, 1.0), tr(0, 0.0), tr(0, 1.0)]);
        let ev = weighted_evidence(&ctx, &[1.0; 3], &[1.0, 0.0, 1.0], 2).unwrap();
        assert_eq!(ev.counts, vec![3.0, 0.0]);
        assert!((ev.targets[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ev.targets[1], 0.0);

        let ev = weighted_evidence(&Context::new(), &[], &[], 5).unwrap();
        assert_eq!(ev, ActionEvidence::empty(5));

        let ctx = Context::from_transitions(vec![tr(2, 1.0)]);
        let ev = weighted_evidence(&ctx, &[0.5], &[1.0], 3).unwrap();
        assert_eq!(ev.counts, vec![0.0, 0.0, 0.5]);
        assert_eq!(ev.targets, vec![0.0, 0.0, 0.5]);
    }

    #[test]
    fn weighted_evidence_rejects_mismatch() {
        let ctx = Context::from_transitions(vec![tr(0, 1.0)]);
        assert!(weighted_evidence(&ctx, &[1.0, 1.0], &[1.0], 2).is_err());
        assert!(weighted_evidence(&ctx, &[1.0], &[], 2).is_err());
        assert!(weighted_evidence(&ctx, &[1.0], &[1.0], 0).is_err());
        assert!(weighted_evidence(&ctx, &[1.5], &[1.0], 1).is_err());
    }

    #[test]
    fn bandit_extraction_is_counting() {
        let rewards = [(0, 0.2), (1, 0.9), (0, 0.4), (2, 0.1), (0, 0.6)];
        let ctx = Context::from_transitions(rewards.iter().map(|&(a, r)| tr(a, r)).collect());
        let ev = extract(&ctx, &[0.0], &KernelSpec::uniform(), None, &TdSpec::immediate(), |_| 0.0, 3).unwrap();
        assert_eq!(ev.counts, vec![3.0, 1.0, 1.0]);
        assert!((ev.targets[0] - 0.4).abs() < 1e-15);
        assert_eq!(ev.targets[1], 0.9);
        assert_eq!(ev.targets[2], 0.1);
    }

    #[test]
    fn narrower_bandwidth_never_increases_counts() {
        let ctx = Context::from_transitions(
            (0..6)
                .map(|i| Transition::new(vec![i as f64 * 0.3, 1.0], i % 3, 1.0, vec![0.0, 0.0], false))
                .collect(),
        );
        let q = [0.5, 0.8];
        let wide = extract(&ctx, &q, &KernelSpec::rbf(1.0), None, &TdSpec::immediate(), |_| 0.0, 3).unwrap();
        let narrow = extract(&ctx, &q, &KernelSpec::rbf(0.5), None, &TdSpec::immediate(), |_| 0.0, 3).unwrap();
        for a in 0..3 {
            assert!(narrow.counts[a] <= wide.counts[a]);
        }
    }

    #[test]
    fn darkroom_fragment_golden_trace() {
        // (0,0) --right--> (1,0) r=0, then (1,0) --up--> (1,1) r=1, episode ends.
        let ctx = Context::from_transitions(vec![
            Transition::new(vec![0.0, 0.0], 3, 0.0, vec![1.0, 0.0], false),
            Transition::new(vec![1.0, 0.0], 0, 1.0, vec![1.0, 1.0], true),
        ]);
        let td = TdSpec::new(2, 0.5).unwrap();
        // query (1,0): rbf τ=1 on raw state
        //   w0 = exp(-1/2) = 0.6065306597126334, w1 = 1
        //   y0 = 0 + 0.5·1 = 0.5 (no bootstrap: s_2 absent), y1 = 1
        //   c_up = 1, ỹ_up = 1; c_right = w0, ỹ_right = w0·0.5/max(1,w0) = 0.3032653298563167
        let ev = extract(&ctx, &[1.0, 0.0], &KernelSpec::rbf(1.0), None, &td, |_| 100.0, 5).unwrap();
        let w0 = (-0.5f64).exp();
        assert_eq!(ev.counts, vec![1.0, 0.0, 0.0, w0, 0.0]);
        assert_eq!(ev.targets[0], 1.0);
        assert!((ev.targets[3] - 0.3032653298563167).abs() < 1e-15);
    }

    #[test]
    fn zero_weight_transitions_are_transparent() {
        let ctx = Context::from_transitions(vec![tr(0, 1.0), tr(1, 5.0), tr(0, 0.0)]);
        let ev_full = weighted_evidence(&ctx, &[1.0, 0.0, 1.0], &[1.0, 5.0, 0.0], 2).unwrap();
        let trimmed = Context::from_transitions(vec![tr(0, 1.0), tr(0, 0.0)]);
        let ev_trim = weighted_evidence(&trimmed, &[1.0, 1.0], &[1.0, 0.0], 2).unwrap();
        assert_eq!(ev_full, ev_trim);
    }

    #[test]
    fn bounded_context_evicts_oldest() {
        let mut ctx = Context::with_capacity(2);
        for r in [1.0, 2.0, 3.0] {
            ctx.push(tr(0, r));
        }
        let rewards: Vec<f64> = ctx.iter().map(|t| t.reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0]);
    }

    #[test]
    fn validate_checks_shape() {
        let ctx = Context::from_transitions(vec![tr(3, 0.0)]);
        assert!(ctx.validate(3, 1).is_err());
        assert!(ctx.validate(4, 2).is_err());
        assert!(ctx.validate(4, 1).is_ok());
    }

    #[test]
    fn encoded_space_requires_encoder() {
        let ctx = Context::from_transitions(vec![tr(0, 1.0)]);
        let spec = KernelSpec::rbf(0.5).encoded();
        assert!(extract(&ctx, &[0.0], &spec, None, &TdSpec::immediate(), |_| 0.0, 1).is_err());
        let enc = |s: &[f64]| vec![s[0], 1.0];
        let ev = extract(&ctx, &[0.0], &spec, Some(&enc), &TdSpec::immediate(), |_| 0.0, 1).unwrap();
        assert_eq!(ev.counts, vec![1.0]);
    }
}
