//! Pretraining of the ensemble prior.

mod losses;
mod policy;
mod weights;

pub use losses::{
    finite_difference, loss_anchor, loss_anchor_grad, loss_shrink, loss_shrink_grad, loss_td, loss_td_grad,
    shrink_targets, zero_grads, HeadGrads, ShrinkPrior, TdRegression, TdSample,
};
pub use policy::PolicyHead;
pub use weights::{advantage, weight_adv, weight_epi, weight_is};

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{finite, invalid, Result, SpiceError};
use crate::evidence::{td_targets, LabelledContext, TdSpec};
use crate::priors::{EnsemblePrior, PriorProvider};
use losses::add_scaled;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_q: f64,
    pub lambda_anchor: f64,
    pub shrink: ShrinkPrior,
    pub c_iw: f64,
    pub c_adv: f64,
    pub c_epi: f64,
    pub eps: f64,
    pub tau_adv: f64,
    pub lambda_sigma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_q: 1.0,
            lambda_anchor: 1e-3,
            shrink: ShrinkPrior::default(),
            c_iw: 10.0,
            c_adv: 10.0,
            c_epi: 5.0,
            eps: 1e-2,
            tau_adv: 1.0,
            lambda_sigma: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(invalid("eps must be positive"));
        }
        for (name, c) in [("c_iw", self.c_iw), ("c_adv", self.c_adv), ("c_epi", self.c_epi)] {
            if !(c >= self.eps) {
                return Err(invalid(format!("{name} must be at least eps")));
            }
        }
        if !(self.lambda_q >= 0.0) || !(self.lambda_anchor >= 0.0) || !(self.lambda_sigma >= 0.0) {
            return Err(invalid("loss multipliers must be non-negative"));
        }
        if !(self.tau_adv > 0.0) {
            return Err(invalid("tau_adv must be positive"));
        }
        if !(self.shrink.v0 > 0.0) || !(self.shrink.sigma2 > 0.0) {
            return Err(invalid("shrinkage variances must be positive"));
        }
        finite(self.shrink.mu0, "mu0")?;
        Ok(())
    }

    /// `ω_b = ω_IS·ω_adv·ω_epi` for a label given ensemble statistics at the query.
    pub fn behaviour_weight(&self, q_means: &[f64], q_std: &[f64], label: usize, behaviour_prob: f64) -> Result<f64> {
        let w_is = weight_is(behaviour_prob, q_means.len(), self.c_iw)?;
        let w_adv = weight_adv(q_means, label, self.tau_adv, self.eps, self.c_adv)?;
        let w_epi = weight_epi(q_std[label], self.lambda_sigma, self.eps, self.c_epi)?;
        Ok(w_is * w_adv * w_epi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            momentum: 0.9,
            epochs: 50,
            batch_size: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub weights: LossWeights,
    pub sgd: SgdConfig,
    pub td: TdSpec,
    pub regression: TdRegression,
    pub policy_head: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            sgd: SgdConfig::default(),
            td: TdSpec::immediate(),
            regression: TdRegression::default(),
            policy_head: false,
        }
    }
}

/// Mean loss components over one epoch's minibatches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub policy: f64,
    pub td: f64,
    pub shrink: f64,
    pub anchor: f64,
    pub total: f64,
}

pub fn write_trace_csv<W: Write>(trace: &[EpochLoss], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in trace {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub trace: Vec<EpochLoss>,
    pub policy: Option<PolicyHead>,
}

/// One example with targets and weights fixed for the epoch.
struct Prepared {
    state_features: Vec<Vec<f64>>,
    actions: Vec<usize>,
    targets: Vec<f64>,
    policy_inputs: Vec<Vec<f64>>,
    label: usize,
    omega: f64,
}

fn prepare(ens: &EnsemblePrior, sample: &LabelledContext, cfg: &TrainConfig) -> Result<Prepared> {
    let targets = td_targets(&sample.context, &cfg.td, |s| ens.max_mean(s).unwrap_or(0.0))?;
    let state_features: Vec<Vec<f64>> = sample.context.iter().map(|t| ens.encode(&t.state)).collect();
    let actions = sample.context.iter().map(|t| t.action).collect();
    let query = ens.encode(&sample.query);
    let stats = ens.ensemble_stats(&query)?;
    let omega = cfg
        .weights
        .behaviour_weight(&stats.mean, &stats.std, sample.label, sample.behaviour_prob)?;
    let policy_inputs = if state_features.is_empty() {
        let mut h = query.clone();
        h.extend(std::iter::repeat_n(0.0, query.len()));
        vec![h]
    } else {
        state_features
            .iter()
            .map(|f| {
                let mut h = query.clone();
                h.extend_from_slice(f);
                h
            })
            .collect()
    };
    Ok(Prepared {
        state_features,
        actions,
        targets,
        policy_inputs,
        label: sample.label,
        omega,
    })
}

struct SampleGrad {
    policy_loss: f64,
    policy_grad: Vec<f64>,
    td_loss_sum: f64,
    td_count: usize,
    td_grad_sum: HeadGrads,
    shrink_loss: f64,
    shrink_grad: HeadGrads,
}

fn sample_grad(ens: &EnsemblePrior, policy: Option<&PolicyHead>, p: &Prepared, cfg: &TrainConfig) -> Result<SampleGrad> {
    let (policy_loss, policy_grad) = match policy {
        Some(head) => head.loss_grad(&p.policy_inputs, p.label, p.omega)?,
        None => (0.0, Vec::new()),
    };
    let n = p.actions.len();
    let (td_loss_sum, td_grad_sum, shrink_loss, shrink_grad) = if n > 0 && cfg.weights.lambda_q > 0.0 {
        let samples: Vec<TdSample> = p
            .state_features
            .iter()
            .zip(&p.actions)
            .zip(&p.targets)
            .map(|((f, &a), &y)| TdSample {
                features: f.clone(),
                action: a,
                target: y,
            })
            .collect();
        let (l, mut g) = loss_td_grad(ens, &samples, cfg.regression, true)?;
        // loss_td_grad averages over this context; undo so the batch can average over transitions.
        g.iter_mut().flatten().for_each(|v| *v *= n as f64);
        let (ls, gs) = loss_shrink_grad(ens, &p.state_features, &p.actions, &p.targets, &cfg.weights.shrink, true)?;
        (l * n as f64, g, ls, gs)
    } else {
        (0.0, zero_grads(ens), 0.0, zero_grads(ens))
    };
    Ok(SampleGrad {
        policy_loss,
        policy_grad,
        td_loss_sum,
        td_count: n,
        td_grad_sum,
        shrink_loss,
        shrink_grad,
    })
}

fn check_finite(epoch: usize, what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(SpiceError::Diverged {
            epoch,
            detail: format!("{what} became {v}"),
        })
    }
}

/// Minimize `L_π + λ_Q (L_TD + L_shrink) + λ_anchor L_anchor` with SGD and
/// momentum. TD targets and behaviour weights are recomputed at the start of
/// each epoch and held fixed within it.
pub fn train(ens: &mut EnsemblePrior, data: &[LabelledContext], cfg: &TrainConfig) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(SpiceError::Empty("training dataset"));
    }
    cfg.weights.validate()?;
    cfg.td.validate()?;
    if cfg.sgd.batch_size == 0 || !(cfg.sgd.learning_rate > 0.0) || !(0.0..1.0).contains(&cfg.sgd.momentum) {
        return Err(invalid("sgd needs batch_size > 0, learning_rate > 0 and momentum in [0, 1)"));
    }
    let feature_dim = ens.config().features.dim();
    let mut policy = cfg
        .policy_head
        .then(|| PolicyHead::new(ens.num_actions(), 2 * feature_dim));
    let mut vel = zero_grads(ens);
    let mut policy_vel = policy.as_ref().map(|p| vec![0.0; p.params().len()]).unwrap_or_default();
    let mut rng = crate::seed::rng(cfg.sgd.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let w = cfg.weights;
    let lr = cfg.sgd.learning_rate;
    let mu = cfg.sgd.momentum;
    let mut trace = Vec::with_capacity(cfg.sgd.epochs);

    for epoch in 0..cfg.sgd.epochs {
        let snapshot = &*ens;
        let prepared: Vec<Prepared> = data.par_iter().map(|s| prepare(snapshot, s, cfg)).collect::<Result<_>>()?;
        order.shuffle(&mut rng);
        let mut sums = [0.0; 4];
        let mut batches = 0.0;
        for chunk in order.chunks(cfg.sgd.batch_size) {
            let snapshot = &*ens;
            let policy_ref = policy.as_ref();
            let per: Vec<SampleGrad> = chunk
                .par_iter()
                .map(|&i| sample_grad(snapshot, policy_ref, &prepared[i], cfg))
                .collect::<Result<_>>()?;
            let b = chunk.len() as f64;
            let n_td: usize = per.iter().map(|s| s.td_count).sum();
            let mut grads = zero_grads(ens);
            let mut pg = vec![0.0; policy_vel.len()];
            let (mut l_pi, mut l_td, mut l_shrink) = (0.0, 0.0, 0.0);
            for s in &per {
                l_pi += s.policy_loss / b;
                add_scaled(&mut pg, &s.policy_grad, 1.0 / b);
                if n_td > 0 {
                    l_td += s.td_loss_sum / n_td as f64;
                    for (g, src) in grads.iter_mut().zip(&s.td_grad_sum) {
                        add_scaled(g, src, w.lambda_q / n_td as f64);
                    }
                }
                l_shrink += s.shrink_loss / b;
                for (g, src) in grads.iter_mut().zip(&s.shrink_grad) {
                    add_scaled(g, src, w.lambda_q / b);
                }
            }
            let l_anchor = loss_anchor(ens);
            if w.lambda_anchor > 0.0 {
                for (g, src) in grads.iter_mut().zip(loss_anchor_grad(ens)) {
                    add_scaled(g, &src, w.lambda_anchor);
                }
            }
            let total = l_pi + w.lambda_q * (l_td + l_shrink) + w.lambda_anchor * l_anchor;
            check_finite(epoch, "total loss", total)?;

            for k in 0..ens.num_heads() {
                let params = ens.params_mut(k);
                for j in 0..params.len() {
                    vel[k][j] = mu * vel[k][j] + grads[k][j];
                    params[j] -= lr * vel[k][j];
                    check_finite(epoch, "parameter", params[j])?;
                }
            }
            if let Some(head) = policy.as_mut() {
                for (j, p) in head.params_mut().iter_mut().enumerate() {
                    policy_vel[j] = mu * policy_vel[j] + pg[j];
                    *p -= lr * policy_vel[j];
                    check_finite(epoch, "policy parameter", *p)?;
                }
            }
            for (s, v) in sums.iter_mut().zip([l_pi, l_td, l_shrink, l_anchor]) {
                *s += v;
            }
            batches += 1.0;
        }
        let [policy_l, td, shrink, anchor] = sums.map(|s| s / batches);
        trace.push(EpochLoss {
            epoch,
            policy: policy_l,
            td,
            shrink,
            anchor,
            total: policy_l + w.lambda_q * (td + shrink) + w.lambda_anchor * anchor,
        });
    }
    Ok(TrainOutcome { trace, policy })
}
