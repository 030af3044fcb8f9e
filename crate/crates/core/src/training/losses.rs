use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SpiceError};
use crate::priors::EnsemblePrior;

/// Per-head gradients with respect to the trainable parameters, `[k][j]`.
pub type HeadGrads = Vec<Vec<f64>>;

pub fn zero_grads(ens: &EnsemblePrior) -> HeadGrads {
    vec![vec![0.0; ens.num_params()]; ens.num_heads()]
}

pub(crate) fn add_scaled(dst: &mut [f64], src: &[f64], scale: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += scale * s;
    }
}

/// One regression example: encoded state, taken action, TD target.
#[derive(Debug, Clone, PartialEq)]
pub struct TdSample {
    pub features: Vec<f64>,
    pub action: usize,
    pub target: f64,
}

/// What the TD regression fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TdRegression {
    /// `(Q̄ − y)²`.
    EnsembleMean,
    /// `(1/K) Σ_k (Q_k − y)²`, which equals the mean form plus the
    /// (biased) ensemble variance at the taken action.
    #[default]
    PerHead,
}

/// Mean squared error between the ensemble mean and the targets.
pub fn loss_td(ens: &EnsemblePrior, samples: &[TdSample]) -> Result<f64> {
    Ok(loss_td_grad(ens, samples, TdRegression::EnsembleMean, false)?.0)
}

/// TD regression loss under `mode`, with its gradient when `with_grad`.
pub fn loss_td_grad(
    ens: &EnsemblePrior,
    samples: &[TdSample],
    mode: TdRegression,
    with_grad: bool,
) -> Result<(f64, HeadGrads)> {
    if samples.is_empty() {
        return Err(SpiceError::Empty("TD batch"));
    }
    let k_heads = ens.num_heads();
    let kf = k_heads as f64;
    let nf = samples.len() as f64;
    let mut grads = if with_grad { zero_grads(ens) } else { Vec::new() };
    let mut loss = 0.0;
    for s in samples {
        let mut values = Vec::with_capacity(k_heads);
        let mut head_grads = Vec::with_capacity(k_heads);
        for k in 0..k_heads {
            if with_grad {
                let (v, g) = ens.head_value_grad(k, &s.features, s.action)?;
                values.push(v);
                head_grads.push(g);
            } else {
                values.push(ens.head_value(k, &s.features, s.action)?);
            }
        }
        match mode {
            TdRegression::EnsembleMean => {
                let err = values.iter().sum::<f64>() / kf - s.target;
                loss += err * err / nf;
                for (k, g) in head_grads.iter().enumerate() {
                    add_scaled(&mut grads[k], g, 2.0 * err / (kf * nf));
                }
            }
            TdRegression::PerHead => {
                for (k, v) in values.iter().enumerate() {
                    let err = v - s.target;
                    loss += err * err / (kf * nf);
                    if with_grad {
                        add_scaled(&mut grads[k], &head_grads[k], 2.0 * err / (kf * nf));
                    }
                }
            }
        }
    }
    Ok((loss, grads))
}

/// Conjugate prior of the shrinkage loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkPrior {
    pub mu0: f64,
    pub v0: f64,
    pub sigma2: f64,
}

impl Default for ShrinkPrior {
    fn default() -> Self {
        Self {
            mu0: 0.0,
            v0: 1.0,
            sigma2: 0.09,
        }
    }
}

impl ShrinkPrior {
    /// `w = σ²/(σ² + c·v₀)`, the weight on `μ₀`.
    pub fn weight(&self, count: f64) -> f64 {
        self.sigma2 / (self.sigma2 + count * self.v0)
    }

    pub fn posterior_mean(&self, count: f64, mean_target: f64) -> f64 {
        let w = self.weight(count);
        w * self.mu0 + (1.0 - w) * mean_target
    }
}

/// `m_a^post` per action, `None` for actions absent from the context.
pub fn shrink_targets(actions: &[usize], targets: &[f64], num_actions: usize, prior: &ShrinkPrior) -> Result<Vec<Option<f64>>> {
    if actions.len() != targets.len() {
        return Err(SpiceError::DimensionMismatch {
            expected: actions.len(),
            got: targets.len(),
        });
    }
    let mut counts = vec![0.0; num_actions];
    let mut sums = vec![0.0; num_actions];
    for (&a, &y) in actions.iter().zip(targets) {
        if a >= num_actions {
            return Err(SpiceError::ActionOutOfRange { action: a, num_actions });
        }
        counts[a] += 1.0;
        sums[a] += y;
    }
    Ok(counts
        .iter()
        .zip(&sums)
        .map(|(&c, &s)| (c > 0.0).then(|| prior.posterior_mean(c, s / f64::max(1.0, c))))
        .collect())
}

/// Shrinkage loss for one context: squared deviation of the context-average
/// ensemble mean from `m_a^post`, averaged over observed actions.
pub fn loss_shrink(
    ens: &EnsemblePrior,
    state_features: &[Vec<f64>],
    actions: &[usize],
    targets: &[f64],
    prior: &ShrinkPrior,
) -> Result<f64> {
    Ok(loss_shrink_grad(ens, state_features, actions, targets, prior, false)?.0)
}

pub fn loss_shrink_grad(
    ens: &EnsemblePrior,
    state_features: &[Vec<f64>],
    actions: &[usize],
    targets: &[f64],
    prior: &ShrinkPrior,
    with_grad: bool,
) -> Result<(f64, HeadGrads)> {
    if state_features.len() != actions.len() {
        return Err(SpiceError::DimensionMismatch {
            expected: actions.len(),
            got: state_features.len(),
        });
    }
    let mut grads = if with_grad { zero_grads(ens) } else { Vec::new() };
    let m_post = shrink_targets(actions, targets, ens.num_actions(), prior)?;
    let observed = m_post.iter().filter(|m| m.is_some()).count();
    if observed == 0 {
        return Ok((0.0, grads));
    }
    let h = state_features.len() as f64;
    let kf = ens.num_heads() as f64;
    let norm = observed as f64;
    let mut loss = 0.0;
    for (a, m) in m_post.iter().enumerate() {
        let Some(m) = m else { continue };
        let mut avg = 0.0;
        let mut g_avg = if with_grad { zero_grads(ens) } else { Vec::new() };
        for f in state_features {
            for k in 0..ens.num_heads() {
                if with_grad {
                    let (v, g) = ens.head_value_grad(k, f, a)?;
                    avg += v / (kf * h);
                    add_scaled(&mut g_avg[k], &g, 1.0 / (kf * h));
                } else {
                    avg += ens.head_value(k, f, a)? / (kf * h);
                }
            }
        }
        let err = avg - m;
        loss += err * err / norm;
        if with_grad {
            for (dst, src) in grads.iter_mut().zip(&g_avg) {
                add_scaled(dst, src, 2.0 * err / norm);
            }
        }
    }
    Ok((loss, grads))
}

/// `Σ_k ‖φ_k − φ_k⁽⁰⁾‖²` over trainable parameters.
pub fn loss_anchor(ens: &EnsemblePrior) -> f64 {
    (0..ens.num_heads())
        .map(|k| {
            ens.params(k)
                .iter()
                .zip(ens.anchor(k))
                .map(|(p, p0)| (p - p0).powi(2))
                .sum::<f64>()
        })
        .sum()
}

pub fn loss_anchor_grad(ens: &EnsemblePrior) -> HeadGrads {
    (0..ens.num_heads())
        .map(|k| ens.params(k).iter().zip(ens.anchor(k)).map(|(p, p0)| 2.0 * (p - p0)).collect())
        .collect()
}

/// Central finite-difference gradient of `f` with respect to every trainable
/// parameter. Test support.
pub fn finite_difference<F>(ens: &EnsemblePrior, step: f64, mut f: F) -> Result<HeadGrads>
where
    F: FnMut(&EnsemblePrior) -> Result<f64>,
{
    if !(step > 0.0) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let mut probe = ens.clone();
    let mut grads = zero_grads(ens);
    for k in 0..ens.num_heads() {
        for j in 0..ens.num_params() {
            let orig = probe.params(k)[j];
            probe.params_mut(k)[j] = orig + step;
            let up = f(&probe)?;
            probe.params_mut(k)[j] = orig - step;
            let down = f(&probe)?;
            probe.params_mut(k)[j] = orig;
            grads[k][j] = (up - down) / (2.0 * step);
        }
    }
    Ok(grads)
}
