use crate::error::{invalid, Result};

fn clip(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

/// Propensity correction `clip(π_u/π_b, 0, c_iw)` with `π_u = 1/A`.
pub fn weight_is(behaviour_prob: f64, num_actions: usize, c_iw: f64) -> Result<f64> {
    if !(behaviour_prob > 0.0) || behaviour_prob > 1.0 {
        return Err(invalid(format!("behaviour probability must be in (0, 1], got {behaviour_prob}")));
    }
    if num_actions == 0 {
        return Err(invalid("no actions"));
    }
    Ok(clip(1.0 / (num_actions as f64 * behaviour_prob), 0.0, c_iw))
}

/// Advantage `Q̄(a) − mean(Q̄)` of `label`.
pub fn advantage(q_means: &[f64], label: usize) -> Result<f64> {
    let q = *q_means
        .get(label)
        .ok_or_else(|| invalid(format!("label {label} out of range for {} actions", q_means.len())))?;
    Ok(q - q_means.iter().sum::<f64>() / q_means.len() as f64)
}

/// Advantage weighting `clip(exp(A/τ_adv), ε, c_adv)`.
pub fn weight_adv(q_means: &[f64], label: usize, tau_adv: f64, eps: f64, c_adv: f64) -> Result<f64> {
    if !(tau_adv > 0.0) {
        return Err(invalid(format!("tau_adv must be positive, got {tau_adv}")));
    }
    Ok(clip((advantage(q_means, label)? / tau_adv).exp(), eps, c_adv))
}

/// Epistemic weighting `clip(1 + λ_σ·σ, ε, c_epi)`.
pub fn weight_epi(sigma: f64, lambda_sigma: f64, eps: f64, c_epi: f64) -> Result<f64> {
    if !(sigma >= 0.0) {
        return Err(invalid(format!("sigma must be non-negative, got {sigma}")));
    }
    Ok(clip(1.0 + lambda_sigma * sigma, eps, c_epi))
}
