use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SpiceError};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Standard error of the mean, `s / √n`.
pub fn sem(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    sample_std(xs) / (xs.len() as f64).sqrt()
}

/// Ordinary least squares `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r2: f64,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(SpiceError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(invalid("a line needs at least two points"));
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return Err(invalid("regressor has zero spread"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - (intercept + slope * a);
            e * e
        })
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(LinearFit { intercept, slope, r2 })
}

/// `y = a + b·ln t`.
pub fn log_fit(t: &[f64], y: &[f64]) -> Result<LinearFit> {
    let x: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    linear_fit(&x, y)
}

/// `y = d + c·√t`.
pub fn sqrt_fit(t: &[f64], y: &[f64]) -> Result<LinearFit> {
    let x: Vec<f64> = t.iter().map(|v| v.sqrt()).collect();
    linear_fit(&x, y)
}

/// Growth of a per-task cumulative gap curve over the second half of the
/// horizon, relative to its final value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauStat {
    pub half: usize,
    pub horizon: usize,
    /// Mean over tasks of `gap(K)`.
    pub total: f64,
    pub total_sem: f64,
    /// Mean over tasks of `gap(K) − gap(K/2)`.
    pub growth: f64,
    pub growth_sem: f64,
    /// `growth / total`.
    pub fraction: f64,
    pub tolerance: f64,
    /// `|growth| − 3·sem < tolerance·|total|`; the gap may have either sign.
    pub passes: bool,
}

/// `curves[i][t−1]` is task `i`'s cumulative gap after `t` steps.
pub fn plateau(curves: &[Vec<f64>], tolerance: f64) -> Result<PlateauStat> {
    let horizon = curves.first().map(|c| c.len()).ok_or(SpiceError::Empty("gap curves"))?;
    if horizon < 2 {
        return Err(invalid("plateau statistic needs a horizon of at least 2"));
    }
    if curves.iter().any(|c| c.len() != horizon) {
        return Err(invalid("gap curves differ in length"));
    }
    let half = horizon / 2;
    let totals: Vec<f64> = curves.iter().map(|c| c[horizon - 1]).collect();
    let growths: Vec<f64> = curves.iter().map(|c| c[horizon - 1] - c[half - 1]).collect();
    let total = mean(&totals);
    let growth = mean(&growths);
    let growth_sem = sem(&growths);
    Ok(PlateauStat {
        half,
        horizon,
        total,
        total_sem: sem(&totals),
        growth,
        growth_sem,
        fraction: growth / total,
        tolerance,
        passes: growth.abs() - 3.0 * growth_sem < tolerance * total.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sem_by_hand() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        // var = 5/3
        assert!((sem(&xs) - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(sem(&[7.0]), 0.0);
    }

    #[test]
    fn exact_line_has_unit_r2() {
        let x = [1.0, 2.0, 3.0, 10.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.intercept - 3.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_fit_recovers_log_curve() {
        let t: Vec<f64> = (50..=500).map(|v| v as f64).collect();
        let y: Vec<f64> = t.iter().map(|v| 2.0 + 4.0 * v.ln()).collect();
        let f = log_fit(&t, &y).unwrap();
        assert!((f.slope - 4.0).abs() < 1e-9);
        assert!(f.r2 > 0.999_999);
    }

    #[test]
    fn linear_growth_fails_plateau() {
        let curves: Vec<Vec<f64>> = (0..10).map(|_| (1..=100).map(|t| t as f64).collect()).collect();
        let p = plateau(&curves, 0.1).unwrap();
        assert!((p.fraction - 0.5).abs() < 1e-12);
        assert!(!p.passes);
    }

    #[test]
    fn flat_gap_passes_plateau() {
        let curves: Vec<Vec<f64>> = (0..10).map(|_| (1..=100).map(|t| (t.min(10)) as f64).collect()).collect();
        let p = plateau(&curves, 0.1).unwrap();
        assert_eq!(p.growth, 0.0);
        assert!(p.passes);
    }

    #[test]
    fn negative_gap_judged_by_magnitude() {
        let down: Vec<Vec<f64>> = (0..10).map(|_| (1..=100).map(|t| -(t as f64)).collect()).collect();
        assert!(!plateau(&down, 0.1).unwrap().passes);
        let settled: Vec<Vec<f64>> = (0..10).map(|_| (1..=100).map(|t| -((t.min(10)) as f64)).collect()).collect();
        assert!(plateau(&settled, 0.1).unwrap().passes);
    }

    proptest! {
        #[test]
        fn r2_in_unit_interval(ys in proptest::collection::vec(-10.0f64..10.0, 3..40)) {
            let x: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
            let f = linear_fit(&x, &ys).unwrap();
            prop_assert!(f.r2 <= 1.0 + 1e-12);
            prop_assert!(f.r2 >= -1e-12);
        }
    }
}
