//! Quantile brackets `ξ±(ν, α)` and the relative α-width
//! `δ(ν, α) = 1 − ξ−/ξ+` on atomic empirical measures.
//!
//! The brackets are the exact sup/inf of the definition evaluated on the
//! empirical measure (no interpolation): with order statistics
//! `x_(1) ≤ … ≤ x_(N)`,
//!
//! * `ξ− = x_(k)`, `k = max{j : (j−1)/N ≤ α}`,
//! * `ξ+ = x_(m)`, `m = min{j : (N−j)/N ≤ α}`.
//!
//! Under this convention `ξ±(1/X) = 1/ξ∓(X)` holds exactly, and the union
//! bound arguments for products and sums go through verbatim for paired
//! samples.

use serde::Serialize;

use super::CheckReport;
use crate::{Error, Result};

/// Sorted nonnegative samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::arg("empty sample"));
        }
        if samples.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::arg("samples must be finite and nonnegative"));
        }
        samples.sort_unstable_by(f64::total_cmp);
        Ok(EmpiricalDistribution { samples })
    }

    /// Keeps the strictly positive values; returns the number dropped.
    pub fn from_positive(values: impl IntoIterator<Item = f64>) -> Result<(Self, usize)> {
        let mut dropped = 0;
        let kept: Vec<f64> = values
            .into_iter()
            .filter(|x| {
                let keep = *x > 0.0;
                dropped += usize::from(!keep);
                keep
            })
            .collect();
        Ok((EmpiricalDistribution::new(kept)?, dropped))
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WidthStats {
    pub xi_minus: f64,
    pub xi_plus: f64,
    pub delta: f64,
    pub alpha: f64,
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 0.5 {
        Ok(())
    } else {
        Err(Error::AlphaRange(alpha))
    }
}

/// `floor(α·N)` with a relative guard against `α·N` landing a hair below an
/// integer.
fn alpha_count(alpha: f64, n: usize) -> usize {
    let an = alpha * n as f64;
    ((an + 1e-9 * an.max(1.0)).floor() as usize).min(n)
}

pub fn quantile_brackets(dist: &EmpiricalDistribution, alpha: f64) -> Result<WidthStats> {
    check_alpha(alpha)?;
    let n = dist.count();
    let f = alpha_count(alpha, n);
    // 1-based k = f + 1 and m = n − f
    let k = (f + 1).min(n);
    let m = (n - f).max(1);
    let xi_minus = dist.samples[k - 1];
    let xi_plus = dist.samples[m - 1];
    let delta = if xi_plus > 0.0 {
        1.0 - xi_minus / xi_plus
    } else {
        0.0
    };
    Ok(WidthStats {
        xi_minus,
        xi_plus,
        delta,
        alpha,
    })
}

/// `δ` of the positive part of `values` (zeros dropped, negatives rejected).
pub fn width_of(values: &[f64], alpha: f64) -> Result<WidthStats> {
    let (dist, _) = EmpiricalDistribution::from_positive(values.iter().copied())?;
    quantile_brackets(&dist, alpha)
}

fn delta(values: &[f64], alpha: f64) -> Result<f64> {
    Ok(width_of(values, alpha)?.delta)
}

fn report(check: &str, lhs: f64, rhs: f64, tol: f64, n: usize, alpha: f64) -> CheckReport {
    CheckReport::new(check, lhs, rhs, tol, n).with_alpha(alpha)
}

/// Rule 1: `δ(X, α₁) ≤ δ(X, α₂)` for `α₁ ≥ α₂`.
pub fn rule_alpha_monotone(x: &[f64], alpha1: f64, alpha2: f64) -> Result<CheckReport> {
    check_alpha(alpha1)?;
    check_alpha(alpha2)?;
    let (hi, lo) = if alpha1 >= alpha2 { (alpha1, alpha2) } else { (alpha2, alpha1) };
    Ok(report("delta_rule1_alpha_monotone", delta(x, hi)?, delta(x, lo)?, 1e-12, x.len(), hi))
}

/// Rule 2: `δ(η + X, α) ≤ δ(X, α)` for `η ≥ 0`.
pub fn rule_shift(x: &[f64], eta: f64, alpha: f64) -> Result<CheckReport> {
    if !(eta >= 0.0) {
        return Err(Error::arg("shift must be nonnegative"));
    }
    let shifted: Vec<f64> = x.iter().map(|v| v + eta).collect();
    Ok(report("delta_rule2_shift", delta(&shifted, alpha)?, delta(x, alpha)?, 1e-12, x.len(), alpha))
}

/// Rule 3: `δ(1/X, α) = δ(X, α)`; reported as `|difference| ≤ 10⁻¹²`.
pub fn rule_inversion(x: &[f64], alpha: f64) -> Result<CheckReport> {
    let inv: Vec<f64> = x.iter().filter(|v| **v > 0.0).map(|v| 1.0 / v).collect();
    let diff = (delta(&inv, alpha)? - delta(x, alpha)?).abs();
    Ok(report("delta_rule3_inversion", diff, 1e-12, 0.0, x.len(), alpha))
}

fn check_paired(xs: &[Vec<f64>]) -> Result<usize> {
    let n = xs.first().map(Vec::len).ok_or_else(|| Error::arg("no factors"))?;
    if n == 0 || xs.iter().any(|x| x.len() != n) {
        return Err(Error::arg("paired samples must be nonempty and of equal length"));
    }
    if xs.iter().flatten().any(|v| !(*v > 0.0)) {
        return Err(Error::arg("paired samples must be positive"));
    }
    Ok(n)
}

/// Rule 4: `δ(∏ X_j, Σ α_j) ≤ Σ δ(X_j, α_j)` on paired samples.
pub fn rule_product(xs: &[Vec<f64>], alphas: &[f64]) -> Result<CheckReport> {
    let n = check_paired(xs)?;
    if alphas.len() != xs.len() {
        return Err(Error::arg("one alpha per factor"));
    }
    for &a in alphas {
        check_alpha(a)?;
    }
    let total: f64 = alphas.iter().sum();
    check_alpha(total)?;
    let prod: Vec<f64> = (0..n).map(|i| xs.iter().map(|x| x[i]).product()).collect();
    let rhs = xs
        .iter()
        .zip(alphas)
        .map(|(x, &a)| delta(x, a))
        .sum::<Result<f64>>()?;
    Ok(report("delta_rule4_product", delta(&prod, total)?, rhs, 1e-12, n, total))
}

/// Rule 5: `δ(Σ_{j=1}^K X_j, Kα) ≤ δ(X, α)` on paired samples. When the
/// marginals are not exactly identical the right side is `max_j δ(X_j, α)`,
/// which the same argument bounds.
pub fn rule_sum(xs: &[Vec<f64>], alpha: f64) -> Result<CheckReport> {
    let n = check_paired(xs)?;
    check_alpha(alpha)?;
    let composite = alpha * xs.len() as f64;
    check_alpha(composite)?;
    let sum: Vec<f64> = (0..n).map(|i| xs.iter().map(|x| x[i]).sum()).collect();
    let rhs = xs
        .iter()
        .map(|x| delta(x, alpha))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(report("delta_rule5_sum", delta(&sum, composite)?, rhs, 1e-12, n, composite))
}

/// Inputs for one pass over all five width rules.
#[derive(Debug, Clone)]
pub struct DeltaRuleInputs {
    pub x: Vec<f64>,
    pub alpha: f64,
    pub alpha_larger: f64,
    pub shift: f64,
    /// Paired factors for the product rule, with their alphas.
    pub factors: Vec<Vec<f64>>,
    pub factor_alphas: Vec<f64>,
    /// Paired identically distributed summands for the sum rule.
    pub summands: Vec<Vec<f64>>,
}

pub fn delta_rules_check(inputs: &DeltaRuleInputs) -> Result<Vec<CheckReport>> {
    Ok(vec![
        rule_alpha_monotone(&inputs.x, inputs.alpha_larger, inputs.alpha)?,
        rule_shift(&inputs.x, inputs.shift, inputs.alpha)?,
        rule_inversion(&inputs.x, inputs.alpha)?,
        rule_product(&inputs.factors, &inputs.factor_alphas)?,
        rule_sum(&inputs.summands, inputs.alpha)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    fn dist(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn point_mass_has_zero_width() {
        for alpha in [0.05, 0.25, 0.5] {
            let w = quantile_brackets(&dist(&[2.0; 17]), alpha).unwrap();
            assert_eq!((w.xi_minus, w.xi_plus, w.delta), (2.0, 2.0, 0.0));
        }
    }

    #[test]
    fn two_point_mass() {
        let w = quantile_brackets(&dist(&[1.0, 2.0]), 0.25).unwrap();
        assert_eq!((w.xi_minus, w.xi_plus), (1.0, 2.0));
        assert!((w.delta - 0.5).abs() < 1e-15);
        // heavier sample, same measure
        let w = quantile_brackets(&dist(&[1.0, 1.0, 2.0, 2.0]), 0.25).unwrap();
        assert_eq!((w.xi_minus, w.xi_plus), (1.0, 2.0));
    }

    #[test]
    fn brackets_match_definition_by_brute_force() {
        // sup{ξ : ν[0,ξ) ≤ α} over candidate atoms
        let mut rng = StreamKey::new(4).stream();
        for trial in 0..200 {
            let n = 1 + trial % 23;
            let xs: Vec<f64> = (0..n).map(|_| (rng.below(6) + 1) as f64).collect();
            let d = dist(&xs);
            for alpha in [0.1, 0.2, 0.25, 1.0 / 3.0, 0.5] {
                let w = quantile_brackets(&d, alpha).unwrap();
                let nf = n as f64;
                let below = |t: f64| xs.iter().filter(|&&x| x < t).count() as f64 / nf;
                let above = |t: f64| xs.iter().filter(|&&x| x > t).count() as f64 / nf;
                let minus = xs
                    .iter()
                    .copied()
                    .filter(|&t| below(t) <= alpha + 1e-12)
                    .fold(f64::MIN, f64::max);
                let plus = xs
                    .iter()
                    .copied()
                    .filter(|&t| above(t) <= alpha + 1e-12)
                    .fold(f64::MAX, f64::min);
                assert_eq!(w.xi_minus, minus, "{xs:?} α={alpha}");
                assert_eq!(w.xi_plus, plus, "{xs:?} α={alpha}");
            }
        }
    }

    #[test]
    fn scaling_leaves_delta_unchanged() {
        let xs: Vec<f64> = (1..100).map(|i| (i as f64).sqrt()).collect();
        let scaled: Vec<f64> = xs.iter().map(|x| 4.0 * x).collect();
        let a = quantile_brackets(&dist(&xs), 0.1).unwrap();
        let b = quantile_brackets(&dist(&scaled), 0.1).unwrap();
        assert_eq!(b.xi_minus, 4.0 * a.xi_minus);
        assert_eq!(b.xi_plus, 4.0 * a.xi_plus);
        assert!((a.delta - b.delta).abs() < 1e-15);
    }

    #[test]
    fn zero_upper_bracket_convention() {
        let w = quantile_brackets(&dist(&[0.0, 0.0, 0.0]), 0.5).unwrap();
        assert_eq!(w.delta, 0.0);
    }

    #[test]
    fn alpha_out_of_range() {
        let d = dist(&[1.0]);
        assert!(matches!(quantile_brackets(&d, 0.0), Err(Error::AlphaRange(_))));
        assert!(matches!(quantile_brackets(&d, 0.51), Err(Error::AlphaRange(_))));
        let x = vec![1.0, 2.0];
        assert!(matches!(rule_sum(&[x.clone(), x.clone(), x], 0.2), Err(Error::AlphaRange(_))));
    }

    #[test]
    fn drop_rate_is_counted() {
        let (d, dropped) = EmpiricalDistribution::from_positive([0.0, 1.0, 2.0, 0.0]).unwrap();
        assert_eq!((d.count(), dropped), (2, 2));
    }

    #[test]
    fn rules_on_simple_data() {
        let x: Vec<f64> = (1..=50).map(|i| i as f64).collect();
        assert!(rule_shift(&x, 0.0, 0.2).unwrap().lhs == rule_shift(&x, 0.0, 0.2).unwrap().rhs);
        assert!(rule_inversion(&x, 0.2).unwrap().passed);
        let mut y = x.clone();
        y.reverse();
        let r = rule_sum(&[x.clone(), y], 0.1).unwrap();
        assert!(r.passed, "{r:?}");
        let r = rule_product(&[x.clone(), x.clone()], &[0.1, 0.2]).unwrap();
        assert!(r.passed, "{r:?}");
        let r = rule_alpha_monotone(&x, 0.1, 0.4).unwrap();
        assert!(r.passed, "{r:?}");
    }
}
