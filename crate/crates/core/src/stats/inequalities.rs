//! Numerical checks of the bounds relating widths, Lyapunov exponents and
//! tails of `Γ`. Each check evaluates both sides on data and reports
//! `lhs ≤ rhs` with its margin; a violation is a report, not an error.

use std::f64::consts::PI;

use serde::Serialize;

use super::width::{check_alpha, width_of};
use crate::resolvent::PhasedPools;
use crate::{Complex64, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub margin: f64,
    pub passed: bool,
    pub n: usize,
    pub alpha: Option<f64>,
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl CheckReport {
    /// Passes when `lhs ≤ rhs + tolerance`.
    pub fn new(check: &str, lhs: f64, rhs: f64, tolerance: f64, n: usize) -> Self {
        CheckReport {
            check: check.to_string(),
            lhs,
            rhs,
            margin: rhs - lhs,
            passed: lhs <= rhs + tolerance,
            n,
            alpha: None,
            kappa: None,
            energy: None,
            eta: None,
            lambda: None,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = Some(kappa);
        self
    }

    pub fn at(mut self, energy: f64, eta: f64, lambda: f64) -> Self {
        self.energy = Some(energy);
        self.eta = Some(eta);
        self.lambda = Some(lambda);
        self
    }

    /// Multiplies the right side by `factor` and re-evaluates `passed`.
    /// Used to exercise failure paths.
    pub fn scaled_rhs(mut self, factor: f64, tolerance: f64) -> Self {
        self.rhs *= factor;
        self.margin = self.rhs - self.lhs;
        self.passed = self.lhs <= self.rhs + tolerance;
        self
    }
}

/// `log(mean X) − mean(log X) − (1/(2K(K−1))) Σ_{i≠j} ((X_i−X_j)/(X_i+X_j))²`,
/// nonnegative up to rounding.
pub fn jensen_boost_gap(values: &[f64]) -> Result<f64> {
    let k = values.len();
    if k < 2 {
        return Err(Error::arg("K ≥ 2 required for the strengthened Jensen gap"));
    }
    if values.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::arg("values must be positive and finite"));
    }
    let kf = k as f64;
    // scale-free: divide by the geometric-ish center to keep logs small
    let m = values.iter().sum::<f64>() / kf;
    let log_gap = -values.iter().map(|x| (x / m).ln()).sum::<f64>() / kf;
    let mut pairs = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            let r = (values[i] - values[j]) / (values[i] + values[j]);
            pairs += 2.0 * r * r;
        }
    }
    Ok(log_gap - pairs / (2.0 * kf * (kf - 1.0)))
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa <= 1.0 {
        Ok(())
    } else {
        Err(Error::arg(format!("κ must lie in (0, 1], got {kappa}")))
    }
}

/// Both fluctuation bounds from per-phase pools:
///
/// * `mean_θ δ(Im Γ, α)² ≤ 8γ/(κα²)`
/// * `[mean_θ δ(|Γ|², α)]² ≤ 32(K+1)²γ/(κα²)`
pub fn fluctuation_bound_check(
    pools: &PhasedPools,
    alpha: f64,
    kappa: f64,
    gamma: f64,
    branching: usize,
) -> Result<Vec<CheckReport>> {
    check_alpha(alpha)?;
    check_kappa(kappa)?;
    let tau = pools.period() as f64;
    let mut im_sq = 0.0;
    let mut abs_mean = 0.0;
    for pool in pools.pools() {
        let im: Vec<f64> = pool.samples.iter().map(|g| g.im).collect();
        let abs2: Vec<f64> = pool.samples.iter().map(|g| g.norm_sqr()).collect();
        im_sq += width_of(&im, alpha)?.delta.powi(2);
        abs_mean += width_of(&abs2, alpha)?.delta;
    }
    im_sq /= tau;
    abs_mean /= tau;
    let scale = gamma / (kappa * alpha * alpha);
    let kp1 = branching as f64 + 1.0;
    let n = pools.total_len();
    Ok(vec![
        CheckReport::new("fluctuation_im", im_sq, 8.0 * scale, 0.0, n)
            .with_alpha(alpha)
            .with_kappa(kappa),
        CheckReport::new("fluctuation_abs2", abs_mean * abs_mean, 32.0 * kp1 * kp1 * scale, 0.0, n)
            .with_alpha(alpha)
            .with_kappa(kappa),
    ])
}

/// `B_s(a, b) = (|b − a| + 2/(1 − s)) / cos(πs/2)`.
pub fn fractional_moment_budget(s: f64, a: f64, b: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::arg("fractional moment order must lie in (0, 1)"));
    }
    if !(a < b) {
        return Err(Error::arg("interval must satisfy a < b"));
    }
    Ok(((b - a).abs() + 2.0 / (1.0 - s)) / (PI * s / 2.0).cos())
}

/// Trapezoid estimate of `∫_a^b P(|Γ| > t) dE` against `B_s(a, b)/t^s`.
/// `grid` holds `(E, samples at E)` pairs in increasing `E`; `a` and `b` are
/// its first and last energies.
pub fn tail_budget_check(grid: &[(f64, &[Complex64])], s: f64, t: f64) -> Result<CheckReport> {
    if !(t > 0.0) {
        return Err(Error::arg("tail threshold must be positive"));
    }
    if grid.len() < 2 {
        return Err(Error::arg("tail check needs at least two energies"));
    }
    if grid.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::arg("energies must be strictly increasing"));
    }
    let mut n = 0;
    let freq: Vec<f64> = grid
        .iter()
        .map(|(_, samples)| {
            n += samples.len();
            if samples.is_empty() {
                return Err(Error::arg("empty sample at a grid energy"));
            }
            Ok(samples.iter().filter(|g| g.norm() > t).count() as f64 / samples.len() as f64)
        })
        .collect::<Result<_>>()?;
    let mut lhs = 0.0;
    for i in 1..grid.len() {
        lhs += 0.5 * (freq[i] + freq[i - 1]) * (grid[i].0 - grid[i - 1].0);
    }
    let (a, b) = (grid[0].0, grid[grid.len() - 1].0);
    let rhs = fractional_moment_budget(s, a, b)? / t.powf(s);
    Ok(CheckReport::new("tail_budget", lhs, rhs, 0.0, n))
}

/// `mean_θ E[(Im Γ + η/(2K))^{-1}] ≤ 2Kγ/η` with `η = Im z` of the pools.
pub fn kotani_bound_check(pools: &PhasedPools, gamma: f64, branching: usize) -> Result<CheckReport> {
    let eta = pools.point().eta;
    if !(eta > 0.0) {
        return Err(Error::arg("the Kotani-type bound requires Im z > 0"));
    }
    let k = branching as f64;
    let shift = eta / (2.0 * k);
    let lhs = pools
        .pools()
        .iter()
        .map(|p| p.samples.iter().map(|g| 1.0 / (g.im + shift)).sum::<f64>() / p.len() as f64)
        .sum::<f64>()
        / pools.period() as f64;
    let rhs = 2.0 * k * gamma / eta;
    Ok(CheckReport::new("kotani", lhs, rhs, 0.0, pools.total_len()))
}

/// Weak-correlation lower bound on paired samples:
/// `E[((X₁−X₂)/(X₁+X₂))²] ≥ (κ/2)(α δ(X₁, α))²`, reported with the bound as
/// `lhs` and the expectation as `rhs`.
pub fn weak_correlation_check(x1: &[f64], x2: &[f64], alpha: f64, kappa: f64) -> Result<CheckReport> {
    check_alpha(alpha)?;
    check_kappa(kappa)?;
    if x1.len() != x2.len() || x1.is_empty() {
        return Err(Error::arg("paired samples must be nonempty and of equal length"));
    }
    if x1.iter().chain(x2).any(|v| !(*v > 0.0)) {
        return Err(Error::arg("paired samples must be positive"));
    }
    let expectation = x1
        .iter()
        .zip(x2)
        .map(|(a, b)| ((a - b) / (a + b)).powi(2))
        .sum::<f64>()
        / x1.len() as f64;
    let delta = width_of(x1, alpha)?.delta;
    let bound = 0.5 * kappa * (alpha * delta).powi(2);
    Ok(CheckReport::new("weak_correlation", bound, expectation, 0.0, x1.len())
        .with_alpha(alpha)
        .with_kappa(kappa))
}
