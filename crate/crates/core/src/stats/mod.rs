//! Empirical distributions, relative widths, Lyapunov estimates and
//! numerical checks of the inequalities relating them.

mod inequalities;
mod ks;
mod lyapunov;
mod width;

pub use inequalities::{
    fluctuation_bound_check, fractional_moment_budget, jensen_boost_gap, kotani_bound_check,
    tail_budget_check, weak_correlation_check, CheckReport,
};
pub use ks::{ks_critical, ks_distance, ks_distance_tolerant};
pub use lyapunov::{lyapunov_estimate, lyapunov_from_samples, LyapunovEstimate};
pub use width::{
    check_alpha, delta_rules_check, quantile_brackets, rule_alpha_monotone, rule_inversion,
    rule_product, rule_shift, rule_sum, width_of, DeltaRuleInputs, EmpiricalDistribution,
    WidthStats,
};

/// Mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
