use serde::Serialize;

use crate::resolvent::PhasedPools;
use crate::{Complex64, Error, Result};

/// `w = mean log(√K Γ)` and `γ = −Re w` with a normal-approximation error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    pub gamma_mean: f64,
    pub std_error: f64,
    pub w_mean: Complex64,
    pub sample_count: usize,
}

/// Pools all phases; each sample carries weight `1/(total N)`.
pub fn lyapunov_estimate(pools: &PhasedPools, branching: usize) -> Result<LyapunovEstimate> {
    let all: Vec<Complex64> = pools.all_samples().copied().collect();
    lyapunov_from_samples(&all, branching)
}

pub fn lyapunov_from_samples(samples: &[Complex64], branching: usize) -> Result<LyapunovEstimate> {
    if samples.is_empty() {
        return Err(Error::arg("no samples"));
    }
    let root_k = (branching as f64).sqrt();
    let mut logs = Vec::with_capacity(samples.len());
    for (index, g) in samples.iter().enumerate() {
        if *g == Complex64::new(0.0, 0.0) {
            return Err(Error::ZeroGamma { index });
        }
        logs.push((g * root_k).ln());
    }
    let n = logs.len() as f64;
    let w_mean = logs.iter().sum::<Complex64>() / n;
    let std_error = if logs.len() < 2 {
        0.0
    } else {
        let var = logs.iter().map(|w| (w.re - w_mean.re).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    Ok(LyapunovEstimate {
        gamma_mean: -w_mean.re,
        std_error,
        w_mean,
        sample_count: logs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn collapsed_free_pool_at_i() {
        let est = lyapunov_from_samples(&[Complex64::new(0.0, 0.5); 100], 2).unwrap();
        assert_abs_diff_eq!(est.gamma_mean, 0.5 * 2f64.ln(), epsilon = 1e-15);
        assert!(est.std_error < 1e-15);
        assert_eq!(est.gamma_mean, -est.w_mean.re);
    }

    #[test]
    fn zero_sample_rejected() {
        let s = [Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)];
        assert!(matches!(lyapunov_from_samples(&s, 2), Err(Error::ZeroGamma { index: 1 })));
    }
}
