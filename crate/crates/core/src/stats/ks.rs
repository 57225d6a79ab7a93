/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 1.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// KS statistic with values within `eps` treated as equal:
/// `max(sup_x [F_a(x) − F_b(x+ε)], sup_x [F_b(x) − F_a(x+ε)])`.
/// Reduces to [`ks_distance`] at `eps = 0`.
pub fn ks_distance_tolerant(a: &[f64], b: &[f64], eps: f64) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 1.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    one_sided(&a, &b, eps).max(one_sided(&b, &a, eps))
}

fn one_sided(a: &[f64], b: &[f64], eps: f64) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut d = 0.0f64;
    for (i, x) in a.iter().enumerate() {
        if i + 1 < a.len() && a[i + 1] == *x {
            continue;
        }
        let fb = b.partition_point(|y| *y <= x + eps) as f64 / nb;
        d = d.max((i + 1) as f64 / na - fb);
    }
    d
}

/// Asymptotic critical value of the two-sample KS statistic at `level`.
pub fn ks_critical(n: usize, m: usize, level: f64) -> f64 {
    let c = (-(level / 2.0).ln() / 2.0).sqrt();
    let (n, m) = (n as f64, m as f64);
    c * ((n + m) / (n * m)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_disjoint() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_distance(&a, &a), 0.0);
        assert_eq!(ks_distance(&a, &[10.0, 11.0]), 1.0);
        assert!((ks_distance(&[1.0, 2.0], &[2.0, 3.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tolerant_variant() {
        let a = [1.0, 2.0, 3.0, 3.5];
        let b = [0.5, 2.5, 2.6, 4.0, 4.1];
        assert_eq!(ks_distance_tolerant(&a, &b, 0.0), ks_distance(&a, &b));
        assert_eq!(ks_distance_tolerant(&[1.0], &[1.0 + 1e-15], 1e-12), 0.0);
        assert_eq!(ks_distance_tolerant(&[1.0], &[1.0 + 1e-15], 0.0), 1.0);
    }

    #[test]
    fn critical_value_at_one_percent() {
        // c(0.01) ≈ 1.628
        let c = ks_critical(1, 1, 0.01) / 2f64.sqrt();
        assert!((c - 1.6276).abs() < 1e-3);
    }
}
