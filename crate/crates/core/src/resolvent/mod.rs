//! Forward resolvents `Γ_x(λ, z, θ, ω) = ⟨δ_x, (H^{T_x} − z)^{-1} δ_x⟩`.
//!
//! All solvers rest on the recursion
//! `Γ_x = (U_x + λV_x − z − Σ_{y child of x} Γ_y)^{-1}`, which maps the upper
//! half-plane into itself and is a strict contraction there for `Im z > 0`.

mod exact;
mod population;

pub use exact::{exact_tree_gamma, exact_tree_gamma_with, ExactTreeResult};
pub use population::{
    population_equilibrate, population_init, population_step, population_step_with,
    EquilibrationDiagnostics, EquilibrationOptions, GammaPool, PhasedPools,
};

use crate::model::{
    sample_disorder, Correlation, DisorderSpec, EvaluationPoint, PotentialSpec, SiteId, VertexId,
};
use crate::{Complex64, Error, Result};

/// Herglotz closure at `η > 0`: `Im Γ > 0` and `|Γ| ≤ 1/η`.
pub fn is_herglotz(g: Complex64, eta: f64) -> bool {
    g.im > 0.0 && g.norm() <= (1.0 / eta) * (1.0 + 1e-12)
}

/// Root of `K·Γ² + z·Γ + 1 = 0` with `Im Γ > 0`: the forward resolvent of the
/// free tree. At `Im z = 0` only energies strictly inside `(−2√K, 2√K)` have
/// such a root.
pub fn free_forward_resolvent(branching: usize, z: Complex64) -> Result<Complex64> {
    if branching < 2 {
        return Err(Error::arg("K ≥ 2 required"));
    }
    if z.im < 0.0 || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::arg(format!("need Im z ≥ 0, got {z}")));
    }
    let k = branching as f64;
    let edge = 2.0 * k.sqrt();
    if z.im == 0.0 && z.re.abs() >= edge {
        return Err(Error::BandEdge {
            energy: z.re,
            edge,
        });
    }
    let disc = (z * z - 4.0 * k).sqrt();
    let s = if (z.conj() * disc).re >= 0.0 { disc } else { -disc };
    let q = -0.5 * (z + s);
    let (r1, r2) = (q / k, 1.0 / q);
    Ok(if r1.im >= r2.im { r1 } else { r2 })
}

/// Backward scalar recursion `Γ_n = 1/(U_n − z − K·Γ_{n+1})` started from
/// `Γ_{n_steps} = 0`; returns `Γ_0`. `u_sequence[n mod len]` is `U_n`, so a
/// period of `u` or a full radial realisation both work.
pub fn radial_chain_gamma(
    branching: usize,
    u_sequence: &[f64],
    z: Complex64,
    n_steps: usize,
) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::arg("radial chain needs Im z > 0"));
    }
    if n_steps == 0 || u_sequence.is_empty() {
        return Err(Error::arg("radial chain needs n_steps ≥ 1 and a nonempty potential"));
    }
    let k = branching as f64;
    let len = u_sequence.len();
    let mut g = Complex64::new(0.0, 0.0);
    for n in (0..n_steps).rev() {
        g = (u_sequence[n % len] - z - k * g).inv();
    }
    Ok(g)
}

/// `Γ_0` of one radial-disorder realisation: `V_x = ω_{|x|}`, so every
/// sphere is constant and the tree collapses to
/// `Γ_n = 1/(U_n + λω_n − z − K·Γ_{n+1})` for `n < length`, closed with the
/// free resolvent at depth `length`. Draws use the radial keys of `seed`, so
/// the value equals the root of [`exact_tree_gamma`] on a radial tree with
/// the same seed (up to the closing condition).
pub fn radial_disordered_chain(
    branching: usize,
    pot: &PotentialSpec,
    point: &EvaluationPoint,
    length: usize,
    seed: u64,
) -> Result<Complex64> {
    point.require_positive_eta()?;
    if length == 0 {
        return Err(Error::arg("chain length must be at least 1"));
    }
    if point.phase < 1 || point.phase > pot.period() {
        return Err(Error::arg(format!("phase {} outside 1..={}", point.phase, pot.period())));
    }
    let radial = DisorderSpec {
        distribution: pot.disorder.distribution.clone(),
        correlation: Correlation::Radial,
    };
    let z = point.z();
    let k = branching as f64;
    let mut g = free_forward_resolvent(branching, z)?;
    for n in (0..length).rev() {
        let v = if pot.coupling == 0.0 {
            0.0
        } else {
            sample_disorder(&radial, seed, SiteId::Vertex(VertexId { depth: n, index: 0 }))
        };
        let u = pot.background(point.phase, n) + pot.coupling * v;
        g = (u - z - k * g).inv();
    }
    Ok(g)
}

/// Green function between the root and `x` from the forward resolvents along
/// the path `0 = x_0, …, x_n = x`: `∏_j Γ_{x_j}`.
///
/// This is the entry of `(H − z)^{-1}` for hopping `−1`; with the adjacency
/// operator (hopping `+1`) the entry picks up `(−1)^{n}`, see
/// [`offdiag_green_adjacency`].
pub fn offdiag_green(path_gammas: &[Complex64]) -> Result<Complex64> {
    if path_gammas.is_empty() {
        return Err(Error::arg("empty path"));
    }
    Ok(path_gammas.iter().product())
}

/// `⟨δ_0, (T + U + λV − z)^{-1} δ_x⟩` with `T` the adjacency operator.
pub fn offdiag_green_adjacency(path_gammas: &[Complex64]) -> Result<Complex64> {
    let p = offdiag_green(path_gammas)?;
    Ok(if (path_gammas.len() - 1) % 2 == 1 { -p } else { p })
}

/// Result of extrapolating to `η = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolation {
    pub value: Complex64,
    /// `|P_n(0) − P_{n−1}(0)|`, the last Neville correction.
    pub uncertainty: f64,
}

pub const DEFAULT_EXTRAPOLATION_BUDGET: f64 = 1e-3;

/// Polynomial (Neville) extrapolation of `Γ(E + iη)` to `η = 0`.
pub fn eta_extrapolate(values: &[(f64, Complex64)], budget: f64) -> Result<Extrapolation> {
    if values.len() < 3 {
        return Err(Error::arg("extrapolation needs at least three points"));
    }
    if values.iter().any(|(eta, _)| !(*eta > 0.0))
        || values.windows(2).any(|w| !(w[1].0 < w[0].0))
    {
        return Err(Error::arg("eta values must be positive and strictly decreasing"));
    }
    let n = values.len();
    let xs: Vec<f64> = values.iter().map(|v| v.0).collect();
    let mut p: Vec<Complex64> = values.iter().map(|v| v.1).collect();
    // after pass m, p[i] is the interpolant through points i..=i+m at 0
    let mut diagonal = vec![p[0]];
    for m in 1..n {
        for i in 0..n - m {
            let (xi, xj) = (xs[i], xs[i + m]);
            p[i] = (p[i] * (0.0 - xj) - p[i + 1] * (0.0 - xi)) / (xi - xj);
        }
        diagonal.push(p[0]);
    }
    let value = diagonal[n - 1];
    let uncertainty = (diagonal[n - 1] - diagonal[n - 2]).norm();
    if uncertainty > budget {
        return Err(Error::IllConditioned {
            spread: uncertainty,
            budget,
        });
    }
    Ok(Extrapolation { value, uncertainty })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn free_resolvent_at_i() {
        // roots of 2Γ² + iΓ + 1: i/2 and −i
        let g = free_forward_resolvent(2, c(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!((g - c(0.0, 0.5)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn free_resolvent_on_band_center() {
        let g = free_forward_resolvent(2, c(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!((g - c(0.0, 0.5f64.sqrt())).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.norm(), 2f64.powf(-0.5), epsilon = 1e-15);
    }

    #[test]
    fn free_resolvent_band_edge_error() {
        assert!(matches!(
            free_forward_resolvent(2, c(3.0, 0.0)),
            Err(Error::BandEdge { .. })
        ));
        assert!(matches!(
            free_forward_resolvent(2, c(-3.0, 0.0)),
            Err(Error::BandEdge { .. })
        ));
        // off the real axis every energy is fine
        let g = free_forward_resolvent(2, c(3.0, 1e-9)).unwrap();
        assert!(g.im > 0.0);
    }

    #[test]
    fn free_resolvent_solves_quadratic() {
        for (e, eta, k) in [(0.3, 0.01, 2usize), (-2.5, 0.5, 3), (4.0, 1e-4, 2), (0.0, 5.0, 6)] {
            let z = c(e, eta);
            let g = free_forward_resolvent(k, z).unwrap();
            let res = k as f64 * g * g + z * g + 1.0;
            assert!(res.norm() < 1e-12, "{res}");
            assert!(is_herglotz(g, eta));
        }
    }

    #[test]
    fn chain_single_step() {
        let z = c(0.4, 0.2);
        let g = radial_chain_gamma(2, &[1.3], z, 1).unwrap();
        assert_abs_diff_eq!((g - (1.3 - z).inv()).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn chain_converges_to_free_value() {
        let g = radial_chain_gamma(2, &[0.0], c(0.0, 1.0), 200).unwrap();
        assert_abs_diff_eq!((g - c(0.0, 0.5)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn chain_matches_cocycle_near_real_axis() {
        // contraction per step is 1 − O(η); 2·10⁷ steps at η = 1e-6 suffice
        let u = [1.0, -1.0];
        let g = radial_chain_gamma(2, &u, c(2.0, 1e-6), 20_000_000).unwrap();
        let pm = cocycle::compose_period(&u, 2.0, 2, 1).unwrap();
        let fp = cocycle::fixed_points(&pm).unwrap().upper().expect("2 lies in a band");
        assert!((g - fp).norm() < 1e-4, "{g} vs {fp}");
    }

    #[test]
    fn disordered_chain_forgets_its_closing_condition() {
        let pot = PotentialSpec::new(
            vec![0.0],
            DisorderSpec::radial(crate::model::Distribution::Cauchy { scale: 1.0 }),
            0.2,
        )
        .unwrap();
        let point = EvaluationPoint::new(0.4, 1e-3, 1).unwrap();
        let a = radial_disordered_chain(2, &pot, &point, 3000, 9).unwrap();
        let b = radial_disordered_chain(2, &pot, &point, 6000, 9).unwrap();
        assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        assert!(is_herglotz(a, 1e-3));
        let c = radial_disordered_chain(2, &pot, &point, 3000, 10).unwrap();
        assert!(a != c);
    }

    #[test]
    fn chain_rejects_real_z() {
        assert!(radial_chain_gamma(2, &[0.0], c(0.0, 0.0), 10).is_err());
        assert!(radial_chain_gamma(2, &[0.0], c(0.0, 1.0), 0).is_err());
    }

    #[test]
    fn offdiag_products() {
        let g = c(0.3, 0.7);
        assert_eq!(offdiag_green(&[g]).unwrap(), g);
        let p = offdiag_green(&[c(0.0, 0.5), c(0.0, 0.5)]).unwrap();
        assert_abs_diff_eq!((p - c(-0.25, 0.0)).norm(), 0.0, epsilon = 1e-16);
        let q = offdiag_green_adjacency(&[c(0.0, 0.5), c(0.0, 0.5)]).unwrap();
        assert_abs_diff_eq!((q - c(0.25, 0.0)).norm(), 0.0, epsilon = 1e-16);
        assert!(offdiag_green(&[]).is_err());
    }

    #[test]
    fn extrapolate_constant() {
        let k = c(0.1, 0.9);
        let pts = [(0.1, k), (0.05, k), (0.01, k)];
        let ex = eta_extrapolate(&pts, DEFAULT_EXTRAPOLATION_BUDGET).unwrap();
        assert_abs_diff_eq!((ex.value - k).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn extrapolate_free_band_center() {
        let pts: Vec<(f64, Complex64)> = [1e-2, 3e-3, 1e-3]
            .iter()
            .map(|&eta| (eta, free_forward_resolvent(2, c(0.0, eta)).unwrap()))
            .collect();
        let ex = eta_extrapolate(&pts, DEFAULT_EXTRAPOLATION_BUDGET).unwrap();
        assert!((ex.value - c(0.0, 0.5f64.sqrt())).norm() < 1e-4);
    }

    #[test]
    fn extrapolate_guards() {
        let g = c(0.0, 1.0);
        assert!(matches!(
            eta_extrapolate(&[(0.1, g), (0.01, g)], 1.0),
            Err(Error::Argument(_))
        ));
        assert!(eta_extrapolate(&[(0.1, g), (0.2, g), (0.01, g)], 1.0).is_err());
        let wild = [(1.0, c(0.0, 1.0)), (0.5, c(0.0, 50.0)), (0.1, c(0.0, -3.0))];
        assert!(matches!(
            eta_extrapolate(&wild, 1e-3),
            Err(Error::IllConditioned { .. })
        ));
    }
}
