mod common;

use common::free_gamma;
use treelab::cocycle::fixed_point_orbit;
use treelab::experiments::{self, cauchy_closed_form, ExperimentConfig, ExperimentKind};
use treelab::model::{DisorderSpec, Distribution, EvaluationPoint, PotentialSpec, TreeParams};
use treelab::resolvent::{population_equilibrate, EquilibrationOptions, PhasedPools};
use treelab::rng::StreamKey;
use treelab::stats::{
    fractional_moment_budget, lyapunov_estimate, lyapunov_from_samples, rule_sum,
    weak_correlation_check,
};
use treelab::Complex64;

const N: usize = 100_000;

fn draws(law: &Distribution, tag: u64) -> Vec<f64> {
    let mut rng = StreamKey::new(31).with(tag).stream();
    (0..N).map(|_| law.sample(&mut rng)).collect()
}

#[test]
fn weak_correlation_lower_bound_for_iid_pairs() {
    let uniform = Distribution::Uniform { a: 0.5, b: 3.0 };
    let gaussian = Distribution::Gaussian { mean: 0.0, sd: 1.0 };
    let lognormal = |tag| draws(&gaussian, tag).into_iter().map(f64::exp).collect::<Vec<_>>();
    let cases = [
        ("uniform", draws(&uniform, 1), draws(&uniform, 2)),
        ("lognormal", lognormal(3), lognormal(4)),
    ];
    for (name, x1, x2) in &cases {
        for alpha in [0.1, 0.25, 0.5] {
            let r = weak_correlation_check(x1, x2, alpha, 1.0).unwrap();
            assert!(r.passed, "{name} α={alpha}: bound {} > E {}", r.lhs, r.rhs);
        }
    }
}

#[test]
fn iid_sum_rule_on_uniform_samples() {
    let law = Distribution::Uniform { a: 1.0, b: 2.0 };
    let r = rule_sum(&[draws(&law, 10), draws(&law, 11)], 0.1).unwrap();
    assert!(r.passed, "{} > {}", r.lhs, r.rhs);
}

#[test]
fn free_resolvent_fractional_moment_within_budget() {
    let (a, b, s) = (-1.0, 1.0, 0.5);
    let budget = fractional_moment_budget(s, a, b).unwrap();
    assert!((budget - 6.0 / (std::f64::consts::PI / 4.0).cos()).abs() < 1e-12);
    for eta in [0.0, 0.1] {
        let m = 1000;
        let h = (b - a) / (m - 1) as f64;
        let f: Vec<f64> = (0..m)
            .map(|i| free_gamma(2, Complex64::new(a + i as f64 * h, eta)).norm().powf(s))
            .collect();
        let integral = h * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[m - 1]));
        assert!(integral <= budget, "η={eta}: {integral} > {budget}");
    }
}

#[test]
fn lyapunov_vanishes_on_the_unperturbed_band() {
    for (u, e) in [(vec![0.0], 0.4), (vec![1.0, -1.0], 2.0), (vec![0.3, -0.2, 0.5], 0.1)] {
        let orbit = fixed_point_orbit(&u, e, 3).unwrap().expect("in band");
        let est = lyapunov_from_samples(&orbit, 3).unwrap();
        assert!(est.gamma_mean.abs() < 1e-10, "{u:?}: {}", est.gamma_mean);
    }
}

#[test]
fn lyapunov_is_positive_at_unit_eta() {
    let params = TreeParams::new(2, 0, 1).unwrap();
    let point = EvaluationPoint::new(0.3, 1.0, 1).unwrap();
    let opts = EquilibrationOptions {
        max_iter: 200,
        ..Default::default()
    };
    for lambda in [0.0, 0.5, 2.0] {
        let pot = PotentialSpec::new(
            vec![0.0],
            DisorderSpec::iid(Distribution::Uniform { a: -1.0, b: 1.0 }),
            lambda,
        )
        .unwrap();
        let start = PhasedPools::unperturbed_start(N, &params, &pot, point).unwrap();
        let (pools, _) = population_equilibrate(start, &params, &pot, 9, &opts).unwrap();
        let est = lyapunov_estimate(&pools, 2).unwrap();
        assert!(est.gamma_mean - 3.0 * est.std_error > 0.0, "λ={lambda}: {est:?}");
    }
}

#[test]
fn cauchy_closed_form_is_positive_on_the_spectrum() {
    let edge = 2.0 * 2f64.sqrt();
    for i in 0..=40 {
        let e = -edge + 2.0 * edge * i as f64 / 40.0;
        for lambda in [1e-3, 0.1, 1.0] {
            assert!(cauchy_closed_form(&[0.0], 2, e, 0.0, lambda, 1.0).unwrap() > 0.0);
        }
    }
}

/// Quadrupling the pool halves the standard error of the L¹ estimate.
#[test]
fn continuity_error_bar_scales_like_inverse_root_n() {
    let se = |n: usize| {
        let mut cfg = ExperimentConfig::minimal(ExperimentKind::Continuity, 2, vec![0.0]);
        cfg.potential.disorder = DisorderSpec::iid(Distribution::Uniform { a: -1.0, b: 1.0 });
        cfg.lambda_schedule = Some(vec![0.25]);
        cfg.eta_schedule = vec![1e-2];
        cfg.interval = Some((-1.0, 1.0));
        cfg.energy_grid.points = 5;
        cfg.pool_size = n;
        cfg.equilibration.max_iter = 150;
        let out = experiments::run(&cfg).unwrap();
        out.curve("l1_continuity").iter().find(|r| r.abscissa == 0.25).unwrap().std_error
    };
    let ratio = se(4_000) / se(16_000);
    assert!((ratio - 2.0).abs() <= 0.6, "ratio {ratio}");
}
