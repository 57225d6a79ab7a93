//! Scenario drivers: density of states, the λ → 0 continuity surrogate, the
//! Cauchy-disorder Lyapunov oracle, the radial-vs-iid contrast and the
//! fluctuation-bound suite.
//!
//! Every driver splits its work into independent cells (one per energy,
//! coupling or realisation). Each cell derives its own seed from
//! `(seed, experiment, cell)`, and results are reduced in cell order, so the
//! output is a pure function of the configuration.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cocycle::{ac_bands, fixed_point_orbit, periodic_resolvent, spectral_window, BandSet};
use crate::model::{
    Correlation, DisorderSpec, Distribution, EvaluationPoint, Kappa, PotentialSpec, TreeParams,
};
use crate::par::{self, Execution};
use crate::resolvent::{
    population_equilibrate, radial_disordered_chain, EquilibrationDiagnostics,
    EquilibrationOptions, PhasedPools,
};
use crate::rng::{domain, StreamKey};
use crate::stats::{
    check_alpha, fluctuation_bound_check, kotani_bound_check, lyapunov_estimate,
    lyapunov_from_samples, mean_and_se, tail_budget_check, width_of, CheckReport,
    LyapunovEstimate,
};
use crate::{Complex64, Error, Result};

/// Grid used to locate band edges.
const BAND_SCAN_GRID: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Dos,
    Continuity,
    CauchyOracle,
    RadialContrast,
    Fluctuation,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Dos,
        ExperimentKind::Continuity,
        ExperimentKind::CauchyOracle,
        ExperimentKind::RadialContrast,
        ExperimentKind::Fluctuation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Dos => "dos",
            ExperimentKind::Continuity => "continuity",
            ExperimentKind::CauchyOracle => "cauchy_oracle",
            ExperimentKind::RadialContrast => "radial_contrast",
            ExperimentKind::Fluctuation => "fluctuation",
        }
    }

    fn tag(self) -> u64 {
        self as u64 + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeConfig {
    #[serde(rename = "K")]
    pub branching: usize,
    /// Only used by exact-tree consumers; pools describe the infinite tree.
    #[serde(default)]
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// Background values `u(1..τ)`.
    pub u: Vec<f64>,
    #[serde(default = "DisorderSpec::none")]
    pub disorder: DisorderSpec,
    /// Coupling used when no `lambda_schedule` is given.
    #[serde(default)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyGrid {
    /// Defaults to the interval if one is given, else to a window that
    /// contains the spectrum.
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub points: usize,
}

impl Default for EnergyGrid {
    fn default() -> Self {
        EnergyGrid {
            min: None,
            max: None,
            points: 512,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailConfig {
    pub s: f64,
    pub t: f64,
}

impl Default for TailConfig {
    fn default() -> Self {
        TailConfig { s: 0.5, t: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestHooks {
    /// Multiplies the right side of every fluctuation-suite bound. Values
    /// below 1 corrupt the bounds on purpose to exercise failure paths.
    pub bound_scale: f64,
}

impl Default for TestHooks {
    fn default() -> Self {
        TestHooks { bound_scale: 1.0 }
    }
}

fn default_etas() -> Vec<f64> {
    vec![1e-3]
}

fn default_pool_size() -> usize {
    100_000
}

fn default_alphas() -> Vec<f64> {
    vec![0.1, 0.25, 0.5]
}

fn default_kappa() -> f64 {
    1.0
}

fn default_chain_length() -> usize {
    2000
}

fn default_width_alpha() -> f64 {
    0.1
}

fn default_batches() -> usize {
    20
}

fn default_measure_generations() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub tree: TreeConfig,
    pub potential: PotentialConfig,
    #[serde(default)]
    pub energy_grid: EnergyGrid,
    /// Positive imaginary parts; drivers that need one value take the
    /// smallest.
    #[serde(default = "default_etas")]
    pub eta_schedule: Vec<f64>,
    /// Defaults to `[potential.lambda]`.
    #[serde(default)]
    pub lambda_schedule: Option<Vec<f64>>,
    #[serde(default = "default_pool_size")]
    pub pool_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub interval: Option<(f64, f64)>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default)]
    pub equilibration: EquilibrationOptions,
    /// Depth of each radial-disorder chain.
    #[serde(default = "default_chain_length")]
    pub chain_length: usize,
    /// Radial realisations per phase; defaults to `pool_size`.
    #[serde(default)]
    pub realizations: Option<usize>,
    #[serde(default = "default_width_alpha")]
    pub width_alpha: f64,
    /// Batches for batch-means errors of widths.
    #[serde(default = "default_batches")]
    pub batches: usize,
    /// Generations after equilibration over which Lyapunov estimates and the
    /// Kotani-type check are averaged; 0 uses the equilibrated pool alone.
    #[serde(default = "default_measure_generations")]
    pub measure_generations: usize,
    #[serde(default)]
    pub tail: TailConfig,
    #[serde(default)]
    pub test_hooks: TestHooks,
}

impl ExperimentConfig {
    /// Defaults everywhere except the experiment, `K` and `u`.
    pub fn minimal(experiment: ExperimentKind, branching: usize, u: Vec<f64>) -> Self {
        ExperimentConfig {
            experiment,
            tree: TreeConfig {
                branching,
                depth: 0,
            },
            potential: PotentialConfig {
                u,
                disorder: DisorderSpec::none(),
                lambda: 0.0,
            },
            energy_grid: EnergyGrid::default(),
            eta_schedule: default_etas(),
            lambda_schedule: None,
            pool_size: default_pool_size(),
            seed: 0,
            interval: None,
            alphas: default_alphas(),
            kappa: default_kappa(),
            equilibration: EquilibrationOptions::default(),
            chain_length: default_chain_length(),
            realizations: None,
            width_alpha: default_width_alpha(),
            batches: default_batches(),
            measure_generations: default_measure_generations(),
            tail: TailConfig::default(),
            test_hooks: TestHooks::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        self.potential(0.0)?;
        for &l in &self.lambdas() {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::arg(format!("coupling must be finite and ≥ 0, got {l}")));
            }
        }
        if !(self.potential.lambda >= 0.0 && self.potential.lambda.is_finite()) {
            return Err(Error::arg("coupling must be finite and ≥ 0"));
        }
        for &eta in &self.eta_schedule {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::arg(format!("eta must be finite and > 0, got {eta}")));
            }
        }
        if self.pool_size == 0 {
            return Err(Error::arg("pool_size must be at least 1"));
        }
        for &a in &self.alphas {
            check_alpha(a)?;
        }
        check_alpha(self.width_alpha)?;
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::arg(format!("κ must lie in (0, 1], got {}", self.kappa)));
        }
        if self.energy_grid.points == 0 {
            return Err(Error::arg("energy grid needs at least one point"));
        }
        if let Some((lo, hi)) = self.interval {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::arg(format!("bad interval [{lo}, {hi}]")));
            }
        }
        let (lo, hi) = self.energy_range();
        if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::arg(format!("bad energy range [{lo}, {hi}]")));
        }
        if self.energy_grid.points > 1 && lo == hi {
            return Err(Error::arg("energy range is empty"));
        }
        if !(self.tail.s > 0.0 && self.tail.s < 1.0) {
            return Err(Error::arg("tail.s must lie in (0, 1)"));
        }
        if !(self.tail.t > 0.0) {
            return Err(Error::arg("tail.t must be positive"));
        }
        if self.chain_length == 0 {
            return Err(Error::arg("chain_length must be at least 1"));
        }
        if self.realizations.unwrap_or(self.pool_size) < 2 {
            return Err(Error::arg("at least two radial realisations are needed"));
        }
        if self.batches < 2 {
            return Err(Error::arg("at least two batches are needed"));
        }
        let e = &self.equilibration;
        if e.max_iter == 0 || e.check_every == 0 || !(e.ks_tol > 0.0) {
            return Err(Error::arg("equilibration needs max_iter ≥ 1, check_every ≥ 1, ks_tol > 0"));
        }
        if !(self.test_hooks.bound_scale > 0.0 && self.test_hooks.bound_scale.is_finite()) {
            return Err(Error::arg("bound_scale must be positive"));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<TreeParams> {
        TreeParams::new(self.tree.branching, self.tree.depth, self.potential.u.len().max(1))
    }

    pub fn potential(&self, lambda: f64) -> Result<PotentialSpec> {
        PotentialSpec::new(self.potential.u.clone(), self.potential.disorder.clone(), lambda)
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.lambda_schedule
            .clone()
            .unwrap_or_else(|| vec![self.potential.lambda])
    }

    pub fn smallest_eta(&self) -> Result<f64> {
        self.eta_schedule
            .iter()
            .copied()
            .reduce(f64::min)
            .ok_or_else(|| Error::arg("eta_schedule is empty"))
    }

    pub fn energy_range(&self) -> (f64, f64) {
        let fallback = self
            .interval
            .unwrap_or_else(|| spectral_window(&self.potential.u, self.tree.branching));
        (
            self.energy_grid.min.unwrap_or(fallback.0),
            self.energy_grid.max.unwrap_or(fallback.1),
        )
    }

    pub fn energies(&self) -> Vec<f64> {
        let (lo, hi) = self.energy_range();
        uniform_grid(lo, hi, self.energy_grid.points)
    }

    fn realizations(&self) -> usize {
        self.realizations.unwrap_or(self.pool_size)
    }
}

fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n)
            .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// One point of an output curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRecord {
    pub abscissa: f64,
    pub value: f64,
    pub std_error: f64,
    pub metadata: BTreeMap<String, String>,
}

impl CurveRecord {
    pub fn new(abscissa: f64, value: f64, std_error: f64) -> Self {
        CurveRecord {
            abscissa,
            value,
            std_error,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutput {
    pub experiment: ExperimentKind,
    /// Named curves, written one CSV per entry.
    pub curves: BTreeMap<String, Vec<CurveRecord>>,
    pub reports: Vec<CheckReport>,
    pub bands: Option<BandSet>,
    /// Non-fatal diagnostics such as unconverged pools.
    pub warnings: Vec<String>,
}

impl ExperimentOutput {
    fn new(experiment: ExperimentKind) -> Self {
        ExperimentOutput {
            experiment,
            curves: BTreeMap::new(),
            reports: Vec::new(),
            bands: None,
            warnings: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }

    pub fn curve(&self, name: &str) -> &[CurveRecord] {
        self.curves.get(name).map(Vec::as_slice).unwrap_or(&[])
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_with(Execution::default(), cfg)
}

pub fn run_with(exec: Execution, cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::Dos => run_dos_report(exec, cfg),
        ExperimentKind::Continuity => run_continuity_experiment(exec, cfg),
        ExperimentKind::CauchyOracle => run_cauchy_oracle(exec, cfg),
        ExperimentKind::RadialContrast => run_radial_contrast(exec, cfg),
        ExperimentKind::Fluctuation => run_fluctuation_suite(exec, cfg),
    }
}

fn cell_seed(cfg: &ExperimentConfig, cell: usize) -> u64 {
    StreamKey::new(cfg.seed)
        .with(domain::EXPERIMENT)
        .with(cfg.experiment.tag())
        .with(cell as u64)
        .raw()
}

/// Pools equilibrated at `(E, η)` from the λ = 0 fixed point.
fn equilibrated(
    cfg: &ExperimentConfig,
    params: &TreeParams,
    pot: &PotentialSpec,
    energy: f64,
    eta: f64,
    seed: u64,
) -> Result<(PhasedPools, EquilibrationDiagnostics)> {
    let point = EvaluationPoint::new(energy, eta, 1)?;
    let start = PhasedPools::unperturbed_start(cfg.pool_size, params, pot, point)?;
    population_equilibrate(start, params, pot, seed, &cfg.equilibration)
}

/// Runs `cfg.measure_generations` further steps and averages the Lyapunov
/// estimate over them, calling `visit` on every measured generation. The
/// error is a batch-means error over generations, since pool members share
/// ancestors. Returns the last generation.
fn measured<F>(
    cfg: &ExperimentConfig,
    params: &TreeParams,
    pot: &PotentialSpec,
    mut pools: PhasedPools,
    seed: u64,
    mut visit: F,
) -> Result<(PhasedPools, LyapunovEstimate)>
where
    F: FnMut(&PhasedPools, &LyapunovEstimate) -> Result<()>,
{
    let k = params.branching();
    let m = cfg.measure_generations;
    if m == 0 {
        let est = lyapunov_estimate(&pools, k)?;
        visit(&pools, &est)?;
        return Ok((pools, est));
    }
    let mut gammas = Vec::with_capacity(m);
    let mut w = Complex64::new(0.0, 0.0);
    let mut last = None;
    for _ in 0..m {
        pools = pools.step(params, pot, seed)?;
        let est = lyapunov_estimate(&pools, k)?;
        visit(&pools, &est)?;
        gammas.push(est.gamma_mean);
        w += est.w_mean;
        last = Some(est);
    }
    let last = last.expect("at least one generation");
    let mean = gammas.iter().sum::<f64>() / m as f64;
    let b = cfg.batches.min(m);
    let std_error = if b < 2 {
        last.std_error
    } else {
        let size = m / b;
        let batch_means: Vec<f64> = gammas
            .chunks_exact(size)
            .take(b)
            .map(|c| c.iter().sum::<f64>() / size as f64)
            .collect();
        mean_and_se(&batch_means).1
    };
    let est = LyapunovEstimate {
        gamma_mean: mean,
        std_error,
        w_mean: w / m as f64,
        sample_count: last.sample_count * m,
    };
    Ok((pools, est))
}

fn annotate(rec: CurveRecord, diag: &EquilibrationDiagnostics) -> CurveRecord {
    rec.with("generations", diag.generations)
        .with("ks_distance", diag.ks_distance)
        .with("converged", diag.converged)
}

fn warn_unconverged(out: &mut ExperimentOutput, what: String, diag: &EquilibrationDiagnostics) {
    if diag.convergence_warning() {
        out.warnings.push(format!(
            "{what}: pool not converged after {} generations (KS {})",
            diag.generations, diag.ks_distance
        ));
    }
}

fn scan_bands(cfg: &ExperimentConfig) -> Result<BandSet> {
    let (lo, hi) = spectral_window(&cfg.potential.u, cfg.tree.branching);
    Ok(ac_bands(&cfg.potential.u, cfg.tree.branching, lo, hi, BAND_SCAN_GRID)?.bands)
}

fn has_disorder(pot: &PotentialSpec) -> bool {
    pot.coupling != 0.0
        && !matches!(
            (&pot.disorder.distribution, &pot.disorder.correlation),
            (Distribution::Constant { .. }, Correlation::Iid | Correlation::Radial)
        )
}

/// `E ↦ π^{-1} Im Γ₀(E)` at the root (phase 1), one curve per coupling.
/// Without disorder the λ = 0 cocycle fixed point at `η = 0` is used;
/// otherwise equilibrated pools at the smallest scheduled `η`.
pub fn run_dos_report(exec: Execution, cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let params = cfg.params()?;
    let bands = scan_bands(cfg)?;
    let energies = cfg.energies();
    let mut out = ExperimentOutput::new(ExperimentKind::Dos);
    let u = &cfg.potential.u;
    let k = cfg.tree.branching;
    for (li, &lambda) in cfg.lambdas().iter().enumerate() {
        let pot = cfg.potential(lambda)?;
        let mut curve = Vec::with_capacity(energies.len());
        if !has_disorder(&pot) {
            for &e in &energies {
                let orbit = match fixed_point_orbit(u, e, k) {
                    Ok(o) => o,
                    Err(Error::DegenerateMap) => None,
                    Err(err) => return Err(err),
                };
                let value = orbit.map_or(0.0, |o| o[0].im / PI);
                curve.push(
                    CurveRecord::new(e, value, 0.0)
                        .with("in_band", bands.contains(e))
                        .with("lambda", lambda)
                        .with("eta", 0.0)
                        .with("method", "cocycle"),
                );
            }
        } else {
            let eta = cfg.smallest_eta()?;
            let cells = par::map_indexed(exec, energies.len(), |i| {
                let seed = cell_seed(cfg, li * energies.len() + i);
                let (pools, diag) = equilibrated(cfg, &params, &pot, energies[i], eta, seed)?;
                let im: Vec<f64> = pools.phase(1).samples.iter().map(|g| g.im / PI).collect();
                let (m, se) = mean_and_se(&im);
                Ok::<_, Error>((m, se, diag))
            });
            for (&e, cell) in energies.iter().zip(cells) {
                let (m, se, diag) = cell?;
                warn_unconverged(&mut out, format!("dos λ={lambda} E={e}"), &diag);
                curve.push(annotate(
                    CurveRecord::new(e, m, se)
                        .with("in_band", bands.contains(e))
                        .with("lambda", lambda)
                        .with("eta", eta)
                        .with("method", "population"),
                    &diag,
                ));
            }
        }
        out.curves.insert(format!("dos_lambda_{lambda}"), curve);
    }
    out.bands = Some(bands);
    Ok(out)
}

/// Trapezoid weights on a uniform grid.
fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut w = vec![0.0; n];
    for i in 1..n {
        let h = xs[i] - xs[i - 1];
        w[i - 1] += 0.5 * h;
        w[i] += 0.5 * h;
    }
    w
}

/// Quadrature interval for the continuity experiment: `I` must sit in one
/// band; a side within one grid cell of a band edge is pulled in by a cell.
fn continuity_interval(cfg: &ExperimentConfig, bands: &BandSet) -> Result<(f64, f64)> {
    let (lo, hi) = cfg
        .interval
        .ok_or_else(|| Error::arg("the continuity experiment needs an interval"))?;
    const EDGE_SLACK: f64 = 1e-9;
    let band = bands
        .intervals
        .iter()
        .find(|&&(a, b)| a - EDGE_SLACK <= lo && hi <= b + EDGE_SLACK)
        .ok_or(Error::BandViolation { lo, hi })?;
    let points = cfg.energy_grid.points.max(2);
    let h = (hi - lo) / (points - 1) as f64;
    let lo = if lo - band.0 < h { lo + h } else { lo };
    let hi = if band.1 - hi < h { hi - h } else { hi };
    if !(lo < hi) {
        return Err(Error::BandViolation { lo, hi });
    }
    Ok((lo, hi))
}

/// `L1(λ) = ∫_I E|Im Γ_λ(E+iη) − Im Γ₀(E+iη)| dE` at the smallest scheduled
/// `η`, averaged over phases, with Monte Carlo errors combined over the grid.
pub fn run_continuity_experiment(exec: Execution, cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let params = cfg.params()?;
    let bands = scan_bands(cfg)?;
    let (lo, hi) = continuity_interval(cfg, &bands)?;
    let energies = uniform_grid(lo, hi, cfg.energy_grid.points.max(2));
    let weights = trapezoid_weights(&energies);
    let eta = cfg.smallest_eta()?;
    let lambdas = cfg.lambdas();
    let u = &cfg.potential.u;
    let k = cfg.tree.branching;
    let mut out = ExperimentOutput::new(ExperimentKind::Continuity);

    let n_e = energies.len();
    let cells = par::map_indexed(exec, lambdas.len() * n_e, |cell| {
        let (li, i) = (cell / n_e, cell % n_e);
        let lambda = lambdas[li];
        if lambda == 0.0 {
            return Ok(None);
        }
        let pot = cfg.potential(lambda)?;
        let (pools, diag) = equilibrated(cfg, &params, &pot, energies[i], eta, cell_seed(cfg, cell))?;
        let mut diffs = Vec::with_capacity(pools.total_len());
        for pool in pools.pools() {
            let g0 = periodic_resolvent(u, k, pool.point.z(), pool.point.phase)?;
            diffs.extend(pool.samples.iter().map(|g| (g.im - g0.im).abs()));
        }
        let (m, se) = mean_and_se(&diffs);
        Ok(Some((m, se, diag)))
    });
    let cells = cells.into_iter().collect::<Result<Vec<_>>>()?;

    let mut curve = Vec::with_capacity(lambdas.len());
    for (li, &lambda) in lambdas.iter().enumerate() {
        let mut l1 = 0.0;
        let mut var = 0.0;
        let mut converged = true;
        for (i, w) in weights.iter().enumerate() {
            if let Some((m, se, diag)) = &cells[li * n_e + i] {
                l1 += w * m;
                var += (w * se).powi(2);
                converged &= diag.converged;
                warn_unconverged(&mut out, format!("continuity λ={lambda} E={}", energies[i]), diag);
            }
        }
        curve.push(
            CurveRecord::new(lambda, l1, var.sqrt())
                .with("eta", eta)
                .with("interval_lo", lo)
                .with("interval_hi", hi)
                .with("grid_points", n_e)
                .with("pool_size", cfg.pool_size)
                .with("converged", converged)
                .with("boundary_value", "fixed small eta"),
        );
    }

    let mut order: Vec<usize> = (0..curve.len()).collect();
    order.sort_by(|&a, &b| curve[b].abscissa.total_cmp(&curve[a].abscissa));
    for r in &curve {
        if r.abscissa == 0.0 {
            out.reports.push(CheckReport::new("continuity_zero", r.value.abs(), 0.0, 0.0, 0));
        }
    }
    for pair in order.windows(2) {
        let (a, b) = (&curve[pair[0]], &curve[pair[1]]);
        if a.abscissa == b.abscissa {
            continue;
        }
        let combined = a.std_error.hypot(b.std_error);
        let mut r = CheckReport::new("continuity_decrease", 2.0 * combined, a.value - b.value, 0.0, cfg.pool_size);
        r.lambda = Some(b.abscissa);
        out.reports.push(r);
    }
    out.curves.insert("l1_continuity".into(), curve);
    out.bands = Some(bands);
    Ok(out)
}

/// `γ = −mean_θ log(√K |Γ₀(0, E + i(η + λσ), θ)|)`: the Lyapunov exponent of
/// Cauchy disorder of scale `σ` in closed form.
pub fn cauchy_closed_form(
    u: &[f64],
    branching: usize,
    energy: f64,
    eta: f64,
    lambda: f64,
    sigma: f64,
) -> Result<f64> {
    let z = Complex64::new(energy, eta + lambda * sigma);
    let sk = (branching as f64).sqrt();
    let mut acc = 0.0;
    for phase in 1..=u.len() {
        acc += (sk * periodic_resolvent(u, branching, z, phase)?.norm()).ln();
    }
    Ok(-acc / u.len() as f64)
}

fn cauchy_scale(d: &DisorderSpec) -> Result<f64> {
    match (&d.distribution, &d.correlation) {
        (Distribution::Cauchy { scale }, Correlation::Iid) => Ok(*scale),
        _ => Err(Error::arg("the Cauchy oracle needs iid Cauchy disorder")),
    }
}

/// Population-dynamics Lyapunov estimates against [`cauchy_closed_form`];
/// passes when `|difference| ≤ 3·std_error` at 95% or more of the grid.
pub fn run_cauchy_oracle(exec: Execution, cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let sigma = cauchy_scale(&cfg.potential.disorder)?;
    let params = cfg.params()?;
    let eta = cfg.smallest_eta()?;
    let energies = cfg.energies();
    let lambdas = cfg.lambdas();
    let (u, k) = (&cfg.potential.u, cfg.tree.branching);
    if lambdas.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::arg("the Cauchy oracle needs λ > 0"));
    }
    let mut out = ExperimentOutput::new(ExperimentKind::CauchyOracle);
    let n_e = energies.len();
    let cells = par::map_indexed(exec, lambdas.len() * n_e, |cell| {
        let (li, i) = (cell / n_e, cell % n_e);
        let pot = cfg.potential(lambdas[li])?;
        let seed = cell_seed(cfg, cell);
        let (pools, diag) = equilibrated(cfg, &params, &pot, energies[i], eta, seed)?;
        let (_, est) = measured(cfg, &params, &pot, pools, seed, |_, _| Ok(()))?;
        let exact = cauchy_closed_form(u, k, energies[i], eta, lambdas[li], sigma)?;
        Ok((est, exact, diag))
    });
    let cells = cells.into_iter().collect::<Result<Vec<_>>>()?;
    for (li, &lambda) in lambdas.iter().enumerate() {
        let mut mc = Vec::with_capacity(n_e);
        let mut closed = Vec::with_capacity(n_e);
        let mut within = 0usize;
        for (i, &e) in energies.iter().enumerate() {
            let (est, exact, diag) = &cells[li * n_e + i];
            let diff = est.gamma_mean - exact;
            let ok = diff.abs() <= 3.0 * est.std_error;
            within += usize::from(ok);
            warn_unconverged(&mut out, format!("cauchy λ={lambda} E={e}"), diag);
            mc.push(annotate(
                CurveRecord::new(e, est.gamma_mean, est.std_error)
                    .with("lambda", lambda)
                    .with("eta", eta)
                    .with("closed_form", exact)
                    .with("within_3se", ok),
                diag,
            ));
            closed.push(CurveRecord::new(e, *exact, 0.0).with("lambda", lambda).with("eta", eta));
        }
        let fraction = if n_e == 0 { 1.0 } else { within as f64 / n_e as f64 };
        let mut r = CheckReport::new("cauchy_oracle_coverage", 0.95, fraction, 0.0, n_e);
        r.lambda = Some(lambda);
        r.eta = Some(eta);
        out.reports.push(r);
        out.curves.insert(format!("lyapunov_mc_lambda_{lambda}"), mc);
        out.curves.insert(format!("lyapunov_closed_form_lambda_{lambda}"), closed);
    }
    Ok(out)
}

/// `δ(values, α)` with a batch-means standard error over `batches`
/// contiguous blocks.
pub fn width_with_error(values: &[f64], alpha: f64, batches: usize) -> Result<(f64, f64)> {
    let delta = width_of(values, alpha)?.delta;
    let b = batches.min(values.len()).max(1);
    let size = values.len() / b;
    if b < 2 || size == 0 {
        return Ok((delta, f64::NAN));
    }
    let per_batch = (0..b)
        .map(|j| Ok(width_of(&values[j * size..(j + 1) * size], alpha)?.delta))
        .collect::<Result<Vec<_>>>()?;
    let (_, se_batch_mean) = mean_and_se(&per_batch);
    // the full-sample width has about 1/√b of one batch's spread
    Ok((delta, se_batch_mean))
}

/// Same law and coupling, two correlation structures: iid sites through
/// pools, radial sites through scalar chains. Reports Lyapunov agreement and
/// the separation of `δ(Im Γ, width_alpha)` between the modes.
pub fn run_radial_contrast(exec: Execution, cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let params = cfg.params()?;
    let eta = cfg.smallest_eta()?;
    let energy = cfg.energy_range().0;
    let (k, tau) = (cfg.tree.branching, cfg.potential.u.len());
    let law = cfg.potential.disorder.distribution.clone();
    let realizations = cfg.realizations();
    let mut out = ExperimentOutput::new(ExperimentKind::RadialContrast);
    let mut lyap = Vec::new();
    let mut widths = Vec::new();

    for (li, &lambda) in cfg.lambdas().iter().enumerate() {
        let base = cfg.potential(lambda)?;
        let iid_pot = PotentialSpec::new(base.periodic_values.clone(), DisorderSpec::iid(law.clone()), lambda)?;
        let radial_pot = PotentialSpec::new(base.periodic_values.clone(), DisorderSpec::radial(law.clone()), lambda)?;

        let cell = 2 * li;
        let seed = cell_seed(cfg, cell);
        let (pools, diag) = equilibrated(cfg, &params, &iid_pot, energy, eta, seed)?;
        warn_unconverged(&mut out, format!("radial contrast iid λ={lambda}"), &diag);
        let (pools, iid_gamma) = measured(cfg, &params, &iid_pot, pools, seed, |_, _| Ok(()))?;
        let iid_im: Vec<f64> = pools.phase(1).samples.iter().map(|g| g.im).collect();
        let (iid_delta, iid_delta_se) = width_with_error(&iid_im, cfg.width_alpha, cfg.batches)?;

        let chain_base = StreamKey::new(cell_seed(cfg, cell + 1)).with(domain::CHAIN);
        let chains = par::map_indexed(exec, tau * realizations, |j| {
            let (phase, r) = (j / realizations + 1, j % realizations);
            let point = EvaluationPoint::new(energy, eta, phase)?;
            let seed = chain_base.with(r as u64).raw();
            radial_disordered_chain(k, &radial_pot, &point, cfg.chain_length, seed)
        });
        let chains = chains.into_iter().collect::<Result<Vec<_>>>()?;
        let radial_gamma = lyapunov_from_samples(&chains, k)?;
        let radial_im: Vec<f64> = chains[..realizations].iter().map(|g| g.im).collect();
        let (radial_delta, radial_delta_se) = width_with_error(&radial_im, cfg.width_alpha, cfg.batches)?;

        let meta = |rec: CurveRecord, mode: &str| {
            rec.with("mode", mode).with("energy", energy).with("eta", eta)
        };
        lyap.push(annotate(
            meta(CurveRecord::new(lambda, iid_gamma.gamma_mean, iid_gamma.std_error), "iid"),
            &diag,
        ));
        lyap.push(
            meta(CurveRecord::new(lambda, radial_gamma.gamma_mean, radial_gamma.std_error), "radial")
                .with("chain_length", cfg.chain_length)
                .with("realizations", realizations),
        );
        widths.push(meta(CurveRecord::new(lambda, iid_delta, iid_delta_se), "iid").with("alpha", cfg.width_alpha));
        widths.push(
            meta(CurveRecord::new(lambda, radial_delta, radial_delta_se), "radial").with("alpha", cfg.width_alpha),
        );

        if lambda > 0.0 {
            let se = iid_gamma.std_error.hypot(radial_gamma.std_error);
            let diff = (iid_gamma.gamma_mean - radial_gamma.gamma_mean).abs();
            let r = CheckReport::new("radial_lyapunov_agreement", diff, 3.0 * se, 0.0, realizations);
            out.reports.push(r.at(energy, eta, lambda));
            let se = iid_delta_se.hypot(radial_delta_se);
            let r = CheckReport::new(
                "radial_width_separation",
                2.0 * se,
                radial_delta - iid_delta,
                0.0,
                realizations,
            )
            .with_alpha(cfg.width_alpha);
            out.reports.push(r.at(energy, eta, lambda));
        }
    }
    out.curves.insert("lyapunov".into(), lyap);
    out.curves.insert("width".into(), widths);
    Ok(out)
}

/// Fluctuation, Kotani-type and tail bounds over the `(λ, η, E)` schedule.
pub fn run_fluctuation_suite(exec: Execution, cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let params = cfg.params()?;
    let kappa = match cfg.potential.disorder.kappa() {
        Kappa::Certified { value } => cfg.kappa.min(value),
        _ => {
            return Err(Error::arg(
                "the fluctuation suite needs weakly correlated disorder with a certified κ",
            ))
        }
    };
    let k = cfg.tree.branching;
    let lambdas = cfg.lambdas();
    let etas = cfg.eta_schedule.clone();
    let mut energies = cfg.energies();
    energies.sort_by(f64::total_cmp);
    let mut out = ExperimentOutput::new(ExperimentKind::Fluctuation);
    let (n_l, n_h, n_e) = (lambdas.len(), etas.len(), energies.len());
    let scale = cfg.test_hooks.bound_scale;

    let cells = par::map_indexed(exec, n_l * n_h * n_e, |cell| {
        let (li, hi, ei) = (cell / (n_h * n_e), (cell / n_e) % n_h, cell % n_e);
        let (lambda, eta, energy) = (lambdas[li], etas[hi], energies[ei]);
        let pot = cfg.potential(lambda)?;
        let seed = cell_seed(cfg, cell);
        let (pools, diag) = equilibrated(cfg, &params, &pot, energy, eta, seed)?;
        let (mut lhs, mut rhs, mut count) = (0.0, 0.0, 0usize);
        let (pools, gamma) = measured(cfg, &params, &pot, pools, seed, |p, est| {
            let r = kotani_bound_check(p, est.gamma_mean, k)?;
            lhs += r.lhs;
            rhs += r.rhs;
            count += 1;
            Ok(())
        })?;
        let mut reports = Vec::new();
        for &alpha in &cfg.alphas {
            reports.extend(fluctuation_bound_check(&pools, alpha, kappa, gamma.gamma_mean, k)?);
        }
        let c = count as f64;
        reports.push(CheckReport::new("kotani", lhs / c, rhs / c, 0.0, gamma.sample_count));
        let reports: Vec<CheckReport> = reports
            .into_iter()
            .map(|r| r.at(energy, eta, lambda).scaled_rhs(scale, 0.0))
            .collect();
        let samples: Vec<Complex64> = pools.all_samples().copied().collect();
        Ok((reports, samples, gamma, diag))
    });
    let cells = cells.into_iter().collect::<Result<Vec<_>>>()?;

    let mut curve = Vec::with_capacity(cells.len());
    for (cell, (reports, _, gamma, diag)) in cells.iter().enumerate() {
        let (li, hi, ei) = (cell / (n_h * n_e), (cell / n_e) % n_h, cell % n_e);
        warn_unconverged(
            &mut out,
            format!("fluctuation λ={} η={} E={}", lambdas[li], etas[hi], energies[ei]),
            diag,
        );
        out.reports.extend(reports.iter().cloned());
        curve.push(annotate(
            CurveRecord::new(energies[ei], gamma.gamma_mean, gamma.std_error)
                .with("lambda", lambdas[li])
                .with("eta", etas[hi]),
            diag,
        ));
    }
    if n_e >= 2 {
        for li in 0..n_l {
            for hi in 0..n_h {
                let grid: Vec<(f64, &[Complex64])> = (0..n_e)
                    .map(|ei| (energies[ei], cells[(li * n_h + hi) * n_e + ei].1.as_slice()))
                    .collect();
                let mut r = tail_budget_check(&grid, cfg.tail.s, cfg.tail.t)?.scaled_rhs(scale, 0.0);
                r.eta = Some(etas[hi]);
                r.lambda = Some(lambdas[li]);
                out.reports.push(r);
            }
        }
    }
    out.curves.insert("lyapunov".into(), curve);
    Ok(out)
}
