//! Population dynamics for the distribution of `Γ_0` on the infinite tree.
//!
//! A pool of `N` samples stands for the law of `Γ` at one phase. One step
//! builds every new sample as `(U + λV − z − Σ_{j=1}^K Γ_j)^{-1}` with the
//! `Γ_j` drawn uniformly with replacement from the previous pool and a fresh
//! disorder value. Each slot owns a counter-based stream keyed by
//! `(seed, generation, phase, slot)`, so a generation is a pure function of
//! its predecessor.

use serde::{Deserialize, Serialize};

use super::free_forward_resolvent;
use crate::cocycle::periodic_resolvent;
use crate::model::{
    sample_disorder, Correlation, EvaluationPoint, PotentialSpec, SiteId, TreeParams,
};
use crate::par::{self, Execution};
use crate::rng::{domain, StreamKey};
use crate::stats::ks_distance_tolerant;
use crate::{Complex64, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GammaPool {
    pub samples: Vec<Complex64>,
    pub generation: u64,
    /// `point.phase` is the phase of the vertices the samples describe.
    pub point: EvaluationPoint,
}

impl GammaPool {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> Complex64 {
        self.samples.iter().sum::<Complex64>() / self.samples.len() as f64
    }
}

/// `N` copies of the free forward resolvent at `z` (of `1/(−z)` when the
/// free resolvent does not exist).
pub fn population_init(n: usize, branching: usize, point: EvaluationPoint) -> Result<GammaPool> {
    if n == 0 {
        return Err(Error::arg("pool size must be at least 1"));
    }
    point.require_positive_eta()?;
    let z = point.z();
    let g = free_forward_resolvent(branching, z).unwrap_or_else(|_| (-z).inv());
    Ok(GammaPool {
        samples: vec![g; n],
        generation: 0,
        point,
    })
}

fn previous_phase(phase: usize, tau: usize) -> usize {
    if phase == 1 {
        tau
    } else {
        phase - 1
    }
}

fn check_pool_model(params: &TreeParams, pot: &PotentialSpec) -> Result<()> {
    pot.check_params(params)?;
    if matches!(pot.disorder.correlation, Correlation::Radial) && pot.coupling != 0.0 {
        return Err(Error::arg(
            "radial disorder correlates whole spheres and cannot be represented by a pool; use radial chains",
        ));
    }
    Ok(())
}

/// One generation. Children are read from `pool` (phase `θ`); the returned
/// pool describes their parents, at phase `θ − 1` (cyclically).
pub fn population_step(
    pool: &GammaPool,
    params: &TreeParams,
    pot: &PotentialSpec,
    seed: u64,
) -> Result<GammaPool> {
    population_step_with(Execution::default(), pool, params, pot, seed)
}

pub fn population_step_with(
    exec: Execution,
    pool: &GammaPool,
    params: &TreeParams,
    pot: &PotentialSpec,
    seed: u64,
) -> Result<GammaPool> {
    if pool.is_empty() {
        return Err(Error::arg("empty pool"));
    }
    pool.point.require_positive_eta()?;
    check_pool_model(params, pot)?;
    let tau = params.period();
    let phase = previous_phase(pool.point.phase, tau);
    let generation = pool.generation + 1;
    let u = pot.background(phase, 0);
    let z = pool.point.z();
    let k = params.branching();
    let n = pool.len();
    let prev = &pool.samples;
    let slot_key = StreamKey::new(seed)
        .with(domain::POOL)
        .with(generation)
        .with(phase as u64);
    let disordered = pot.coupling != 0.0;

    let samples = par::map_fine(exec, n, |slot| {
        let mut rng = slot_key.with(slot as u64).stream();
        let mut sum = Complex64::new(0.0, 0.0);
        for _ in 0..k {
            sum += prev[rng.below(n)];
        }
        let v = if disordered {
            pot.coupling
                * sample_disorder(
                    &pot.disorder,
                    seed,
                    SiteId::PoolSlot {
                        generation,
                        phase,
                        slot,
                    },
                )
        } else {
            0.0
        };
        (u + v - z - sum).inv()
    });

    Ok(GammaPool {
        samples,
        generation,
        point: pool.point.with_phase(phase),
    })
}

/// One pool per phase `θ = 1..τ`, advanced together so that the pool for
/// `θ` is always built from the pool for `θ + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasedPools {
    pools: Vec<GammaPool>,
}

impl PhasedPools {
    pub fn new(pools: Vec<GammaPool>) -> Result<Self> {
        if pools.is_empty() {
            return Err(Error::arg("no pools"));
        }
        for (i, p) in pools.iter().enumerate() {
            if p.point.phase != i + 1 {
                return Err(Error::arg("pools must be ordered by phase 1..τ"));
            }
            if p.is_empty() {
                return Err(Error::arg("empty pool"));
            }
        }
        Ok(PhasedPools { pools })
    }

    /// `population_init` at every phase.
    pub fn free_start(n: usize, params: &TreeParams, point: EvaluationPoint) -> Result<Self> {
        let pools = (1..=params.period())
            .map(|phase| population_init(n, params.branching(), point.with_phase(phase)))
            .collect::<Result<Vec<_>>>()?;
        PhasedPools::new(pools)
    }

    /// Copies of the λ = 0 periodic resolvent at each phase; the natural
    /// starting point for weak disorder.
    pub fn unperturbed_start(
        n: usize,
        params: &TreeParams,
        pot: &PotentialSpec,
        point: EvaluationPoint,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::arg("pool size must be at least 1"));
        }
        point.require_positive_eta()?;
        pot.check_params(params)?;
        let pools = (1..=params.period())
            .map(|phase| {
                let g = periodic_resolvent(&pot.periodic_values, params.branching(), point.z(), phase)?;
                Ok(GammaPool {
                    samples: vec![g; n],
                    generation: 0,
                    point: point.with_phase(phase),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PhasedPools::new(pools)
    }

    pub fn pools(&self) -> &[GammaPool] {
        &self.pools
    }

    pub fn phase(&self, phase: usize) -> &GammaPool {
        &self.pools[phase - 1]
    }

    pub fn period(&self) -> usize {
        self.pools.len()
    }

    pub fn point(&self) -> EvaluationPoint {
        self.pools[0].point
    }

    pub fn generation(&self) -> u64 {
        self.pools[0].generation
    }

    pub fn total_len(&self) -> usize {
        self.pools.iter().map(GammaPool::len).sum()
    }

    pub fn all_samples(&self) -> impl Iterator<Item = &Complex64> + '_ {
        self.pools.iter().flat_map(|p| p.samples.iter())
    }

    pub fn step(&self, params: &TreeParams, pot: &PotentialSpec, seed: u64) -> Result<Self> {
        self.step_with(Execution::default(), params, pot, seed)
    }

    pub fn step_with(
        &self,
        exec: Execution,
        params: &TreeParams,
        pot: &PotentialSpec,
        seed: u64,
    ) -> Result<Self> {
        if self.period() != params.period() {
            return Err(Error::arg("pool count does not match the period"));
        }
        let tau = self.period();
        // new θ comes from old θ+1
        let pools = (1..=tau)
            .map(|phase| {
                let source = if phase == tau { 1 } else { phase + 1 };
                population_step_with(exec, self.phase(source), params, pot, seed)
            })
            .collect::<Result<Vec<_>>>()?;
        PhasedPools::new(pools)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibrationOptions {
    pub max_iter: usize,
    /// Generations always run before convergence is tested.
    pub min_iter: usize,
    pub ks_tol: f64,
    /// Convergence is tested on every `check_every`-th generation only.
    pub check_every: usize,
}

impl Default for EquilibrationOptions {
    fn default() -> Self {
        EquilibrationOptions {
            max_iter: 2000,
            min_iter: 50,
            ks_tol: 0.01,
            check_every: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibrationDiagnostics {
    pub generations: usize,
    pub ks_distance: f64,
    pub converged: bool,
}

impl EquilibrationDiagnostics {
    /// Non-fatal: `max_iter` was reached with the KS distance above tolerance.
    pub fn convergence_warning(&self) -> bool {
        !self.converged
    }
}

/// KS distance of `|Γ|` marginals, ignoring differences below `10⁻¹²`
/// relative to the largest modulus.
fn modulus_ks(a: &[Complex64], b: &[Complex64]) -> f64 {
    let ma: Vec<f64> = a.iter().map(|g| g.norm()).collect();
    let mb: Vec<f64> = b.iter().map(|g| g.norm()).collect();
    let scale = ma.iter().chain(&mb).fold(0.0f64, |m, x| m.max(*x));
    ks_distance_tolerant(&ma, &mb, 1e-12 * scale)
}

/// Iterates [`PhasedPools::step`] until the two-sample KS distance between
/// successive `|Γ|` marginals (worst phase) drops below `ks_tol`.
pub fn population_equilibrate(
    pools: PhasedPools,
    params: &TreeParams,
    pot: &PotentialSpec,
    seed: u64,
    opts: &EquilibrationOptions,
) -> Result<(PhasedPools, EquilibrationDiagnostics)> {
    if opts.max_iter == 0 {
        return Err(Error::arg("max_iter must be at least 1"));
    }
    if !(opts.ks_tol > 0.0) {
        return Err(Error::arg("ks_tol must be positive"));
    }
    if opts.check_every == 0 {
        return Err(Error::arg("check_every must be at least 1"));
    }
    let mut current = pools;
    let mut ks = f64::INFINITY;
    for generation in 1..=opts.max_iter {
        let next = current.step(params, pot, seed)?;
        let due = generation % opts.check_every == 0 || generation == opts.max_iter;
        if generation >= opts.min_iter.min(opts.max_iter) && due {
            ks = current
                .pools()
                .iter()
                .zip(next.pools())
                .map(|(a, b)| modulus_ks(&a.samples, &b.samples))
                .fold(0.0, f64::max);
        }
        current = next;
        if ks < opts.ks_tol {
            return Ok((
                current,
                EquilibrationDiagnostics {
                    generations: generation,
                    ks_distance: ks,
                    converged: true,
                },
            ));
        }
    }
    Ok((
        current,
        EquilibrationDiagnostics {
            generations: opts.max_iter,
            ks_distance: ks,
            converged: false,
        },
    ))
}
