//! Tree geometry, radially periodic background and disorder samplers.

use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{domain, Stream, StreamKey};
use crate::{Complex64, Error, Result};

/// Largest truncated tree (in vertices) accepted for exact computations.
pub const MAX_EXACT_VERTICES: u64 = 10_000_000;

/// Branching number `K`, truncation depth `D` and period `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    branching: usize,
    depth: usize,
    period: usize,
}

impl TreeParams {
    pub fn new(branching: usize, depth: usize, period: usize) -> Result<Self> {
        if branching < 2 {
            return Err(Error::arg(format!("K ≥ 2 required, got K = {branching}")));
        }
        if period < 1 {
            return Err(Error::arg("period must be at least 1"));
        }
        let params = TreeParams {
            branching,
            depth,
            period,
        };
        let vertices = params.vertex_count();
        if vertices > MAX_EXACT_VERTICES as u128 {
            return Err(Error::Budget {
                vertices,
                limit: MAX_EXACT_VERTICES,
            });
        }
        Ok(params)
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn period(&self) -> usize {
        self.period
    }

    /// `(K^{D+1} - 1)/(K - 1)`, saturating far above the budget.
    pub fn vertex_count(&self) -> u128 {
        let k = self.branching as u128;
        let mut total: u128 = 0;
        let mut level: u128 = 1;
        for _ in 0..=self.depth {
            total = total.saturating_add(level);
            level = level.saturating_mul(k);
            if total > u64::MAX as u128 {
                break;
            }
        }
        total
    }

    /// Number of vertices at distance `depth` from the root.
    pub fn level_size(&self, depth: usize) -> usize {
        self.branching.pow(depth as u32)
    }
}

/// Canonical vertex id: depth `|x|` plus the position among the `K^{|x|}`
/// vertices of that level. The base-`K` digits of `index` (most significant
/// first) are the child indices along the path from the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId {
    pub depth: usize,
    pub index: usize,
}

impl VertexId {
    pub const ROOT: VertexId = VertexId { depth: 0, index: 0 };

    pub fn from_path(path: &[usize], branching: usize) -> Self {
        let index = path.iter().fold(0usize, |acc, &c| {
            debug_assert!(c < branching);
            acc * branching + c
        });
        VertexId {
            depth: path.len(),
            index,
        }
    }

    /// Child indices from the root down to this vertex.
    pub fn path(&self, branching: usize) -> Vec<usize> {
        let mut digits = vec![0; self.depth];
        let mut rest = self.index;
        for slot in digits.iter_mut().rev() {
            *slot = rest % branching;
            rest /= branching;
        }
        digits
    }

    pub fn child(&self, branching: usize, c: usize) -> VertexId {
        VertexId {
            depth: self.depth + 1,
            index: self.index * branching + c,
        }
    }

    pub fn parent(&self, branching: usize) -> Option<VertexId> {
        (self.depth > 0).then(|| VertexId {
            depth: self.depth - 1,
            index: self.index / branching,
        })
    }

    /// Vertices on the path root → self, both ends included.
    pub fn ancestry(&self, branching: usize) -> Vec<VertexId> {
        let mut out = Vec::with_capacity(self.depth + 1);
        let mut v = Some(*self);
        while let Some(x) = v {
            out.push(x);
            v = x.parent(branching);
        }
        out.reverse();
        out
    }

    /// Stable text form: child indices joined by `.`; the root is `r`.
    pub fn label(&self, branching: usize) -> String {
        if self.depth == 0 {
            return "r".to_string();
        }
        self.path(branching)
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(".")
    }
}

/// Where a disorder value lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteId {
    Vertex(VertexId),
    /// Slot of a population-dynamics pool. In radial mode a generation plays
    /// the role of a depth.
    PoolSlot {
        generation: u64,
        phase: usize,
        slot: usize,
    },
}

/// Single-site law of `ω_x`. Every family here has `E log(1+|V|) < ∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    Uniform { a: f64, b: f64 },
    Cauchy { scale: f64 },
    Gaussian { mean: f64, sd: f64 },
    /// `+1` with probability `p`, `-1` otherwise.
    Bernoulli { p: f64 },
    Constant { value: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Distribution::Uniform { a, b } => a.is_finite() && b.is_finite() && a < b,
            Distribution::Cauchy { scale } => scale.is_finite() && scale > 0.0,
            Distribution::Gaussian { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            Distribution::Bernoulli { p } => (0.0..=1.0).contains(&p),
            Distribution::Constant { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::arg(format!("invalid distribution parameters: {self:?}")))
        }
    }

    pub fn sample(&self, rng: &mut Stream) -> f64 {
        match *self {
            Distribution::Uniform { a, b } => a + (b - a) * rng.open01(),
            // inverse CDF
            Distribution::Cauchy { scale } => {
                scale * (std::f64::consts::PI * (rng.open01() - 0.5)).tan()
            }
            Distribution::Gaussian { mean, sd } => {
                let g: f64 = StandardNormal.sample(rng);
                mean + sd * g
            }
            Distribution::Bernoulli { p } => {
                if rng.open01() < p {
                    1.0
                } else {
                    -1.0
                }
            }
            Distribution::Constant { value } => value,
        }
    }

    /// Mean and variance where they exist. `None` for Cauchy.
    pub fn moments(&self) -> Option<(f64, f64)> {
        match *self {
            Distribution::Uniform { a, b } => Some(((a + b) / 2.0, (b - a).powi(2) / 12.0)),
            Distribution::Cauchy { .. } => None,
            Distribution::Gaussian { mean, sd } => Some((mean, sd * sd)),
            Distribution::Bernoulli { p } => Some((2.0 * p - 1.0, 4.0 * p * (1.0 - p))),
            Distribution::Constant { value } => Some((value, 0.0)),
        }
    }

    /// All supported families are log-integrable; checked per family.
    pub fn is_log_integrable(&self) -> bool {
        match self {
            // bounded support
            Distribution::Uniform { .. }
            | Distribution::Bernoulli { .. }
            | Distribution::Constant { .. } => true,
            // Gaussian tails; Cauchy density ~ v^-2 makes log(1+|v|) integrable
            Distribution::Gaussian { .. } | Distribution::Cauchy { .. } => true,
        }
    }

    pub fn is_cauchy(&self) -> bool {
        matches!(self, Distribution::Cauchy { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub distribution: Distribution,
}

/// Correlation structure of `{ω_x}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Correlation {
    Iid,
    /// `V_x = ω_{|x|}`: identical values on every sphere.
    Radial,
    /// One component is drawn per realisation (per seed); sites are then iid
    /// from it. The top-level distribution is ignored in this mode.
    MixtureOfIid { components: Vec<MixtureComponent> },
}

/// Status of the weak-correlation constant κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Kappa {
    Certified { value: f64 },
    /// User-declared only; no verification procedure exists for this sampler.
    Uncertified,
    /// Branches are perfectly correlated; the weak-correlation assumption fails.
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSpec {
    pub distribution: Distribution,
    #[serde(default = "DisorderSpec::default_correlation")]
    pub correlation: Correlation,
}

impl DisorderSpec {
    fn default_correlation() -> Correlation {
        Correlation::Iid
    }

    pub fn iid(distribution: Distribution) -> Self {
        DisorderSpec {
            distribution,
            correlation: Correlation::Iid,
        }
    }

    pub fn radial(distribution: Distribution) -> Self {
        DisorderSpec {
            distribution,
            correlation: Correlation::Radial,
        }
    }

    pub fn none() -> Self {
        DisorderSpec::iid(Distribution::Constant { value: 0.0 })
    }

    pub fn validate(&self) -> Result<()> {
        self.distribution.validate()?;
        if let Correlation::MixtureOfIid { components } = &self.correlation {
            if components.is_empty() {
                return Err(Error::arg("mixture needs at least one component"));
            }
            let mut total = 0.0;
            for c in components {
                c.distribution.validate()?;
                if !(c.weight > 0.0 && c.weight.is_finite()) {
                    return Err(Error::arg("mixture weights must be positive"));
                }
                total += c.weight;
            }
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::arg(format!("mixture weights sum to {total}, not 1")));
            }
        }
        Ok(())
    }

    pub fn kappa(&self) -> Kappa {
        match self.correlation {
            Correlation::Iid => Kappa::Certified { value: 1.0 },
            Correlation::Radial => Kappa::Violated,
            Correlation::MixtureOfIid { .. } => Kappa::Uncertified,
        }
    }

    /// The law actually used for site draws under `seed`.
    fn law_for(&self, seed: u64) -> &Distribution {
        match &self.correlation {
            Correlation::MixtureOfIid { components } => {
                let mut rng = StreamKey::new(seed).with(domain::MIXTURE).stream();
                let u = rng.open01();
                let mut acc = 0.0;
                for c in components {
                    acc += c.weight;
                    if u < acc {
                        return &c.distribution;
                    }
                }
                &components[components.len() - 1].distribution
            }
            _ => &self.distribution,
        }
    }

    pub fn is_cauchy(&self) -> bool {
        match &self.correlation {
            Correlation::MixtureOfIid { components } => {
                components.iter().all(|c| c.distribution.is_cauchy())
            }
            _ => self.distribution.is_cauchy(),
        }
    }
}

/// Background values `u(1..τ)`, disorder and coupling `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub periodic_values: Vec<f64>,
    pub disorder: DisorderSpec,
    pub coupling: f64,
}

impl PotentialSpec {
    pub fn new(periodic_values: Vec<f64>, disorder: DisorderSpec, coupling: f64) -> Result<Self> {
        if periodic_values.is_empty() {
            return Err(Error::arg("background needs at least one value"));
        }
        if periodic_values.iter().any(|u| !u.is_finite()) || !coupling.is_finite() {
            return Err(Error::arg("background values and coupling must be finite"));
        }
        disorder.validate()?;
        Ok(PotentialSpec {
            periodic_values,
            disorder,
            coupling,
        })
    }

    /// Zero background and no disorder.
    pub fn free() -> Self {
        PotentialSpec {
            periodic_values: vec![0.0],
            disorder: DisorderSpec::none(),
            coupling: 0.0,
        }
    }

    pub fn period(&self) -> usize {
        self.periodic_values.len()
    }

    /// `U_x` for a vertex at `depth` when the root carries `phase` (1-based):
    /// `u(((depth + phase - 1) mod τ) + 1)`.
    #[inline]
    pub fn background(&self, phase: usize, depth: usize) -> f64 {
        let tau = self.periodic_values.len();
        self.periodic_values[(depth + phase - 1) % tau]
    }

    pub fn check_params(&self, params: &TreeParams) -> Result<()> {
        if params.period() != self.period() {
            return Err(Error::arg(format!(
                "tree period {} does not match {} background values",
                params.period(),
                self.period()
            )));
        }
        Ok(())
    }
}

/// `U_x + λ·v` at the given depth and root phase.
pub fn potential_at(
    spec: &PotentialSpec,
    params: &TreeParams,
    phase: usize,
    depth_index: usize,
    disorder_value: f64,
) -> f64 {
    debug_assert!(phase >= 1 && phase <= params.period());
    spec.background(phase, depth_index) + spec.coupling * disorder_value
}

/// Draws `ω` at `site`, deterministically in `(seed, site)`.
pub fn sample_disorder(spec: &DisorderSpec, seed: u64, site: SiteId) -> f64 {
    let law = spec.law_for(seed);
    if let Distribution::Constant { value } = *law {
        return value;
    }
    let base = StreamKey::new(seed);
    let key = match (&spec.correlation, site) {
        (Correlation::Radial, SiteId::Vertex(v)) => base.with(domain::RADIAL).with(v.depth as u64),
        (Correlation::Radial, SiteId::PoolSlot { generation, .. }) => {
            base.with(domain::RADIAL).with(generation)
        }
        (_, SiteId::Vertex(v)) => base
            .with(domain::SITE)
            .with(v.depth as u64)
            .with(v.index as u64),
        (
            _,
            SiteId::PoolSlot {
                generation,
                phase,
                slot,
            },
        ) => base
            .with(domain::POOL)
            .with(generation)
            .with(phase as u64)
            .with(slot as u64),
    };
    law.sample(&mut key.stream())
}

/// Spectral parameter `z = E + iη` and the root phase `θ ∈ {1..τ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationPoint {
    pub energy: f64,
    pub eta: f64,
    pub phase: usize,
}

impl EvaluationPoint {
    pub fn new(energy: f64, eta: f64, phase: usize) -> Result<Self> {
        if !energy.is_finite() || !eta.is_finite() || eta < 0.0 {
            return Err(Error::arg(format!("need finite E and eta ≥ 0, got ({energy}, {eta})")));
        }
        if phase < 1 {
            return Err(Error::arg("phase is 1-based"));
        }
        Ok(EvaluationPoint { energy, eta, phase })
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.energy, self.eta)
    }

    /// Recursion-based solvers need `η > 0`.
    pub fn require_positive_eta(&self) -> Result<()> {
        if self.eta > 0.0 {
            Ok(())
        } else {
            Err(Error::arg("recursion requires eta > 0; use the cocycle or extrapolation for eta = 0"))
        }
    }

    pub fn with_phase(self, phase: usize) -> Self {
        EvaluationPoint { phase, ..self }
    }
}
