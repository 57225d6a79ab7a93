//! The periodic Schrödinger cocycle `Γ(θ) = 1/(u(θ) − E − K·Γ(θ+1))`.
//!
//! Over one period the cocycle closes into a fixed-point problem for the
//! composed Möbius map `S(E,θ) = T(E,θ) ∘ T(E,θ+1) ∘ … ∘ T(E,θ+τ−1)`. Its
//! discriminant `ρ(E) = tr² − 4·det` is negative exactly on the interior of
//! the ac bands, where the two fixed points are complex conjugates.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::par::{self, Execution};
use crate::{Complex64, Error, Result};

/// Bisection stops once the bracket is this narrow.
pub const ROOT_TOLERANCE: f64 = 1e-12;
/// `|ρ|` below this counts as a band edge.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

/// `Γ ↦ (aΓ + b)/(cΓ + d)`, stored as the matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mobius<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

/// Real Möbius map.
pub type MobiusMap = Mobius<f64>;

impl<T> Mobius<T>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<Output = T> + std::ops::Div<Output = T>,
{
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Mobius { a, b, c, d }
    }

    /// `self ∘ inner`, i.e. the matrix product `self · inner`.
    pub fn compose(&self, inner: &Self) -> Self {
        Mobius {
            a: self.a * inner.a + self.b * inner.c,
            b: self.a * inner.b + self.b * inner.d,
            c: self.c * inner.a + self.d * inner.c,
            d: self.c * inner.b + self.d * inner.d,
        }
    }

    pub fn apply(&self, x: T) -> T {
        (self.a * x + self.b) / (self.c * x + self.d)
    }

    pub fn det(&self) -> T {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> T {
        self.a + self.d
    }
}

/// Single step `Γ ↦ 1/(u − E − KΓ)`: `(0, 1, −K, u − E)`, determinant `K`.
pub fn step_map(u: f64, energy: f64, branching: usize) -> MobiusMap {
    Mobius::new(0.0, 1.0, -(branching as f64), u - energy)
}

/// Same step at complex spectral parameter `z`.
pub fn step_map_complex(u: f64, z: Complex64, branching: usize) -> Mobius<Complex64> {
    Mobius::new(
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(-(branching as f64), 0.0),
        Complex64::new(u, 0.0) - z,
    )
}

/// Composed map over one period and its discriminant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodMap {
    pub map: MobiusMap,
    pub discriminant: f64,
}

impl PeriodMap {
    /// The second algebraic form of the discriminant, `(a − d)² + 4bc`.
    pub fn discriminant_alt(&self) -> f64 {
        let m = &self.map;
        (m.a - m.d).powi(2) + 4.0 * m.b * m.c
    }
}

fn check_phase(tau: usize, phase: usize) -> Result<()> {
    if tau == 0 {
        return Err(Error::arg("empty background"));
    }
    if phase < 1 || phase > tau {
        return Err(Error::arg(format!("phase {phase} outside 1..={tau}")));
    }
    Ok(())
}

/// Generic period composition `T(θ) ∘ T(θ+1) ∘ … ∘ T(θ+τ−1)`.
fn compose_generic<T, F>(u: &[f64], start_phase: usize, step: F) -> Mobius<T>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<Output = T> + std::ops::Div<Output = T>,
    F: Fn(f64) -> Mobius<T>,
{
    let tau = u.len();
    let mut acc = step(u[start_phase - 1]);
    for j in 1..tau {
        acc = acc.compose(&step(u[(start_phase - 1 + j) % tau]));
    }
    acc
}

pub fn compose_period(
    u: &[f64],
    energy: f64,
    branching: usize,
    start_phase: usize,
) -> Result<PeriodMap> {
    check_phase(u.len(), start_phase)?;
    let map = compose_generic(u, start_phase, |v| step_map(v, energy, branching));
    let discriminant = map.trace().powi(2) - 4.0 * map.det();
    Ok(PeriodMap { map, discriminant })
}

/// `ρ(E)` from phase 1.
pub fn discriminant(u: &[f64], energy: f64, branching: usize) -> f64 {
    let map = compose_generic(u, 1, |v| step_map(v, energy, branching));
    map.trace().powi(2) - 4.0 * map.det()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixedPoints {
    /// `ρ < 0`; `upper` has positive imaginary part.
    Conjugate { upper: Complex64, lower: Complex64 },
    /// `ρ > 0`.
    Real(f64, f64),
    /// `|ρ|` below tolerance: double root.
    Degenerate(f64),
    /// `c = 0`: the map is affine with this unique finite fixed point.
    Affine(f64),
}

impl FixedPoints {
    pub fn upper(&self) -> Option<Complex64> {
        match *self {
            FixedPoints::Conjugate { upper, .. } => Some(upper),
            _ => None,
        }
    }
}

/// Roots of `cΓ² + (d − a)Γ − b = 0`.
pub fn fixed_points(pm: &PeriodMap) -> Result<FixedPoints> {
    let MobiusMap { a, b, c, d } = pm.map;
    if c == 0.0 {
        if d == a {
            return Err(Error::DegenerateMap);
        }
        return Ok(FixedPoints::Affine(b / (d - a)));
    }
    let rho = pm.discriminant;
    let center = (a - d) / (2.0 * c);
    if rho.abs() < DEGENERACY_TOLERANCE {
        return Ok(FixedPoints::Degenerate(center));
    }
    if rho < 0.0 {
        let im = ((-rho).sqrt() / (2.0 * c)).abs();
        Ok(FixedPoints::Conjugate {
            upper: Complex64::new(center, im),
            lower: Complex64::new(center, -im),
        })
    } else {
        // q = -(B + sign(B)√ρ)/2 avoids cancellation; roots q/A and C/q
        let (qa, qb, qc) = (c, d - a, -b);
        let sq = rho.sqrt();
        let q = -0.5 * (qb + qb.signum() * sq);
        let (r1, r2) = if q == 0.0 {
            (sq / (2.0 * qa), -sq / (2.0 * qa))
        } else {
            (q / qa, qc / q)
        };
        Ok(FixedPoints::Real(r1.min(r2), r1.max(r2)))
    }
}

/// Im-positive fixed points `Γ(θ)` for every starting phase, at real `E`
/// inside a band. `None` if `ρ(E) ≥ 0`.
pub fn fixed_point_orbit(u: &[f64], energy: f64, branching: usize) -> Result<Option<Vec<Complex64>>> {
    let mut out = Vec::with_capacity(u.len());
    for phase in 1..=u.len() {
        let pm = compose_period(u, energy, branching, phase)?;
        match fixed_points(&pm)? {
            FixedPoints::Conjugate { upper, .. } => out.push(upper),
            _ => return Ok(None),
        }
    }
    Ok(Some(out))
}

/// The λ = 0 forward resolvent `Γ₀(0, z, θ)` of the periodic operator for
/// `Im z > 0`: the unique fixed point of the complex period map in the upper
/// half-plane.
pub fn periodic_resolvent(u: &[f64], branching: usize, z: Complex64, phase: usize) -> Result<Complex64> {
    check_phase(u.len(), phase)?;
    if !(z.im > 0.0) {
        return Err(Error::arg("periodic_resolvent needs Im z > 0"));
    }
    let m = compose_generic(u, phase, |v| step_map_complex(v, z, branching));
    // c Γ² + (d − a) Γ − b = 0
    let (qa, qb, qc) = (m.c, m.d - m.a, -m.b);
    let sq = (qb * qb - 4.0 * qa * qc).sqrt();
    let pick = |s: Complex64| {
        let q = -0.5 * (qb + s);
        (q / qa, qc / q)
    };
    // choose the sign that maximises |q| for stability
    let s = if (qb.conj() * sq).re >= 0.0 { sq } else { -sq };
    let (r1, r2) = pick(s);
    let root = if r1.im >= r2.im { r1 } else { r2 };
    // one polish step through the contraction
    Ok(m.apply(root))
}

/// Ordered disjoint closed intervals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BandSet {
    pub intervals: Vec<(f64, f64)>,
}

impl BandSet {
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn contains(&self, e: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= e && e <= hi)
    }

    /// Index of the band containing `[lo, hi]`, if any.
    pub fn band_containing(&self, lo: f64, hi: f64) -> Option<usize> {
        self.intervals
            .iter()
            .position(|&(a, b)| a <= lo && hi <= b)
    }

    pub fn total_length(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    /// All endpoints in increasing order.
    pub fn endpoints(&self) -> Vec<f64> {
        self.intervals.iter().flat_map(|&(a, b)| [a, b]).collect()
    }

    pub fn scaled(&self, factor: f64) -> BandSet {
        BandSet {
            intervals: self
                .intervals
                .iter()
                .map(|&(a, b)| (a * factor, b * factor))
                .collect(),
        }
    }

    fn merged(mut intervals: Vec<(f64, f64)>) -> BandSet {
        intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (a, b) in intervals {
            match out.last_mut() {
                Some(last) if a <= last.1 + 1e-9 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        BandSet { intervals: out }
    }
}

/// Band scan result with the grid-resolution diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandScan {
    pub bands: BandSet,
    /// Set when some band spans fewer than three grid cells.
    pub grid_too_coarse: bool,
}

fn check_grid(e_min: f64, e_max: f64, grid: usize) -> Result<()> {
    if !(e_min < e_max) || !e_min.is_finite() || !e_max.is_finite() {
        return Err(Error::arg(format!("bad energy range [{e_min}, {e_max}]")));
    }
    if grid < 2 {
        return Err(Error::arg("grid needs at least two points"));
    }
    Ok(())
}

/// Closure of `{x : f(x) < 0}` on `[lo, hi]`, scanned on `grid` points and
/// refined by bisection.
fn negativity_set<F>(f: F, lo: f64, hi: f64, grid: usize) -> BandScan
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let h = (hi - lo) / (grid - 1) as f64;
    let xs: Vec<f64> = (0..grid)
        .map(|i| if i + 1 == grid { hi } else { lo + i as f64 * h })
        .collect();
    let neg: Vec<bool> = par::map_fine(Execution::default(), grid, |i| f(xs[i]) < 0.0);

    let bisect = |mut a: f64, mut b: f64| {
        // invariant: neg(a) != neg(b)
        let neg_a = f(a) < 0.0;
        for _ in 0..200 {
            if b - a <= ROOT_TOLERANCE {
                break;
            }
            let m = 0.5 * (a + b);
            if (f(m) < 0.0) == neg_a {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };

    let mut intervals = Vec::new();
    let mut start = neg[0].then_some(lo);
    for i in 0..grid - 1 {
        if neg[i] != neg[i + 1] {
            let root = bisect(xs[i], xs[i + 1]);
            if neg[i + 1] {
                start = Some(root);
            } else if let Some(s) = start.take() {
                intervals.push((s, root));
            }
        }
    }
    if let Some(s) = start {
        intervals.push((s, hi));
    }
    let bands = BandSet::merged(intervals);
    let grid_too_coarse = bands.intervals.iter().any(|&(a, b)| b - a < 3.0 * h);
    BandScan {
        bands,
        grid_too_coarse,
    }
}

/// ac spectrum of the radially periodic operator in `[e_min, e_max]`:
/// closure of `{E : ρ(E) < 0}`.
pub fn ac_bands(u: &[f64], branching: usize, e_min: f64, e_max: f64, grid: usize) -> Result<BandScan> {
    check_phase(u.len(), 1)?;
    check_grid(e_min, e_max, grid)?;
    Ok(negativity_set(
        |e| discriminant(u, e, branching),
        e_min,
        e_max,
        grid,
    ))
}

/// Independent route to the bands through the half-line operator
/// `T + K^{-1/2}U` on ℓ²(ℕ₀): the 1-D band condition `|tr M(E′)| ≤ 2` for the
/// period transfer matrix, mapped back through `E = √K·E′`.
pub fn halfline_bands_oracle(
    u: &[f64],
    branching: usize,
    e_min: f64,
    e_max: f64,
    grid: usize,
) -> Result<BandScan> {
    check_phase(u.len(), 1)?;
    check_grid(e_min, e_max, grid)?;
    let sk = (branching as f64).sqrt();
    let v: Vec<f64> = u.iter().map(|x| x / sk).collect();
    let trace = |ep: f64| {
        // ψ_{n+1} = (E′ − v_n)ψ_n − ψ_{n−1}
        let (mut m00, mut m01, mut m10, mut m11) = (1.0, 0.0, 0.0, 1.0);
        for &vn in &v {
            let t = ep - vn;
            let (n00, n01) = (t * m00 - m10, t * m01 - m11);
            m10 = m00;
            m11 = m01;
            m00 = n00;
            m01 = n01;
        }
        m00 + m11
    };
    let scan = negativity_set(|ep| trace(ep).abs() - 2.0, e_min / sk, e_max / sk, grid);
    Ok(BandScan {
        bands: scan.bands.scaled(sk),
        grid_too_coarse: scan.grid_too_coarse,
    })
}

/// Energy window guaranteed to contain the spectrum of `T + U`.
pub fn spectral_window(u: &[f64], branching: usize) -> (f64, f64) {
    let umax = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let r = 2.0 * (branching as f64).sqrt() + umax + 0.5;
    (-r, r)
}
