use crate::model::{
    potential_at, sample_disorder, EvaluationPoint, PotentialSpec, SiteId, TreeParams, VertexId,
};
use crate::par::{self, Execution};
use crate::{Complex64, Error, Result};

/// Forward resolvents of every vertex of a depth-`D` truncation, stored level
/// by level. Vertices beyond depth `D` are absent (Γ = 0 there).
#[derive(Debug, Clone)]
pub struct ExactTreeResult {
    branching: usize,
    z: Complex64,
    levels: Vec<Vec<Complex64>>,
    potentials: Vec<Vec<f64>>,
}

impl ExactTreeResult {
    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn root(&self) -> Complex64 {
        self.levels[0][0]
    }

    pub fn gamma(&self, v: VertexId) -> Option<Complex64> {
        self.levels.get(v.depth)?.get(v.index).copied()
    }

    /// Total site potential `U_x + λV_x` used at `v`.
    pub fn potential(&self, v: VertexId) -> Option<f64> {
        self.potentials.get(v.depth)?.get(v.index).copied()
    }

    pub fn level(&self, depth: usize) -> &[Complex64] {
        &self.levels[depth]
    }

    pub fn vertex_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// `Γ` along the path root → `v`.
    pub fn path_gammas(&self, v: VertexId) -> Option<Vec<Complex64>> {
        v.ancestry(self.branching)
            .into_iter()
            .map(|x| self.gamma(x))
            .collect()
    }

    /// All `(vertex, Γ)` pairs, root first, level by level.
    pub fn iter(&self) -> impl Iterator<Item = (VertexId, Complex64)> + '_ {
        self.levels.iter().enumerate().flat_map(|(depth, lvl)| {
            lvl.iter()
                .enumerate()
                .map(move |(index, g)| (VertexId { depth, index }, *g))
        })
    }

    /// Largest `|Γ_x − (V_x − z − Σ_children Γ_y)^{-1}|` over the tree.
    pub fn max_residual(&self) -> f64 {
        let k = self.branching;
        let mut worst = 0.0f64;
        for (depth, lvl) in self.levels.iter().enumerate() {
            for (i, g) in lvl.iter().enumerate() {
                let children: Complex64 = match self.levels.get(depth + 1) {
                    Some(next) => next[i * k..(i + 1) * k].iter().sum(),
                    None => Complex64::new(0.0, 0.0),
                };
                let expect = (self.potentials[depth][i] - self.z - children).inv();
                worst = worst.max((g - expect).norm());
            }
        }
        worst
    }
}

/// Exact forward resolvents on the depth-`D` truncation, bottom-up.
pub fn exact_tree_gamma(
    params: &TreeParams,
    pot: &PotentialSpec,
    point: &EvaluationPoint,
    seed: u64,
) -> Result<ExactTreeResult> {
    exact_tree_gamma_with(Execution::default(), params, pot, point, seed)
}

pub fn exact_tree_gamma_with(
    exec: Execution,
    params: &TreeParams,
    pot: &PotentialSpec,
    point: &EvaluationPoint,
    seed: u64,
) -> Result<ExactTreeResult> {
    point.require_positive_eta()?;
    pot.check_params(params)?;
    if point.phase > params.period() {
        return Err(Error::arg(format!("phase {} outside 1..={}", point.phase, params.period())));
    }
    let k = params.branching();
    let depth = params.depth();
    let z = point.z();

    let mut potentials: Vec<Vec<f64>> = Vec::with_capacity(depth + 1);
    for d in 0..=depth {
        let n = params.level_size(d);
        let level = par::map_fine(exec, n, |index| {
            let v = if pot.coupling == 0.0 {
                0.0
            } else {
                sample_disorder(&pot.disorder, seed, SiteId::Vertex(VertexId { depth: d, index }))
            };
            potential_at(pot, params, point.phase, d, v)
        });
        potentials.push(level);
    }

    let mut levels: Vec<Vec<Complex64>> = vec![Vec::new(); depth + 1];
    levels[depth] = par::map_fine(exec, potentials[depth].len(), |i| {
        (potentials[depth][i] - z).inv()
    });
    for d in (0..depth).rev() {
        let next = &levels[d + 1];
        let here = &potentials[d];
        levels[d] = par::map_fine(exec, here.len(), |i| {
            let children: Complex64 = next[i * k..(i + 1) * k].iter().sum();
            (here[i] - z - children).inv()
        });
    }

    Ok(ExactTreeResult {
        branching: k,
        z,
        levels,
        potentials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DisorderSpec, Distribution};
    use crate::resolvent::is_herglotz;
    use approx::assert_abs_diff_eq;

    #[test]
    fn three_vertex_tree_by_hand() {
        let params = TreeParams::new(2, 1, 1).unwrap();
        let point = EvaluationPoint::new(0.0, 1.0, 1).unwrap();
        let r = exact_tree_gamma(&params, &PotentialSpec::free(), &point, 0).unwrap();
        // leaves 1/(0 − i) = i, root 1/(−i − 2i) = i/3
        for g in r.level(1) {
            assert_abs_diff_eq!((g - Complex64::new(0.0, 1.0)).norm(), 0.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!((r.root() - Complex64::new(0.0, 1.0 / 3.0)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn matches_scalar_iteration() {
        let params = TreeParams::new(2, 4, 1).unwrap();
        let point = EvaluationPoint::new(0.5, 0.01, 1).unwrap();
        let r = exact_tree_gamma(&params, &PotentialSpec::free(), &point, 0).unwrap();
        // depth-4 tree = five steps of Γ ↦ 1/(−z − 2Γ) from Γ = 0
        let z = point.z();
        let mut g = Complex64::new(0.0, 0.0);
        for _ in 0..5 {
            g = (-z - 2.0 * g).inv();
        }
        assert_abs_diff_eq!((r.root() - g).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn radial_constant_disorder_keeps_levels_flat() {
        let params = TreeParams::new(3, 5, 2).unwrap();
        let pot = PotentialSpec::new(
            vec![0.4, -0.2],
            DisorderSpec::radial(Distribution::Constant { value: 0.0 }),
            0.0,
        )
        .unwrap();
        let point = EvaluationPoint::new(0.1, 0.05, 2).unwrap();
        let r = exact_tree_gamma(&params, &pot, &point, 3).unwrap();
        for d in 0..=5 {
            let lvl = r.level(d);
            assert!(lvl.iter().all(|g| *g == lvl[0]));
        }
    }

    #[test]
    fn residual_and_herglotz_with_disorder() {
        let params = TreeParams::new(3, 6, 1).unwrap();
        let pot = PotentialSpec::new(
            vec![0.0],
            DisorderSpec::iid(Distribution::Cauchy { scale: 1.0 }),
            0.7,
        )
        .unwrap();
        let point = EvaluationPoint::new(-0.3, 0.02, 1).unwrap();
        let r = exact_tree_gamma(&params, &pot, &point, 11).unwrap();
        assert!(r.max_residual() < 1e-12);
        assert!(r.iter().all(|(_, g)| is_herglotz(g, 0.02)));
        assert_eq!(r.vertex_count(), (3usize.pow(7) - 1) / 2);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let params = TreeParams::new(2, 12, 1).unwrap();
        let pot = PotentialSpec::new(
            vec![0.0],
            DisorderSpec::iid(Distribution::Uniform { a: -1.0, b: 1.0 }),
            1.0,
        )
        .unwrap();
        let point = EvaluationPoint::new(0.2, 0.1, 1).unwrap();
        let a = exact_tree_gamma_with(Execution::Sequential, &params, &pot, &point, 5).unwrap();
        let b = exact_tree_gamma_with(Execution::Parallel, &params, &pot, &point, 5).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x == y));
    }

    #[test]
    fn rejects_zero_eta() {
        let params = TreeParams::new(2, 2, 1).unwrap();
        let point = EvaluationPoint::new(0.0, 0.0, 1).unwrap();
        assert!(exact_tree_gamma(&params, &PotentialSpec::free(), &point, 0).is_err());
    }
}
