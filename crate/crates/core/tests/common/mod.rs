//! Shared test helpers: a dense-matrix resolvent oracle and random instances.

#![allow(dead_code)]

use nalgebra::DMatrix;
use treelab::model::{
    potential_at, sample_disorder, DisorderSpec, Distribution, EvaluationPoint, PotentialSpec,
    SiteId, TreeParams, VertexId,
};
use treelab::rng::{Stream, StreamKey};
use treelab::Complex64;

/// Position of `v` in level order.
pub fn flat_index(v: VertexId, k: usize) -> usize {
    (k.pow(v.depth as u32) - 1) / (k - 1) + v.index
}

/// `(T + U + λV − z)^{-1}` on the truncated tree, with `T` the adjacency
/// matrix and the potential recomputed from the model samplers.
pub fn dense_green(
    params: &TreeParams,
    pot: &PotentialSpec,
    point: &EvaluationPoint,
    seed: u64,
) -> DMatrix<Complex64> {
    let k = params.branching();
    let n = params.vertex_count() as usize;
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    for depth in 0..=params.depth() {
        for index in 0..k.pow(depth as u32) {
            let v = VertexId { depth, index };
            let i = flat_index(v, k);
            let omega = if pot.coupling == 0.0 {
                0.0
            } else {
                sample_disorder(&pot.disorder, seed, SiteId::Vertex(v))
            };
            h[(i, i)] = Complex64::new(potential_at(pot, params, point.phase, depth, omega), 0.0) - point.z();
            if let Some(p) = v.parent(k) {
                let j = flat_index(p, k);
                h[(i, j)] = Complex64::new(1.0, 0.0);
                h[(j, i)] = Complex64::new(1.0, 0.0);
            }
        }
    }
    h.try_inverse().expect("H − z is invertible for Im z > 0")
}

pub struct Instance {
    pub params: TreeParams,
    pub pot: PotentialSpec,
    pub point: EvaluationPoint,
    pub seed: u64,
}

pub fn uniform_in(rng: &mut Stream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.open01()
}

/// Random small instance with at most `max_vertices` vertices.
pub fn random_instance(case: u64, max_vertices: u128) -> Instance {
    let mut rng = StreamKey::new(0xD3_5E).with(case).stream();
    let k = 2 + rng.below(3);
    let tau = 1 + rng.below(3);
    let mut depth = 1 + rng.below(9);
    while TreeParams::new(k, depth, tau).unwrap().vertex_count() > max_vertices {
        depth -= 1;
    }
    let u: Vec<f64> = (0..tau).map(|_| uniform_in(&mut rng, -2.0, 2.0)).collect();
    let law = match rng.below(3) {
        0 => Distribution::Uniform { a: -1.0, b: 1.0 },
        1 => Distribution::Gaussian { mean: 0.0, sd: 1.0 },
        _ => Distribution::Cauchy { scale: 0.5 },
    };
    let lambda = uniform_in(&mut rng, 0.0, 1.0);
    let eta = 10f64.powf(uniform_in(&mut rng, -2.0, 0.0));
    let energy = uniform_in(&mut rng, -3.0, 3.0);
    let phase = 1 + rng.below(tau);
    Instance {
        params: TreeParams::new(k, depth, tau).unwrap(),
        pot: PotentialSpec::new(u, DisorderSpec::iid(law), lambda).unwrap(),
        point: EvaluationPoint::new(energy, eta, phase).unwrap(),
        seed: rng.next(),
    }
}

/// Free forward resolvent from the quadratic `KΓ² + zΓ + 1 = 0`, written out
/// independently of the library.
pub fn free_gamma(k: usize, z: Complex64) -> Complex64 {
    let k = k as f64;
    let d = (z * z - 4.0 * k).sqrt();
    let r1 = (-z + d) / (2.0 * k);
    let r2 = (-z - d) / (2.0 * k);
    if r1.im > r2.im {
        r1
    } else {
        r2
    }
}
