//! Deterministic inputs shared by the benchmarks.

use manred::{exp_map, ManifoldSpec, Point};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.sample(StandardNormal))
}

/// A random point of `spec`, obtained by projecting a Gaussian ambient matrix.
pub fn random_point(r: &mut ChaCha8Rng, spec: ManifoldSpec) -> Point {
    let (rows, cols) = spec.shape();
    let m = gaussian(r, rows, cols);
    let m = match spec {
        ManifoldSpec::Spd { n } => &m * m.transpose() + DMatrix::identity(n, n),
        _ => m,
    };
    Point::projected(spec, &m).expect("projection of a generic matrix")
}

/// `n` points at geodesic radius at most `radius` around a random centre.
pub fn cluster(r: &mut ChaCha8Rng, spec: ManifoldSpec, n: usize, radius: f64) -> Vec<Point> {
    let centre = random_point(r, spec);
    let (rows, cols) = spec.shape();
    (0..n)
        .map(|_| {
            let v = manred::manifold::project_tangent(&centre, &gaussian(r, rows, cols)).expect("tangent");
            let scale = radius * r.random::<f64>() / v.norm().max(f64::MIN_POSITIVE);
            exp_map(&centre, &v.scaled(scale)).expect("exp")
        })
        .collect()
}
