//! Fréchet mean and tangent-space lifting.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{raw_dist, raw_exp, raw_inner, raw_log, ManifoldSpec, Point};

pub const DEFAULT_MEAN_TOL: f64 = 1e-6;
pub const DEFAULT_MEAN_MAX_ITER: usize = 100;

/// Stopping rule for the Karcher iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MeanConfig {
    fn default() -> Self {
        MeanConfig {
            tol: DEFAULT_MEAN_TOL,
            max_iter: DEFAULT_MEAN_MAX_ITER,
        }
    }
}

impl MeanConfig {
    pub fn mean(&self, points: &[Point]) -> Result<Point> {
        frechet_mean(points, self.tol, self.max_iter)
    }
}

/// Tangent lifts of a dataset at a common base point, one vectorized column per point.
#[derive(Debug, Clone)]
pub struct TangentDataset {
    pub base: Point,
    /// `vec_dim × N`.
    pub vectors: DMatrix<f64>,
}

impl TangentDataset {
    pub fn vec_dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn len(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.ncols() == 0
    }

    /// De-vectorized tangent matrix of column `i`.
    pub fn tangent(&self, i: usize) -> DMatrix<f64> {
        let col: Vec<f64> = self.vectors.column(i).iter().copied().collect();
        self.base
            .spec()
            .devectorize(&col)
            .expect("column length matches the base spec")
    }
}

fn check_same_spec(points: &[Point]) -> Result<ManifoldSpec> {
    let first = points
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty point set".into()))?;
    let spec = first.spec();
    if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.spec() != spec) {
        return Err(Error::ShapeMismatch(format!(
            "point {i} lives on {}, expected {spec}",
            p.spec()
        )));
    }
    Ok(spec)
}

fn initial_mean(spec: ManifoldSpec, points: &[Point]) -> Result<Point> {
    let n = points.len() as f64;
    let average = || {
        points
            .iter()
            .fold(DMatrix::zeros(spec.shape().0, spec.shape().1), |acc, p| acc + p.data())
            / n
    };
    match spec {
        ManifoldSpec::Euclidean { .. } => Ok(Point::from_raw(spec, average())),
        ManifoldSpec::Sphere { .. } => {
            let m = average();
            if m.norm() < 1e-12 {
                Ok(points[0].clone())
            } else {
                Point::projected(spec, &m)
            }
        }
        ManifoldSpec::Spd { .. } => Point::projected(spec, &average()),
        ManifoldSpec::Grassmann { .. } | ManifoldSpec::Stiefel { .. } => Ok(points[0].clone()),
    }
}

fn warn_if_spread(spec: ManifoldSpec, points: &[Point]) {
    if !matches!(spec, ManifoldSpec::Sphere { .. }) || points.len() > 2000 {
        return;
    }
    let limit = std::f64::consts::PI - 0.2;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if raw_dist(spec, points[i].data(), points[j].data()).unwrap_or(0.0) > limit {
                log::warn!(
                    "sphere points {i} and {j} are nearly antipodal; data may not lie in an open hemisphere"
                );
                return;
            }
        }
    }
}

/// Mean of the log maps at `x`, as a matrix in `T_x M`.
fn tangent_mean(x: &Point, points: &[Point]) -> Result<DMatrix<f64>> {
    let spec = x.spec();
    let (r, c) = spec.shape();
    let mut sum = DMatrix::zeros(r, c);
    for (i, p) in points.iter().enumerate() {
        sum += raw_log(spec, x.data(), p.data()).map_err(|e| e.at(i))?;
    }
    Ok(sum / points.len() as f64)
}

/// Karcher iteration `x ← Exp_x(mean_i Log_x(x_i))` with unit step.
pub fn frechet_mean(points: &[Point], tol: f64, max_iter: usize) -> Result<Point> {
    let spec = check_same_spec(points)?;
    warn_if_spread(spec, points);
    let mut x = initial_mean(spec, points)?;
    let mut residual = f64::INFINITY;
    // max_iter updates, each preceded by a convergence check; the final
    // iterate is checked once more before giving up.
    for it in 0..=max_iter {
        let step = tangent_mean(&x, points)?;
        residual = raw_inner(spec, x.data(), &step, &step).max(0.0).sqrt();
        if residual < tol {
            return Ok(x);
        }
        if it == max_iter {
            break;
        }
        x = Point::from_raw(spec, raw_exp(spec, x.data(), &step)?);
    }
    Err(Error::MeanNoConvergence {
        iterations: max_iter,
        residual,
        last: Box::new(x),
    })
}

/// Vectorized log maps of `points` at `base`.
pub fn lift(points: &[Point], base: &Point) -> Result<TangentDataset> {
    let spec = base.spec();
    let mut vectors = DMatrix::zeros(spec.vec_dim(), points.len());
    for (i, p) in points.iter().enumerate() {
        if p.spec() != spec {
            return Err(Error::ShapeMismatch(format!(
                "point {i} lives on {}, base on {spec}",
                p.spec()
            )));
        }
        let z = raw_log(spec, base.data(), p.data()).map_err(|e| e.at(i))?;
        vectors.set_column(i, &spec.vectorize(&z));
    }
    Ok(TangentDataset {
        base: base.clone(),
        vectors,
    })
}

/// Row `i` is `basisᵀ · vec(Log_base(points[i]))`.
pub fn tangent_coords(base: &Point, basis: &DMatrix<f64>, points: &[Point]) -> Result<DMatrix<f64>> {
    let spec = base.spec();
    if basis.nrows() != spec.vec_dim() {
        return Err(Error::ShapeMismatch(format!(
            "basis has {} rows, tangent vectors have {}",
            basis.nrows(),
            spec.vec_dim()
        )));
    }
    let td = lift(points, base)?;
    Ok((basis.transpose() * td.vectors).transpose())
}

/// `ZZᵀ / N`.
pub fn tangent_covariance(td: &TangentDataset) -> DMatrix<f64> {
    let n = td.len().max(1) as f64;
    let cov = &td.vectors * td.vectors.transpose() / n;
    crate::linalg::symmetrize(&cov)
}

/// Column mean of the lifted vectors.
pub fn tangent_centroid(td: &TangentDataset) -> DVector<f64> {
    td.vectors.column_mean()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{exp_map, log_map, TangentVec};
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn sphere(v: &[f64]) -> Point {
        Point::new(ManifoldSpec::Sphere { dim: v.len() }, DMatrix::from_column_slice(v.len(), 1, v)).unwrap()
    }

    #[test]
    fn sphere_midpoint() {
        let pts = [sphere(&[1.0, 0.0, 0.0]), sphere(&[0.0, 1.0, 0.0])];
        let m = frechet_mean(&pts, 1e-12, 100).unwrap();
        assert!((m.data() - DMatrix::from_column_slice(3, 1, &[FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0])).norm() < 1e-12);
    }

    #[test]
    fn single_point_is_its_own_mean() {
        let x = sphere(&[0.0, 0.6, 0.8]);
        let m = frechet_mean(std::slice::from_ref(&x), 1e-10, 1).unwrap();
        assert!((m.data() - x.data()).norm() < 1e-15);
    }

    #[test]
    fn euclidean_mean_is_arithmetic() {
        let spec = ManifoldSpec::Euclidean { dim: 2 };
        let pts: Vec<Point> = [[1.0, 2.0], [3.0, -2.0], [5.0, 3.0]]
            .iter()
            .map(|v| Point::new(spec, DMatrix::from_column_slice(2, 1, v)).unwrap())
            .collect();
        let m = frechet_mean(&pts, 1e-12, 1).unwrap();
        assert!((m.data() - DMatrix::from_column_slice(2, 1, &[3.0, 1.0])).norm() < 1e-14);
    }

    #[test]
    fn no_convergence_carries_last_iterate() {
        let pts = [
            sphere(&[1.0, 0.0, 0.0]),
            sphere(&[0.0, 1.0, 0.0]),
            sphere(&[0.0, 0.0, 1.0]),
        ];
        let err = frechet_mean(&pts, 0.0, 2).unwrap_err();
        match err {
            Error::MeanNoConvergence { iterations, last, .. } => {
                assert_eq!(iterations, 2);
                assert!(last.validate().is_ok());
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn lift_examples() {
        let base = sphere(&[1.0, 0.0, 0.0]);
        let td = lift(&[base.clone(), sphere(&[0.0, 1.0, 0.0])], &base).unwrap();
        assert_eq!(td.vectors.column(0).norm(), 0.0);
        assert!((td.vectors.column(1) - DVector::from_vec(vec![0.0, FRAC_PI_2, 0.0])).norm() < 1e-15);

        let spec = ManifoldSpec::Euclidean { dim: 2 };
        let b = Point::new(spec, DMatrix::from_column_slice(2, 1, &[1.0, 1.0])).unwrap();
        let p = Point::new(spec, DMatrix::from_column_slice(2, 1, &[4.0, -1.0])).unwrap();
        let td = lift(&[p], &b).unwrap();
        assert_eq!(td.vectors.as_slice(), &[3.0, -2.0]);
    }

    #[test]
    fn lift_reports_offending_index() {
        let base = sphere(&[1.0, 0.0, 0.0]);
        let err = lift(&[base.clone(), sphere(&[-1.0, 0.0, 0.0])], &base).unwrap_err();
        assert!(matches!(err, Error::DomainAt { index: 1, .. }));
    }

    #[test]
    fn covariance_examples() {
        let base = Point::new(ManifoldSpec::Euclidean { dim: 2 }, DMatrix::zeros(2, 1)).unwrap();
        let td = TangentDataset { base: base.clone(), vectors: DMatrix::zeros(2, 3) };
        assert_eq!(tangent_covariance(&td), DMatrix::zeros(2, 2));
        let z = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let td = TangentDataset { base: base.clone(), vectors: z.clone() };
        assert_eq!(tangent_covariance(&td), &z * z.transpose());
        let td = TangentDataset { base, vectors: DMatrix::from_column_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]) };
        assert_eq!(tangent_covariance(&td), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn lift_then_exp_recovers_points() {
        let base = sphere(&[0.0, 0.0, 1.0]);
        let pts = [sphere(&[0.6, 0.0, 0.8]), sphere(&[0.0, -0.8, 0.6])];
        let td = lift(&pts, &base).unwrap();
        for (i, p) in pts.iter().enumerate() {
            let v = TangentVec::new(&base, td.tangent(i)).unwrap();
            assert!((exp_map(&base, &v).unwrap().data() - p.data()).norm() < 1e-12);
            assert_eq!(v, log_map(&base, p).unwrap());
        }
    }
}
