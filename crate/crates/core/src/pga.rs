//! Principal geodesic analysis: PCA of tangent lifts at the Fréchet mean.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sym_eig;
use crate::manifold::{raw_exp, raw_project, Point};
use crate::stats::{lift, tangent_coords, tangent_covariance, MeanConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgaModel {
    pub base: Point,
    /// `d × k`, orthonormal columns.
    #[serde(with = "crate::serde_mat::matrix")]
    pub basis: DMatrix<f64>,
    /// Tangent variances along each column of `basis`, descending.
    #[serde(with = "crate::serde_mat::vector")]
    pub eigenvalues: DVector<f64>,
}

pub fn pga_fit(points: &[Point], k: usize, mean: &MeanConfig) -> Result<PgaModel> {
    let base = mean.mean(points)?;
    pga_fit_at(points, base, k)
}

/// PGA with a caller-chosen base point.
pub fn pga_fit_at(points: &[Point], base: Point, k: usize) -> Result<PgaModel> {
    let d = base.spec().vec_dim();
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= {d}, got {k}")));
    }
    let td = lift(points, &base)?;
    let eig = sym_eig(&tangent_covariance(&td))?.top(k);
    Ok(PgaModel { base, basis: eig.vectors, eigenvalues: eig.values })
}

impl PgaModel {
    pub fn n_components(&self) -> usize {
        self.basis.ncols()
    }

    /// `N × k` scores `Uᵀ vec(Log_base(x_i))`.
    pub fn transform(&self, points: &[Point]) -> Result<DMatrix<f64>> {
        tangent_coords(&self.base, &self.basis, points)
    }

    /// `Exp_base(Σ_j c_ij u_j)` for every row of `coords`.
    pub fn reconstruct(&self, coords: &DMatrix<f64>) -> Result<Vec<Point>> {
        if coords.ncols() != self.n_components() {
            return Err(Error::ShapeMismatch(format!(
                "coordinates have {} columns, model has {} components",
                coords.ncols(),
                self.n_components()
            )));
        }
        let spec = self.base.spec();
        let x = self.base.data();
        coords
            .row_iter()
            .map(|row| {
                let v = &self.basis * row.transpose();
                let z = raw_project(spec, x, &spec.devectorize(v.as_slice())?);
                Ok(Point::from_raw(spec, raw_exp(spec, x, &z)?))
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{geodesic_dist, ManifoldSpec};

    fn sphere(v: [f64; 3]) -> Point {
        Point::projected(ManifoldSpec::Sphere { dim: 3 }, &DMatrix::from_column_slice(3, 1, &v)).unwrap()
    }

    #[test]
    fn great_circle_is_one_dimensional() {
        let pts: Vec<Point> = (0..20)
            .map(|i| {
                let t = -0.8 + 0.08 * i as f64;
                sphere([t.cos(), t.sin(), 0.0])
            })
            .collect();
        let m = pga_fit(&pts, 2, &MeanConfig { tol: 1e-12, max_iter: 100 }).unwrap();
        assert!(m.eigenvalues[1] / m.eigenvalues[0] <= 1e-8);
    }

    #[test]
    fn single_point_has_zero_spectrum() {
        let m = pga_fit(&[sphere([0.0, 0.0, 1.0])], 3, &MeanConfig::default()).unwrap();
        assert!(m.eigenvalues.iter().all(|&v| v == 0.0));
        let scores = m.transform(std::slice::from_ref(&m.base)).unwrap();
        assert!(scores.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_rank_roundtrip() {
        let pts = [sphere([1.0, 0.2, 0.1]), sphere([0.9, -0.3, 0.2]), sphere([1.0, 0.1, -0.4])];
        let m = pga_fit(&pts, 3, &MeanConfig::default()).unwrap();
        let back = m.reconstruct(&m.transform(&pts).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&pts) {
            assert!(geodesic_dist(a, b).unwrap() <= 1e-8);
        }
        let zero = m.reconstruct(&DMatrix::zeros(2, 3)).unwrap();
        assert!(zero.iter().all(|p| p == &m.base));
    }

    #[test]
    fn rejects_bad_k_and_width() {
        let pts = [sphere([1.0, 0.0, 0.0])];
        assert!(pga_fit(&pts, 0, &MeanConfig::default()).is_err());
        assert!(pga_fit(&pts, 4, &MeanConfig::default()).is_err());
        let m = pga_fit(&pts, 2, &MeanConfig::default()).unwrap();
        assert!(matches!(m.reconstruct(&DMatrix::zeros(1, 3)), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn json_roundtrip() {
        let pts = [sphere([1.0, 0.2, 0.1]), sphere([0.9, -0.3, 0.2])];
        let m = pga_fit(&pts, 2, &MeanConfig::default()).unwrap();
        let back: PgaModel = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
