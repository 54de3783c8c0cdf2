//! Robust PCA of tangent lifts: `min ‖L‖_* + λ‖S‖₁` s.t. `Z = L + S`, by ADMM.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{shrink, svt, thin_svd};
use crate::manifold::{raw_exp, raw_project, Point};
use crate::stats::{lift, tangent_coords, MeanConfig};

pub const DEFAULT_ADMM_ITERS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RrpcaConfig {
    /// Sparsity weight; `None` means `1/√max(d, N)`.
    pub lambda: Option<f64>,
    pub iters: usize,
    pub mean: MeanConfig,
}

impl Default for RrpcaConfig {
    fn default() -> Self {
        RrpcaConfig { lambda: None, iters: DEFAULT_ADMM_ITERS, mean: MeanConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmOutput {
    pub low_rank: DMatrix<f64>,
    pub sparse: DMatrix<f64>,
    /// `‖Z − L − S‖_F / ‖Z‖_F` after the last iteration.
    pub residual: f64,
}

/// Penalty `ρ = dN / (4‖Z‖₁)`, fixed across iterations.
pub fn admm_penalty(z: &DMatrix<f64>) -> f64 {
    let l1: f64 = z.iter().map(|v| v.abs()).sum();
    (z.len() as f64) / (4.0 * l1)
}

/// Scaled-form ADMM:
/// `L ← SVT_{1/ρ}(Z − S + Y/ρ)`, `S ← shrink_{λ/ρ}(Z − L + Y/ρ)`, `Y ← Y + ρ(Z − L − S)`.
pub fn rpca_admm(z: &DMatrix<f64>, lambda: f64, iters: usize) -> Result<AdmmOutput> {
    if iters == 0 || !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need iters >= 1 and lambda > 0, got {iters} and {lambda}"
        )));
    }
    let zero = DMatrix::zeros(z.nrows(), z.ncols());
    let z_norm = z.norm();
    if z_norm == 0.0 {
        return Ok(AdmmOutput { low_rank: zero.clone(), sparse: zero, residual: 0.0 });
    }
    let rho = admm_penalty(z);
    let mut l = zero.clone();
    let mut s = zero.clone();
    let mut y = zero;
    for _ in 0..iters {
        l = svt(&(z - &s + &y / rho), 1.0 / rho);
        s = shrink(&(z - &l + &y / rho), lambda / rho);
        y += (z - &l - &s) * rho;
    }
    let residual = (z - &l - &s).norm() / z_norm;
    Ok(AdmmOutput { low_rank: l, sparse: s, residual })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrpcaResult {
    pub base: Point,
    /// `d × N`.
    #[serde(with = "crate::serde_mat::matrix")]
    pub low_rank: DMatrix<f64>,
    #[serde(with = "crate::serde_mat::matrix")]
    pub sparse: DMatrix<f64>,
    pub lambda: f64,
    pub residual: f64,
    #[serde(skip)]
    pub cleaned_points: Vec<Point>,
}

pub fn rrpca_fit(points: &[Point], cfg: &RrpcaConfig) -> Result<RrpcaResult> {
    let base = cfg.mean.mean(points)?;
    let td = lift(points, &base)?;
    let (d, n) = td.vectors.shape();
    let lambda = cfg.lambda.unwrap_or(1.0 / (d.max(n) as f64).sqrt());
    let out = rpca_admm(&td.vectors, lambda, cfg.iters)?;
    if out.residual > 1e-6 {
        log::warn!("R-RPCA stopped with relative residual {:.3e}", out.residual);
    }
    let spec = base.spec();
    let cleaned_points = out
        .low_rank
        .column_iter()
        .map(|col| {
            let z = raw_project(spec, base.data(), &spec.devectorize(col.as_slice())?);
            Ok(Point::from_raw(spec, raw_exp(spec, base.data(), &z)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RrpcaResult {
        base,
        low_rank: out.low_rank,
        sparse: out.sparse,
        lambda,
        residual: out.residual,
        cleaned_points,
    })
}

impl RrpcaResult {
    /// Leading `k` left singular vectors of the low-rank component.
    pub fn basis(&self, k: usize) -> Result<DMatrix<f64>> {
        let d = self.low_rank.nrows();
        if k == 0 || k > d {
            return Err(Error::InvalidArgument(format!("need 1 <= k <= {d}, got {k}")));
        }
        let (u, _, _) = thin_svd(&self.low_rank);
        let mut basis = DMatrix::zeros(d, k);
        let avail = u.ncols().min(k);
        basis.columns_mut(0, avail).copy_from(&u.columns(0, avail));
        if avail < k {
            // Fewer samples than components: complete with an orthonormal complement.
            basis = crate::linalg::complete_basis(&basis.columns(0, avail).into_owned(), k)?;
        }
        Ok(basis)
    }

    /// `N × k` coordinates in the leading singular directions of `L`.
    pub fn transform(&self, points: &[Point], k: usize) -> Result<DMatrix<f64>> {
        tangent_coords(&self.base, &self.basis(k)?, points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_stays_zero() {
        let out = rpca_admm(&DMatrix::zeros(4, 6), 0.5, 50).unwrap();
        assert_eq!(out.low_rank, DMatrix::zeros(4, 6));
        assert_eq!(out.sparse, DMatrix::zeros(4, 6));
    }

    #[test]
    fn clean_rank_one_is_all_low_rank() {
        let u = DMatrix::from_fn(8, 1, |i, _| 1.0 + i as f64 * 0.3);
        let v = DMatrix::from_fn(1, 12, |_, j| (j as f64 * 0.7).sin() + 1.5);
        let z = &u * &v;
        let out = rpca_admm(&z, 1.0 / 12f64.sqrt(), 50).unwrap();
        assert!((&out.low_rank - &z).norm() <= 1e-6 * z.norm());
        assert!(out.sparse.norm() <= 1e-6 * z.norm());
    }

    #[test]
    fn rejects_bad_parameters() {
        let z = DMatrix::from_element(2, 2, 1.0);
        assert!(rpca_admm(&z, 0.0, 10).is_err());
        assert!(rpca_admm(&z, 1.0, 0).is_err());
    }
}
