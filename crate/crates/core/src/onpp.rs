//! Orthogonal neighborhood preserving projections on tangent lifts.
//!
//! Weights reconstruct every point from its geodesic neighbors in its own
//! tangent space; the projection `U` then minimizes `tr(Uᵀ Z M Zᵀ U)` over the
//! Stiefel manifold with `M = (I − W)ᵀ(I − W)` and `Z` the lifts at the mean.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{nearest, pairwise_distances};
use crate::linalg::{complete_basis, sym_eig, symmetrize, thin_svd};
use crate::manifold::{raw_inner, raw_log, ManifoldSpec, Point};
use crate::optim::{rgd_minimize, RgdConfig};
use crate::stats::{lift, tangent_coords, MeanConfig};

/// Row-sparse `N × N` weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    pub n: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl WeightMatrix {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                w[(i, j)] = v;
            }
        }
        w
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|e| e.1).sum()).collect()
    }

    /// `Z − Z Wᵀ` for a `d × N` matrix `Z`.
    fn residual_of(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = z.clone();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                let zj = z.column(j).into_owned();
                y.column_mut(i).axpy(-w, &zj, 1.0);
            }
        }
        y
    }
}

/// Affine reconstruction weights `w ∝ G⁻¹1`, `Σw = 1`, from a neighbor Gram matrix.
///
/// `G` is regularized as `G + εI`, `ε = 1e-6·tr(G)`, when there are more
/// neighbors than tangent dimensions or `G` is numerically singular.
pub fn reconstruction_weights(gram: &DMatrix<f64>, tangent_dim: usize) -> Option<DVector<f64>> {
    let k = gram.nrows();
    let g = symmetrize(gram);
    let eig = sym_eig(&g).ok()?;
    let (hi, lo) = (eig.values[0], eig.values[k - 1]);
    let mut a = g;
    if k > tangent_dim || !(lo > 1e-10 * hi) {
        let tr = a.trace();
        let eps = if tr > 0.0 { 1e-6 * tr } else { 1.0 };
        for i in 0..k {
            a[(i, i)] += eps;
        }
    }
    let ones = DVector::from_element(k, 1.0);
    let w = match a.clone().cholesky() {
        Some(c) => c.solve(&ones),
        None => a.lu().solve(&ones)?,
    };
    let total = w.sum();
    if !total.is_finite() || total.abs() < f64::EPSILON || w.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(w / total)
}

/// Row `i` reconstructs `x_i` from its `k_nn` geodesic neighbors using tangent
/// lifts `Log_{x_i}(x_j)` and the metric at `x_i`.
pub fn onpp_weights(points: &[Point], k_nn: usize) -> Result<WeightMatrix> {
    let n = points.len();
    if k_nn == 0 || k_nn >= n {
        return Err(Error::InvalidArgument(format!("need 1 <= k_nn < N, got k_nn={k_nn}, N={n}")));
    }
    let dist = pairwise_distances(points)?;
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let spec = points[i].spec();
            let x = points[i].data();
            let nbrs = nearest(&dist, i, k_nn);
            let lifts = nbrs
                .iter()
                .map(|&j| raw_log(spec, x, points[j].data()).map_err(|e| e.at(j)))
                .collect::<Result<Vec<_>>>()?;
            let gram = DMatrix::from_fn(k_nn, k_nn, |a, b| raw_inner(spec, x, &lifts[a], &lifts[b]));
            let w = reconstruction_weights(&gram, spec.intrinsic_dim()).ok_or(Error::DegenerateNeighborhood(i))?;
            let mut row: Vec<(usize, f64)> = nbrs.into_iter().zip(w.iter().copied()).collect();
            row.sort_by_key(|e| e.0);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WeightMatrix { n, rows })
}

/// Descent settings used when the caller does not supply any.
pub fn default_rgd() -> RgdConfig {
    RgdConfig { step_size: 1.0, max_iter: 20_000, grad_tol: 1e-8, backtracking: true }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnppModel {
    pub base: Point,
    pub weights: WeightMatrix,
    /// `d × d_out`, orthonormal columns.
    #[serde(with = "crate::serde_mat::matrix")]
    pub projection: DMatrix<f64>,
    /// `tr(UᵀAU)` per descent iteration.
    pub objective_trace: Vec<f64>,
}

/// `A = Z M Zᵀ` for lifts `Z` (`d × N`).
pub fn onpp_quadratic(z: &DMatrix<f64>, w: &WeightMatrix) -> DMatrix<f64> {
    let y = w.residual_of(z);
    symmetrize(&(&y * y.transpose()))
}

pub fn onpp_fit(points: &[Point], d_out: usize, k_nn: usize, rgd: &RgdConfig, mean: &MeanConfig) -> Result<OnppModel> {
    let base = mean.mean(points)?;
    let d = base.spec().vec_dim();
    if d_out == 0 || d_out > d {
        return Err(Error::InvalidArgument(format!("need 1 <= d_out <= {d}, got {d_out}")));
    }
    let weights = onpp_weights(points, k_nn)?;
    let z = lift(points, &base)?.vectors;
    let a = onpp_quadratic(&z, &weights);
    let (projection, objective_trace) = minimize_trace(&z, &a, d_out, rgd)?;
    Ok(OnppModel { base, weights, projection, objective_trace })
}

/// Minimizes `tr(UᵀAU)` over `U ∈ St(d, d_out)` restricted to the column space of `z`.
///
/// Directions outside that span carry no data, so minimizing over them would
/// project everything to zero. When the span has at most `d_out` dimensions it
/// is returned directly (completed to `d_out` columns).
pub fn minimize_trace(z: &DMatrix<f64>, a: &DMatrix<f64>, d_out: usize, rgd: &RgdConfig) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let (u, sigma, _) = thin_svd(z);
    let smax = sigma.iter().fold(0.0f64, |m, &s| m.max(s));
    let r = sigma.iter().filter(|&&s| s > 1e-10 * smax).count();
    let objective = |q: &DMatrix<f64>| (q.transpose() * a * q).trace();
    if r <= d_out {
        let q = complete_basis(&u.columns(0, r).into_owned(), d_out)?;
        let f = objective(&q);
        return Ok((q, vec![f]));
    }
    let p = u.columns(0, r).into_owned();
    let a_r = symmetrize(&(p.transpose() * a * &p));
    let scale = a_r.norm();
    let v0 = DMatrix::identity(r, d_out);
    if scale == 0.0 {
        return Ok((&p * v0, vec![0.0]));
    }
    let a_s = &a_r / scale;
    let spec = ManifoldSpec::Stiefel { p: d_out, n: r };
    let f = |x: &Point| {
        let av = &a_s * x.data();
        ((x.data().transpose() * &av).trace(), 2.0 * av)
    };
    let trace = rgd_minimize(&f, &Point::new(spec, v0)?, rgd)?;
    let objective_trace = trace.objective_values.iter().map(|v| v * scale).collect();
    Ok((&p * trace.final_point.data(), objective_trace))
}

impl OnppModel {
    /// `N × d_out` embedding `Uᵀ vec(Log_base(x_i))`.
    pub fn transform(&self, points: &[Point]) -> Result<DMatrix<f64>> {
        tangent_coords(&self.base, &self.projection, points)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
