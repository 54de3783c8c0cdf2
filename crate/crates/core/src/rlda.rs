//! Linear discriminant analysis on tangent lifts at the Fréchet mean.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gen_eig, symmetrize};
use crate::manifold::{raw_exp, raw_project, Point};
use crate::stats::{lift, tangent_coords, MeanConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RldaModel {
    pub base: Point,
    /// `d × d_out`, columns `S_W`-orthonormal.
    #[serde(with = "crate::serde_mat::matrix")]
    pub projection: DMatrix<f64>,
    #[serde(with = "crate::serde_mat::matrices")]
    pub class_means_tangent: Vec<DMatrix<f64>>,
    #[serde(with = "crate::serde_mat::vector")]
    pub eigenvalues: DVector<f64>,
}

/// `(S_W, S_B, class means)`.
pub type Scatter = (DMatrix<f64>, DMatrix<f64>, Vec<DVector<f64>>);

/// `(directions, eigenvalues, class means)`.
pub type LdaSolution = (DMatrix<f64>, DVector<f64>, Vec<DVector<f64>>);

/// Within- and between-class scatter of the columns of `z` (`d × N`).
pub fn scatter_matrices(z: &DMatrix<f64>, labels: &[usize]) -> Result<Scatter> {
    let (d, n) = z.shape();
    if labels.len() != n {
        return Err(Error::LengthMismatch(n, labels.len()));
    }
    let c = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; c];
    let mut means = vec![DVector::zeros(d); c];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        means[l] += z.column(i);
    }
    if let Some(empty) = counts.iter().position(|&k| k == 0) {
        return Err(Error::InvalidArgument(format!("class {empty} has no samples")));
    }
    for (m, &k) in means.iter_mut().zip(&counts) {
        *m /= k as f64;
    }
    let overall = z.column_sum() / n as f64;
    let mut sw = DMatrix::zeros(d, d);
    for (i, &l) in labels.iter().enumerate() {
        let r = z.column(i) - &means[l];
        sw.ger(1.0, &r, &r, 1.0);
    }
    let mut sb = DMatrix::zeros(d, d);
    for (m, &k) in means.iter().zip(&counts) {
        let r = m - &overall;
        sb.ger(k as f64, &r, &r, 1.0);
    }
    Ok((symmetrize(&sw), symmetrize(&sb), means))
}

/// `S_W + εI` with `ε = 1e-6·tr(S_W)/d`, applied only when `S_W` is numerically
/// singular. A zero `S_W` falls back to a scale taken from `S_B`.
pub fn regularize_within(sw: &DMatrix<f64>, sb: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = sw.nrows();
    let eig = crate::linalg::sym_eig(sw)?;
    let (hi, lo) = (eig.values[0], eig.values[d - 1]);
    if lo > 1e-10 * hi && hi > 0.0 {
        return Ok(sw.clone());
    }
    let tr_w = sw.trace();
    let eps = if tr_w > 0.0 {
        1e-6 * tr_w / d as f64
    } else {
        1e-6 * sb.trace() / d as f64
    };
    if !(eps > 0.0) {
        return Err(Error::SingularScatter);
    }
    Ok(sw + DMatrix::identity(d, d) * eps)
}

/// Top `d_out` generalized eigenvectors of `(S_B, S_W)`; requires `1 ≤ d_out ≤ C − 1`.
pub fn lda_directions(z: &DMatrix<f64>, labels: &[usize], d_out: usize) -> Result<LdaSolution> {
    let c = labels.iter().max().map_or(0, |m| m + 1);
    if c < 2 {
        return Err(Error::InvalidArgument("LDA needs at least two classes".into()));
    }
    if d_out == 0 || d_out > c - 1 {
        return Err(Error::InvalidArgument(format!(
            "LDA supports 1..={} components for {c} classes, got {d_out}",
            c - 1
        )));
    }
    let (sw, sb, means) = scatter_matrices(z, labels)?;
    let sw = regularize_within(&sw, &sb)?;
    let eig = gen_eig(&sb, &sw).map_err(|_| Error::SingularScatter)?.top(d_out);
    Ok((eig.vectors, eig.values, means))
}

pub fn rlda_fit(points: &[Point], labels: &[usize], d_out: usize, mean: &MeanConfig) -> Result<RldaModel> {
    if points.len() != labels.len() {
        return Err(Error::LengthMismatch(points.len(), labels.len()));
    }
    let base = mean.mean(points)?;
    let z = lift(points, &base)?.vectors;
    let (projection, eigenvalues, means) = lda_directions(&z, labels, d_out)?;
    let spec = base.spec();
    let class_means_tangent = means
        .iter()
        .map(|m| spec.devectorize(m.as_slice()))
        .collect::<Result<Vec<_>>>()?;
    Ok(RldaModel { base, projection, class_means_tangent, eigenvalues })
}

impl RldaModel {
    pub fn transform(&self, points: &[Point]) -> Result<DMatrix<f64>> {
        tangent_coords(&self.base, &self.projection, points)
    }

    /// `Exp_base(U z_i)` for every row of `coords`.
    pub fn reconstruct(&self, coords: &DMatrix<f64>) -> Result<Vec<Point>> {
        if coords.ncols() != self.projection.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "coordinates have {} columns, model has {}",
                coords.ncols(),
                self.projection.ncols()
            )));
        }
        let spec = self.base.spec();
        let x = self.base.data();
        coords
            .row_iter()
            .map(|row| {
                let v = &self.projection * row.transpose();
                let z = raw_project(spec, x, &spec.devectorize(v.as_slice())?);
                Ok(Point::from_raw(spec, raw_exp(spec, x, &z)?))
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `tr(UᵀS_BU) / tr(UᵀS_WU)`.
pub fn fisher_ratio(u: &DMatrix<f64>, sw: &DMatrix<f64>, sb: &DMatrix<f64>) -> f64 {
    (u.transpose() * sb * u).trace() / (u.transpose() * sw * u).trace()
}
