//! Geometry kernel for the supported manifolds.
//!
//! Every manifold is handled through the same free functions ([`log_map`],
//! [`exp_map`], [`geodesic_dist`], [`project_tangent`], [`qr_retract`],
//! [`inner`]) dispatching on [`ManifoldSpec`]. Points and tangent vectors are
//! dense matrices: `d×1` for Euclidean and sphere data, `n×n` for SPD
//! matrices and `n×p` orthonormal bases for Grassmann and Stiefel.
//!
//! Metrics:
//! - Euclidean, sphere, Grassmann: Frobenius inner product of representatives.
//! - SPD: affine-invariant, `⟨Z, η⟩_X = tr(X⁻¹ Z X⁻¹ η)`.
//! - Stiefel: canonical, `⟨Z₁, Z₂⟩_U = tr(Z₁ᵀ (I − ½UUᵀ) Z₂)`.
//!
//! The Stiefel manifold only carries the operations needed for optimization
//! (projection, metric, QR retraction); its exponential and logarithm are not
//! provided.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, symmetrize};
use crate::serde_mat::MatrixRepr;

/// Tolerance for point and tangent-vector membership checks.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

/// Sphere log is undefined when the angle exceeds `π − ANTIPODAL_MARGIN`.
pub const ANTIPODAL_MARGIN: f64 = 1e-6;

/// SPD eigenvalues below this are treated as singular.
const SPD_SINGULAR: f64 = 1e-10;
const SPD_CLAMP: f64 = 1e-12;

/// Which manifold a dataset lives on, with its shape parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawSpec")]
pub enum ManifoldSpec {
    /// `R^dim`.
    Euclidean { dim: usize },
    /// Unit sphere in `R^dim`.
    Sphere { dim: usize },
    /// Symmetric positive definite `n×n` matrices.
    Spd { n: usize },
    /// `p`-dimensional subspaces of `R^n`.
    Grassmann { p: usize, n: usize },
    /// Orthonormal `p`-frames in `R^n`.
    Stiefel { p: usize, n: usize },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawSpec {
    Euclidean { dim: usize },
    Sphere { dim: usize },
    Spd { n: usize },
    Grassmann { p: usize, n: usize },
    Stiefel { p: usize, n: usize },
}

impl TryFrom<RawSpec> for ManifoldSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let spec = match raw {
            RawSpec::Euclidean { dim } => ManifoldSpec::Euclidean { dim },
            RawSpec::Sphere { dim } => ManifoldSpec::Sphere { dim },
            RawSpec::Spd { n } => ManifoldSpec::Spd { n },
            RawSpec::Grassmann { p, n } => ManifoldSpec::Grassmann { p, n },
            RawSpec::Stiefel { p, n } => ManifoldSpec::Stiefel { p, n },
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl ManifoldSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ManifoldSpec::Euclidean { dim } | ManifoldSpec::Spd { n: dim } if dim == 0 => {
                Err(Error::InvalidSpec(format!("{self}: dimension must be positive")))
            }
            ManifoldSpec::Sphere { dim } if dim < 2 => {
                Err(Error::InvalidSpec(format!("{self}: sphere needs dim >= 2")))
            }
            ManifoldSpec::Grassmann { p, n } | ManifoldSpec::Stiefel { p, n }
                if p == 0 || p > n =>
            {
                Err(Error::InvalidSpec(format!("{self}: need 1 <= p <= n")))
            }
            _ => Ok(()),
        }
    }

    /// Shape `(rows, cols)` of point and tangent representatives.
    pub fn shape(&self) -> (usize, usize) {
        match *self {
            ManifoldSpec::Euclidean { dim } | ManifoldSpec::Sphere { dim } => (dim, 1),
            ManifoldSpec::Spd { n } => (n, n),
            ManifoldSpec::Grassmann { p, n } | ManifoldSpec::Stiefel { p, n } => (n, p),
        }
    }

    /// Length of a vectorized tangent vector (row-major flatten of the representative).
    pub fn vec_dim(&self) -> usize {
        let (r, c) = self.shape();
        r * c
    }

    /// Dimension of the manifold itself.
    pub fn intrinsic_dim(&self) -> usize {
        match *self {
            ManifoldSpec::Euclidean { dim } => dim,
            ManifoldSpec::Sphere { dim } => dim - 1,
            ManifoldSpec::Spd { n } => n * (n + 1) / 2,
            ManifoldSpec::Grassmann { p, n } => p * (n - p),
            ManifoldSpec::Stiefel { p, n } => n * p - p * (p + 1) / 2,
        }
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self, ManifoldSpec::Euclidean { .. })
    }

    fn check_shape(&self, m: &DMatrix<f64>, what: &str) -> Result<()> {
        if m.shape() != self.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{what} is {}x{}, {self} expects {}x{}",
                m.nrows(),
                m.ncols(),
                self.shape().0,
                self.shape().1
            )));
        }
        Ok(())
    }

    /// Row-major flatten of a representative.
    pub fn vectorize(&self, m: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_column_slice(m.transpose().as_slice())
    }

    /// Inverse of [`ManifoldSpec::vectorize`].
    pub fn devectorize(&self, v: &[f64]) -> Result<DMatrix<f64>> {
        let (r, c) = self.shape();
        if v.len() != r * c {
            return Err(Error::ShapeMismatch(format!(
                "vector of length {} cannot be reshaped for {self}",
                v.len()
            )));
        }
        Ok(DMatrix::from_row_slice(r, c, v))
    }

    /// Map an ambient matrix onto the manifold: normalize, symmetrize and
    /// clamp the spectrum, or take the orthonormal QR factor.
    pub fn project_point(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_shape(m, "matrix")?;
        match self {
            ManifoldSpec::Euclidean { .. } => Ok(m.clone()),
            ManifoldSpec::Sphere { .. } => {
                let norm = m.norm();
                if !(norm > 0.0) || !norm.is_finite() {
                    return Err(Error::Domain("cannot normalize a zero vector".into()));
                }
                Ok(m / norm)
            }
            ManifoldSpec::Spd { .. } => Ok(linalg::sym_apply(m, |l| l.max(SPD_CLAMP))),
            ManifoldSpec::Grassmann { .. } | ManifoldSpec::Stiefel { .. } => linalg::qf(m),
        }
    }

    /// Check the point constraints of this manifold.
    pub fn check_point(&self, m: &DMatrix<f64>) -> Result<()> {
        self.check_shape(m, "point")?;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPoint("non-finite entry".into()));
        }
        match *self {
            ManifoldSpec::Euclidean { .. } => Ok(()),
            ManifoldSpec::Sphere { .. } => {
                let err = (m.norm() - 1.0).abs();
                if err > MEMBERSHIP_TOL {
                    return Err(Error::InvalidPoint(format!("| |x| - 1 | = {err:.3e}")));
                }
                Ok(())
            }
            ManifoldSpec::Spd { .. } => {
                let asym = (m - m.transpose()).norm();
                if asym > MEMBERSHIP_TOL * m.norm().max(1.0) {
                    return Err(Error::InvalidPoint(format!("asymmetry {asym:.3e}")));
                }
                let min = SymmetricEigen::new(symmetrize(m)).eigenvalues.min();
                if !(min > 0.0) {
                    return Err(Error::InvalidPoint(format!("smallest eigenvalue {min:.3e}")));
                }
                Ok(())
            }
            ManifoldSpec::Grassmann { p, .. } | ManifoldSpec::Stiefel { p, .. } => {
                let err = (m.transpose() * m - DMatrix::identity(p, p)).norm();
                if err > MEMBERSHIP_TOL {
                    return Err(Error::InvalidPoint(format!("|XᵀX - I| = {err:.3e}")));
                }
                Ok(())
            }
        }
    }

    /// Check the tangent-space constraints at `base`.
    pub fn check_tangent(&self, base: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<()> {
        self.check_shape(z, "tangent vector")?;
        let scale = z.norm().max(1.0);
        let err = match self {
            ManifoldSpec::Euclidean { .. } => 0.0,
            ManifoldSpec::Sphere { .. } => base.dot(z).abs(),
            ManifoldSpec::Spd { .. } => (z - z.transpose()).norm(),
            ManifoldSpec::Grassmann { .. } => (base.transpose() * z).norm(),
            ManifoldSpec::Stiefel { .. } => {
                let a = base.transpose() * z;
                (&a + a.transpose()).norm()
            }
        };
        if err > MEMBERSHIP_TOL * scale {
            return Err(Error::InvalidPoint(format!(
                "not a tangent vector of {self}: constraint residual {err:.3e}"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for ManifoldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ManifoldSpec::Euclidean { dim } => write!(f, "euclidean:{dim}"),
            ManifoldSpec::Sphere { dim } => write!(f, "sphere:{dim}"),
            ManifoldSpec::Spd { n } => write!(f, "spd:{n}"),
            ManifoldSpec::Grassmann { p, n } => write!(f, "grassmann:{p},{n}"),
            ManifoldSpec::Stiefel { p, n } => write!(f, "stiefel:{p},{n}"),
        }
    }
}

impl FromStr for ManifoldSpec {
    type Err = Error;

    /// Parses the short form produced by `Display`, e.g. `sphere:3` or `grassmann:2,5`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidSpec(format!("cannot parse manifold spec '{s}'"));
        let (kind, args) = s.trim().split_once(':').ok_or_else(bad)?;
        let nums = args
            .split(',')
            .map(|a| a.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let spec = match (kind.trim().to_ascii_lowercase().as_str(), nums.as_slice()) {
            ("euclidean", &[dim]) => ManifoldSpec::Euclidean { dim },
            ("sphere", &[dim]) => ManifoldSpec::Sphere { dim },
            ("spd", &[n]) => ManifoldSpec::Spd { n },
            ("grassmann", &[p, n]) => ManifoldSpec::Grassmann { p, n },
            ("stiefel", &[p, n]) => ManifoldSpec::Stiefel { p, n },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A point on a manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointRepr", into = "PointRepr")]
pub struct Point {
    spec: ManifoldSpec,
    data: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct PointRepr {
    spec: ManifoldSpec,
    #[serde(flatten)]
    data: MatrixRepr,
}

impl TryFrom<PointRepr> for Point {
    type Error = Error;

    fn try_from(r: PointRepr) -> Result<Self> {
        let data = r
            .data
            .into_matrix::<serde_json::Error>()
            .map_err(Error::from)?;
        Point::new(r.spec, data)
    }
}

impl From<Point> for PointRepr {
    fn from(p: Point) -> Self {
        PointRepr {
            spec: p.spec,
            data: MatrixRepr::from(&p.data),
        }
    }
}

impl Point {
    /// Validating constructor.
    pub fn new(spec: ManifoldSpec, data: DMatrix<f64>) -> Result<Self> {
        spec.validate()?;
        spec.check_point(&data)?;
        Ok(Point { spec, data })
    }

    /// Build from the row-major flattening used in CSV files.
    pub fn from_slice(spec: ManifoldSpec, values: &[f64]) -> Result<Self> {
        Point::new(spec, spec.devectorize(values)?)
    }

    /// Project an ambient matrix onto the manifold, then wrap it.
    pub fn projected(spec: ManifoldSpec, ambient: &DMatrix<f64>) -> Result<Self> {
        spec.validate()?;
        let data = spec.project_point(ambient)?;
        Ok(Point { spec, data })
    }

    /// Skips validation; callers guarantee the manifold constraints.
    pub(crate) fn from_raw(spec: ManifoldSpec, data: DMatrix<f64>) -> Self {
        debug_assert_eq!(data.shape(), spec.shape());
        Point { spec, data }
    }

    pub fn spec(&self) -> ManifoldSpec {
        self.spec
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    /// Row-major flattening.
    pub fn to_vec(&self) -> Vec<f64> {
        self.data.transpose().as_slice().to_vec()
    }

    /// Re-check the manifold constraints.
    pub fn validate(&self) -> Result<()> {
        self.spec.check_point(&self.data)
    }

    /// The same coordinates viewed as a Euclidean point of matching vector dimension.
    pub fn as_euclidean(&self) -> Point {
        let spec = ManifoldSpec::Euclidean {
            dim: self.spec.vec_dim(),
        };
        Point::from_raw(spec, DMatrix::from_column_slice(spec.vec_dim(), 1, &self.to_vec()))
    }
}

/// A vector in the tangent space at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVec {
    base: Point,
    data: DMatrix<f64>,
}

impl TangentVec {
    /// Validating constructor.
    pub fn new(base: &Point, data: DMatrix<f64>) -> Result<Self> {
        base.spec.check_tangent(&base.data, &data)?;
        Ok(TangentVec {
            base: base.clone(),
            data,
        })
    }

    pub fn zero(base: &Point) -> Self {
        let (r, c) = base.spec.shape();
        TangentVec {
            base: base.clone(),
            data: DMatrix::zeros(r, c),
        }
    }

    pub(crate) fn from_raw(base: &Point, data: DMatrix<f64>) -> Self {
        TangentVec {
            base: base.clone(),
            data,
        }
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    /// Row-major flattening.
    pub fn vectorize(&self) -> DVector<f64> {
        self.base.spec.vectorize(&self.data)
    }

    pub fn scaled(&self, t: f64) -> TangentVec {
        TangentVec {
            base: self.base.clone(),
            data: &self.data * t,
        }
    }

    /// Norm in the Riemannian metric at the base point.
    pub fn norm(&self) -> f64 {
        raw_inner(self.base.spec, &self.base.data, &self.data, &self.data)
            .max(0.0)
            .sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        self.base.spec.check_tangent(&self.base.data, &self.data)
    }
}

fn same_spec(a: &Point, b: &Point) -> Result<()> {
    if a.spec != b.spec {
        return Err(Error::ShapeMismatch(format!(
            "points live on {} and {}",
            a.spec, b.spec
        )));
    }
    Ok(())
}

fn based_at(x: &Point, v: &TangentVec) -> Result<()> {
    same_spec(x, &v.base)?;
    x.spec.check_shape(&v.data, "tangent vector")
}

/// Logarithm map `Log_x(y)`.
pub fn log_map(x: &Point, y: &Point) -> Result<TangentVec> {
    same_spec(x, y)?;
    let data = raw_log(x.spec, &x.data, &y.data)?;
    Ok(TangentVec::from_raw(x, data))
}

/// Exponential map `Exp_x(v)`.
pub fn exp_map(x: &Point, v: &TangentVec) -> Result<Point> {
    based_at(x, v)?;
    Ok(Point::from_raw(x.spec, raw_exp(x.spec, &x.data, &v.data)?))
}

/// Geodesic distance.
pub fn geodesic_dist(x: &Point, y: &Point) -> Result<f64> {
    same_spec(x, y)?;
    raw_dist(x.spec, &x.data, &y.data)
}

/// Orthogonal projection of an ambient matrix onto `T_x M`.
pub fn project_tangent(x: &Point, v_ambient: &DMatrix<f64>) -> Result<TangentVec> {
    x.spec.check_shape(v_ambient, "ambient vector")?;
    Ok(TangentVec::from_raw(x, raw_project(x.spec, &x.data, v_ambient)))
}

/// QR retraction `qf(X + Z)` for orthonormal-frame representatives
/// (Stiefel, Grassmann; on the sphere it reduces to normalization).
pub fn qr_retract(x: &Point, v: &TangentVec) -> Result<Point> {
    based_at(x, v)?;
    match x.spec {
        ManifoldSpec::Stiefel { .. } | ManifoldSpec::Grassmann { .. } | ManifoldSpec::Sphere { .. } => {
            Ok(Point::from_raw(x.spec, linalg::qf(&(&x.data + &v.data))?))
        }
        other => Err(Error::Unsupported(format!("QR retraction on {other}"))),
    }
}

/// Retraction used by the optimizer: QR on Stiefel/Grassmann, exponential map otherwise.
pub fn retract(x: &Point, v: &TangentVec) -> Result<Point> {
    match x.spec {
        ManifoldSpec::Stiefel { .. } | ManifoldSpec::Grassmann { .. } => qr_retract(x, v),
        _ => exp_map(x, v),
    }
}

/// Riemannian metric `⟨u, v⟩_x`.
pub fn inner(x: &Point, u: &TangentVec, v: &TangentVec) -> Result<f64> {
    based_at(x, u)?;
    based_at(x, v)?;
    Ok(raw_inner(x.spec, &x.data, &u.data, &v.data))
}

// ---------------------------------------------------------------------------
// Matrix-level kernels. Inputs are assumed to satisfy the shape contract.

pub(crate) fn raw_inner(
    spec: ManifoldSpec,
    x: &DMatrix<f64>,
    u: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> f64 {
    match spec {
        ManifoldSpec::Euclidean { .. } | ManifoldSpec::Sphere { .. } | ManifoldSpec::Grassmann { .. } => {
            u.dot(v)
        }
        ManifoldSpec::Spd { .. } => {
            let xinv = spd_inverse(x);
            (&xinv * u * &xinv).dot(&v.transpose())
        }
        ManifoldSpec::Stiefel { .. } => {
            let xu = x.transpose() * u;
            let xv = x.transpose() * v;
            u.dot(v) - 0.5 * xu.dot(&xv)
        }
    }
}

pub(crate) fn raw_project(spec: ManifoldSpec, x: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    match spec {
        ManifoldSpec::Euclidean { .. } => v.clone(),
        ManifoldSpec::Sphere { .. } => v - x * x.dot(v),
        ManifoldSpec::Spd { .. } => symmetrize(v),
        ManifoldSpec::Grassmann { .. } => v - x * (x.transpose() * v),
        ManifoldSpec::Stiefel { .. } => v - x * symmetrize(&(x.transpose() * v)),
    }
}

pub(crate) fn raw_log(spec: ManifoldSpec, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    match spec {
        ManifoldSpec::Euclidean { .. } => Ok(y - x),
        ManifoldSpec::Sphere { .. } => sphere_log(x, y),
        ManifoldSpec::Spd { .. } => {
            let (sqrt, isqrt) = spd_sqrt_pair(x)?;
            let inner = spd_log_sym(&(&isqrt * y * &isqrt))?;
            Ok(symmetrize(&(&sqrt * inner * &sqrt)))
        }
        ManifoldSpec::Grassmann { .. } => grassmann_log(x, y),
        ManifoldSpec::Stiefel { .. } => Err(Error::Unsupported("Stiefel logarithm map".into())),
    }
}

pub(crate) fn raw_exp(spec: ManifoldSpec, x: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    match spec {
        ManifoldSpec::Euclidean { .. } => Ok(x + v),
        ManifoldSpec::Sphere { .. } => Ok(sphere_exp(x, v)),
        ManifoldSpec::Spd { .. } => {
            let (sqrt, isqrt) = spd_sqrt_pair(x)?;
            let inner = linalg::sym_apply(&(&isqrt * v * &isqrt), f64::exp);
            Ok(symmetrize(&(&sqrt * inner * &sqrt)))
        }
        ManifoldSpec::Grassmann { .. } => grassmann_exp(x, v),
        ManifoldSpec::Stiefel { .. } => Err(Error::Unsupported("Stiefel exponential map".into())),
    }
}

pub(crate) fn raw_dist(spec: ManifoldSpec, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    match spec {
        ManifoldSpec::Euclidean { .. } => Ok((x - y).norm()),
        // 2·asin(|x−y|/2) is exactly symmetric and accurate at both ends of [0, π].
        ManifoldSpec::Sphere { .. } => Ok(2.0 * ((x - y).norm() / 2.0).min(1.0).asin()),
        ManifoldSpec::Spd { .. } => {
            let (_, isqrt) = spd_sqrt_pair(x)?;
            let m = symmetrize(&(&isqrt * y * &isqrt));
            let eig = SymmetricEigen::new(m);
            check_spd_spectrum(&eig.eigenvalues)?;
            Ok(eig
                .eigenvalues
                .iter()
                .map(|&l| l.max(SPD_CLAMP).ln().powi(2))
                .sum::<f64>()
                .sqrt())
        }
        ManifoldSpec::Grassmann { .. } => Ok(principal_angles(x, y)
            .iter()
            .map(|t| t * t)
            .sum::<f64>()
            .sqrt()),
        ManifoldSpec::Stiefel { .. } => Err(Error::Unsupported("Stiefel geodesic distance".into())),
    }
}

// --- sphere -----------------------------------------------------------------

fn sphere_log(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let c = x.dot(y);
    let u = y - x * c;
    let s = u.norm();
    let theta = s.atan2(c);
    if theta > PI - ANTIPODAL_MARGIN {
        return Err(Error::Domain(format!(
            "sphere log undefined for (near-)antipodal points, angle {theta:.9}"
        )));
    }
    let factor = if theta < 1e-6 {
        1.0 + theta * theta / 6.0
    } else {
        theta / s
    };
    Ok(u * factor)
}

fn sphere_exp(x: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let t = v.norm();
    let sinc = if t < 1e-6 { 1.0 - t * t / 6.0 } else { t.sin() / t };
    let y = x * t.cos() + v * sinc;
    let n = y.norm();
    y / n
}

// --- SPD ----------------------------------------------------------------------

fn check_spd_spectrum(values: &DVector<f64>) -> Result<()> {
    let min = values.min();
    if !(min >= SPD_SINGULAR) {
        return Err(Error::Domain(format!(
            "SPD matrix is (near-)singular: smallest eigenvalue {min:.3e}"
        )));
    }
    Ok(())
}

/// `(X^{1/2}, X^{-1/2})`.
fn spd_sqrt_pair(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let eig = SymmetricEigen::new(symmetrize(x));
    check_spd_spectrum(&eig.eigenvalues)?;
    let sqrt = linalg::sym_apply_eig(&eig.eigenvectors, &eig.eigenvalues, |l| l.sqrt());
    let isqrt = linalg::sym_apply_eig(&eig.eigenvectors, &eig.eigenvalues, |l| 1.0 / l.sqrt());
    Ok((sqrt, isqrt))
}

fn spd_log_sym(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(symmetrize(m));
    check_spd_spectrum(&eig.eigenvalues)?;
    Ok(linalg::sym_apply_eig(&eig.eigenvectors, &eig.eigenvalues, |l| {
        l.max(SPD_CLAMP).ln()
    }))
}

fn spd_inverse(x: &DMatrix<f64>) -> DMatrix<f64> {
    linalg::sym_apply(x, |l| 1.0 / l)
}

/// Matrix logarithm of an SPD matrix.
pub fn spd_log(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spd_log_sym(x)
}

/// Matrix exponential of a symmetric matrix.
pub fn sym_exp(z: &DMatrix<f64>) -> DMatrix<f64> {
    linalg::sym_apply(z, f64::exp)
}

// --- Grassmann ----------------------------------------------------------------

fn grassmann_log(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let xty = x.transpose() * y;
    let sv = linalg::singular_values(&xty);
    if !(sv.min() > 1e-12) {
        return Err(Error::Domain(format!(
            "XᵀY is singular (smallest singular value {:.3e}); subspaces contain orthogonal directions",
            sv.min()
        )));
    }
    let residual = y - x * &xty;
    // M = residual · (XᵀY)⁻¹, via (XᵀY)ᵀ Mᵀ = residualᵀ
    let mt = xty
        .transpose()
        .lu()
        .solve(&residual.transpose())
        .ok_or_else(|| Error::Domain("XᵀY is singular".into()))?;
    let m = mt.transpose();
    let (u, s, vt) = linalg::thin_svd(&m);
    let mut scaled = u;
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= s[j].atan();
    }
    let z = scaled * vt;
    // Clean the component along X left by round-off.
    Ok(&z - x * (x.transpose() * &z))
}

fn grassmann_exp(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (u, s, vt) = linalg::thin_svd(z);
    let v = vt.transpose();
    let mut xv_cos = x * &v;
    let mut u_sin = u;
    for j in 0..s.len() {
        xv_cos.column_mut(j).scale_mut(s[j].cos());
        u_sin.column_mut(j).scale_mut(s[j].sin());
    }
    let y = (xv_cos + u_sin) * vt;
    // Exp is orthonormal in exact arithmetic; remove round-off drift.
    linalg::qf(&y)
}

/// Principal angles between `span(X)` and `span(Y)`, ascending.
pub fn principal_angles(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Vec<f64> {
    let xty = x.transpose() * y;
    let mut cos: Vec<f64> = linalg::singular_values(&xty)
        .iter()
        .map(|c| c.clamp(-1.0, 1.0))
        .collect();
    cos.sort_by(|a, b| b.total_cmp(a));
    let residual = y - x * (x.transpose() * y);
    let mut sin: Vec<f64> = linalg::singular_values(&residual)
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    sin.sort_by(|a, b| a.total_cmp(b));
    // Pair the k-th largest cosine with the k-th smallest sine; atan2 stays
    // accurate where acos alone loses digits near zero angle.
    cos.iter()
        .zip(sin.iter().chain(std::iter::repeat(&0.0)))
        .map(|(&c, &s)| s.atan2(c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn sphere(v: &[f64]) -> Point {
        Point::new(
            ManifoldSpec::Sphere { dim: v.len() },
            DMatrix::from_column_slice(v.len(), 1, v),
        )
        .unwrap()
    }

    fn spd(rows: usize, v: &[f64]) -> Point {
        Point::new(ManifoldSpec::Spd { n: rows }, DMatrix::from_row_slice(rows, rows, v)).unwrap()
    }

    fn frame(kind: fn(usize, usize) -> ManifoldSpec, n: usize, p: usize, v: &[f64]) -> Point {
        Point::new(kind(p, n), DMatrix::from_row_slice(n, p, v)).unwrap()
    }

    fn grassmann(p: usize, n: usize) -> ManifoldSpec {
        ManifoldSpec::Grassmann { p, n }
    }

    fn stiefel(p: usize, n: usize) -> ManifoldSpec {
        ManifoldSpec::Stiefel { p, n }
    }

    #[test]
    fn spec_validation() {
        assert!(ManifoldSpec::Sphere { dim: 1 }.validate().is_err());
        assert!(ManifoldSpec::Grassmann { p: 3, n: 2 }.validate().is_err());
        assert!(ManifoldSpec::Stiefel { p: 0, n: 2 }.validate().is_err());
        assert!(ManifoldSpec::Euclidean { dim: 0 }.validate().is_err());
        assert!(ManifoldSpec::Spd { n: 2 }.validate().is_ok());
        let parsed: ManifoldSpec = "grassmann:2,5".parse().unwrap();
        assert_eq!(parsed, ManifoldSpec::Grassmann { p: 2, n: 5 });
        assert_eq!(parsed.to_string().parse::<ManifoldSpec>().unwrap(), parsed);
        assert!("sphere:1".parse::<ManifoldSpec>().is_err());
        let json = serde_json::to_string(&ManifoldSpec::Sphere { dim: 3 }).unwrap();
        assert_eq!(json, r#"{"kind":"sphere","dim":3}"#);
        assert!(serde_json::from_str::<ManifoldSpec>(r#"{"kind":"sphere","dim":1}"#).is_err());
    }

    #[test]
    fn point_validation() {
        let spec = ManifoldSpec::Sphere { dim: 3 };
        assert!(Point::new(spec, DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0])).is_err());
        assert!(Point::new(ManifoldSpec::Spd { n: 2 }, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
        assert!(Point::new(spec, DMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn sphere_log_exp_examples() {
        let x = sphere(&[1.0, 0.0, 0.0]);
        let y = sphere(&[0.0, 1.0, 0.0]);
        let v = log_map(&x, &y).unwrap();
        assert!((v.data() - DMatrix::from_column_slice(3, 1, &[0.0, FRAC_PI_2, 0.0])).norm() < 1e-15);
        let back = exp_map(&x, &v).unwrap();
        assert!((back.data() - y.data()).norm() < 1e-15);
        assert_eq!(exp_map(&x, &TangentVec::zero(&x)).unwrap(), x);
    }

    #[test]
    fn sphere_antipodal_log_is_domain_error() {
        let x = sphere(&[1.0, 0.0, 0.0]);
        let y = sphere(&[-1.0, 0.0, 0.0]);
        assert!(matches!(log_map(&x, &y), Err(Error::Domain(_))));
        assert!((geodesic_dist(&x, &y).unwrap() - PI).abs() < 1e-15);
    }

    #[test]
    fn sphere_log_small_angle_branch() {
        let x = sphere(&[1.0, 0.0, 0.0]);
        let t: f64 = 1e-8;
        let y = sphere(&[t.cos(), t.sin(), 0.0]);
        let v = log_map(&x, &y).unwrap();
        assert!((v.data()[(1, 0)] - t).abs() < 1e-20);
        assert!(v.data()[(0, 0)].abs() < 1e-20);
    }

    #[test]
    fn spd_examples() {
        let x = spd(2, &[1.0, 0.0, 0.0, 1.0]);
        let y = spd(2, &[E, 0.0, 0.0, 1.0]);
        let z = log_map(&x, &y).unwrap();
        assert!((z.data() - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).norm() < 1e-14);
        let back = exp_map(&x, &z).unwrap();
        assert!((back.data() - y.data()).norm() < 1e-14);
        let y2 = spd(2, &[E * E, 0.0, 0.0, 1.0]);
        assert!((geodesic_dist(&x, &y2).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn spd_metric_at_scaled_identity() {
        // tr(X⁻¹ I X⁻¹ I) with X = 2I in 2 dims = 2 · 1/4
        let x = spd(2, &[2.0, 0.0, 0.0, 2.0]);
        let z = TangentVec::new(&x, DMatrix::identity(2, 2)).unwrap();
        assert!((inner(&x, &z, &z).unwrap() - 0.5).abs() < 1e-15);
        let id = spd(2, &[1.0, 0.0, 0.0, 1.0]);
        let a = TangentVec::new(&id, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0])).unwrap();
        let b = TangentVec::new(&id, DMatrix::from_row_slice(2, 2, &[0.5, -1.0, -1.0, 2.0])).unwrap();
        let expected = (a.data() * b.data()).trace();
        assert!((inner(&id, &a, &b).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn spd_singular_is_domain_error() {
        let x = spd(2, &[1.0, 0.0, 0.0, 1.0]);
        let y = Point::from_raw(ManifoldSpec::Spd { n: 2 }, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-13]));
        assert!(matches!(log_map(&x, &y), Err(Error::Domain(_))));
    }

    #[test]
    fn grassmann_examples() {
        let x = frame(grassmann, 2, 1, &[1.0, 0.0]);
        let y = frame(grassmann, 2, 1, &[FRAC_1_SQRT_2, FRAC_1_SQRT_2]);
        let v = log_map(&x, &y).unwrap();
        assert!((v.norm() - FRAC_PI_4).abs() < 1e-15);
        assert!((geodesic_dist(&x, &y).unwrap() - FRAC_PI_4).abs() < 1e-15);
        // Sign flip of the representative is the same subspace.
        let yneg = frame(grassmann, 2, 1, &[-FRAC_1_SQRT_2, -FRAC_1_SQRT_2]);
        assert!((geodesic_dist(&x, &yneg).unwrap() - FRAC_PI_4).abs() < 1e-15);
        let back = exp_map(&x, &v).unwrap();
        assert!(geodesic_dist(&back, &y).unwrap() < 1e-12);
    }

    #[test]
    fn grassmann_orthogonal_subspaces_have_no_log() {
        let x = frame(grassmann, 2, 1, &[1.0, 0.0]);
        let y = frame(grassmann, 2, 1, &[0.0, 1.0]);
        assert!(matches!(log_map(&x, &y), Err(Error::Domain(_))));
        assert!((geodesic_dist(&x, &y).unwrap() - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let x = sphere(&[1.0, 0.0]);
        let v = project_tangent(&x, &DMatrix::from_column_slice(2, 1, &[3.0, 4.0])).unwrap();
        assert_eq!(v.data().as_slice(), &[0.0, 4.0]);
        let u = frame(stiefel, 2, 1, &[1.0, 0.0]);
        let v = project_tangent(&u, &DMatrix::from_row_slice(2, 1, &[5.0, 2.0])).unwrap();
        assert_eq!(v.data().as_slice(), &[0.0, 2.0]);
        let twice = project_tangent(&u, v.data()).unwrap();
        assert_eq!(twice, v);
    }

    #[test]
    fn qr_retraction_examples() {
        let u = frame(stiefel, 2, 1, &[1.0, 0.0]);
        let z = TangentVec::new(&u, DMatrix::from_row_slice(2, 1, &[0.0, 1.0])).unwrap();
        let r = qr_retract(&u, &z).unwrap();
        assert!((r.data() - DMatrix::from_row_slice(2, 1, &[FRAC_1_SQRT_2, FRAC_1_SQRT_2])).norm() < 1e-15);
        assert_eq!(qr_retract(&u, &TangentVec::zero(&u)).unwrap(), u);
        let e = Point::new(ManifoldSpec::Euclidean { dim: 2 }, DMatrix::zeros(2, 1)).unwrap();
        assert!(matches!(qr_retract(&e, &TangentVec::zero(&e)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn stiefel_has_no_exp_or_log() {
        let u = frame(stiefel, 2, 1, &[1.0, 0.0]);
        assert!(matches!(exp_map(&u, &TangentVec::zero(&u)), Err(Error::Unsupported(_))));
        assert!(matches!(log_map(&u, &u), Err(Error::Unsupported(_))));
    }

    #[test]
    fn spec_mismatch_is_reported() {
        let a = sphere(&[1.0, 0.0, 0.0]);
        let b = sphere(&[1.0, 0.0]);
        assert!(matches!(log_map(&a, &b), Err(Error::ShapeMismatch(_))));
        assert!(matches!(geodesic_dist(&a, &b), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn point_json_roundtrip() {
        let x = spd(2, &[2.0, 0.5, 0.5, 1.0]);
        let json = serde_json::to_string(&x).unwrap();
        assert_eq!(
            json,
            r#"{"spec":{"kind":"spd","n":2},"rows":2,"cols":2,"data":[2.0,0.5,0.5,1.0]}"#
        );
        assert_eq!(serde_json::from_str::<Point>(&json).unwrap(), x);
    }
}
