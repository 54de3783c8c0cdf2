//! First-order Riemannian optimization.
//!
//! Objectives hand back their value and the Euclidean gradient of a smooth
//! ambient extension; [`riemannian_grad`] converts that into the gradient for
//! the manifold's metric.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetrize;
use crate::manifold::{project_tangent, raw_inner, retract, ManifoldSpec, Point, TangentVec};

/// Objective oracle: value and ambient Euclidean gradient at a point.
pub trait Objective {
    fn eval(&self, x: &Point) -> (f64, DMatrix<f64>);
}

impl<F> Objective for F
where
    F: Fn(&Point) -> (f64, DMatrix<f64>),
{
    fn eval(&self, x: &Point) -> (f64, DMatrix<f64>) {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RgdConfig {
    pub step_size: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Halve the step until the Armijo condition (constant 1e-4) holds.
    pub backtracking: bool,
}

impl Default for RgdConfig {
    fn default() -> Self {
        RgdConfig {
            step_size: 1.0,
            max_iter: 1000,
            grad_tol: 1e-8,
            backtracking: true,
        }
    }
}

impl RgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || self.max_iter == 0 || !(self.grad_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "invalid gradient descent config {self:?}"
            )));
        }
        Ok(())
    }
}

/// Per-iteration record of a descent run.
#[derive(Debug, Clone)]
pub struct RgdTrace {
    pub iterates_count: usize,
    pub grad_norms: Vec<f64>,
    pub objective_values: Vec<f64>,
    pub final_point: Point,
    pub converged: bool,
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
/// `‖grad‖² ≤ RESOLUTION·|f|` means no representable first-order decrease remains.
const RESOLUTION: f64 = 64.0 * f64::EPSILON;

/// Riemannian gradient from the ambient Euclidean gradient.
///
/// For metrics induced by the embedding (Euclidean, sphere, Grassmann) this is
/// the orthogonal tangent projection. The SPD affine-invariant metric gives
/// `X sym(G) X`, and the canonical Stiefel metric gives `G − U Gᵀ U`, which
/// coincides with `G − U sym(UᵀG)` whenever `UᵀG` is symmetric.
pub fn riemannian_grad(f_euclid_grad: &DMatrix<f64>, x: &Point) -> Result<TangentVec> {
    let g = f_euclid_grad;
    let data = match x.spec() {
        ManifoldSpec::Euclidean { .. } | ManifoldSpec::Sphere { .. } | ManifoldSpec::Grassmann { .. } => {
            return project_tangent(x, g);
        }
        ManifoldSpec::Spd { .. } => {
            check_shape(x, g)?;
            symmetrize(&(x.data() * symmetrize(g) * x.data()))
        }
        ManifoldSpec::Stiefel { .. } => {
            check_shape(x, g)?;
            let u = x.data();
            g - u * g.transpose() * u
        }
    };
    Ok(TangentVec::from_raw(x, data))
}

fn check_shape(x: &Point, g: &DMatrix<f64>) -> Result<()> {
    if g.shape() != x.spec().shape() {
        return Err(Error::ShapeMismatch(format!(
            "gradient is {}x{}, point is {}x{}",
            g.nrows(),
            g.ncols(),
            x.spec().shape().0,
            x.spec().shape().1
        )));
    }
    Ok(())
}

fn metric_norm(g: &TangentVec) -> f64 {
    let x = g.base();
    raw_inner(x.spec(), x.data(), g.data(), g.data()).max(0.0).sqrt()
}

/// Riemannian gradient descent `x ← Retr_x(−α grad f(x))`.
///
/// Iterates are re-projected onto the manifold after every step. The run stops
/// when the gradient norm drops below `grad_tol` or, with backtracking, when
/// `‖grad‖²` falls under the floating-point resolution of `f`. Hitting `max_iter`
/// or a backtracking stall is reported as [`Error::RgdNoConvergence`] carrying
/// the full trace.
pub fn rgd_minimize(objective: &impl Objective, x0: &Point, cfg: &RgdConfig) -> Result<RgdTrace> {
    cfg.validate()?;
    x0.validate()?;
    let spec = x0.spec();
    let mut x = x0.clone();
    let mut grad_norms = Vec::new();
    let mut objective_values = Vec::new();
    let (mut f, mut egrad) = objective.eval(&x);

    'descent: for iter in 0..cfg.max_iter {
        if !f.is_finite() || egrad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteObjective(iter));
        }
        let grad = riemannian_grad(&egrad, &x)?;
        let gnorm = metric_norm(&grad);
        objective_values.push(f);
        grad_norms.push(gnorm);
        // Below the resolution of f, Armijo cannot tell a good step from a bad one,
        // so a backtracking run is at a minimizer to working precision.
        let unresolvable = cfg.backtracking && gnorm * gnorm <= RESOLUTION * f.abs();
        if gnorm < cfg.grad_tol || unresolvable {
            return Ok(RgdTrace {
                iterates_count: grad_norms.len(),
                grad_norms,
                objective_values,
                final_point: x,
                converged: true,
            });
        }

        let mut alpha = cfg.step_size;
        let mut halvings = 0;
        let (next, next_f, next_g) = loop {
            let candidate = retract(&x, &grad.scaled(-alpha))?;
            let candidate = Point::projected(spec, candidate.data())?;
            let (cf, cg) = objective.eval(&candidate);
            let sufficient = cf <= f - ARMIJO * alpha * gnorm * gnorm;
            if !cfg.backtracking || (cf.is_finite() && sufficient) || halvings >= MAX_HALVINGS {
                if cfg.backtracking && !(cf <= f) {
                    // No decrease even at a vanishing step.
                    break 'descent;
                }
                break (candidate, cf, cg);
            }
            alpha *= 0.5;
            halvings += 1;
        };
        x = next;
        f = next_f;
        egrad = next_g;
    }

    let iterates_count = grad_norms.len();
    Err(Error::RgdNoConvergence {
        trace: Box::new(RgdTrace {
            iterates_count,
            grad_norms,
            objective_values,
            final_point: x,
            converged: false,
        }),
    })
}

impl RgdTrace {
    /// `min_{k<K} ‖grad f(x_k)‖²` for `K = 1..=len`.
    pub fn running_min_sq_grad(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.grad_norms
            .iter()
            .map(|g| {
                best = best.min(g * g);
                best
            })
            .collect()
    }
}
