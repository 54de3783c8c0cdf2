//! Soft-margin SVM on manifolds: linear in the tangent space at the mean, or
//! kernelized with the geodesic Gaussian kernel `exp(−d²/(2σ²))`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{median, pairwise_distances};
use crate::linalg::sym_eig;
use crate::manifold::{raw_dist, raw_inner, raw_log, Point};
use crate::stats::{lift, MeanConfig};

/// Diagonal jitter added to every kernel Gram matrix.
pub const GRAM_JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SvmMode {
    TangentLinear,
    /// `sigma: None` uses the median pairwise geodesic distance.
    GeodesicKernel { sigma: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsvmConfig {
    pub mode: SvmMode,
    pub c_reg: f64,
    /// Stop when the maximal KKT violation drops below this.
    pub tol: f64,
    /// One sweep is `N` pair updates.
    pub max_sweeps_per_sample: usize,
    pub mean: MeanConfig,
}

impl Default for RsvmConfig {
    fn default() -> Self {
        RsvmConfig {
            mode: SvmMode::TangentLinear,
            c_reg: 1.0,
            tol: 1e-5,
            max_sweeps_per_sample: 10,
            mean: MeanConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SvmDecision {
    TangentLinear {
        base: Point,
        /// Normal vector in `T_base M`.
        #[serde(with = "crate::serde_mat::matrix")]
        w: DMatrix<f64>,
    },
    GeodesicKernel {
        sigma: f64,
        alphas: Vec<f64>,
        support_points: Vec<Point>,
        support_labels: Vec<i32>,
        /// Smallest eigenvalue of the jittered Gram matrix.
        gram_min_eig: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsvmModel {
    pub decision: SvmDecision,
    pub b: f64,
    pub c_reg: f64,
    /// Duals for every training sample (`0 ≤ α_i ≤ C`).
    pub dual: Vec<f64>,
    pub kkt_gap: f64,
}

/// Dual solution of `min ½αᵀQα − 1ᵀα`, `Q_ij = y_i y_j K_ij`, `0 ≤ α ≤ C`, `yᵀα = 0`.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub b: f64,
    pub gap: f64,
}

/// Sequential minimal optimization with maximal-violating-pair selection.
pub fn smo(k: &DMatrix<f64>, y: &[f64], c: f64, tol: f64, max_updates: usize) -> Result<DualSolution> {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    // Gradient of the dual objective: G = Qα − 1.
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);
    let mut gap = f64::INFINITY;
    for _ in 0..max_updates {
        let mut i = usize::MAX;
        let mut m_up = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut m_low = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > m_up {
                m_up = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < m_low {
                m_low = v;
                j = t;
            }
        }
        gap = m_up - m_low;
        if i == usize::MAX || j == usize::MAX || gap < tol {
            return Ok(DualSolution { b: intercept(&alpha, &grad, y, c), alpha, gap: gap.max(0.0) });
        }
        // Move along y_i e_i − y_j e_j, keeping yᵀα fixed.
        let quad = (k[(i, i)] + k[(j, j)] - 2.0 * k[(i, j)]).max(1e-12);
        let room_i = if y[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let room_j = if y[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        let step = (gap / quad).min(room_i).min(room_j);
        // Snap to the box when a bound is hit so membership tests stay exact.
        alpha[i] = if step == room_i { if y[i] > 0.0 { c } else { 0.0 } } else { alpha[i] + y[i] * step };
        alpha[j] = if step == room_j { if y[j] > 0.0 { 0.0 } else { c } } else { alpha[j] - y[j] * step };
        for t in 0..n {
            grad[t] += y[t] * step * (k[(t, i)] - k[(t, j)]);
        }
    }
    Err(Error::SvmNoConvergence { gap })
}

/// Average over free vectors of `−y_i G_i`; midpoint of the feasible range otherwise.
fn intercept(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        let at_lower = alpha[t] <= 0.0;
        let at_upper = alpha[t] >= c;
        if !at_lower && !at_upper {
            sum += v;
            count += 1;
        } else if (at_lower && y[t] > 0.0) || (at_upper && y[t] < 0.0) {
            lb = lb.max(v);
        } else {
            ub = ub.min(v);
        }
    }
    if count > 0 {
        sum / count as f64
    } else if ub.is_finite() && lb.is_finite() {
        0.5 * (ub + lb)
    } else if ub.is_finite() {
        ub
    } else {
        lb
    }
}

fn check_labels(points: &[Point], labels: &[i32]) -> Result<Vec<f64>> {
    if points.len() != labels.len() {
        return Err(Error::LengthMismatch(points.len(), labels.len()));
    }
    if let Some(bad) = labels.iter().find(|&&l| l != 1 && l != -1) {
        return Err(Error::InvalidArgument(format!("SVM labels must be +1 or -1, got {bad}")));
    }
    if !labels.contains(&1) || !labels.contains(&-1) {
        return Err(Error::InvalidArgument("SVM training needs both classes".into()));
    }
    Ok(labels.iter().map(|&l| f64::from(l)).collect())
}

/// Median pairwise geodesic distance.
pub fn median_distance(points: &[Point]) -> Result<f64> {
    let d = pairwise_distances(points)?;
    let n = points.len();
    let mut v: Vec<f64> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).map(|(i, j)| d[(i, j)]).collect();
    Ok(median(&mut v))
}

/// `exp(−d²/(2σ²))` Gram matrix with [`GRAM_JITTER`] on the diagonal.
pub fn geodesic_gram(points: &[Point], sigma: f64) -> Result<DMatrix<f64>> {
    let d = pairwise_distances(points)?;
    let mut k = d.map(|v| (-v * v / (2.0 * sigma * sigma)).exp());
    for i in 0..k.nrows() {
        k[(i, i)] += GRAM_JITTER;
    }
    Ok(k)
}

pub fn rsvm_fit(points: &[Point], labels: &[i32], cfg: &RsvmConfig) -> Result<RsvmModel> {
    let y = check_labels(points, labels)?;
    if !(cfg.c_reg > 0.0) {
        return Err(Error::InvalidArgument(format!("C must be positive, got {}", cfg.c_reg)));
    }
    let n = points.len();
    let max_updates = cfg.max_sweeps_per_sample.max(1) * n * n;
    match cfg.mode {
        SvmMode::TangentLinear => {
            let base = cfg.mean.mean(points)?;
            let spec = base.spec();
            let td = lift(points, &base)?;
            let tangents: Vec<DMatrix<f64>> = (0..n).map(|i| td.tangent(i)).collect();
            let k = DMatrix::from_fn(n, n, |a, b| raw_inner(spec, base.data(), &tangents[a], &tangents[b]));
            let sol = smo(&k, &y, cfg.c_reg, cfg.tol, max_updates)?;
            let (r, c) = spec.shape();
            let mut w = DMatrix::zeros(r, c);
            for (t, z) in tangents.iter().enumerate() {
                w += z * (sol.alpha[t] * y[t]);
            }
            Ok(RsvmModel {
                decision: SvmDecision::TangentLinear { base, w },
                b: sol.b,
                c_reg: cfg.c_reg,
                dual: sol.alpha,
                kkt_gap: sol.gap,
            })
        }
        SvmMode::GeodesicKernel { sigma } => {
            let sigma = match sigma {
                Some(s) => s,
                None => median_distance(points)?,
            };
            if !(sigma > 0.0) {
                return Err(Error::InvalidArgument(format!("kernel width must be positive, got {sigma}")));
            }
            let k = geodesic_gram(points, sigma)?;
            let gram_min_eig = sym_eig(&k)?.values.iter().fold(f64::INFINITY, |m, &v| m.min(v));
            if gram_min_eig < -1e-8 {
                log::warn!("geodesic kernel Gram matrix is indefinite (min eigenvalue {gram_min_eig:.3e})");
            }
            let sol = smo(&k, &y, cfg.c_reg, cfg.tol, max_updates)?;
            let support: Vec<usize> = (0..n).filter(|&t| sol.alpha[t] > 0.0).collect();
            Ok(RsvmModel {
                decision: SvmDecision::GeodesicKernel {
                    sigma,
                    alphas: support.iter().map(|&t| sol.alpha[t]).collect(),
                    support_points: support.iter().map(|&t| points[t].clone()).collect(),
                    support_labels: support.iter().map(|&t| labels[t]).collect(),
                    gram_min_eig,
                },
                b: sol.b,
                c_reg: cfg.c_reg,
                dual: sol.alpha,
                kkt_gap: sol.gap,
            })
        }
    }
}

impl RsvmModel {
    pub fn decision_function(&self, x: &Point) -> Result<f64> {
        match &self.decision {
            SvmDecision::TangentLinear { base, w } => {
                if x.spec() != base.spec() {
                    return Err(Error::ShapeMismatch(format!("point on {}, model on {}", x.spec(), base.spec())));
                }
                let spec = base.spec();
                let z = raw_log(spec, base.data(), x.data())?;
                Ok(raw_inner(spec, base.data(), w, &z) + self.b)
            }
            SvmDecision::GeodesicKernel { sigma, alphas, support_points, support_labels, .. } => {
                let mut f = self.b;
                for ((a, p), &l) in alphas.iter().zip(support_points).zip(support_labels) {
                    if x.spec() != p.spec() {
                        return Err(Error::ShapeMismatch(format!("point on {}, model on {}", x.spec(), p.spec())));
                    }
                    let d = raw_dist(x.spec(), p.data(), x.data())?;
                    f += a * f64::from(l) * (-d * d / (2.0 * sigma * sigma)).exp();
                }
                Ok(f)
            }
        }
    }

    /// `+1` when the decision value is nonnegative, `−1` otherwise.
    pub fn predict(&self, x: &Point) -> Result<i32> {
        Ok(if self.decision_function(x)? >= 0.0 { 1 } else { -1 })
    }

    pub fn predict_all(&self, points: &[Point]) -> Result<Vec<i32>> {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| self.predict(p).map_err(|e| e.at(i)))
            .collect()
    }

    /// Tangent normal vector norm (linear mode).
    pub fn w_norm(&self) -> Option<f64> {
        match &self.decision {
            SvmDecision::TangentLinear { base, w } => Some(raw_inner(base.spec(), base.data(), w, w).sqrt()),
            SvmDecision::GeodesicKernel { .. } => None,
        }
    }

    pub fn dual_balance(&self, labels: &[i32]) -> f64 {
        self.dual.iter().zip(labels).map(|(a, &l)| a * f64::from(l)).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
