//! Dense symmetric spectral routines shared by every reducer.
//!
//! All eigenvector outputs follow one sign convention: each column is flipped
//! so that its largest-magnitude entry is positive. Equal eigenvalues come back
//! in unspecified order.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::serde_mat;

/// Eigenvalues in descending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigPair {
    #[serde(with = "serde_mat::vector")]
    pub values: DVector<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub vectors: DMatrix<f64>,
}

impl EigPair {
    /// Leading `k` pairs.
    pub fn top(&self, k: usize) -> EigPair {
        let k = k.min(self.values.len());
        EigPair {
            values: self.values.rows(0, k).into_owned(),
            vectors: self.vectors.columns(0, k).into_owned(),
        }
    }
}

const SYM_TOL: f64 = 1e-8;

pub(crate) fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let norm = a.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (a - a.transpose()).norm() / norm
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

fn check_square(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// Flip columns so the largest-|entry| coordinate of each is positive.
pub fn fix_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let mut best = 0.0_f64;
        let mut sign = 1.0;
        for &v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

fn sorted_desc(eig: SymmetricEigen<f64, nalgebra::Dyn>) -> EigPair {
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(eig.eigenvectors.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    fix_signs(&mut vectors);
    EigPair { values, vectors }
}

/// Symmetric eigendecomposition, eigenvalues descending.
pub fn sym_eig(a: &DMatrix<f64>) -> Result<EigPair> {
    check_square(a)?;
    let asym = asymmetry(a);
    if asym > SYM_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(sorted_desc(SymmetricEigen::new(symmetrize(a))))
}

fn is_diagonal(b: &DMatrix<f64>) -> bool {
    (0..b.ncols()).all(|j| (0..b.nrows()).all(|i| i == j || b[(i, j)] == 0.0))
}

/// Symmetric-definite generalized eigenproblem `A v = λ B v`.
///
/// `B` is whitened by its Cholesky factor; if the factorization fails it is
/// retried on `B + εI` with `ε = 1e-8 · tr(B) / n`. Returned vectors are
/// `B`-orthonormal.
pub fn gen_eig(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<EigPair> {
    check_square(a)?;
    check_square(b)?;
    if a.nrows() != b.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    for m in [a, b] {
        let asym = asymmetry(m);
        if asym > SYM_TOL {
            return Err(Error::NotSymmetric(asym));
        }
    }
    let n = b.nrows();
    let a = symmetrize(a);
    let eps = 1e-8 * b.trace() / n as f64;
    let regularized = || {
        let mut breg = symmetrize(b);
        if eps > 0.0 {
            for i in 0..n {
                breg[(i, i)] += eps;
            }
        }
        breg
    };

    if is_diagonal(b) {
        // Whitening is a diagonal scaling.
        let mut breg = symmetrize(b);
        if (0..n).any(|i| !(breg[(i, i)] > 0.0)) {
            breg = regularized();
        }
        if let Some(i) = (0..n).find(|&i| !(breg[(i, i)] > 0.0)) {
            return Err(Error::NotPositiveDefinite(format!(
                "diagonal entry {i} is {:.3e}",
                breg[(i, i)]
            )));
        }
        let scale = DVector::from_iterator(n, (0..n).map(|i| 1.0 / breg[(i, i)].sqrt()));
        let c = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * scale[i] * scale[j]);
        let mut pair = sorted_desc(SymmetricEigen::new(symmetrize(&c)));
        for (i, mut row) in pair.vectors.row_iter_mut().enumerate() {
            row *= scale[i];
        }
        fix_signs(&mut pair.vectors);
        return Ok(pair);
    }

    // The εI shift is only applied when B is not numerically definite on its own.
    let chol = nalgebra::Cholesky::new(symmetrize(b))
        .or_else(|| nalgebra::Cholesky::new(regularized()))
        .ok_or_else(|| {
            let min = SymmetricEigen::new(regularized()).eigenvalues.min();
            Error::NotPositiveDefinite(format!(
                "smallest eigenvalue {min:.3e} after regularization"
            ))
        })?;
    let l = chol.l();
    // C = L^{-1} A L^{-T}
    let linv_a = l
        .solve_lower_triangular(&a)
        .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
    let mut pair = sorted_desc(SymmetricEigen::new(symmetrize(&c)));
    // V = L^{-T} W
    pair.vectors = l
        .transpose()
        .solve_upper_triangular(&pair.vectors)
        .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
    fix_signs(&mut pair.vectors);
    Ok(pair)
}

/// Thin SVD with singular values sorted descending: `(U, σ, Vᵀ)`.
///
/// nalgebra's bidiagonal QR iteration can return an inaccurate factorization for
/// some rank-deficient inputs, so every candidate is checked for reconstruction
/// and orthonormality before it is accepted. One-sided Jacobi is the fallback.
pub fn thin_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return (
            DMatrix::zeros(m.nrows(), 0),
            DVector::zeros(0),
            DMatrix::zeros(0, m.ncols()),
        );
    }
    for eps in [f64::EPSILON, 5.0 * f64::EPSILON, 1e-12] {
        if let Some(svd) = m.clone().try_svd(true, true, eps, 0) {
            let (Some(u), Some(vt)) = (svd.u, svd.v_t) else { continue };
            let sorted = sort_svd(u, svd.singular_values, vt);
            if svd_is_accurate(m, &sorted) {
                return sorted;
            }
        }
    }
    log::debug!("bidiagonal SVD inaccurate on a {}x{} matrix; using Jacobi", m.nrows(), m.ncols());
    jacobi_svd(m)
}

/// Singular values sorted descending.
pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    thin_svd(m).1
}

type Svd = (DMatrix<f64>, DVector<f64>, DMatrix<f64>);

const SVD_TOL: f64 = 1e-11;

fn sort_svd(u: DMatrix<f64>, s: DVector<f64>, vt: DMatrix<f64>) -> Svd {
    let k = s.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let mut u_out = DMatrix::zeros(u.nrows(), k);
    let mut vt_out = DMatrix::zeros(k, vt.ncols());
    let mut s_out = DVector::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        u_out.set_column(dst, &u.column(src));
        vt_out.set_row(dst, &vt.row(src));
        s_out[dst] = s[src];
    }
    (u_out, s_out, vt_out)
}

fn svd_is_accurate(m: &DMatrix<f64>, (u, s, vt): &Svd) -> bool {
    if s.iter().chain(u.iter()).chain(vt.iter()).any(|v| !v.is_finite()) {
        return false;
    }
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let mut us = u.clone();
    for (j, mut col) in us.column_iter_mut().enumerate() {
        col *= s[j];
    }
    let k = s.len();
    let eye = DMatrix::<f64>::identity(k, k);
    (m - us * vt).norm() <= SVD_TOL * scale
        && (u.transpose() * u - &eye).norm() <= SVD_TOL
        && (vt * vt.transpose() - &eye).norm() <= SVD_TOL
}

/// One-sided (Hestenes) Jacobi SVD. Columns of `U` for zero singular values are
/// completed to an orthonormal set.
fn jacobi_svd(m: &DMatrix<f64>) -> Svd {
    if m.nrows() < m.ncols() {
        let (u, s, vt) = jacobi_svd(&m.transpose());
        return (vt.transpose(), s, u.transpose());
    }
    let k = m.ncols();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(k, k);
    for _ in 0..100 {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let x = mat[(i, p)];
                        let y = mat[(i, q)];
                        mat[(i, p)] = c * x - sn * y;
                        mat[(i, q)] = sn * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s = DVector::from_iterator(k, a.column_iter().map(|c| c.norm()));
    let (mut u, s, vt) = sort_svd(a, s, v.transpose());
    let smax = s.iter().copied().fold(0.0, f64::max);
    let rank = s.iter().take_while(|&&x| x > f64::EPSILON * smax * k as f64 && x > 0.0).count();
    for j in 0..rank {
        let sj = s[j];
        u.column_mut(j).unscale_mut(sj);
    }
    if rank < k {
        // Gram-Schmidt against the standard basis fills the null directions.
        let n = u.nrows();
        let mut filled = rank;
        for e in 0..n {
            if filled == k {
                break;
            }
            let mut cand = DVector::<f64>::zeros(n);
            cand[e] = 1.0;
            for _ in 0..2 {
                for j in 0..filled {
                    let proj = u.column(j).dot(&cand);
                    cand.axpy(-proj, &u.column(j), 1.0);
                }
            }
            let norm = cand.norm();
            if norm > 1e-8 {
                u.set_column(filled, &(cand / norm));
                filled += 1;
            }
        }
    }
    (u, s, vt)
}

/// Singular value soft-thresholding `U · max(Σ − τ, 0) · Vᵀ`.
pub fn svt(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    assert!(tau >= 0.0, "threshold must be non-negative");
    if tau == 0.0 {
        return m.clone();
    }
    let (u, s, vt) = thin_svd(m);
    let kept = s.iter().take_while(|&&v| v > tau).count();
    if kept == 0 {
        return DMatrix::zeros(m.nrows(), m.ncols());
    }
    let mut scaled = u.columns(0, kept).into_owned();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= s[j] - tau;
    }
    scaled * vt.rows(0, kept)
}

/// Entrywise soft-thresholding, the proximal map of `τ‖·‖₁`.
pub fn shrink(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    assert!(tau >= 0.0, "threshold must be non-negative");
    m.map(|v| v.signum() * (v.abs() - tau).max(0.0))
}

/// Apply a scalar function to the spectrum of a symmetric matrix.
pub(crate) fn sym_apply(a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(a));
    sym_apply_eig(&eig.eigenvectors, &eig.eigenvalues, f)
}

pub(crate) fn sym_apply_eig(
    vectors: &DMatrix<f64>,
    values: &DVector<f64>,
    f: impl Fn(f64) -> f64,
) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= f(values[j]);
    }
    symmetrize(&(scaled * vectors.transpose()))
}

/// Orthonormal factor of the thin QR decomposition with a positive diagonal in `R`.
pub(crate) fn qf(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, p) = m.shape();
    if p > n {
        return Err(Error::ShapeMismatch(format!("qf of a {n}x{p} matrix")));
    }
    let qr = m.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    let scale = m.norm().max(f64::MIN_POSITIVE);
    for j in 0..p {
        let d = r[(j, j)];
        if d.abs() <= 1e-12 * scale {
            return Err(Error::RankDeficient(format!(
                "column {j} has pivot {d:.3e}"
            )));
        }
        if d < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Extends the orthonormal columns of `q` to `k` orthonormal columns using
/// standard basis vectors, skipping those already (nearly) in the span.
pub(crate) fn complete_basis(q: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let (n, r) = q.shape();
    if k > n || r > k {
        return Err(Error::ShapeMismatch(format!("cannot complete {n}x{r} to {k} columns")));
    }
    let mut cols: Vec<DVector<f64>> = q.column_iter().map(|c| c.into_owned()).collect();
    for e in 0..n {
        if cols.len() == k {
            break;
        }
        let mut v = DVector::zeros(n);
        v[e] = 1.0;
        // Two Gram-Schmidt passes keep the result orthonormal to working precision.
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dot(&v);
                v.axpy(-proj, c, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            cols.push(v / norm);
        }
    }
    Ok(DMatrix::from_columns(&cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Rank one; plain bidiagonal QR reconstructs this with error near 1e-1.
    fn rank_one_4x3() -> DMatrix<f64> {
        DMatrix::from_row_slice(4, 3, &[
            -0.1975, -0.0430, 0.1600, -0.6108, -0.1329, 0.4948,
            -0.0805, -0.0175, 0.0652, 0.3834, 0.0834, -0.3106,
        ])
    }

    fn assert_valid_svd(m: &DMatrix<f64>, svd: &Svd) {
        assert!(svd_is_accurate(m, svd), "inaccurate SVD of {m}");
        assert!(svd.1.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn thin_svd_is_accurate_on_rank_deficient_input() {
        let m = rank_one_4x3();
        assert_valid_svd(&m, &thin_svd(&m));
        assert_valid_svd(&m.transpose(), &thin_svd(&m.transpose()));
    }

    #[test]
    fn jacobi_svd_matches_known_spectrum() {
        let m = DMatrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, -2.0, 0.0, 0.0]);
        for mat in [m.clone(), m.transpose(), rank_one_4x3(), DMatrix::zeros(3, 2)] {
            assert_valid_svd(&mat, &jacobi_svd(&mat));
        }
        let (_, s, _) = jacobi_svd(&m);
        assert!((s[0] - 3.0).abs() < 1e-15 && (s[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn sym_eig_sorts_and_signs() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let e = sym_eig(&a).unwrap();
        assert_eq!(e.values.as_slice(), &[3.0, 2.0, 1.0]);
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        assert!((e.vectors - expected).norm() < 1e-12);
    }

    #[test]
    fn sym_eig_identity_and_rank_one() {
        let e = sym_eig(&DMatrix::identity(4, 4)).unwrap();
        assert!(e.values.iter().all(|&v| (v - 1.0).abs() < 1e-14));

        let z = DVector::from_vec(vec![0.6, -0.8, 0.0]);
        let e = sym_eig(&(&z * z.transpose())).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-12);
        assert!(e.values[1].abs() < 1e-12 && e.values[2].abs() < 1e-12);
        // Largest |entry| of z is -0.8, so the convention flips it.
        assert!((e.vectors.column(0) + &z).norm() < 1e-12);
    }

    #[test]
    fn sym_eig_rejects_asymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(sym_eig(&a), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn gen_eig_examples() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.0]));
        let e = gen_eig(&a, &DMatrix::identity(2, 2)).unwrap();
        assert!((e.values[0] - 4.0).abs() < 1e-7);
        assert!((e.vectors[(0, 0)].abs() - 1.0).abs() < 1e-7);

        // B^{-1/2} A B^{-1/2} = diag(2, 1)
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0]));
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let e = gen_eig(&a, &b).unwrap();
        assert!((e.values[0] - 2.0).abs() < 1e-7 && (e.values[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn gen_eig_dense_b_is_b_orthonormal() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 1.0]);
        let b = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let e = gen_eig(&a, &b).unwrap();
        let gram = e.vectors.transpose() * &b * &e.vectors;
        assert!((gram - DMatrix::identity(3, 3)).norm() < 1e-6);
        for j in 0..3 {
            let v = e.vectors.column(j);
            let r = &a * v - (&b * v) * e.values[j];
            assert!(r.norm() < 1e-6);
        }
    }

    #[test]
    fn gen_eig_rejects_indefinite_b() {
        let a = DMatrix::identity(2, 2);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        assert!(matches!(gen_eig(&a, &b), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn svt_examples() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]));
        assert!((svt(&m, 1.0) - expected).norm() < 1e-12);
        assert_eq!(svt(&m, 0.0), m);
        assert_eq!(svt(&m, 3.0), DMatrix::zeros(2, 2));
    }

    #[test]
    fn shrink_examples() {
        let m = DMatrix::from_row_slice(1, 3, &[2.5, -0.5, -3.0]);
        let s = shrink(&m, 1.0);
        assert_eq!(s.as_slice(), &[1.5, 0.0, -2.0]);
        assert_eq!(shrink(&m, 0.0), m);
    }

    #[test]
    fn qf_detects_rank_deficiency() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(matches!(qf(&m), Err(Error::RankDeficient(_))));
    }
}
