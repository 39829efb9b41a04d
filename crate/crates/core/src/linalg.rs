//! Small dense linear-algebra helpers shared by the other modules.

use crate::{c64, CMat, CVec, RVec};
use num_complex::Complex64;

/// Relative Frobenius deviation from Hermiticity, `||A - A^dag||_F / ||A||_F`.
pub fn hermiticity_residual(a: &CMat) -> f64 {
    let norm = a.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (a - a.adjoint()).norm() / norm
}

/// Hermitian part `(A + A^dag) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).map(|z| z * c64(0.5, 0.0))
}

/// Eigendecomposition of a Hermitian matrix. Returns eigenvalues (ascending)
/// and the matrix of eigenvectors as columns.
pub fn eigh(a: &CMat) -> (RVec, CMat) {
    let n = a.nrows();
    if n == 0 {
        return (RVec::zeros(0), CMat::zeros(0, 0));
    }
    let se = hermitian_part(a).symmetric_eigen();
    // sort ascending
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let vals = RVec::from_iterator(n, idx.iter().map(|&i| se.eigenvalues[i]));
    let mut vecs = CMat::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        vecs.set_column(col, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Hermitian PSD square root via eigendecomposition; negative eigenvalues
/// clipped to zero.
pub fn psd_sqrt(a: &CMat) -> CMat {
    let (vals, vecs) = eigh(a);
    let n = a.nrows();
    let mut d = CMat::zeros(n, n);
    for j in 0..n {
        d[(j, j)] = c64(vals[j].max(0.0).sqrt(), 0.0);
    }
    &vecs * d * vecs.adjoint()
}

/// `Tr(A B)`.
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    let n = a.nrows();
    let mut acc = c64(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Commutator `[A, B]`.
pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Anticommutator `{A, B}`.
pub fn anticommutator(a: &CMat, b: &CMat) -> CMat {
    a * b + b * a
}

/// Orthonormal basis of the nullspace of `a` (columns), singular values
/// below `tol * s_max` treated as zero.
pub fn nullspace(a: &CMat, tol: f64) -> Vec<CVec> {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("svd requested v_t");
    let smax = svd
        .singular_values
        .as_slice()
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    let cutoff = tol * smax.max(1e-300);
    let mut basis = Vec::new();
    // rows of v_t beyond the numerical rank span the nullspace; v_t has
    // min(nrows, ncols) rows, so directions never touched by `a` when
    // ncols > nrows must be added from the orthogonal complement.
    for i in 0..svd.singular_values.len() {
        if svd.singular_values[i] <= cutoff {
            basis.push(v_t.row(i).adjoint());
        }
    }
    if a.ncols() > v_t.nrows() {
        // complete the range of v_t^dag to a full basis by Gram-Schmidt
        let mut have: Vec<CVec> = (0..v_t.nrows())
            .map(|i| v_t.row(i).adjoint())
            .collect();
        for k in 0..a.ncols() {
            let mut cand = CVec::zeros(a.ncols());
            cand[k] = c64(1.0, 0.0);
            for h in &have {
                let proj = h.dotc(&cand);
                cand -= h * proj;
            }
            let norm = cand.norm();
            if norm > 1e-8 {
                cand /= c64(norm, 0.0);
                have.push(cand.clone());
                basis.push(cand);
            }
        }
    }
    basis
}
