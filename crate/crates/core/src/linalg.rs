//! Floating-point helpers over complex dense matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Operator norm: the largest singular value.
pub fn op_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint()
}

/// `‖a − a*‖` in operator norm.
pub fn hermitian_defect(a: &CMat) -> f64 {
    op_norm(&(a - a.adjoint()))
}

/// Eigen-decomposition of a Hermitian matrix (the input is symmetrised first).
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let h = (a + a.adjoint()) * c(0.5, 0.0);
    let eig = h.symmetric_eigen();
    (eig.eigenvalues.iter().cloned().collect(), eig.eigenvectors)
}

/// Applies a real function to a Hermitian matrix through its spectrum.
pub fn functional_calculus(a: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = hermitian_eigen(a);
    let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&x| c(f(x), 0.0)),
    ));
    &vecs * d * vecs.adjoint()
}

/// `exp(i h)` for Hermitian `h`.
pub fn exp_i_hermitian(h: &CMat) -> CMat {
    let (vals, vecs) = hermitian_eigen(h);
    let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&x| Complex64::from_polar(1.0, x)),
    ));
    &vecs * d * vecs.adjoint()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn block_diag(blocks: &[CMat]) -> CMat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}

/// Flattens a matrix into a column vector (column-major).
pub fn vectorize(a: &CMat) -> nalgebra::DVector<Complex64> {
    nalgebra::DVector::from_iterator(a.len(), a.iter().cloned())
}

/// Orthonormal basis (as matrices) of the span of `mats`, dropping
/// directions with singular value below `tol`.
pub fn span_basis(mats: &[CMat], tol: f64) -> Vec<CMat> {
    let mut basis: Vec<nalgebra::DVector<Complex64>> = Vec::new();
    let shape = mats.first().map(|m| (m.nrows(), m.ncols()));
    for m in mats {
        let mut v = vectorize(m);
        // two passes of Gram-Schmidt for stability
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let n = v.norm();
        if n > tol {
            basis.push(v / c(n, 0.0));
        }
    }
    let (r, cc) = shape.unwrap_or((0, 0));
    basis
        .into_iter()
        .map(|v| CMat::from_iterator(r, cc, v.iter().cloned()))
        .collect()
}

/// Distance (Frobenius) from `a` to the span of an orthonormal matrix basis.
pub fn distance_to_span(a: &CMat, basis: &[CMat]) -> f64 {
    let mut v = vectorize(a);
    for b in basis {
        let bv = vectorize(b);
        let proj = bv.dotc(&v);
        v -= bv * proj;
    }
    v.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_norm_of_nilpotent() {
        let a = CMat::from_row_slice(2, 2, &[c(0., 0.), c(3., 0.), c(0., 0.), c(0., 0.)]);
        assert!((op_norm(&a) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn exp_of_hermitian_is_unitary() {
        let h = CMat::from_row_slice(2, 2, &[c(1., 0.), c(0.5, 0.2), c(0.5, -0.2), c(-0.3, 0.)]);
        let u = exp_i_hermitian(&h);
        let defect = op_norm(&(u.adjoint() * &u - CMat::identity(2, 2)));
        assert!(defect < 1e-12);
    }
}
