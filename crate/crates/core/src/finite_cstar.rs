//! Finite-dimensional C*-algebra operations on matrix tuples.

use nalgebra::DVector;
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{
    c, exp_i_hermitian, hermitian_defect, hermitian_eigen, kron, op_norm, span_basis, CMat,
};
use crate::ncpoly::{enum_poly, Family, MatrixTuple, NcError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CStarError {
    #[error("not a state: {0}")]
    InvalidState(String),
    #[error("spectrum meets the band around 1/2 (eigenvalue {0})")]
    NoSpectralGap(f64),
    #[error("no unit among the first {0} candidate projections")]
    UnitNotFound(usize),
    #[error("dimension mismatch")]
    DimensionMismatch,
    #[error(transparent)]
    Poly(#[from] NcError),
}

pub const STATE_TOL: f64 = 1e-10;

/// A state on `M_d` given by its density matrix.
#[derive(Clone, Debug)]
pub struct DensityState {
    rho: CMat,
}

impl DensityState {
    pub fn new(rho: CMat) -> Result<Self, CStarError> {
        if rho.nrows() != rho.ncols() || rho.nrows() == 0 {
            return Err(CStarError::InvalidState("not square".into()));
        }
        if hermitian_defect(&rho) > STATE_TOL {
            return Err(CStarError::InvalidState("not self-adjoint".into()));
        }
        let (vals, _) = hermitian_eigen(&rho);
        if let Some(v) = vals.iter().find(|&&v| v < -STATE_TOL) {
            return Err(CStarError::InvalidState(format!("negative eigenvalue {v}")));
        }
        let tr = rho.trace();
        if (tr - c(1.0, 0.0)).norm() > STATE_TOL {
            return Err(CStarError::InvalidState(format!("trace {tr}")));
        }
        Ok(DensityState { rho })
    }

    pub fn normalized_trace(d: usize) -> Self {
        DensityState { rho: CMat::identity(d, d) / c(d as f64, 0.0) }
    }

    /// The vector state `a -> <a v, v>` for a unit vector `v`.
    pub fn vector(v: &DVector<Complex64>) -> Result<Self, CStarError> {
        Self::new(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn rho(&self) -> &CMat {
        &self.rho
    }

    pub fn eval(&self, a: &CMat) -> Complex64 {
        (&self.rho * a).trace()
    }
}

/// The GNS representation of the algebra generated by a tuple (with unit).
#[derive(Clone, Debug)]
pub struct GnsResult {
    basis: Vec<CMat>,
    // columns map GNS coordinates to coefficients over `basis`
    coords: CMat,
    state: DensityState,
    pub rep: MatrixTuple,
    pub cyclic_vector: DVector<Complex64>,
}

impl GnsResult {
    pub fn rep_dim(&self) -> usize {
        self.cyclic_vector.len()
    }

    /// The representing operator of any matrix; exact for elements of the
    /// generated algebra.
    pub fn represent(&self, a: &CMat) -> CMat {
        let r = self.basis.len();
        let m = CMat::from_fn(r, r, |j, i| {
            self.state.eval(&(self.basis[j].adjoint() * a * &self.basis[i]))
        });
        self.coords.adjoint() * m * &self.coords
    }
}

/// Linearly independent words in the generators, closed under multiplication.
fn algebra_span(gamma: &MatrixTuple) -> Vec<CMat> {
    let d = gamma.dim();
    let mut gens: Vec<CMat> = Vec::new();
    for g in gamma.entries() {
        gens.push(g.clone());
        gens.push(g.adjoint());
    }
    let mut elems = vec![CMat::identity(d, d)];
    let mut frontier = elems.clone();
    let tol = 1e-9;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for f in &frontier {
            for g in &gens {
                let cand = f * g;
                let mut all = elems.clone();
                all.push(cand.clone());
                if span_basis(&all, tol).len() > span_basis(&elems, tol).len() {
                    elems.push(cand.clone());
                    next.push(cand);
                }
            }
        }
        frontier = next;
    }
    elems
}

pub fn gns(gamma: &MatrixTuple, phi: &DensityState) -> Result<GnsResult, CStarError> {
    if gamma.dim() != phi.dim() {
        return Err(CStarError::DimensionMismatch);
    }
    let basis = algebra_span(gamma);
    let r = basis.len();
    let gram = CMat::from_fn(r, r, |j, i| phi.eval(&(basis[j].adjoint() * &basis[i])));
    let (vals, vecs) = hermitian_eigen(&gram);
    let keep: Vec<usize> = (0..r).filter(|&k| vals[k] > STATE_TOL).collect();
    let coords = CMat::from_fn(r, keep.len(), |i, k| vecs[(i, keep[k])] / c(vals[keep[k]].sqrt(), 0.0));
    let unit_col = DVector::from_fn(r, |j, _| phi.eval(&basis[j].adjoint()));
    let cyclic_vector = coords.adjoint() * unit_col;
    let mut res = GnsResult {
        basis,
        coords,
        state: phi.clone(),
        rep: MatrixTuple::new(1, vec![])?,
        cyclic_vector,
    };
    let reps: Vec<CMat> = gamma.entries().iter().map(|g| res.represent(g)).collect();
    res.rep = MatrixTuple::new(keep.len().max(1), reps)?;
    Ok(res)
}

fn eval_nth(gamma: &MatrixTuple, n: u64) -> CMat {
    gamma.eval_padded(&enum_poly(n, Family::NoConstant))
}

pub fn sa_enum(gamma: &MatrixTuple, n: u64) -> CMat {
    let p = eval_nth(gamma, n);
    (&p + p.adjoint()) * c(0.5, 0.0)
}

pub fn un_enum(gamma: &MatrixTuple, n: u64) -> CMat {
    exp_i_hermitian(&sa_enum(gamma, n))
}

pub fn pos_enum(gamma: &MatrixTuple, n: u64) -> CMat {
    let p = eval_nth(gamma, n);
    p.adjoint() * p
}

/// The scalar map whose iterates push `[0,1/4]` to 0 and `[3/4,1]` to 1.
pub fn f_scalar(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x <= 0.25 {
        x / 2.0
    } else if x <= 0.75 {
        1.5 * x - 0.25
    } else if x <= 1.0 {
        (1.0 + x) / 2.0
    } else {
        1.0
    }
}

/// One application of the scalar map through the spectrum.
pub fn proj_step(a: &CMat) -> CMat {
    crate::linalg::functional_calculus(a, f_scalar)
}

pub const PROJ_MAX_ITER: usize = 60;
const PROJ_CONVERGED: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct ProjIterate {
    pub projection: CMat,
    pub iterations: usize,
}

/// Iterates the scalar map on the spectrum of a self-adjoint `a`.
pub fn proj_iter(a: &CMat, tol: f64, max_iter: usize) -> Result<ProjIterate, CStarError> {
    let (mut vals, vecs) = hermitian_eigen(a);
    if let Some(&v) = vals.iter().find(|&&v| v > 0.25 + tol && v < 0.75 - tol) {
        return Err(CStarError::NoSpectralGap(v));
    }
    let done = |vals: &[f64]| vals.iter().all(|&v| v.min((1.0 - v).abs()) <= PROJ_CONVERGED);
    let mut iterations = 0;
    while !done(&vals) {
        if iterations == max_iter {
            let worst = vals.iter().cloned().fold(0.0, |w: f64, v| if v.min((1.0 - v).abs()) > w.min((1.0 - w).abs()) { v } else { w });
            return Err(CStarError::NoSpectralGap(worst));
        }
        vals.iter_mut().for_each(|v| *v = f_scalar(*v));
        iterations += 1;
    }
    // the iterates converge to the spectral projection; report the limit
    let limit: Vec<f64> = vals.iter().map(|&v| if v < 0.5 { 0.0 } else { 1.0 }).collect();
    let dim = limit.len();
    let projection = if limit.iter().all(|&v| v == 1.0) {
        CMat::identity(dim, dim)
    } else if limit.iter().all(|&v| v == 0.0) {
        CMat::zeros(dim, dim)
    } else {
        let d = CMat::from_diagonal(&DVector::from_iterator(dim, limit.iter().map(|&v| c(v, 0.0))));
        &vecs * d * vecs.adjoint()
    };
    Ok(ProjIterate { projection, iterations })
}

#[derive(Clone, Debug)]
pub struct UnitFound {
    pub unit: CMat,
    pub index: u64,
    pub residual: f64,
}

/// Residual of `p` as a two-sided unit for the generators.
pub fn unit_residual(gamma: &MatrixTuple, p: &CMat) -> f64 {
    gamma
        .entries()
        .iter()
        .map(|g| op_norm(&(p * g - g)).max(op_norm(&(g * p - g))))
        .fold(0.0, f64::max)
}

/// Scans the projections obtained from the positive enumeration for a unit.
pub fn unit_detect(gamma: &MatrixTuple, search_len: usize, tol: f64) -> Result<UnitFound, CStarError> {
    for n in 0..search_len as u64 {
        let Ok(p) = proj_iter(&pos_enum(gamma, n), 0.0, PROJ_MAX_ITER) else {
            continue;
        };
        let residual = unit_residual(gamma, &p.projection);
        if residual <= tol {
            return Ok(UnitFound { unit: p.projection, index: n, residual });
        }
    }
    Err(CStarError::UnitNotFound(search_len))
}

/// Digits of `l` in base `base`, least significant first, `count` of them.
fn digits(mut l: usize, base: usize, count: usize) -> Vec<usize> {
    (0..count)
        .map(|_| {
            let d = l % base;
            l /= base;
            d
        })
        .collect()
}

fn block_matrix(blocks: &[&CMat], n: usize, d: usize) -> CMat {
    let mut out = CMat::zeros(n * d, n * d);
    for r in 0..n {
        for col in 0..n {
            out.view_mut((r * d, col * d), (d, d)).copy_from(blocks[r * n + col]);
        }
    }
    out
}

/// The bijection onto `n x n` index arrays: entry `(r, c)` of the `l`-th
/// array is base-`N` digit `r n + c` of `l`, where `N` is the tuple length.
pub fn beta(l: usize, n: usize, len: usize) -> Vec<Vec<usize>> {
    let ds = digits(l, len, n * n);
    (0..n).map(|r| ds[r * n..(r + 1) * n].to_vec()).collect()
}

/// `n x n` block matrices over the tuple, one for each index array. The output
/// has `N^(n^2)` entries.
pub fn amplify(gamma: &MatrixTuple, n: usize) -> Result<MatrixTuple, CStarError> {
    let len = gamma.len();
    if n == 0 || len == 0 {
        return Err(CStarError::DimensionMismatch);
    }
    let total = len.checked_pow((n * n) as u32).ok_or(CStarError::DimensionMismatch)?;
    let d = gamma.dim();
    let entries = (0..total)
        .map(|l| {
            let idx = digits(l, len, n * n);
            let blocks: Vec<&CMat> = idx.iter().map(|&k| &gamma.entries()[k]).collect();
            block_matrix(&blocks, n, d)
        })
        .collect();
    Ok(MatrixTuple::new(n * d, entries)?)
}

/// For each generator `k`, the index in `amplify(γ, n)` of `diag(γ_k, ..., γ_k)`.
/// Needs a zero generator to fill the off-diagonal blocks.
pub fn diag_embed_code(gamma: &MatrixTuple, n: usize) -> Option<Vec<usize>> {
    let len = gamma.len();
    let zero = gamma.entries().iter().position(|g| g.iter().all(|z| *z == c(0.0, 0.0)))?;
    Some(
        (0..len)
            .map(|k| {
                (0..n * n)
                    .rev()
                    .fold(0, |acc, pos| acc * len + if pos % (n + 1) == 0 { k } else { zero })
            })
            .collect(),
    )
}

/// The plain diagonal embedding `a -> diag(a, ..., a)` applied to each generator.
pub fn diag_embed(gamma: &MatrixTuple, n: usize) -> MatrixTuple {
    let entries = gamma
        .entries()
        .iter()
        .map(|g| kron(&CMat::identity(n, n), g))
        .collect();
    MatrixTuple::new(n * gamma.dim(), entries).expect("consistent sizes")
}

/// Position of `γ_m ⊗ γ'_n` in the tensor tuple.
pub fn tensor_index(m: usize, n: usize) -> usize {
    (1usize << m) * (2 * n + 1) - 1
}

/// Kronecker products of all pairs, interleaved by `2^m (2n+1) - 1`; the
/// positions whose pair falls outside the tuples hold zero matrices.
pub fn tensor(gamma: &MatrixTuple, other: &MatrixTuple) -> MatrixTuple {
    let (la, lb) = (gamma.len(), other.len());
    let d = gamma.dim() * other.dim();
    let total = if la == 0 || lb == 0 { 0 } else { tensor_index(la - 1, lb - 1) + 1 };
    let mut entries = vec![CMat::zeros(d, d); total];
    for m in 0..la {
        for n in 0..lb {
            entries[tensor_index(m, n)] = kron(&gamma.entries()[m], &other.entries()[n]);
        }
    }
    MatrixTuple::new(d, entries).expect("consistent sizes")
}

/// Adjoins a unit: generator 0 is the identity of size `d+1`, generator
/// `k+1` is `diag(γ_k, 0)`.
pub fn unitize(gamma: &MatrixTuple) -> MatrixTuple {
    let d = gamma.dim() + 1;
    let mut entries = vec![CMat::identity(d, d)];
    for g in gamma.entries() {
        let mut m = CMat::zeros(d, d);
        m.view_mut((0, 0), (d - 1, d - 1)).copy_from(g);
        entries.push(m);
    }
    MatrixTuple::new(d, entries).expect("consistent sizes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> CMat {
        let n = rows.len();
        CMat::from_fn(n, n, |i, j| c(rows[i][j], 0.0))
    }

    fn matrix_units() -> MatrixTuple {
        MatrixTuple::new(2, vec![m(&[&[0., 1.], &[0., 0.]]), m(&[&[1., 0.], &[0., 0.]])]).unwrap()
    }

    #[test]
    fn gns_of_scalars() {
        let g = MatrixTuple::new(1, vec![m(&[&[3.0]])]).unwrap();
        let r = gns(&g, &DensityState::normalized_trace(1)).unwrap();
        assert_eq!(r.rep_dim(), 1);
        assert!((r.rep.entries()[0][(0, 0)] - c(3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn gns_dimensions() {
        let g = matrix_units();
        assert_eq!(gns(&g, &DensityState::normalized_trace(2)).unwrap().rep_dim(), 4);
        let e1 = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(gns(&g, &DensityState::vector(&e1).unwrap()).unwrap().rep_dim(), 2);
    }

    #[test]
    fn invalid_states() {
        assert!(DensityState::new(m(&[&[0.5, 0.], &[0., 0.6]])).is_err());
        assert!(DensityState::new(m(&[&[1.5, 0.], &[0., -0.5]])).is_err());
        assert!(DensityState::new(m(&[&[0.5, 0.2], &[0., 0.5]])).is_err());
    }

    #[test]
    fn proj_iter_examples() {
        let p = proj_iter(&m(&[&[0., 0.], &[0., 1.]]), 0.0, PROJ_MAX_ITER).unwrap();
        assert!((p.projection - m(&[&[0., 0.], &[0., 1.]])).norm() < 1e-12);
        let p = proj_iter(&m(&[&[0.1, 0.], &[0., 0.9]]), 0.0, PROJ_MAX_ITER).unwrap();
        assert!((p.projection - m(&[&[0., 0.], &[0., 1.]])).norm() < 1e-8);
        assert!(matches!(
            proj_iter(&m(&[&[0.5, 0.], &[0., 1.]]), 0.0, PROJ_MAX_ITER),
            Err(CStarError::NoSpectralGap(_))
        ));
    }

    #[test]
    fn enumerations() {
        let g = matrix_units();
        // p_0 = x1, so Sa is its real part
        let sa = sa_enum(&g, 0);
        assert!((&sa - m(&[&[0., 0.5], &[0.5, 0.]])).norm() < 1e-12);
        let u = un_enum(&g, 3);
        assert!(op_norm(&(u.adjoint() * &u - CMat::identity(2, 2))) < 1e-9);
        let (vals, _) = hermitian_eigen(&pos_enum(&g, 5));
        assert!(vals.iter().all(|&v| v >= -1e-10));
    }

    #[test]
    fn unit_of_corner() {
        let g = MatrixTuple::new(2, vec![m(&[&[1., 0.], &[0., 0.]])]).unwrap();
        let u = unit_detect(&g, 20, 1e-9).unwrap();
        assert!((u.unit - m(&[&[1., 0.], &[0., 0.]])).norm() < 1e-12);
        assert_eq!(u.residual, 0.0);
    }

    #[test]
    fn amplify_layout() {
        let g = MatrixTuple::new(
            1,
            (0..4).map(|k| m(&[&[k as f64]])).collect(),
        )
        .unwrap();
        let a = amplify(&g, 2).unwrap();
        assert_eq!(a.len(), 256);
        assert_eq!(a.dim(), 2);
        for l in [0, 7, 100, 255] {
            let b = beta(l, 2, 4);
            // block (1,2) in one-based terms
            assert_eq!(a.entries()[l][(0, 1)], c(b[0][1] as f64, 0.0));
        }
        assert_eq!(amplify(&g, 1).unwrap(), g);
        let codes = diag_embed_code(&g, 2).unwrap();
        for (k, &l) in codes.iter().enumerate() {
            assert_eq!(a.entries()[l], diag_embed(&g, 2).entries()[k]);
        }
    }

    #[test]
    fn tensor_and_unitize() {
        let g = matrix_units();
        let one = MatrixTuple::new(1, vec![m(&[&[1.0]])]).unwrap();
        let t = tensor(&g, &one);
        for k in 0..g.len() {
            assert_eq!(t.entries()[tensor_index(k, 0)], g.entries()[k]);
        }
        assert_eq!(tensor(&g, &g).dim(), 4);
        let u = unitize(&g);
        let found = unit_detect(&u, 5, 1e-12).unwrap();
        assert_eq!(found.residual, 0.0);
    }
}
