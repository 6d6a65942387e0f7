use num_complex::Complex64;
use num_traits::Zero;

use super::{Letter, NcError, NcPolynomial};
use crate::exact::{format_qc, parse_qc, qc_to_c64, QMat, QC};
use crate::linalg::CMat;

/// Matrix arithmetic needed to substitute into a polynomial.
pub trait StarMatrix: Clone {
    type Scalar;
    fn zero(d: usize) -> Self;
    fn identity(d: usize) -> Self;
    fn plus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn star(&self) -> Self;
    fn scaled(&self, c: &QC) -> Self;
}

impl StarMatrix for CMat {
    type Scalar = Complex64;
    fn zero(d: usize) -> Self {
        CMat::zeros(d, d)
    }
    fn identity(d: usize) -> Self {
        CMat::identity(d, d)
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn star(&self) -> Self {
        self.adjoint()
    }
    fn scaled(&self, c: &QC) -> Self {
        self * qc_to_c64(c)
    }
}

impl StarMatrix for QMat {
    type Scalar = QC;
    fn zero(d: usize) -> Self {
        QMat::zeros(d)
    }
    fn identity(d: usize) -> Self {
        QMat::identity(d)
    }
    fn plus(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn times(&self, o: &Self) -> Self {
        self.mul(o)
    }
    fn star(&self) -> Self {
        self.adjoint()
    }
    fn scaled(&self, c: &QC) -> Self {
        self.scale(c)
    }
}

/// A finite tuple of square matrices of a common size, standing in for a point
/// of the parameter space: `X_k` is substituted by entry `k-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tuple<M> {
    dim: usize,
    entries: Vec<M>,
}

pub type MatrixTuple = Tuple<CMat>;
pub type ExactTuple = Tuple<QMat>;

impl MatrixTuple {
    pub fn new(dim: usize, entries: Vec<CMat>) -> Result<Self, NcError> {
        if dim == 0 || entries.iter().any(|m| m.nrows() != dim || m.ncols() != dim) {
            return Err(NcError::DimensionMismatch);
        }
        Ok(Tuple { dim, entries })
    }
}

impl ExactTuple {
    pub fn new(dim: usize, entries: Vec<QMat>) -> Result<Self, NcError> {
        if dim == 0 || entries.iter().any(|m| m.dim() != dim) {
            return Err(NcError::DimensionMismatch);
        }
        Ok(Tuple { dim, entries })
    }

    pub fn to_float(&self) -> MatrixTuple {
        Tuple { dim: self.dim, entries: self.entries.iter().map(|m| m.to_c64()).collect() }
    }
}

impl<M: StarMatrix> Tuple<M> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[M] {
        &self.entries
    }

    pub fn get(&self, k: usize) -> Option<&M> {
        self.entries.get(k)
    }

    fn letter(&self, l: Letter, pad: bool) -> Result<M, NcError> {
        match self.entries.get(l.var as usize - 1) {
            Some(m) if l.star => Ok(m.star()),
            Some(m) => Ok(m.clone()),
            None if pad => Ok(M::zero(self.dim)),
            None => Err(NcError::UnboundVariable(l.var)),
        }
    }

    fn eval_inner(&self, p: &NcPolynomial, pad: bool) -> Result<M, NcError> {
        let mut acc = M::zero(self.dim);
        for (w, c) in p.terms() {
            let mut m = M::identity(self.dim);
            for &l in w {
                m = m.times(&self.letter(l, pad)?);
            }
            acc = acc.plus(&m.scaled(c));
        }
        Ok(acc)
    }

    /// Substitutes the tuple into `p`. Variables past the end of the tuple are
    /// an error.
    pub fn eval(&self, p: &NcPolynomial) -> Result<M, NcError> {
        self.eval_inner(p, false)
    }

    /// Like [`Tuple::eval`], but reads the tuple as followed by zero matrices.
    pub fn eval_padded(&self, p: &NcPolynomial) -> M {
        self.eval_inner(p, true).expect("padding binds every variable")
    }
}

/// Parses a matrix from rows of `re+im i` strings.
pub fn parse_matrix(rows: &[Vec<String>]) -> Result<QMat, NcError> {
    let rows: Vec<Vec<QC>> = rows
        .iter()
        .map(|r| r.iter().map(|s| parse_qc(s).map_err(|e| NcError::Parse(e.to_string()))).collect())
        .collect::<Result<_, _>>()?;
    QMat::from_rows(rows).ok_or(NcError::DimensionMismatch)
}

pub fn format_matrix(m: &QMat) -> Vec<Vec<String>> {
    m.rows().iter().map(|r| r.iter().map(format_qc).collect()).collect()
}

/// Formats a floating matrix in the same `re+im i` shape, with decimal parts.
pub fn format_float_matrix(m: &CMat) -> Vec<Vec<String>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| {
                    let z = m[(i, j)];
                    let im = if z.im.is_zero() { 0.0 } else { z.im };
                    if im == 0.0 {
                        format!("{}", z.re)
                    } else if im < 0.0 {
                        format!("{}-{}i", z.re, -im)
                    } else {
                        format!("{}+{}i", z.re, im)
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{qc_real, qi};
    use crate::ncpoly::Family;

    fn nilpotent() -> ExactTuple {
        let m = QMat::from_real_rows(&[vec![qi(0), qi(1)], vec![qi(0), qi(0)]]).unwrap();
        ExactTuple::new(2, vec![m]).unwrap()
    }

    #[test]
    fn substitution_examples() {
        let g = nilpotent();
        let x1 = NcPolynomial::var(1);
        assert_eq!(g.eval(&x1).unwrap(), g.entries()[0]);
        let p = NcPolynomial::parse("1 * x1 x1*", Family::NoConstant).unwrap();
        let d = QMat::from_real_rows(&[vec![qi(1), qi(0)], vec![qi(0), qi(0)]]).unwrap();
        assert_eq!(g.eval(&p).unwrap(), d);
        let s = x1.add(&x1.adjoint());
        assert_eq!(g.eval(&s.mul(&s)).unwrap(), QMat::identity(2));
    }

    #[test]
    fn unbound_variable() {
        let g = nilpotent();
        let x2 = NcPolynomial::var(2);
        assert_eq!(g.eval(&x2), Err(NcError::UnboundVariable(2)));
        assert!(g.eval_padded(&x2).is_zero());
    }

    #[test]
    fn constants_evaluate_to_scalars() {
        let g = nilpotent();
        let p = NcPolynomial::parse("3", Family::Unital).unwrap();
        assert_eq!(g.eval(&p).unwrap(), QMat::identity(2).scale(&qc_real(qi(3))));
    }

    #[test]
    fn matrix_codec_roundtrip() {
        let rows = vec![
            vec!["1/2+1i".to_string(), "0".to_string()],
            vec!["-3i".to_string(), "2".to_string()],
        ];
        let m = parse_matrix(&rows).unwrap();
        assert_eq!(parse_matrix(&format_matrix(&m)).unwrap(), m);
    }
}
