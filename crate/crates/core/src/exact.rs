//! Exact rational and Gaussian-rational scalars, and small dense matrices over them.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Exact rational number.
pub type Q = BigRational;

/// Exact element of Q(i).
pub type QC = Complex<Q>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse `{input}` as {what}")]
pub struct ParseError {
    pub input: String,
    pub what: &'static str,
}

impl ParseError {
    pub(crate) fn new(input: &str, what: &'static str) -> Self {
        ParseError { input: input.to_string(), what }
    }
}

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qc(re: Q, im: Q) -> QC {
    Complex::new(re, im)
}

pub fn qc_real(re: Q) -> QC {
    Complex::new(re, Q::zero())
}

pub fn q_to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // numerator/denominator beyond f64 range; fall back to a scaled quotient
        let n = x.numer().to_f64().unwrap_or(f64::NAN);
        let d = x.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

pub fn qc_to_c64(z: &QC) -> Complex64 {
    Complex64::new(q_to_f64(&z.re), q_to_f64(&z.im))
}

/// Parses `p`, `-p/q`, or a plain integer.
pub fn parse_q(s: &str) -> Result<Q, ParseError> {
    let s = s.trim();
    let err = || ParseError::new(s, "rational");
    if s.is_empty() {
        return Err(err());
    }
    match s.split_once('/') {
        Some((n, d)) => {
            let n = BigInt::from_str(n.trim()).map_err(|_| err())?;
            let d = BigInt::from_str(d.trim()).map_err(|_| err())?;
            if d.is_zero() {
                return Err(err());
            }
            Ok(Q::new(n, d))
        }
        None => BigInt::from_str(s).map(Q::from_integer).map_err(|_| err()),
    }
}

/// Parses `re`, `re+im i`, `re-im i`, `im i` (`i` alone means 1i).
pub fn parse_qc(s: &str) -> Result<QC, ParseError> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let err = || ParseError::new(s, "Gaussian rational");
    if t.is_empty() {
        return Err(err());
    }
    let Some(body) = t.strip_suffix('i') else {
        return parse_q(&t).map(qc_real);
    };
    // split at the last sign that is not the leading one
    let split = body
        .char_indices()
        .skip(1)
        .filter(|&(_, c)| c == '+' || c == '-')
        .map(|(i, _)| i)
        .last();
    let imag = |x: &str| -> Result<Q, ParseError> {
        match x {
            "" | "+" => Ok(Q::one()),
            "-" => Ok(-Q::one()),
            _ => parse_q(x),
        }
    };
    match split {
        Some(i) => Ok(qc(parse_q(&body[..i]).map_err(|_| err())?, imag(&body[i..]).map_err(|_| err())?)),
        None => Ok(qc(Q::zero(), imag(body).map_err(|_| err())?)),
    }
}

pub fn format_q(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn format_qc(z: &QC) -> String {
    match (z.re.is_zero(), z.im.is_zero()) {
        (_, true) => format_q(&z.re),
        (true, false) => format!("{}i", format_q(&z.im)),
        (false, false) => {
            let sign = if z.im.is_negative() { "-" } else { "+" };
            format!("{}{}{}i", format_q(&z.re), sign, format_q(&z.im.abs()))
        }
    }
}

/// Dense square matrix over Q(i), row-major.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct QMat {
    dim: usize,
    data: Vec<QC>,
}

impl QMat {
    pub fn zeros(dim: usize) -> Self {
        QMat { dim, data: vec![QC::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = QC::one();
        }
        m
    }

    /// Builds from rows; every row must have `rows.len()` entries.
    pub fn from_rows(rows: Vec<Vec<QC>>) -> Option<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return None;
        }
        Some(QMat { dim, data: rows.into_iter().flatten().collect() })
    }

    pub fn from_real_rows(rows: &[Vec<Q>]) -> Option<Self> {
        Self::from_rows(rows.iter().map(|r| r.iter().cloned().map(qc_real).collect()).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> &QC {
        &self.data[r * self.dim + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: QC) {
        self.data[r * self.dim + c] = v;
    }

    pub fn rows(&self) -> Vec<Vec<QC>> {
        self.data.chunks(self.dim.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.data[c * n + r] = self.data[r * n + c].conj();
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        QMat {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        QMat {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: &QC) -> Self {
        QMat { dim: self.dim, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = &self.data[r * n + k];
                if a.is_zero() {
                    continue;
                }
                for c in 0..n {
                    let b = &other.data[k * n + c];
                    if !b.is_zero() {
                        out.data[r * n + c] = &out.data[r * n + c] + a * b;
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> QC {
        (0..self.dim).fold(QC::zero(), |acc, i| acc + &self.data[i * self.dim + i])
    }

    pub fn to_c64(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim, self.dim, |r, c| qc_to_c64(self.get(r, c)))
    }

    /// Block matrix from an `n x n` grid of equally sized blocks.
    pub fn from_blocks(blocks: &[Vec<&QMat>]) -> Self {
        let n = blocks.len();
        let d = blocks[0][0].dim;
        let mut out = Self::zeros(n * d);
        for (br, row) in blocks.iter().enumerate() {
            for (bc, b) in row.iter().enumerate() {
                for r in 0..d {
                    for c in 0..d {
                        out.set(br * d + r, bc * d + c, b.get(r, c).clone());
                    }
                }
            }
        }
        out
    }

    /// Extracts the `d x d` block at block position (br, bc).
    pub fn block(&self, d: usize, br: usize, bc: usize) -> QMat {
        let mut out = Self::zeros(d);
        for r in 0..d {
            for c in 0..d {
                out.set(r, c, self.get(br * d + r, bc * d + c).clone());
            }
        }
        out
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (a, b) = (self.dim, other.dim);
        let mut out = Self::zeros(a * b);
        for i in 0..a {
            for j in 0..a {
                let x = self.get(i, j);
                if x.is_zero() {
                    continue;
                }
                for k in 0..b {
                    for l in 0..b {
                        out.set(i * b + k, j * b + l, x * other.get(k, l));
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for QMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, row) in self.rows().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            let cells: Vec<String> = row.iter().map(format_qc).collect();
            write!(f, "[{}]", cells.join(", "))?;
        }
        write!(f, "]")
    }
}
