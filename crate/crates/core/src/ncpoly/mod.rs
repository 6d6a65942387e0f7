//! Free *-polynomials, their enumeration, and codes of matrix tuples.

mod codes;
pub mod index;
mod poly;
mod tuple;

pub use codes::{
    check_state, check_xi, relations, xi_code, Relations, StateCheck, StateCode, XiCode,
    XiViolation, CODE_TOL,
};
pub use poly::{
    enum_poly, enum_poly_big, format_word, index_below, index_of, parse_word, Family, Letter,
    NcPolynomial, Word,
};
pub use tuple::{
    format_float_matrix, format_matrix, parse_matrix, ExactTuple, MatrixTuple, StarMatrix, Tuple,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NcError {
    #[error("variable x{0} is not bound by the tuple")]
    UnboundVariable(u32),
    #[error("polynomial without constant term cannot hold a constant")]
    ConstantTerm,
    #[error("the zero polynomial has no index")]
    ZeroPolynomial,
    #[error("tuple matrices have mismatched sizes")]
    DimensionMismatch,
    #[error("code lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("parse error: {0}")]
    Parse(String),
}
