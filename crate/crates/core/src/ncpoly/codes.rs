use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{enum_poly, Family, MatrixTuple, NcError, NcPolynomial};
use crate::linalg::op_norm;

pub const CODE_TOL: f64 = 1e-9;

/// Truncated norm code: `values[j]` is the norm of the `j`-th polynomial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiCode {
    pub values: Vec<f64>,
}

/// Truncated functional code: `values[k]` is the value on the `k`-th polynomial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateCode {
    pub values: Vec<Complex64>,
}

impl XiCode {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Algebraic coincidences among the first `L` polynomials.
#[derive(Clone, Debug, Default)]
pub struct Relations {
    /// `(k, m, n)` with `p_k = p_m + p_n`
    pub sums: Vec<(usize, usize, usize)>,
    /// `(k, m, n)` with `p_k = p_m p_n`
    pub products: Vec<(usize, usize, usize)>,
    /// `(j, j')` with `p_{j'} = p_j* p_j`
    pub squares: Vec<(usize, usize)>,
}

fn compute_relations(len: usize, family: Family) -> Relations {
    let polys: Vec<_> = (0..len as u64).map(|j| enum_poly(j, family)).collect();
    // every in-range result is one of the listed polynomials, so a lookup
    // table replaces index computation
    let table: HashMap<&NcPolynomial, usize> = polys.iter().enumerate().map(|(j, p)| (p, j)).collect();
    let max_deg = polys.iter().map(|p| p.degree()).max().unwrap_or(0);
    let max_terms = polys.iter().map(|p| p.num_terms()).max().unwrap_or(0);
    let mut rel = Relations::default();
    for m in 0..len {
        for n in m..len {
            if polys[m].num_terms().max(polys[n].num_terms()) > max_terms + 1 {
                continue;
            }
            if let Some(&k) = table.get(&polys[m].add(&polys[n])) {
                rel.sums.push((k, m, n));
            }
        }
        for n in 0..len {
            if polys[m].degree() + polys[n].degree() > max_deg
                || polys[m].num_terms() * polys[n].num_terms() > max_terms * max_terms
            {
                continue;
            }
            if let Some(&k) = table.get(&polys[m].mul(&polys[n])) {
                rel.products.push((k, m, n));
            }
        }
        if 2 * polys[m].degree() <= max_deg {
            if let Some(&k) = table.get(&polys[m].adjoint().mul(&polys[m])) {
                rel.squares.push((m, k));
            }
        }
    }
    rel
}

/// Relations for the constant-free family, cached per length.
pub fn relations(len: usize) -> Arc<Relations> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Relations>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(r) = cache.lock().unwrap().get(&len) {
        return r.clone();
    }
    let r = Arc::new(compute_relations(len, Family::NoConstant));
    cache.lock().unwrap().insert(len, r.clone());
    r
}

/// Norms of the first `len` polynomials on `γ`, padding `γ` with zeros.
pub fn xi_code(gamma: &MatrixTuple, len: usize) -> XiCode {
    XiCode {
        values: (0..len as u64)
            .map(|j| op_norm(&gamma.eval_padded(&enum_poly(j, Family::NoConstant))))
            .collect(),
    }
}

/// The first axiom a norm code violates, if any.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum XiViolation {
    Negative { j: usize },
    CStarIdentity { j: usize, jstar: usize },
    Triangle { k: usize, m: usize, n: usize },
    Submultiplicative { k: usize, m: usize, n: usize },
}

pub fn check_xi(delta: &XiCode, tol: f64) -> Option<XiViolation> {
    let v = &delta.values;
    if let Some(j) = v.iter().position(|&x| x < -tol) {
        return Some(XiViolation::Negative { j });
    }
    let rel = relations(v.len());
    for &(j, jstar) in &rel.squares {
        if (v[jstar] - v[j] * v[j]).abs() > tol {
            return Some(XiViolation::CStarIdentity { j, jstar });
        }
    }
    for &(k, m, n) in &rel.sums {
        if v[k] > v[m] + v[n] + tol {
            return Some(XiViolation::Triangle { k, m, n });
        }
    }
    for &(k, m, n) in &rel.products {
        if v[k] > v[m] * v[n] + tol {
            return Some(XiViolation::Submultiplicative { k, m, n });
        }
    }
    None
}

/// Outcome of testing a functional code against a norm code.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum StateCheck {
    Accept,
    /// `condition` is 1 (bounded), 2 (additive) or 3 (positive); `index` is
    /// the offending polynomial index.
    Reject { condition: u8, index: usize },
}

pub fn check_state(delta: &XiCode, phi: &StateCode, tol: f64) -> Result<StateCheck, NcError> {
    if delta.len() != phi.values.len() {
        return Err(NcError::LengthMismatch(delta.len(), phi.values.len()));
    }
    let (d, f) = (&delta.values, &phi.values);
    if let Some(k) = (0..d.len()).find(|&k| f[k].norm() > d[k] + tol) {
        return Ok(StateCheck::Reject { condition: 1, index: k });
    }
    let rel = relations(d.len());
    if let Some(&(k, _, _)) =
        rel.sums.iter().find(|&&(k, m, n)| (f[k] - f[m] - f[n]).norm() > tol)
    {
        return Ok(StateCheck::Reject { condition: 2, index: k });
    }
    if let Some(&(_, k)) =
        rel.squares.iter().find(|&&(_, k)| f[k].re < -tol || f[k].im.abs() > tol)
    {
        return Ok(StateCheck::Reject { condition: 3, index: k });
    }
    Ok(StateCheck::Accept)
}
