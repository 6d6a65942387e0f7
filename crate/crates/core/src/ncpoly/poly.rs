use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use super::index::{
    big, coeff_at, coeff_code, terms_at, terms_index, unit_monomial_terms_index,
    unit_monomials_below, word_at, word_index,
};
use super::NcError;
use crate::exact::{format_qc, parse_qc, QC};

/// One letter: variable `X_var` (1-based) or its adjoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub var: u32,
    pub star: bool,
}

impl Letter {
    pub fn x(var: u32) -> Self {
        Letter { var, star: false }
    }

    pub fn x_star(var: u32) -> Self {
        Letter { var, star: true }
    }

    pub fn code(self) -> u64 {
        2 * (self.var as u64 - 1) + self.star as u64
    }

    pub fn from_code(code: u64) -> Self {
        Letter { var: (code / 2 + 1) as u32, star: code % 2 == 1 }
    }

    pub fn adjoint(self) -> Self {
        Letter { star: !self.star, ..self }
    }
}

pub type Word = Vec<Letter>;

/// Which of the two enumerations a polynomial belongs to: the family without
/// constant term, or the unital family that also admits the empty word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    NoConstant,
    Unital,
}

/// Position of a word in the enumeration of words of `family`.
fn word_pos(word: &[Letter], family: Family) -> BigUint {
    let codes: Vec<u64> = word.iter().map(|l| l.code()).collect();
    match family {
        Family::NoConstant => word_index(&codes),
        Family::Unital if codes.is_empty() => BigUint::zero(),
        Family::Unital => word_index(&codes) + 1u32,
    }
}

fn word_from_pos(pos: &BigUint, family: Family) -> Word {
    let codes = match family {
        Family::NoConstant => word_at(pos),
        Family::Unital if pos.is_zero() => Vec::new(),
        Family::Unital => word_at(&(pos - 1u32)),
    };
    codes.into_iter().map(Letter::from_code).collect()
}

/// A free *-polynomial with Gaussian-rational coefficients in canonical form:
/// terms sorted by word position, no repeated words, no zero coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NcPolynomial {
    family: Family,
    // word position -> (word, coefficient)
    terms: BTreeMap<BigUint, (Word, QC)>,
}

impl NcPolynomial {
    pub fn zero(family: Family) -> Self {
        NcPolynomial { family, terms: BTreeMap::new() }
    }

    /// Builds a canonical polynomial, merging repeated words and dropping zeros.
    pub fn from_terms(
        family: Family,
        terms: impl IntoIterator<Item = (QC, Word)>,
    ) -> Result<Self, NcError> {
        let mut p = Self::zero(family);
        for (c, w) in terms {
            if w.iter().any(|l| l.var == 0) {
                return Err(NcError::Parse("variables are numbered from 1".into()));
            }
            if w.is_empty() && family == Family::NoConstant {
                return Err(NcError::ConstantTerm);
            }
            p.add_term(w, c);
        }
        Ok(p)
    }

    pub fn monomial(family: Family, word: Word) -> Result<Self, NcError> {
        Self::from_terms(family, [(QC::one(), word)])
    }

    pub fn var(i: u32) -> Self {
        Self::monomial(Family::NoConstant, vec![Letter::x(i)]).expect("valid variable")
    }

    fn add_term(&mut self, word: Word, c: QC) {
        if c.is_zero() {
            return;
        }
        let key = word_pos(&word, self.family);
        let remove = match self.terms.get_mut(&key) {
            Some((_, acc)) => {
                *acc = &*acc + c;
                acc.is_zero()
            }
            None => {
                self.terms.insert(key.clone(), (word, c));
                false
            }
        };
        if remove {
            self.terms.remove(&key);
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (&Word, &QC)> {
        self.terms.values().map(|(w, c)| (w, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn degree(&self) -> usize {
        self.terms.values().map(|(w, _)| w.len()).max().unwrap_or(0)
    }

    /// Largest variable index that occurs.
    pub fn max_var(&self) -> u32 {
        self.terms.values().flat_map(|(w, _)| w.iter().map(|l| l.var)).max().unwrap_or(0)
    }

    fn combine(&self, other: &Self) -> Family {
        if self.family == Family::Unital || other.family == Family::Unital {
            Family::Unital
        } else {
            Family::NoConstant
        }
    }

    /// Re-homes a polynomial into `family`; fails if a constant term would land in
    /// the constant-free family.
    pub fn into_family(self, family: Family) -> Result<Self, NcError> {
        Self::from_terms(family, self.terms.into_values().map(|(w, c)| (c, w)))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone().into_family(self.combine(other)).expect("widening family");
        for (w, c) in other.terms() {
            out.add_term(w.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(&-QC::one())
    }

    pub fn scale(&self, s: &QC) -> Self {
        let mut out = Self::zero(self.family);
        for (w, c) in self.terms() {
            out.add_term(w.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.combine(other));
        for (w1, c1) in self.terms() {
            for (w2, c2) in other.terms() {
                let mut w = w1.clone();
                w.extend_from_slice(w2);
                out.add_term(w, c1 * c2);
            }
        }
        out
    }

    /// The formal adjoint: reverse words, swap `X` and `X*`, conjugate coefficients.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero(self.family);
        for (w, c) in self.terms() {
            let w: Word = w.iter().rev().map(|l| l.adjoint()).collect();
            out.add_term(w, c.conj());
        }
        out
    }

    /// Parses the `coeff * word; coeff * word` text form. A bare coefficient is
    /// a constant term, `0` is the zero polynomial.
    pub fn parse(text: &str, family: Family) -> Result<Self, NcError> {
        let text = text.trim();
        if text == "0" || text.is_empty() {
            return Ok(Self::zero(family));
        }
        let mut terms = Vec::new();
        for raw in text.split(';') {
            let raw = raw.trim();
            let (c, w) = match raw.split_once('*') {
                Some((c, w)) => match parse_qc(c.trim()) {
                    Ok(c) => (c, parse_word(w)?),
                    Err(_) => {
                        return Err(NcError::Parse(format!("term `{raw}` is not `coeff * word`")))
                    }
                },
                None => (parse_qc(raw).map_err(|e| NcError::Parse(e.to_string()))?, Vec::new()),
            };
            terms.push((c, w));
        }
        Self::from_terms(family, terms)
    }
}

pub fn parse_word(text: &str) -> Result<Word, NcError> {
    text.split_whitespace()
        .map(|tok| {
            let (body, star) = match tok.strip_suffix('*') {
                Some(b) => (b, true),
                None => (tok, false),
            };
            let var = body
                .strip_prefix('x')
                .and_then(|n| n.parse::<u32>().ok())
                .filter(|&v| v >= 1)
                .ok_or_else(|| NcError::Parse(format!("bad letter `{tok}`")))?;
            Ok(Letter { var, star })
        })
        .collect()
}

pub fn format_word(w: &[Letter]) -> String {
    w.iter()
        .map(|l| format!("x{}{}", l.var, if l.star { "*" } else { "" }))
        .collect::<Vec<_>>()
        .join(" ")
}

impl fmt::Display for NcPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms()
            .map(|(w, c)| {
                if w.is_empty() {
                    format_qc(c)
                } else {
                    format!("{} * {}", format_qc(c), format_word(w))
                }
            })
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// The canonical enumeration of nonzero polynomials of a family.
///
/// Even indices `2w` are the unit-coefficient monomials, in word order; odd
/// indices `2r+1` run through every other nonzero polynomial, ordered by the
/// code of its term list.
pub fn enum_poly_big(j: &BigUint, family: Family) -> NcPolynomial {
    let two = big(2);
    if (j % &two).is_zero() {
        let w = word_from_pos(&(j / &two), family);
        return NcPolynomial::monomial(family, w).expect("word fits family");
    }
    let r = (j - 1u32) / &two;
    // find the term-list index of the r-th list that is not a unit monomial
    let mut x = r.clone();
    loop {
        let skipped = unit_monomials_below(&x);
        let candidate = &r + &skipped;
        if candidate == x {
            let w = unit_monomials_below(&(&x + 1u32));
            if w == skipped {
                break;
            }
            // x itself is a unit monomial; step past it
            x += 1u32;
            continue;
        }
        x = candidate;
    }
    let terms = terms_at(&x);
    NcPolynomial::from_terms(
        family,
        terms.into_iter().map(|(pos, code)| (coeff_at(&code), word_from_pos(&pos, family))),
    )
    .expect("decoded terms are valid")
}

pub fn enum_poly(j: u64, family: Family) -> NcPolynomial {
    enum_poly_big(&big(j), family)
}

/// Index of a nonzero polynomial in its family's enumeration.
pub fn index_of(p: &NcPolynomial) -> Result<BigUint, NcError> {
    if p.is_zero() {
        return Err(NcError::ZeroPolynomial);
    }
    let terms: Vec<(BigUint, BigUint)> = p
        .terms
        .iter()
        .map(|(pos, (_, c))| (pos.clone(), coeff_code(c)))
        .collect();
    if terms.len() == 1 && terms[0].1.is_one() {
        return Ok(&terms[0].0 * 2u32);
    }
    let x = terms_index(&terms);
    debug_assert!(x != unit_monomial_terms_index(&terms[0].0) || terms.len() > 1);
    let r = &x - unit_monomials_below(&x);
    Ok(r * 2u32 + 1u32)
}

/// Index as a machine integer when it is below `bound`.
pub fn index_below(p: &NcPolynomial, bound: usize) -> Option<usize> {
    if p.is_zero() {
        return None;
    }
    index_of(p).ok().and_then(|i| i.to_usize()).filter(|&i| i < bound)
}
