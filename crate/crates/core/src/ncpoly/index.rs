//! Bijections between naturals and the combinatorial pieces of a polynomial:
//! words, Gaussian-rational coefficients, and finite term lists.
//!
//! Words are ordered in shells: shell `s` holds the words of length at most
//! `s` over the letters of `X_1, ..., X_s` (and adjoints) that are not in an
//! earlier shell; inside a shell words are ordered by length, then
//! lexicographically by letter code. Letter code of `X_k` is `2(k-1)`, of
//! `X_k*` it is `2(k-1)+1`.

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::exact::{Q, QC};

pub(crate) fn big(n: u64) -> BigUint {
    BigUint::from(n)
}

/// Cantor pairing `(a, b) -> (a+b)(a+b+1)/2 + b`.
pub fn pair(a: &BigUint, b: &BigUint) -> BigUint {
    let s = a + b;
    (&s * (&s + 1u32)) / 2u32 + b
}

pub fn unpair(z: &BigUint) -> (BigUint, BigUint) {
    // w = floor((sqrt(8z+1) - 1) / 2)
    let mut w = ((z * 8u32 + 1u32).sqrt() - 1u32) / 2u32;
    // guard against rounding at perfect squares
    while (&w * (&w + 1u32)) / 2u32 > *z {
        w -= 1u32;
    }
    while ((&w + 1u32) * (&w + 2u32)) / 2u32 <= *z {
        w += 1u32;
    }
    let t = (&w * (&w + 1u32)) / 2u32;
    let b = z - t;
    let a = &w - &b;
    (a, b)
}

// ---------------------------------------------------------------- words

fn pow(base: u64, e: usize) -> BigUint {
    num_traits::pow(big(base), e)
}

/// Number of length-`len` words in shell `s`.
fn shell_len_count(s: usize, len: usize) -> BigUint {
    let a = 2 * s as u64;
    if len == s {
        pow(a, len)
    } else {
        pow(a, len) - pow(a - 2, len)
    }
}

fn shell_count(s: usize) -> BigUint {
    (1..=s).map(|l| shell_len_count(s, l)).sum()
}

fn shell_of(word: &[u64]) -> usize {
    let max_var = word.iter().map(|&l| (l / 2) as usize + 1).max().unwrap_or(0);
    word.len().max(max_var)
}

/// Rank of a nonempty word among all nonempty words.
pub fn word_index(word: &[u64]) -> BigUint {
    assert!(!word.is_empty(), "the empty word has no index");
    let s = shell_of(word);
    let mut idx: BigUint = (1..s).map(shell_count).sum();
    for l in 1..word.len() {
        idx += shell_len_count(s, l);
    }
    let a = 2 * s as u64;
    let high = a - 2;
    let full = word.len() == s;
    let mut used = full;
    for (i, &letter) in word.iter().enumerate() {
        let rem = word.len() - 1 - i;
        for x in 0..letter {
            idx += if used || x >= high { pow(a, rem) } else { pow(a, rem) - pow(a - 2, rem) };
        }
        used |= letter >= high;
    }
    idx
}

/// Inverse of [`word_index`].
pub fn word_at(index: &BigUint) -> Vec<u64> {
    let mut rest = index.clone();
    let mut s = 1;
    loop {
        let c = shell_count(s);
        if rest < c {
            break;
        }
        rest -= c;
        s += 1;
    }
    let mut len = 1;
    loop {
        let c = shell_len_count(s, len);
        if rest < c {
            break;
        }
        rest -= c;
        len += 1;
    }
    let a = 2 * s as u64;
    let high = a - 2;
    let mut used = len == s;
    let mut word = Vec::with_capacity(len);
    for i in 0..len {
        let rem = len - 1 - i;
        let mut x = 0;
        loop {
            let block = if used || x >= high { pow(a, rem) } else { pow(a, rem) - pow(a - 2, rem) };
            if rest < block {
                break;
            }
            rest -= block;
            x += 1;
        }
        used |= x >= high;
        word.push(x);
    }
    word
}

// --------------------------------------------------------- coefficients

/// Calkin-Wilf index (1-based) of a positive rational.
fn calkin_wilf_index(x: &Q) -> BigUint {
    let mut a = x.numer().magnitude().clone();
    let mut b = x.denom().magnitude().clone();
    // runs of identical moves, collected leaf to root
    let mut runs: Vec<(bool, BigUint)> = Vec::new();
    while a != b {
        if a > b {
            let k = (&a - 1u32) / &b;
            a -= &b * &k;
            runs.push((true, k));
        } else {
            let k = (&b - 1u32) / &a;
            b -= &a * &k;
            runs.push((false, k));
        }
    }
    let mut idx = BigUint::one();
    for (right, k) in runs.into_iter().rev() {
        let k = k.to_usize().expect("Calkin-Wilf run too long");
        idx <<= k;
        if right {
            idx += (BigUint::one() << k) - 1u32;
        }
    }
    idx
}

fn calkin_wilf_at(index: &BigUint) -> Q {
    let (mut a, mut b) = (BigUint::one(), BigUint::one());
    let bits = index.bits();
    for i in (0..bits.saturating_sub(1)).rev() {
        if index.bit(i) {
            a += &b;
        } else {
            b += &a;
        }
    }
    BigRational::new(a.into(), b.into())
}

fn rational_code(x: &Q) -> BigUint {
    if x.is_zero() {
        BigUint::zero()
    } else if x.is_positive() {
        calkin_wilf_index(x) * 2u32 - 1u32
    } else {
        calkin_wilf_index(&-x) * 2u32
    }
}

fn rational_at(code: &BigUint) -> Q {
    if code.is_zero() {
        Q::zero()
    } else if code.is_odd() {
        calkin_wilf_at(&((code + 1u32) / 2u32))
    } else {
        -calkin_wilf_at(&(code / 2u32))
    }
}

/// Code of a nonzero coefficient; the coefficient 1 has code 1.
pub fn coeff_code(z: &QC) -> BigUint {
    assert!(!(z.re.is_zero() && z.im.is_zero()), "zero coefficient has no code");
    pair(&rational_code(&z.re), &rational_code(&z.im))
}

pub fn coeff_at(code: &BigUint) -> QC {
    assert!(!code.is_zero(), "coefficient codes start at 1");
    let (a, b) = unpair(code);
    QC::new(rational_at(&a), rational_at(&b))
}

// --------------------------------------------------------- term lists

/// Codes an `r`-tuple by pairing the codes of its two halves, so the code
/// has about `r` times the bit length of the largest entry.
fn tuple_index(t: &[BigUint]) -> BigUint {
    match t.len() {
        1 => t[0].clone(),
        r => {
            let (lo, hi) = t.split_at(r / 2);
            pair(&tuple_index(lo), &tuple_index(hi))
        }
    }
}

fn tuple_at(index: &BigUint, r: usize, out: &mut Vec<BigUint>) {
    if r == 1 {
        out.push(index.clone());
        return;
    }
    let (lo, hi) = unpair(index);
    tuple_at(&lo, r / 2, out);
    tuple_at(&hi, r - r / 2, out);
}

/// A nonempty list of naturals, coded as `pair(len - 1, tuple code)`.
pub fn list_index(list: &[BigUint]) -> BigUint {
    assert!(!list.is_empty());
    pair(&big(list.len() as u64 - 1), &tuple_index(list))
}

pub fn list_at(index: &BigUint) -> Vec<BigUint> {
    let (r, tuple) = unpair(index);
    let r = r.to_usize().expect("term list too long") + 1;
    let mut out = Vec::with_capacity(r);
    tuple_at(&tuple, r, &mut out);
    out
}

/// Codes a term list `(word position, coefficient code)` sorted by strictly
/// increasing position.
pub fn terms_index(terms: &[(BigUint, BigUint)]) -> BigUint {
    let mut prev: Option<&BigUint> = None;
    let list: Vec<BigUint> = terms
        .iter()
        .map(|(w, c)| {
            let gap = match prev {
                None => w.clone(),
                Some(p) => w - p - 1u32,
            };
            prev = Some(w);
            pair(&gap, &(c - 1u32))
        })
        .collect();
    list_index(&list)
}

pub fn terms_at(index: &BigUint) -> Vec<(BigUint, BigUint)> {
    let mut pos: Option<BigUint> = None;
    list_at(index)
        .into_iter()
        .map(|u| {
            let (gap, c) = unpair(&u);
            let w = match &pos {
                None => gap,
                Some(p) => p + 1u32 + gap,
            };
            pos = Some(w.clone());
            (w, c + 1u32)
        })
        .collect()
}

/// Term-list index of the single term `w` with coefficient 1.
pub(crate) fn unit_monomial_terms_index(w: &BigUint) -> BigUint {
    let u = pair(w, &BigUint::zero());
    pair(&BigUint::zero(), &u)
}

/// Largest `w` with `w(w+1)/2 <= z`.
fn tri_root(z: &BigUint) -> BigUint {
    let (a, b) = unpair(z);
    a + b
}

/// Number of unit monomials whose term-list index is `< x`.
pub(crate) fn unit_monomials_below(x: &BigUint) -> BigUint {
    // the index of word w is pair(0, u) = u(u+3)/2 with u = T(w)
    if x.is_zero() {
        return BigUint::zero();
    }
    let y = x - 1u32;
    let ind = |u: &BigUint| (u * (u + 3u32)) / 2u32;
    let mut u = tri_root(&y);
    while ind(&u) > y {
        u -= 1u32;
    }
    tri_root(&u) + 1u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{parse_qc, q, qc};

    #[test]
    fn pairing_roundtrip() {
        for z in 0..500u64 {
            let (a, b) = unpair(&big(z));
            assert_eq!(pair(&a, &b), big(z));
        }
    }

    #[test]
    fn first_words_are_degree_one_in_x1() {
        assert_eq!(word_at(&big(0)), vec![0]);
        assert_eq!(word_at(&big(1)), vec![1]);
        // shell 2 starts with X2, X2*
        assert_eq!(word_at(&big(2)), vec![2]);
        assert_eq!(word_at(&big(3)), vec![3]);
        assert_eq!(word_at(&big(4)), vec![0, 0]);
    }

    #[test]
    fn word_roundtrip() {
        for i in 0..3000u64 {
            let w = word_at(&big(i));
            assert_eq!(word_index(&w), big(i), "word {w:?}");
        }
    }

    #[test]
    fn coefficient_one_has_code_one() {
        assert_eq!(coeff_code(&parse_qc("1").unwrap()), big(1));
        assert_eq!(coeff_at(&big(1)), parse_qc("1").unwrap());
    }

    #[test]
    fn coefficient_roundtrip() {
        for code in 1..2000u64 {
            let z = coeff_at(&big(code));
            assert_eq!(coeff_code(&z), big(code));
        }
        let z = qc(q(-7, 3), q(5, 11));
        assert_eq!(coeff_at(&coeff_code(&z)), z);
    }

    #[test]
    fn unit_monomial_count_matches_scan() {
        let mut w = 0u64;
        for x in 0..5000u64 {
            while unit_monomial_terms_index(&big(w)) < big(x) {
                w += 1;
            }
            assert_eq!(unit_monomials_below(&big(x)), big(w));
        }
    }

    #[test]
    fn term_list_roundtrip() {
        for i in 0..2000u64 {
            let t = terms_at(&big(i));
            assert_eq!(terms_index(&t), big(i));
        }
    }
}
