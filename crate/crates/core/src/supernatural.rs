//! Exponent sequences with linear tails, the relations `<=` and `<=^∞`
//! between them, and supernatural numbers.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SupernaturalError {
    #[error("zero denominator")]
    InvalidRational,
    #[error("cannot parse `{0}`")]
    Parse(String),
    #[error("multiplicities must be at least 1")]
    BadMultiplicity,
}

/// `f(i) = prefix[i]` for `i < prefix.len()`, `f(i) = slope*i + intercept` after.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ExpSeq {
    pub prefix: Vec<u64>,
    pub slope: u64,
    pub intercept: u64,
}

impl ExpSeq {
    pub fn new(prefix: Vec<u64>, slope: u64, intercept: u64) -> Self {
        ExpSeq { prefix, slope, intercept }
    }

    pub fn linear(slope: u64, intercept: u64) -> Self {
        Self::new(Vec::new(), slope, intercept)
    }

    pub fn at(&self, i: u64) -> BigInt {
        match self.prefix.get(i as usize) {
            Some(&v) => BigInt::from(v),
            None => BigInt::from(self.slope) * i + self.intercept,
        }
    }

    pub fn values(&self, n: usize) -> Vec<BigInt> {
        (0..n as u64).map(|i| self.at(i)).collect()
    }
}

impl fmt::Display for ExpSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.prefix.iter().map(|v| v.to_string()).collect();
        write!(f, "prefix=[{}];tail={}*i+{}", items.join(","), self.slope, self.intercept)
    }
}

impl FromStr for ExpSeq {
    type Err = SupernaturalError;

    /// Reads `prefix=[3,1,4];tail=2*i+1`. Either part may be omitted; the tail
    /// is a sum of `a*i`, `i` and constant terms.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SupernaturalError::Parse(s.to_string());
        let mut prefix = Vec::new();
        let (mut slope, mut intercept) = (0u64, 0u64);
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, val) = part.split_once('=').ok_or_else(bad)?;
            match key.trim() {
                "prefix" => {
                    let inner = val
                        .trim()
                        .strip_prefix('[')
                        .and_then(|v| v.strip_suffix(']'))
                        .ok_or_else(bad)?;
                    prefix = inner
                        .split(',')
                        .map(str::trim)
                        .filter(|t| !t.is_empty())
                        .map(|t| t.parse().map_err(|_| bad()))
                        .collect::<Result<_, _>>()?;
                }
                "tail" => {
                    for term in val.split('+').map(str::trim) {
                        if term == "i" {
                            slope += 1;
                        } else if let Some(a) = term.strip_suffix("*i") {
                            slope += a.trim().parse::<u64>().map_err(|_| bad())?;
                        } else {
                            intercept += term.parse::<u64>().map_err(|_| bad())?;
                        }
                    }
                }
                _ => return Err(bad()),
            }
        }
        Ok(ExpSeq::new(prefix, slope, intercept))
    }
}

fn boundary(f: &ExpSeq, g: &ExpSeq) -> usize {
    f.prefix.len().max(g.prefix.len())
}

/// `f(i) <= g(i)` for every `i`.
pub fn pointwise_leq(f: &ExpSeq, g: &ExpSeq) -> bool {
    let p = boundary(f, g);
    if (0..p as u64).any(|i| f.at(i) > g.at(i)) {
        return false;
    }
    match f.slope.cmp(&g.slope) {
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => f.intercept <= g.intercept,
        // the gap only widens after the boundary
        std::cmp::Ordering::Less => f.at(p as u64) <= g.at(p as u64),
    }
}

/// Outcome of deciding `f <=^∞ g`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LeqInfty {
    /// Least `m` with `f(i) <= g(i) + m` for all `i`.
    Holds { m: BigInt },
    /// On `i >= start`, `f(i) - g(i) = slope_gap * i + offset` with
    /// `slope_gap > 0`, so no `m` works.
    Fails { slope_gap: u64, offset: BigInt, start: u64 },
}

impl LeqInfty {
    pub fn holds(&self) -> bool {
        matches!(self, LeqInfty::Holds { .. })
    }

    /// For a failure, an index `i` with `f(i) > g(i) + m`.
    pub fn refutation(&self, m: u64) -> Option<u64> {
        match self {
            LeqInfty::Holds { .. } => None,
            LeqInfty::Fails { slope_gap, offset, start } => {
                // need slope_gap * i + offset >= m + 1
                let need: BigInt = BigInt::from(m) + 1 - offset;
                let i = if need.is_positive() {
                    need.div_ceil(&BigInt::from(*slope_gap)).to_u64()?
                } else {
                    0
                };
                Some(i.max(*start))
            }
        }
    }
}

pub fn leq_infty(f: &ExpSeq, g: &ExpSeq) -> LeqInfty {
    let p = boundary(f, g) as u64;
    let offset = BigInt::from(f.intercept) - g.intercept;
    if f.slope > g.slope {
        return LeqInfty::Fails { slope_gap: f.slope - g.slope, offset, start: p };
    }
    // the tail difference is nonincreasing, so its supremum sits at i = p
    let tail_sup = f.at(p) - g.at(p);
    let m = (0..p)
        .map(|i| f.at(i) - g.at(i))
        .chain(std::iter::once(tail_sup))
        .fold(BigInt::zero(), |acc, x| acc.max(x));
    LeqInfty::Holds { m }
}

pub fn cf_embeds(f: &ExpSeq, g: &ExpSeq) -> bool {
    leq_infty(f, g).holds()
}

pub fn cf_biembed(f: &ExpSeq, g: &ExpSeq) -> bool {
    cf_embeds(f, g) && cf_embeds(g, f)
}

/// Pointwise equality, the isomorphism criterion for the UHF algebras.
pub fn uhf_iso(f: &ExpSeq, g: &ExpSeq) -> bool {
    let p = boundary(f, g) as u64;
    (0..p).all(|i| f.at(i) == g.at(i)) && f.slope == g.slope && f.intercept == g.intercept
}

/// Semi-decision on raw finite prefixes: the least `m <= max_m` with
/// `f(i) <= g(i) + m` on the common length, if one exists. Says nothing
/// about indices past the data.
pub fn bounded_leq_infty(f: &[u64], g: &[u64], max_m: u64) -> Option<u64> {
    let need = f
        .iter()
        .zip(g)
        .map(|(&a, &b)| a.saturating_sub(b))
        .max()
        .unwrap_or(0);
    (need <= max_m).then_some(need)
}

// ------------------------------------------------------------ primes

/// The `i`-th prime, 1-based: `nth_prime(1) = 2`.
pub fn nth_prime(i: usize) -> u64 {
    assert!(i >= 1);
    let mut count = 0;
    let mut n = 1u64;
    while count < i {
        n += 1;
        if is_prime(n) {
            count += 1;
        }
    }
    n
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// 1-based position of a prime in the increasing enumeration.
pub fn prime_index(p: u64) -> usize {
    (2..=p).filter(|&n| is_prime(n)).count()
}

/// Prime factorization as `(prime, exponent)` pairs.
pub fn factor(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        let mut e = 0;
        while n % d == 0 {
            n /= d;
            e += 1;
        }
        if e > 0 {
            out.push((d, e));
        }
        d += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

// ------------------------------------------------------ supernaturals

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Exponent {
    Finite(u64),
    Infinite,
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(e) => write!(f, "{e}"),
            Exponent::Infinite => write!(f, "inf"),
        }
    }
}

/// A formal product of prime powers. Primes not listed carry the default
/// exponent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SupernaturalNumber {
    pub default: Exponent,
    /// keyed by the prime itself
    pub exceptions: BTreeMap<u64, Exponent>,
}

impl SupernaturalNumber {
    pub fn one() -> Self {
        SupernaturalNumber { default: Exponent::Finite(0), exceptions: BTreeMap::new() }
    }

    /// Every prime with infinite exponent: the supernatural number of `Q`.
    pub fn universal() -> Self {
        SupernaturalNumber { default: Exponent::Infinite, exceptions: BTreeMap::new() }
    }

    pub fn with(mut self, p: u64, e: Exponent) -> Self {
        if e == self.default {
            self.exceptions.remove(&p);
        } else {
            self.exceptions.insert(p, e);
        }
        self
    }

    pub fn exponent(&self, p: u64) -> Exponent {
        self.exceptions.get(&p).copied().unwrap_or(self.default)
    }
}

impl fmt::Display for SupernaturalNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .exceptions
            .iter()
            .map(|(p, e)| format!("{p}^{e}"))
            .collect();
        let default = format!("p^{}", self.default);
        if parts.is_empty() {
            write!(f, "{default}")
        } else {
            write!(f, "{} (others {default})", parts.join("*"))
        }
    }
}

/// Prime exponents of a product of multiplicities.
///
/// With `infinity_after = Some(b)`, a prime is marked `∞` when its
/// accumulated exponent exceeds `b` and it still divides the last
/// multiplicity, that is, its occurrences have not stopped growing.
pub fn supernatural_of_multiplicities(
    mults: &[u64],
    infinity_after: Option<u64>,
) -> Result<SupernaturalNumber, SupernaturalError> {
    if mults.contains(&0) {
        return Err(SupernaturalError::BadMultiplicity);
    }
    let mut acc: BTreeMap<u64, u64> = BTreeMap::new();
    for &m in mults {
        for (p, e) in factor(m) {
            *acc.entry(p).or_default() += e as u64;
        }
    }
    let last = mults.last().copied().unwrap_or(1);
    let mut s = SupernaturalNumber::one();
    for (p, e) in acc {
        let inf = matches!(infinity_after, Some(b) if e > b && last % p == 0);
        s = s.with(p, if inf { Exponent::Infinite } else { Exponent::Finite(e) });
    }
    Ok(s)
}

/// Whether `num/den` lies in the subgroup of `Q` attached to `s`.
pub fn k0_contains(num: i64, den: u64, s: &SupernaturalNumber) -> Result<bool, SupernaturalError> {
    if den == 0 {
        return Err(SupernaturalError::InvalidRational);
    }
    let g = (num.unsigned_abs()).gcd(&den);
    let den = den / g.max(1);
    Ok(factor(den).into_iter().all(|(p, e)| match s.exponent(p) {
        Exponent::Infinite => true,
        Exponent::Finite(k) => e as u64 <= k,
    }))
}
