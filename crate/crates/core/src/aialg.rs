//! Affine data of AI algebra limits over `C[0,1]`: exact piecewise-linear
//! functions, hat partitions and the maps ς, induced maps of standard
//! homomorphisms, the bounded search for approximating characteristic tuples,
//! the stage recursion, and the K₀, simplicity and trace certificates.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_integer::Roots;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::choquet::{two_pow_neg, ChoquetError, DirectSystem, OrderUnitMap};
use crate::exact::{format_q, parse_q, q_to_f64, Q};
use crate::supernatural::{nth_prime, supernatural_of_multiplicities, SupernaturalNumber};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AiError {
    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("invalid piecewise-linear function: {0}")]
    InvalidFunction(String),
    #[error("dictionary index {0} is not valid")]
    InvalidIndex(u64),
    #[error("search exhausted{}: {reason}", stage.map(|s| format!(" at stage {s}")).unwrap_or_default())]
    SearchExhausted { stage: Option<usize>, reason: String },
    #[error("no certificate up to stage {0}")]
    CertNotFound(usize),
    #[error("structural check failed: {0}")]
    Structure(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<ChoquetError> for AiError {
    fn from(e: ChoquetError) -> Self {
        AiError::ShapeError(e.to_string())
    }
}

/// Default uniform grid for sup-norm comparisons.
pub const DEFAULT_GRID: usize = 513;

// float prefilters hand borderline cases to the exact check
const FLOAT_SLACK: f64 = 1e-9;

// ---------------------------------------------------------------------------
// piecewise-linear functions

/// A continuous piecewise-linear function on `[0,1]` with rational
/// breakpoints and values. Arguments outside `[0,1]` are clamped.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PLFunc {
    breakpoints: Vec<Q>,
    values: Vec<Q>,
}

impl PLFunc {
    pub fn new(breakpoints: Vec<Q>, values: Vec<Q>) -> Result<Self, AiError> {
        if breakpoints.len() < 2 || breakpoints.len() != values.len() {
            return Err(AiError::InvalidFunction("need at least two breakpoints, one value each".into()));
        }
        if !breakpoints[0].is_zero() || !breakpoints[breakpoints.len() - 1].is_one() {
            return Err(AiError::InvalidFunction("breakpoints must run from 0 to 1".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AiError::InvalidFunction("breakpoints must increase strictly".into()));
        }
        Ok(PLFunc { breakpoints, values })
    }

    pub fn constant(c: Q) -> Self {
        PLFunc { breakpoints: vec![Q::zero(), Q::one()], values: vec![c.clone(), c] }
    }

    pub fn identity() -> Self {
        PLFunc { breakpoints: vec![Q::zero(), Q::one()], values: vec![Q::zero(), Q::one()] }
    }

    /// Interpolant of `values` on the uniform nodes `i/(n-1)`; one value gives a constant.
    pub fn from_uniform_nodes(values: Vec<Q>) -> Result<Self, AiError> {
        match values.len() {
            0 => Err(AiError::InvalidFunction("no node values".into())),
            1 => Ok(PLFunc::constant(values[0].clone())),
            n => {
                let den = BigInt::from(n - 1);
                let bps = (0..n).map(|i| Q::new(BigInt::from(i), den.clone())).collect();
                PLFunc::new(bps, values)
            }
        }
    }

    pub fn breakpoints(&self) -> &[Q] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Q] {
        &self.values
    }

    pub fn eval(&self, x: &Q) -> Q {
        let bps = &self.breakpoints;
        if x <= &bps[0] {
            return self.values[0].clone();
        }
        let last = bps.len() - 1;
        if x >= &bps[last] {
            return self.values[last].clone();
        }
        let i = bps.partition_point(|b| b <= x) - 1;
        if &bps[i] == x {
            return self.values[i].clone();
        }
        let (x0, x1) = (&bps[i], &bps[i + 1]);
        let (y0, y1) = (&self.values[i], &self.values[i + 1]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|v| v == &self.values[0])
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(Zero::is_zero)
    }

    pub fn min_value(&self) -> Q {
        self.values.iter().min().cloned().unwrap_or_else(Q::zero)
    }

    pub fn max_value(&self) -> Q {
        self.values.iter().max().cloned().unwrap_or_else(Q::zero)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &PLFunc) -> PLFunc {
        let mut xs: Vec<Q> = inner.breakpoints.clone();
        for i in 0..inner.breakpoints.len() - 1 {
            let (x0, x1) = (&inner.breakpoints[i], &inner.breakpoints[i + 1]);
            let (y0, y1) = (&inner.values[i], &inner.values[i + 1]);
            if y0 == y1 {
                continue;
            }
            let (lo, hi) = if y0 < y1 { (y0, y1) } else { (y1, y0) };
            for b in &self.breakpoints {
                if b > lo && b < hi {
                    xs.push(x0 + (b - y0) * (x1 - x0) / (y1 - y0));
                }
            }
        }
        xs.sort();
        xs.dedup();
        let values = xs.iter().map(|x| self.eval(&inner.eval(x))).collect();
        PLFunc { breakpoints: xs, values }.simplified()
    }

    /// `Σ c_i f_i`.
    pub fn linear_combination(terms: &[(Q, &PLFunc)]) -> PLFunc {
        if terms.is_empty() {
            return PLFunc::constant(Q::zero());
        }
        let mut xs: Vec<Q> = terms.iter().flat_map(|(_, f)| f.breakpoints.iter().cloned()).collect();
        xs.sort();
        xs.dedup();
        let values = xs
            .iter()
            .map(|x| terms.iter().map(|(c, f)| c * f.eval(x)).sum())
            .collect();
        PLFunc { breakpoints: xs, values }.simplified()
    }

    /// Drops interior breakpoints where the function does not bend.
    pub fn simplified(mut self) -> PLFunc {
        let mut bps: Vec<Q> = Vec::with_capacity(self.breakpoints.len());
        let mut vals: Vec<Q> = Vec::with_capacity(self.values.len());
        for (x, y) in self.breakpoints.drain(..).zip(self.values.drain(..)) {
            while bps.len() >= 2 {
                let n = bps.len();
                let (xa, ya) = (&bps[n - 2], &vals[n - 2]);
                let (xb, yb) = (&bps[n - 1], &vals[n - 1]);
                if (yb - ya) * (&x - xa) == (&y - ya) * (xb - xa) {
                    bps.pop();
                    vals.pop();
                } else {
                    break;
                }
            }
            bps.push(x);
            vals.push(y);
        }
        PLFunc { breakpoints: bps, values: vals }
    }

    /// Exact values on the uniform grid of `n` points.
    pub fn sample(&self, n: usize) -> Vec<Q> {
        grid_points(n).iter().map(|x| self.eval(x)).collect()
    }

    pub fn to_f64(&self) -> PlF64 {
        PlF64 {
            xs: self.breakpoints.iter().map(q_to_f64).collect(),
            ys: self.values.iter().map(q_to_f64).collect(),
        }
    }

    /// `x,value` lines on a uniform grid, for plotting.
    pub fn to_csv(&self, n: usize) -> String {
        let mut out = String::from("x,value\n");
        for (x, y) in grid_points(n).iter().zip(self.sample(n)) {
            out.push_str(&format!("{},{}\n", q_to_f64(x), q_to_f64(&y)));
        }
        out
    }
}

/// Text form `0:0,1/2:1,1:0` (breakpoint:value pairs).
impl fmt::Display for PLFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .breakpoints
            .iter()
            .zip(&self.values)
            .map(|(x, y)| format!("{}:{}", format_q(x), format_q(y)))
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for PLFunc {
    type Err = AiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if !s.contains(':') {
            // a bare rational is a constant
            return parse_q(s).map(PLFunc::constant).map_err(|e| AiError::Parse(e.to_string()));
        }
        let mut bps = Vec::new();
        let mut vals = Vec::new();
        for pair in s.split(',') {
            let (x, y) = pair
                .split_once(':')
                .ok_or_else(|| AiError::Parse(format!("`{pair}` is not breakpoint:value")))?;
            bps.push(parse_q(x.trim()).map_err(|e| AiError::Parse(e.to_string()))?);
            vals.push(parse_q(y.trim()).map_err(|e| AiError::Parse(e.to_string()))?);
        }
        PLFunc::new(bps, vals)
    }
}

/// Floating copy of a [`PLFunc`] for fast sampling inside searches.
#[derive(Clone, Debug)]
pub struct PlF64 {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PlF64 {
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&b| b <= x) - 1;
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.ys[i] + t * (self.ys[i + 1] - self.ys[i])
    }
}

/// The points `i/(n-1)`, `i = 0..n`.
pub fn grid_points(n: usize) -> Vec<Q> {
    if n <= 1 {
        return vec![Q::zero()];
    }
    let den = BigInt::from(n - 1);
    (0..n).map(|i| Q::new(BigInt::from(i), den.clone())).collect()
}

fn grid_points_f64(n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.0];
    }
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// Exact max of `|a - b|` over the uniform grid of `n` points.
pub fn grid_sup_distance(a: &PLFunc, b: &PLFunc, n: usize) -> Q {
    grid_points(n)
        .iter()
        .map(|x| (a.eval(x) - b.eval(x)).abs())
        .max()
        .unwrap_or_else(Q::zero)
}

fn grid_sup_distance_f64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// hat partitions, η and β

/// The peaked partition `f_{n,0}, …, f_{n,n-1}`: hat functions on the nodes `j/(n-1)`.
pub fn hat_partition(n: usize) -> Vec<PLFunc> {
    if n <= 1 {
        return vec![PLFunc::constant(Q::one())];
    }
    (0..n)
        .map(|i| {
            let vals = (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect();
            PLFunc::from_uniform_nodes(vals).expect("n >= 2 nodes")
        })
        .collect()
}

/// `η_n(x) = Σ x_i f_{n,i}`.
pub fn eta(n: usize, x: &[Q]) -> Result<PLFunc, AiError> {
    if n == 0 || x.len() != n {
        return Err(AiError::ShapeError(format!("η_{n} applied to a vector of length {}", x.len())));
    }
    PLFunc::from_uniform_nodes(x.to_vec())
}

/// `β_n(f)_i = f(i/(n-1))`; `β_1` evaluates at 0.
pub fn beta(n: usize, f: &PLFunc) -> Vec<Q> {
    f.sample(n.max(1))
}

// ---------------------------------------------------------------------------
// the dictionary λ_t and the dense sequence g_j

fn pair_u64(a: u64, b: u64) -> u64 {
    (a + b) * (a + b + 1) / 2 + b
}

fn unpair_u64(z: u64) -> (u64, u64) {
    let w = ((8 * z as u128 + 1).sqrt() as u64 - 1) / 2;
    let b = z - w * (w + 1) / 2;
    (w - b, b)
}

/// Value of the constant `λ_{2r}`: the `r`-th entry of the lists `i/q`, `i = 0..=q`, `q = 1, 2, …`.
fn constant_entry(r: u64) -> Q {
    let mut r = r - 1;
    let mut q = 1u64;
    loop {
        if r <= q {
            return Q::new(BigInt::from(r), BigInt::from(q));
        }
        r -= q + 1;
        q += 1;
    }
}

/// Decodes `r` (0-based) into a level and a node-value digit list for
/// interpolants on `2^L + 1` dyadic nodes with `radix(L)` admissible values.
fn dyadic_digits(mut r: u64, radix: impl Fn(u32) -> u64) -> (u32, Vec<u64>) {
    let mut level = 1u32;
    loop {
        let nodes = (1u64 << level) + 1;
        let base = radix(level);
        match base.checked_pow(nodes as u32) {
            Some(count) if r >= count => {
                r -= count;
                level += 1;
            }
            _ => {
                let mut digits = vec![0u64; nodes as usize];
                for d in digits.iter_mut().rev() {
                    *d = r % base;
                    r /= base;
                }
                return (level, digits);
            }
        }
    }
}

/// `λ_t` as a function, `t ≥ 1`.
pub fn lambda(t: u64) -> Result<PLFunc, AiError> {
    match t {
        0 => Err(AiError::InvalidIndex(0)),
        1 => Ok(PLFunc::identity()),
        t if t % 2 == 0 => Ok(PLFunc::constant(constant_entry(t / 2))),
        t => {
            let (level, digits) = dyadic_digits((t - 1) / 2 - 1, |l| (1u64 << l) + 1);
            let den = BigInt::from(1u64 << level);
            let vals = digits.into_iter().map(|d| Q::new(BigInt::from(d), den.clone())).collect();
            PLFunc::from_uniform_nodes(vals).map(PLFunc::simplified)
        }
    }
}

/// The value of `λ_t` when it is a constant.
pub fn lambda_constant(t: u64) -> Option<Q> {
    (t >= 2 && t % 2 == 0).then(|| constant_entry(t / 2))
}

/// The frozen dictionary `λ_1 = id`, `λ_{2r}` rational constants (each
/// repeated infinitely often), `λ_{2r+1}` interpolants with dyadic nodes and
/// values of growing resolution. Lookups are memoized.
#[derive(Debug, Default)]
pub struct LambdaDict {
    cache: HashMap<u64, PLFunc>,
}

impl LambdaDict {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn at(&mut self, t: u64) -> Result<&PLFunc, AiError> {
        if !self.cache.contains_key(&t) {
            let f = lambda(t)?;
            self.cache.insert(t, f);
        }
        Ok(&self.cache[&t])
    }
}

// classes of the base family with at most this many members are enumerated
const CLASS_CAP: u64 = 1 << 32;

/// Classes `(a, d, R)` of the base family: interpolants on `2^a + 1` dyadic
/// nodes with values in `(1/d)Z ∩ [-R, R]`, sorted by size, then `(a, d, R)`.
fn base_classes() -> &'static [(u32, u64, u64, u64)] {
    static CLASSES: OnceLock<Vec<(u32, u64, u64, u64)>> = OnceLock::new();
    CLASSES.get_or_init(|| {
        let mut out = Vec::new();
        let mut a = 0u32;
        loop {
            let nodes = (1u32 << a) + 1;
            if 3u64.checked_pow(nodes).is_none_or(|c| c > CLASS_CAP) {
                break;
            }
            let mut d = 1u64;
            while (2 * d + 1).checked_pow(nodes).is_some_and(|c| c <= CLASS_CAP) {
                let mut range = 1u64;
                while let Some(c) = (2 * range * d + 1).checked_pow(nodes).filter(|&c| c <= CLASS_CAP) {
                    out.push((c, a, d, range));
                    range += 1;
                }
                d += 1;
            }
            a += 1;
        }
        out.sort_unstable();
        out.into_iter().map(|(c, a, d, r)| (a, d, r, c)).collect()
    })
}

/// Base family of the dense sequence: `1`, `x`, `1-x`, then the classes of
/// [`base_classes`] in order. `None` past the enumerated classes.
fn base_function(b: u64) -> Option<PLFunc> {
    match b {
        1 => Some(PLFunc::constant(Q::one())),
        2 => Some(PLFunc::identity()),
        3 => Some(PLFunc::new(vec![Q::zero(), Q::one()], vec![Q::one(), Q::zero()]).expect("valid")),
        b => {
            let mut r = b - 4;
            for &(a, d, range, count) in base_classes() {
                if r >= count {
                    r -= count;
                    continue;
                }
                let base = 2 * range * d + 1;
                let mut vals = vec![Q::zero(); (1usize << a) + 1];
                for v in vals.iter_mut().rev() {
                    let digit = (r % base) as i64;
                    *v = Q::new(BigInt::from(digit - (range * d) as i64), BigInt::from(d));
                    r /= base;
                }
                return Some(PLFunc::from_uniform_nodes(vals).expect("two or more nodes").simplified());
            }
            None
        }
    }
}

/// How `g_j` is built: odd `j` is a base function, even `j` is `g_a ∘ λ_l`.
pub fn dense_origin(j: u64) -> Result<DenseOrigin, AiError> {
    match j {
        0 => Err(AiError::InvalidIndex(0)),
        j if j % 2 == 1 => Ok(DenseOrigin::Base((j + 1) / 2)),
        j => {
            let (a, l) = unpair_u64(j / 2 - 1);
            Ok(DenseOrigin::Composite { outer: a + 1, lambda: l + 1 })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DenseOrigin {
    Base(u64),
    Composite { outer: u64, lambda: u64 },
}

/// Index of `g_a ∘ λ_l` in the dense sequence.
pub fn composite_index(a: u64, l: u64) -> u64 {
    2 * (pair_u64(a - 1, l - 1) + 1)
}

// composites g_a ∘ λ_l at index j only reference a ≤ √j + 1, so a short stored prefix suffices
const DENSE_STORED: u64 = 4096;

/// The dense sequence `g_1, g_2, …`. A prefix is memoized; later entries are
/// rebuilt on demand.
#[derive(Debug)]
pub struct DenseSeq {
    funcs: Vec<PLFunc>,
    grid: usize,
    dict: LambdaDict,
}

impl DenseSeq {
    pub fn new(grid: usize) -> Self {
        DenseSeq { funcs: Vec::new(), grid, dict: LambdaDict::new() }
    }

    fn build(&mut self, j: u64) -> Result<PLFunc, AiError> {
        Ok(match dense_origin(j)? {
            DenseOrigin::Base(b) => base_function(b).ok_or(AiError::InvalidIndex(j))?,
            DenseOrigin::Composite { outer, lambda } => {
                let inner = self.dict.at(lambda)?.clone();
                self.get(outer)?.compose(&inner)
            }
        })
    }

    pub fn get(&mut self, j: u64) -> Result<PLFunc, AiError> {
        if j == 0 {
            return Err(AiError::InvalidIndex(0));
        }
        if j <= DENSE_STORED {
            while (self.funcs.len() as u64) < j {
                let f = self.build(self.funcs.len() as u64 + 1)?;
                self.funcs.push(f);
            }
            return Ok(self.funcs[(j - 1) as usize].clone());
        }
        self.build(j)
    }

    /// `g_1, …, g_n`.
    pub fn prefix(&mut self, n: u64) -> Result<Vec<PLFunc>, AiError> {
        (1..=n).map(|j| self.get(j)).collect()
    }

    /// For each target, the least `j ≤ bound` with grid distance at most `delta`.
    pub fn least_within(&mut self, targets: &[PLFunc], delta: &Q, bound: u64) -> Result<Vec<Option<u64>>, AiError> {
        let pts = grid_points_f64(self.grid);
        let samples: Vec<Vec<f64>> = targets
            .iter()
            .map(|t| {
                let tf = t.to_f64();
                pts.iter().map(|&x| tf.eval(x)).collect()
            })
            .collect();
        let d = q_to_f64(delta);
        let mut found = vec![None; targets.len()];
        let mut open = targets.len();
        let mut j = 0;
        while open > 0 && j < bound {
            j += 1;
            let g = self.get(j)?;
            let gf = g.to_f64();
            let gs: Vec<f64> = pts.iter().map(|&x| gf.eval(x)).collect();
            for (i, t) in targets.iter().enumerate() {
                if found[i].is_none()
                    && grid_sup_distance_f64(&samples[i], &gs) <= d + FLOAT_SLACK
                    && &grid_sup_distance(t, &g, self.grid) <= delta
                {
                    found[i] = Some(j);
                    open -= 1;
                }
            }
        }
        Ok(found)
    }

    /// Largest `c` with `g_1, …, g_c` all in `set`.
    pub fn prefix_contained(&mut self, set: &[PLFunc]) -> Result<u64, AiError> {
        let members: HashSet<&PLFunc> = set.iter().collect();
        let mut c = 0u64;
        while members.contains(&self.get(c + 1)?) {
            c += 1;
        }
        Ok(c)
    }
}

/// Standalone `g_j`.
pub fn dense_g(j: u64) -> Result<PLFunc, AiError> {
    match dense_origin(j)? {
        DenseOrigin::Base(b) => base_function(b).ok_or(AiError::InvalidIndex(j)),
        DenseOrigin::Composite { outer, lambda: l } => Ok(dense_g(outer)?.compose(&lambda(l)?)),
    }
}

// ---------------------------------------------------------------------------
// affine endomorphisms of C_R[0,1]

/// A unital positive map `C_R[0,1] → C_R[0,1]` with an exact action on [`PLFunc`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AffineEndo {
    Identity,
    /// `g ↦ (1/len) Σ g ∘ λ_{t(i)}`.
    Induced { t: Vec<u64> },
    /// `g ↦ η_{rows}(ψ β_{cols}(g))`.
    Varsigma { psi: OrderUnitMap },
    /// A convex combination of maps.
    Convex(Vec<(Q, AffineEndo)>),
}

impl AffineEndo {
    pub fn apply(&self, g: &PLFunc) -> PLFunc {
        match self {
            AffineEndo::Identity => g.clone(),
            AffineEndo::Induced { t } => {
                let mut counts: Vec<(u64, usize)> = Vec::new();
                let mut sorted = t.clone();
                sorted.sort_unstable();
                for i in sorted {
                    match counts.last_mut() {
                        Some((j, c)) if *j == i => *c += 1,
                        _ => counts.push((i, 1)),
                    }
                }
                let len = BigInt::from(t.len());
                let parts: Vec<(Q, PLFunc)> = counts
                    .into_iter()
                    .map(|(i, c)| {
                        let lam = lambda(i).expect("indices validated on construction");
                        (Q::new(BigInt::from(c), len.clone()), g.compose(&lam))
                    })
                    .collect();
                let terms: Vec<(Q, &PLFunc)> = parts.iter().map(|(c, f)| (c.clone(), f)).collect();
                PLFunc::linear_combination(&terms)
            }
            AffineEndo::Varsigma { psi } => {
                let x = beta(psi.cols(), g);
                eta(psi.rows(), &psi.apply(&x)).expect("row count matches").simplified()
            }
            AffineEndo::Convex(parts) => {
                let images: Vec<(Q, PLFunc)> = parts.iter().map(|(c, m)| (c.clone(), m.apply(g))).collect();
                let terms: Vec<(Q, &PLFunc)> = images.iter().map(|(c, f)| (c.clone(), f)).collect();
                PLFunc::linear_combination(&terms)
            }
        }
    }

    pub fn induced(t: Vec<u64>) -> Result<Self, AiError> {
        if t.is_empty() {
            return Err(AiError::ShapeError("empty characteristic tuple".into()));
        }
        if t.contains(&0) {
            return Err(AiError::InvalidIndex(0));
        }
        Ok(AffineEndo::Induced { t })
    }

    /// Checks `1 ↦ 1` exactly and that the given nonnegative functions have
    /// images nonnegative on the grid.
    pub fn is_positive_unital_on(&self, probes: &[PLFunc], grid: usize) -> bool {
        let one = PLFunc::constant(Q::one());
        if self.apply(&one).simplified() != one {
            return false;
        }
        probes.iter().all(|p| {
            p.min_value().is_negative() || self.apply(p).sample(grid).iter().all(|v| !v.is_negative())
        })
    }
}

/// A standard homomorphism `M_n(C[0,1]) → M_m(C[0,1])` given by its
/// characteristic functions `λ_{t(1)}, …, λ_{t(m/n)}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StandardHom {
    n: u64,
    m: u64,
    t: Vec<u64>,
}

impl StandardHom {
    pub fn new(n: u64, m: u64, t: Vec<u64>) -> Result<Self, AiError> {
        if n == 0 || m % n != 0 || (m / n) as usize != t.len() {
            return Err(AiError::ShapeError(format!("need n | m and m/n = len(t); n={n}, m={m}, len={}", t.len())));
        }
        if let Some(&bad) = t.iter().find(|&&i| i == 0) {
            return Err(AiError::InvalidIndex(bad));
        }
        Ok(StandardHom { n, m, t })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn t(&self) -> &[u64] {
        &self.t
    }
}

/// The map on traces: `g ↦ (n/m) Σ g ∘ λ_{t(i)}`.
pub fn induced_affine(sh: &StandardHom) -> AffineEndo {
    AffineEndo::Induced { t: sh.t.clone() }
}

/// `ς_n = η_{f(n+1)} ∘ ψ_n ∘ β_{f(n)}` for a direct system with dims `f` (one-based `n`).
pub fn varsigma(sys: &DirectSystem, n: usize) -> Result<AffineEndo, AiError> {
    let psi = sys.step(n).map_err(|_| AiError::ShapeError(format!("no step {n} in a system of {} stages", sys.stages())))?;
    Ok(AffineEndo::Varsigma { psi: psi.clone() })
}

/// `ς_1, …, ς_{T-1}`.
pub fn sigma_sequence(sys: &DirectSystem) -> Vec<AffineEndo> {
    sys.maps().iter().map(|psi| AffineEndo::Varsigma { psi: psi.clone() }).collect()
}

/// Max entry of `β_{f(n+1)}(ς_n g) - ψ_n(β_{f(n)} g)`.
pub fn commuting_square_residual(sys: &DirectSystem, n: usize, g: &PLFunc) -> Result<Q, AiError> {
    let psi = sys.step(n).map_err(|_| AiError::ShapeError(format!("no step {n}")))?;
    let sigma = AffineEndo::Varsigma { psi: psi.clone() };
    let left = beta(psi.rows(), &sigma.apply(g));
    let right = psi.apply(&beta(psi.cols(), g));
    Ok(left.iter().zip(&right).map(|(a, b)| (a - b).abs()).max().unwrap_or_else(Q::zero))
}

// ---------------------------------------------------------------------------
// approximating a map by a standard homomorphism

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SearchBounds {
    /// Largest `m/n`.
    pub max_len: u64,
    /// Largest dictionary index in a tuple.
    pub depth: u64,
    /// Largest dense-sequence index scanned when choosing `G`.
    pub dense_depth: u64,
    /// Largest `G`, the size of the test family `g_1..g_G`.
    pub max_g: u64,
    /// Search nodes before giving up.
    pub node_budget: u64,
    pub grid: usize,
}

impl Default for SearchBounds {
    fn default() -> Self {
        SearchBounds { max_len: 5000, depth: 2000, dense_depth: 1_000_000, max_g: 4096, node_budget: 20_000_000, grid: DEFAULT_GRID }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Approximation {
    pub m: u64,
    pub t: Vec<u64>,
    /// Exact grid residual `max_g ‖ψ(g) - (n/m) Σ g∘λ_{t(i)}‖`.
    pub residual: Q,
    pub nodes: u64,
}

// every `SUBGRID_STRIDE`-th grid point is used for pruning
const SUBGRID_STRIDE: usize = 8;

struct Search<'a> {
    fs: &'a [PLFunc],
    targets_exact: Vec<PLFunc>,
    pts: Vec<f64>,
    sub: Vec<usize>,
    targets: Vec<Vec<f64>>,
    dict64: Vec<PlF64>,
    // per dictionary index, per function: samples on the full grid (lazy)
    full: HashMap<u64, Vec<Vec<f64>>>,
    // suffix bounds on the subgrid: lo[t][g*S + p], hi[t][g*S + p]
    lo: Vec<Vec<f64>>,
    hi: Vec<Vec<f64>>,
    fs64: Vec<PlF64>,
    exact_bounds: HashMap<(u64, usize, usize), (Option<Q>, Option<Q>)>,
    depth: u64,
    nodes: u64,
    budget: u64,
    grid: usize,
}

impl<'a> Search<'a> {
    fn new(psi: &AffineEndo, fs: &'a [PLFunc], bounds: &SearchBounds) -> Result<Self, AiError> {
        let grid = bounds.grid.max(2);
        let pts = grid_points_f64(grid);
        let sub: Vec<usize> = (0..grid).step_by(SUBGRID_STRIDE).chain(std::iter::once(grid - 1)).collect();
        let targets_exact: Vec<PLFunc> = fs.iter().map(|g| psi.apply(g)).collect();
        let targets = targets_exact
            .iter()
            .map(|t| {
                let t64 = t.to_f64();
                pts.iter().map(|&x| t64.eval(x)).collect()
            })
            .collect();
        let fs64: Vec<PlF64> = fs.iter().map(PLFunc::to_f64).collect();
        let mut dict64 = Vec::with_capacity(bounds.depth as usize);
        for t in 1..=bounds.depth {
            dict64.push(lambda(t)?.to_f64());
        }
        let width = fs.len() * sub.len();
        let d = bounds.depth as usize;
        let mut lo = vec![vec![f64::INFINITY; width]; d + 2];
        let mut hi = vec![vec![f64::NEG_INFINITY; width]; d + 2];
        for t in (1..=d).rev() {
            let (lo_next, hi_next) = (lo[t + 1].clone(), hi[t + 1].clone());
            for (gi, g) in fs64.iter().enumerate() {
                for (pi, &p) in sub.iter().enumerate() {
                    let v = g.eval(dict64[t - 1].eval(pts[p]));
                    let k = gi * sub.len() + pi;
                    lo[t][k] = lo_next[k].min(v);
                    hi[t][k] = hi_next[k].max(v);
                }
            }
        }
        Ok(Search {
            fs,
            targets_exact,
            pts,
            sub,
            targets,
            dict64,
            full: HashMap::new(),
            lo,
            hi,
            fs64,
            exact_bounds: HashMap::new(),
            depth: bounds.depth,
            nodes: 0,
            budget: bounds.node_budget,
            grid,
        })
    }

    fn lambda64(&self, t: u64) -> std::borrow::Cow<'_, PlF64> {
        match self.dict64.get((t - 1) as usize) {
            Some(l) => std::borrow::Cow::Borrowed(l),
            None => std::borrow::Cow::Owned(lambda(t).expect("t >= 1").to_f64()),
        }
    }

    fn sub_samples(&self, t: u64) -> Vec<f64> {
        let lam = self.lambda64(t);
        let mut out = Vec::with_capacity(self.fs.len() * self.sub.len());
        for g in &self.fs64 {
            for &p in &self.sub {
                out.push(g.eval(lam.eval(self.pts[p])));
            }
        }
        out
    }

    fn full_samples(&mut self, t: u64) -> &Vec<Vec<f64>> {
        if !self.full.contains_key(&t) {
            let lam = self.lambda64(t);
            let s = self
                .fs64
                .iter()
                .map(|g| self.pts.iter().map(|&x| g.eval(lam.eval(x))).collect())
                .collect();
            self.full.insert(t, s);
        }
        &self.full[&t]
    }

    fn leaf_accepts(&mut self, tuple: &[u64], eps: &Q) -> Result<Option<Q>, AiError> {
        let len = tuple.len() as f64;
        let mut counts: Vec<(u64, f64)> = Vec::new();
        let mut sorted = tuple.to_vec();
        sorted.sort_unstable();
        for i in sorted {
            match counts.last_mut() {
                Some((j, c)) if *j == i => *c += 1.0,
                _ => counts.push((i, 1.0)),
            }
        }
        let e = q_to_f64(eps);
        for gi in 0..self.fs.len() {
            let mut acc = vec![0.0; self.pts.len()];
            for &(t, c) in &counts {
                let s = &self.full_samples(t)[gi];
                for (a, v) in acc.iter_mut().zip(s) {
                    *a += c * v;
                }
            }
            let err = acc
                .iter()
                .zip(&self.targets[gi])
                .map(|(a, tv)| (a / len - tv).abs())
                .fold(0.0, f64::max);
            if err >= e + FLOAT_SLACK {
                return Ok(None);
            }
        }
        let phi = AffineEndo::induced(tuple.to_vec())?;
        let mut worst = Q::zero();
        for (g, target) in self.fs.iter().zip(&self.targets_exact) {
            let r = grid_sup_distance(target, &phi.apply(g), self.grid);
            if &r >= eps {
                return Ok(None);
            }
            worst = worst.max(r);
        }
        Ok(Some(worst))
    }

    /// Exact form of the interval prune at one subgrid point, for float near-ties.
    fn exact_prune(&mut self, tuple: &[u64], len: usize, min: u64, eps: &Q, gi: usize, pi: usize) -> bool {
        let x = Q::new(BigInt::from(self.sub[pi]), BigInt::from(self.grid - 1));
        let g = &self.fs[gi];
        let (lo, hi) = self.exact_bounds.entry((min, gi, pi)).or_insert_with(|| {
            let vals = (min..=self.depth).map(|t| g.eval(&lambda(t).expect("t >= 1").eval(&x)));
            vals.fold((None::<Q>, None::<Q>), |(lo, hi), v| {
                (Some(lo.map_or(v.clone(), |l| l.min(v.clone()))), Some(hi.map_or(v.clone(), |h| h.max(v))))
            })
        });
        let (lo, hi) = (lo.clone().expect("nonempty range"), hi.clone().expect("nonempty range"));
        let partial: Q = tuple.iter().map(|&t| g.eval(&lambda(t).expect("t >= 1").eval(&x))).sum();
        let lq = Q::from_integer(BigInt::from(len));
        let r = Q::from_integer(BigInt::from(len - tuple.len()));
        let need = &lq * self.targets_exact[gi].eval(&x) - partial;
        let bound = &lq * eps;
        &need - &r * hi >= bound || r * lo - need >= bound
    }

    /// Lexicographically least nondecreasing completion of `tuple` to length `len`.
    fn dfs(&mut self, tuple: &mut Vec<u64>, partial: &mut Vec<f64>, len: usize, min: u64, eps: &Q, depth: u64) -> Result<Option<Q>, AiError> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(AiError::SearchExhausted { stage: None, reason: format!("node budget {} spent", self.budget) });
        }
        let remaining = len - tuple.len();
        if remaining == 0 {
            return self.leaf_accepts(tuple, eps);
        }
        let lf = len as f64;
        let slack = lf * q_to_f64(eps) + lf * FLOAT_SLACK;
        let r = remaining as f64;
        let s = self.sub.len();
        let tight = lf * q_to_f64(eps) - lf * FLOAT_SLACK;
        for gi in 0..self.fs.len() {
            for pi in 0..s {
                let p = self.sub[pi];
                let k = gi * s + pi;
                let need = lf * self.targets[gi][p] - partial[k];
                let gap = (need - r * self.hi[min as usize][k]).max(r * self.lo[min as usize][k] - need);
                if gap >= slack || (gap > tight && self.exact_prune(tuple, len, min, eps, gi, pi)) {
                    return Ok(None);
                }
            }
        }
        for t in min..=depth {
            let add = self.sub_samples(t);
            for (a, v) in partial.iter_mut().zip(&add) {
                *a += v;
            }
            tuple.push(t);
            let found = self.dfs(tuple, partial, len, t, eps, depth)?;
            if found.is_some() {
                return Ok(found);
            }
            tuple.pop();
            for (a, v) in partial.iter_mut().zip(&add) {
                *a -= v;
            }
        }
        Ok(None)
    }
}

/// Searches for the least `t` (shortest first, then lexicographic) with
/// `t(1) = 1`, `t(2) = 2N`, `len(t)` a multiple of `k`, and grid residual
/// `max_{g∈F} ‖ψ(g) - (1/len) Σ g∘λ_{t(i)}‖ < ε`. Returns `m = n·len(t)`.
/// Entries after the first two range over `λ_1 … λ_depth`.
pub fn approx_standard(
    psi: &AffineEndo,
    n: u64,
    k: u64,
    eps: &Q,
    fs: &[PLFunc],
    big_n: u64,
    bounds: &SearchBounds,
) -> Result<Approximation, AiError> {
    if !eps.is_positive() || n == 0 || k == 0 || big_n == 0 {
        return Err(AiError::ShapeError("need ε > 0 and n, k, N ≥ 1".into()));
    }
    let mut search = Search::new(psi, fs, bounds)?;
    let mut len = if k >= 2 { k } else { 2 };
    while len <= bounds.max_len {
        let mut tuple = vec![1, 2 * big_n];
        let mut partial = search.sub_samples(1);
        for (a, v) in partial.iter_mut().zip(search.sub_samples(2 * big_n)) {
            *a += v;
        }
        if let Some(residual) = search.dfs(&mut tuple, &mut partial, len as usize, 1, eps, bounds.depth)? {
            return Ok(Approximation { m: n * len, t: tuple, residual, nodes: search.nodes });
        }
        len += k;
    }
    Err(AiError::SearchExhausted { stage: None, reason: format!("no tuple of length ≤ {}", bounds.max_len) })
}

// ---------------------------------------------------------------------------
// the stage recursion

/// `δ_k = 2^{-k}`.
pub fn default_delta(k: usize) -> Q {
    two_pow_neg(k)
}

/// The frozen prime stream `2, 2, 3, 2, 3, 5, …` (one-based): block `b` lists the first `b` primes.
pub fn prime_stream(i: usize) -> u64 {
    let mut i = i.max(1);
    let mut b = 1;
    while i > b {
        i -= b;
        b += 1;
    }
    nth_prime(i)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Stage {
    /// One-based stage number `N`.
    pub n: usize,
    pub g: u64,
    pub d: u64,
    pub bold_d: u64,
    pub s: Vec<u64>,
    /// `q_1 ⋯ q_{N-1}`, the divisor required of `bold_d` (1 at stage 1).
    pub k: u64,
    /// `δ_N` as an exact rational.
    pub delta: String,
    /// Residual of the tuple `s` against `ς_N` on `g_1..g_G`.
    pub residual: Option<String>,
}

/// Stage record of the recursion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AISystem {
    pub stages: Vec<Stage>,
}

impl AISystem {
    pub fn k(&self) -> usize {
        self.stages.len()
    }

    pub fn stage(&self, n: usize) -> &Stage {
        &self.stages[n - 1]
    }

    /// `φ̂_N` for `N ≥ 2`: the map induced by `s_N`.
    pub fn phi_hat(&self, n: usize) -> Option<AffineEndo> {
        (n >= 2 && n <= self.k()).then(|| AffineEndo::Induced { t: self.stage(n).s.clone() })
    }

    /// Stage table as text.
    pub fn to_table(&self) -> String {
        let mut out = format!("ai-system stages={}\n", self.k());
        out.push_str("N\tG\td\tbold_d\tk\tdelta\tresidual\ts\n");
        for st in &self.stages {
            let s: Vec<String> = st.s.iter().map(u64::to_string).collect();
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t[{}]\n",
                st.n,
                st.g,
                st.d,
                st.bold_d,
                st.k,
                st.delta,
                st.residual.as_deref().unwrap_or("-"),
                s.join(",")
            ));
        }
        out
    }

    /// Checks the record invariants: `d(1)=1`, `bold_d(N+1) = d(N+1)/d(N) = len(s(N+1))`,
    /// `q_1⋯q_N | bold_d(N+1)`, `s(N+1)(1) = 1`, `s(N+1)(2) = 2G(N+1)`.
    pub fn check_invariants(&self) -> Result<(), AiError> {
        let first = self.stages.first().ok_or_else(|| AiError::Structure("no stages".into()))?;
        if first.d != 1 || first.bold_d != 1 || first.g != 1 || !first.s.is_empty() {
            return Err(AiError::Structure("stage 1 is not the base record".into()));
        }
        let mut k = 1u64;
        for w in self.stages.windows(2) {
            let (prev, st) = (&w[0], &w[1]);
            k *= prime_stream(prev.n);
            let fail = |what: &str| Err(AiError::Structure(format!("stage {}: {what}", st.n)));
            if st.d % prev.d != 0 || st.d / prev.d != st.bold_d || st.bold_d != st.s.len() as u64 {
                return fail("bold_d is not d(N+1)/d(N) = len(s)");
            }
            if st.bold_d % k != 0 || st.k != k {
                return fail("bold_d not divisible by q_1⋯q_N");
            }
            if st.d <= prev.d {
                return fail("d not strictly increasing");
            }
            if st.s.first() != Some(&1) || st.s.get(1) != Some(&(2 * st.g)) {
                return fail("s does not start with 1, 2G");
            }
        }
        Ok(())
    }
}

/// Runs the recursion for `K` stages on `ς_1, ς_2, …` (at least `K` maps).
///
/// `G(N+1)` is the least index making every `φ̂_i(g_j)` (`2 ≤ i ≤ N`) and
/// `ς_i(g_j)` (`i ≤ N`), `j ≤ G(N)`, lie within `δ_{N+1}` of some `g_{j'}`,
/// `j' ≤ G(N+1)`, raised to at least `G(N) + 1`.
pub fn build_system(
    sigmas: &[AffineEndo],
    delta: &dyn Fn(usize) -> Q,
    k_stages: usize,
    bounds: &SearchBounds,
) -> Result<AISystem, AiError> {
    if k_stages == 0 {
        return Err(AiError::ShapeError("K must be at least 1".into()));
    }
    if sigmas.len() < k_stages {
        return Err(AiError::ShapeError(format!("{} maps given, {k_stages} needed", sigmas.len())));
    }
    let mut dense = DenseSeq::new(bounds.grid);
    let mut stages = vec![Stage { n: 1, g: 1, d: 1, bold_d: 1, s: Vec::new(), k: 1, delta: format_q(&delta(1)), residual: None }];
    let mut k = 1u64;
    for big_n in 1..k_stages {
        let stage_no = big_n + 1;
        let tol = delta(stage_no);
        let exhausted = |e: AiError| match e {
            AiError::SearchExhausted { reason, .. } => AiError::SearchExhausted { stage: Some(stage_no), reason },
            other => other,
        };
        let prev = stages[big_n - 1].clone();

        // (B)
        let mut targets: Vec<PLFunc> = Vec::new();
        let mut seen: HashSet<PLFunc> = HashSet::new();
        for j in 1..=prev.g {
            let gj = dense.get(j)?;
            for i in 2..=big_n {
                let phi = AffineEndo::Induced { t: stages[i - 1].s.clone() };
                let img = phi.apply(&gj);
                if seen.insert(img.clone()) {
                    targets.push(img);
                }
            }
            for sigma in &sigmas[..big_n] {
                let img = sigma.apply(&gj);
                if seen.insert(img.clone()) {
                    targets.push(img);
                }
            }
        }
        let mut g_next = prev.g + 1;
        for (t, j) in targets.iter().zip(dense.least_within(&targets, &tol, bounds.dense_depth)?) {
            match j {
                Some(j) => g_next = g_next.max(j),
                None => {
                    return Err(AiError::SearchExhausted {
                        stage: Some(stage_no),
                        reason: format!("no g_j within δ of {t} for j ≤ {}", bounds.dense_depth),
                    })
                }
            }
        }

        if g_next > bounds.max_g {
            return Err(AiError::SearchExhausted {
                stage: Some(stage_no),
                reason: format!("G = {g_next} exceeds the test-family bound {}", bounds.max_g),
            });
        }

        // (C), (D), (E)
        k *= prime_stream(big_n);
        let fs = dense.prefix(g_next)?;
        let approx = approx_standard(&sigmas[stage_no - 1], prev.d, k, &tol, &fs, g_next, bounds).map_err(exhausted)?;
        let bold_d = approx.t.len() as u64;
        stages.push(Stage {
            n: stage_no,
            g: g_next,
            d: approx.m,
            bold_d,
            s: approx.t,
            k,
            delta: format_q(&tol),
            residual: Some(format_q(&approx.residual)),
        });
    }
    Ok(AISystem { stages })
}

/// The supernatural number of the multiplicity stream `bold_d(1), …, bold_d(K)`.
pub fn k0(sys: &AISystem) -> SupernaturalNumber {
    let mults: Vec<u64> = sys.stages.iter().map(|s| s.bold_d).collect();
    supernatural_of_multiplicities(&mults, None).expect("multiplicities are positive")
}

/// Certificate that the image of a nonzero `f` under `φ_{1,j}` is nonzero at every point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SimplicityCert {
    pub stage: usize,
    /// Dictionary index of the constant component (`None` at stage 1, where `f` itself is used).
    pub constant_index: Option<u64>,
    /// Value of the constant `c` (or the point `t` at stage 1).
    pub point: String,
    /// `f(c) ≠ 0`.
    pub value: String,
}

/// Finds the first stage `j ≤ max_stage` where some summand of the image of
/// `f` is a constant `f(c) ≠ 0`, verifying `s(N)(1) = 1` and `s(N)(2) = 2G(N)`
/// along the way. At stage 1 the summand is `f` itself evaluated at `t`.
pub fn simplicity_cert(sys: &AISystem, f: &PLFunc, t: &Q, max_stage: usize) -> Result<SimplicityCert, AiError> {
    if f.is_zero() {
        return Err(AiError::ShapeError("f must be nonzero".into()));
    }
    let v = f.eval(t);
    if !v.is_zero() {
        return Ok(SimplicityCert { stage: 1, constant_index: None, point: format_q(t), value: format_q(&v) });
    }
    let last = max_stage.min(sys.k());
    for n in 2..=last {
        let st = sys.stage(n);
        if st.s.first() != Some(&1) || st.s.get(1) != Some(&(2 * st.g)) {
            return Err(AiError::Structure(format!("stage {n}: s does not start with 1, 2G")));
        }
        // the component path λ_1 ∘ ⋯ ∘ λ_1 ∘ λ_{2G(n)} carries f to the constant f(c)
        let idx = 2 * st.g;
        let c = lambda_constant(idx).expect("even index is a constant");
        let v = f.eval(&c);
        if !v.is_zero() {
            return Ok(SimplicityCert { stage: n, constant_index: Some(idx), point: format_q(&c), value: format_q(&v) });
        }
    }
    Err(AiError::CertNotFound(last))
}

// ---------------------------------------------------------------------------
// the trace intertwining hypotheses

/// Aligned stage data: `φ̂_k` (absent at stage 1), `ς_k`, `F_k`.
#[derive(Clone, Debug)]
pub struct TraceInputs {
    pub phi: Vec<Option<AffineEndo>>,
    pub sigma: Vec<AffineEndo>,
    pub f_sets: Vec<Vec<PLFunc>>,
}

impl TraceInputs {
    /// Inputs for a built system: `φ̂_k` from `s_k`, `F_k = {g_j : j ≤ G(k)}`.
    pub fn from_system(sys: &AISystem, sigmas: &[AffineEndo], grid: usize) -> Result<Self, AiError> {
        if sigmas.len() < sys.k() {
            return Err(AiError::ShapeError("fewer maps than stages".into()));
        }
        let mut dense = DenseSeq::new(grid);
        let mut f_sets = Vec::new();
        for st in &sys.stages {
            f_sets.push(dense.prefix(st.g)?);
        }
        Ok(TraceInputs {
            phi: (1..=sys.k()).map(|n| sys.phi_hat(n)).collect(),
            sigma: sigmas[..sys.k()].to_vec(),
            f_sets,
        })
    }
}

/// First failing stage per hypothesis, with measured residuals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceReport {
    /// `F_k ⊆ F_{k+1}`.
    pub a: Option<usize>,
    /// Density proxy: the longest prefix `g_1..g_c` contained in `F_k` never
    /// shrinks and is longer at the last stage than at the first.
    pub b: Option<usize>,
    /// Images of `F_k` under `φ̂_i`, `ς_i` (`i ≤ k`) lie within `δ_{k+1}` of `F_{k+1}`.
    pub c: Option<usize>,
    /// `‖φ̂_k(f) - ς_k(f)‖ ≤ δ_k` on `F_k`.
    pub d: Option<usize>,
    pub prefix_lengths: Vec<u64>,
    /// Exact grid residual of (d) per stage (`None` where `φ̂_k` is absent).
    pub d_residuals: Vec<Option<String>>,
}

impl TraceReport {
    pub fn passed(&self) -> bool {
        self.a.is_none() && self.b.is_none() && self.c.is_none() && self.d.is_none()
    }
}

/// Checks the four hypotheses of the trace intertwining lemma on grid sup-norms.
pub fn trace_intertwining_check(inp: &TraceInputs, delta: &dyn Fn(usize) -> Q, grid: usize) -> Result<TraceReport, AiError> {
    let k = inp.f_sets.len();
    if inp.phi.len() != k || inp.sigma.len() != k {
        return Err(AiError::ShapeError("stage counts differ".into()));
    }
    let mut rep = TraceReport { a: None, b: None, c: None, d: None, prefix_lengths: Vec::new(), d_residuals: Vec::new() };
    let mut dense = DenseSeq::new(grid);
    for idx in 0..k {
        let stage = idx + 1;
        let fk = &inp.f_sets[idx];
        let c_len = dense.prefix_contained(fk)?;
        if rep.b.is_none() && rep.prefix_lengths.last().is_some_and(|&p| c_len < p) {
            rep.b = Some(stage);
        }
        rep.prefix_lengths.push(c_len);
        // the dense sequence repeats entries, so growth is required over the run, not at every stage
        if rep.b.is_none() && k >= 2 && stage == k && rep.prefix_lengths[0] >= c_len {
            rep.b = Some(stage);
        }
        if idx + 1 < k {
            let next = &inp.f_sets[idx + 1];
            let members: HashSet<&PLFunc> = next.iter().collect();
            if rep.a.is_none() && !fk.iter().all(|f| members.contains(f)) {
                rep.a = Some(stage);
            }
            if rep.c.is_none() {
                let tol = delta(stage + 1);
                let close = |img: &PLFunc| next.iter().any(|h| grid_sup_distance(img, h, grid) <= tol);
                let ok = fk.iter().all(|f| {
                    (0..=idx).all(|i| {
                        inp.phi[i].as_ref().is_none_or(|p| close(&p.apply(f))) && close(&inp.sigma[i].apply(f))
                    })
                });
                if !ok {
                    rep.c = Some(stage);
                }
            }
        }
        match &inp.phi[idx] {
            Some(phi) => {
                let r = fk
                    .iter()
                    .map(|f| grid_sup_distance(&phi.apply(f), &inp.sigma[idx].apply(f), grid))
                    .max()
                    .unwrap_or_else(Q::zero);
                if rep.d.is_none() && r > delta(stage) {
                    rep.d = Some(stage);
                }
                rep.d_residuals.push(Some(format_q(&r)));
            }
            None => rep.d_residuals.push(None),
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{q, qi};

    #[test]
    fn hat_partition_basics() {
        assert_eq!(hat_partition(1), vec![PLFunc::constant(qi(1))]);
        let e0 = eta(2, &[qi(1), qi(0)]).unwrap();
        assert_eq!(e0, "0:1,1:0".parse().unwrap());
        assert_eq!(beta(2, &e0), vec![qi(1), qi(0)]);
        for n in 1..=12 {
            let p = hat_partition(n);
            let refs: Vec<(Q, &PLFunc)> = p.iter().map(|f| (qi(1), f)).collect();
            assert_eq!(PLFunc::linear_combination(&refs), PLFunc::constant(qi(1)));
        }
    }

    #[test]
    fn composition_is_exact() {
        let hat: PLFunc = "0:0,1/2:1,1:0".parse().unwrap();
        let id = PLFunc::identity();
        assert_eq!(hat.compose(&id), hat);
        // hat ∘ hat is a double hat
        let hh = hat.compose(&hat);
        assert_eq!(hh.eval(&q(1, 4)), qi(1));
        assert_eq!(hh.eval(&q(1, 2)), qi(0));
        assert_eq!(hh.eval(&q(1, 8)), q(1, 2));
    }

    #[test]
    fn dictionary_layout() {
        assert_eq!(lambda(1).unwrap(), PLFunc::identity());
        assert_eq!(lambda_constant(2), Some(qi(0)));
        assert_eq!(lambda_constant(4), Some(qi(1)));
        assert_eq!(lambda_constant(8), Some(q(1, 2)));
        let one_minus_x: PLFunc = "0:1,1:0".parse().unwrap();
        assert_eq!(lambda(13).unwrap(), PLFunc::identity());
        assert_eq!(lambda(45).unwrap(), one_minus_x);
        assert!(lambda(0).is_err());
    }

    #[test]
    fn dense_sequence_closure() {
        assert_eq!(dense_g(1).unwrap(), PLFunc::constant(qi(1)));
        assert_eq!(dense_g(3).unwrap(), PLFunc::identity());
        for a in 1..6 {
            for l in 1..6 {
                let j = composite_index(a, l);
                assert_eq!(dense_g(j).unwrap(), dense_g(a).unwrap().compose(&lambda(l).unwrap()));
            }
        }
        let mut seq = DenseSeq::new(DEFAULT_GRID);
        for j in 1..40 {
            assert_eq!(seq.get(j).unwrap(), dense_g(j).unwrap());
        }
    }

    #[test]
    fn induced_maps() {
        let g: PLFunc = "0:0,1/3:1,1:1/2".parse().unwrap();
        assert_eq!(AffineEndo::induced(vec![1]).unwrap().apply(&g), g);
        let c = AffineEndo::induced(vec![8]).unwrap().apply(&g);
        assert_eq!(c, PLFunc::constant(g.eval(&q(1, 2))));
    }

    #[test]
    fn approx_identity_stage() {
        let fs = vec![PLFunc::constant(qi(1)), PLFunc::constant(qi(1)), PLFunc::identity()];
        let a = approx_standard(&AffineEndo::Identity, 2, 4, &q(1, 8), &fs, 3, &SearchBounds::default()).unwrap();
        assert_eq!(a.m, 24);
        assert_eq!(a.t[..2], [1, 6]);
        assert!(a.t[2..].iter().all(|&i| i == 1));
        assert_eq!(a.residual, q(1, 12));
    }

    #[test]
    fn identity_system_three_stages() {
        let sig = vec![AffineEndo::Identity; 3];
        let sys = build_system(&sig, &default_delta, 3, &SearchBounds::default()).unwrap();
        sys.check_invariants().unwrap();
        let g: Vec<u64> = sys.stages.iter().map(|s| s.g).collect();
        let d: Vec<u64> = sys.stages.iter().map(|s| s.d).collect();
        assert_eq!(g, [1, 2, 3]);
        assert_eq!(d, [1, 2, 24]);
        assert_eq!(sys.stage(2).s, [1, 4]);
        let rep = trace_intertwining_check(&TraceInputs::from_system(&sys, &sig, DEFAULT_GRID).unwrap(), &default_delta, DEFAULT_GRID).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn trace_check_flags_planted_stage() {
        let sig = vec![AffineEndo::Identity; 3];
        let sys = build_system(&sig, &default_delta, 3, &SearchBounds::default()).unwrap();
        let base = TraceInputs::from_system(&sys, &sig, DEFAULT_GRID).unwrap();
        let same = TraceInputs { phi: vec![None, Some(AffineEndo::Identity), Some(AffineEndo::Identity)], ..base.clone() };
        let rep = trace_intertwining_check(&same, &default_delta, DEFAULT_GRID).unwrap();
        assert_eq!(rep.d_residuals, [None, Some("0".to_string()), Some("0".to_string())]);
        // F_3 holds the identity function; moving it by 2δ_3 toward 1 - x breaks (d) there only
        let swap = AffineEndo::Varsigma { psi: OrderUnitMap::permutation(&[1, 0]) };
        let theta = default_delta(3) * qi(2);
        let mut planted = base.clone();
        planted.phi[2] = Some(AffineEndo::Convex(vec![(qi(1) - &theta, AffineEndo::Identity), (theta.clone(), swap)]));
        let rep = trace_intertwining_check(&planted, &default_delta, DEFAULT_GRID).unwrap();
        assert_eq!(rep.d, Some(3));
        assert_eq!(rep.d_residuals[2], Some(format_q(&theta)));
    }

    #[test]
    fn prime_stream_prefix() {
        let v: Vec<u64> = (1..=10).map(prime_stream).collect();
        assert_eq!(v, [2, 2, 3, 2, 3, 5, 2, 3, 5, 7]);
    }
}
