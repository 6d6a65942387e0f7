//! Order-unit maps between `R^n` spaces, the three parameterizations of
//! metrizable Choquet simplexes (arbitrary systems, representing matrices,
//! grid maps), grid factorization, stage polytopes, and peaked partitions.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::exact::{format_q, q_to_f64, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChoquetError {
    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("not an order-unit map: {0}")]
    NotOrderUnit(String),
    #[error("level {level} entry {entry} is not a multiple of 4^-{level}")]
    NotOnGrid { level: usize, entry: usize },
    #[error("no row equal to basis vector e{0}")]
    NotRepresentingForm(usize),
    #[error("stage {0} out of range")]
    StageError(usize),
    #[error("empty partition")]
    EmptyPartition,
    #[error("linear program failed: {0}")]
    Fit(String),
}

/// A unit-preserving positive map `R^cols -> R^rows`: a nonnegative rational
/// matrix whose rows each sum to 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OrderUnitMap {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<Q>>,
}

impl OrderUnitMap {
    pub fn new(entries: Vec<Vec<Q>>) -> Result<Self, ChoquetError> {
        let rows = entries.len();
        let cols = entries.first().map_or(0, |r| r.len());
        if rows == 0 || cols == 0 || entries.iter().any(|r| r.len() != cols) {
            return Err(ChoquetError::ShapeError("ragged or empty matrix".into()));
        }
        for (i, r) in entries.iter().enumerate() {
            if r.iter().any(|x| x.is_negative()) {
                return Err(ChoquetError::NotOrderUnit(format!("negative entry in row {i}")));
            }
            if r.iter().sum::<Q>() != Q::one() {
                return Err(ChoquetError::NotOrderUnit(format!("row {i} does not sum to 1")));
            }
        }
        Ok(OrderUnitMap { rows, cols, entries })
    }

    pub fn identity(n: usize) -> Self {
        let entries = (0..n)
            .map(|i| (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect())
            .collect();
        OrderUnitMap { rows: n, cols: n, entries }
    }

    /// The permutation map sending basis vector `j` to `perm[j]`.
    pub fn permutation(perm: &[usize]) -> Self {
        let n = perm.len();
        let mut entries = vec![vec![Q::zero(); n]; n];
        for (j, &i) in perm.iter().enumerate() {
            entries[i][j] = Q::one();
        }
        OrderUnitMap { rows: n, cols: n, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Vec<Q>] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[Q] {
        &self.entries[i]
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &OrderUnitMap) -> Result<Self, ChoquetError> {
        if self.cols != first.rows {
            return Err(ChoquetError::ShapeError(format!(
                "{}x{} after {}x{}",
                self.rows, self.cols, first.rows, first.cols
            )));
        }
        let entries = (0..self.rows)
            .map(|i| {
                (0..first.cols)
                    .map(|j| (0..self.cols).map(|k| &self.entries[i][k] * &first.entries[k][j]).sum())
                    .collect()
            })
            .collect();
        Ok(OrderUnitMap { rows: self.rows, cols: first.cols, entries })
    }

    pub fn apply(&self, x: &[Q]) -> Vec<Q> {
        self.entries
            .iter()
            .map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// The dual action on states: the transpose applied to a probability vector.
    pub fn dual_apply(&self, state: &[Q]) -> Vec<Q> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| &self.entries[i][j] * &state[i]).sum())
            .collect()
    }
}

/// Composes maps, applying `maps[0]` first.
pub fn compose(maps: &[OrderUnitMap]) -> Result<OrderUnitMap, ChoquetError> {
    let (first, rest) = maps.split_first().ok_or_else(|| ChoquetError::ShapeError("no maps".into()))?;
    rest.iter().try_fold(first.clone(), |acc, m| m.after(&acc))
}

/// The ∞→∞ operator norm of `a - b`: the largest absolute row sum.
pub fn inf_norm_distance(a: &OrderUnitMap, b: &OrderUnitMap) -> Result<Q, ChoquetError> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(ChoquetError::ShapeError("distance between different shapes".into()));
    }
    Ok(a.entries
        .iter()
        .zip(&b.entries)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs()).sum::<Q>())
        .max()
        .unwrap_or_else(Q::zero))
}

/// Largest entrywise deviation.
pub fn max_entry_distance(a: &OrderUnitMap, b: &OrderUnitMap) -> Q {
    a.entries
        .iter()
        .zip(&b.entries)
        .flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs()))
        .max()
        .unwrap_or_else(Q::zero)
}

/// The step `R^n -> R^(n+1)`, `x -> (x, Σ a_i x_i)`.
pub fn normal_step(last_row: &[Q]) -> OrderUnitMap {
    let n = last_row.len();
    let mut entries: Vec<Vec<Q>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect())
        .collect();
    entries.push(last_row.to_vec());
    OrderUnitMap { rows: n + 1, cols: n, entries }
}

/// Columns `a_{1n}, ..., a_{nn}` for `n = 1..=depth`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepresentingMatrix {
    columns: Vec<Vec<Q>>,
}

impl RepresentingMatrix {
    pub fn new(columns: Vec<Vec<Q>>) -> Result<Self, ChoquetError> {
        for (k, col) in columns.iter().enumerate() {
            if col.len() != k + 1 {
                return Err(ChoquetError::ShapeError(format!("column {} has {} entries", k + 1, col.len())));
            }
            if col.iter().any(|x| x.is_negative()) || col.iter().sum::<Q>() != Q::one() {
                return Err(ChoquetError::NotOrderUnit(format!("column {}", k + 1)));
            }
        }
        Ok(RepresentingMatrix { columns })
    }

    pub fn depth(&self) -> usize {
        self.columns.len()
    }

    /// Column `n`, one-based.
    pub fn column(&self, n: usize) -> &[Q] {
        &self.columns[n - 1]
    }

    pub fn columns(&self) -> &[Vec<Q>] {
        &self.columns
    }

    /// Entry `a_{in}`, zero below the diagonal.
    pub fn entry(&self, i: usize, n: usize) -> Q {
        self.columns[n - 1].get(i - 1).cloned().unwrap_or_else(Q::zero)
    }
}

/// A level-`n` grid map: the normal step with last row on the `4^-n` grid,
/// followed by a permutation of the target basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridMap {
    level: usize,
    numerators: Vec<u64>,
    perm: Vec<usize>,
}

pub fn grid_denominator(level: usize) -> BigInt {
    BigInt::from(4).pow(level as u32)
}

impl GridMap {
    pub fn new(level: usize, numerators: Vec<u64>, perm: Vec<usize>) -> Result<Self, ChoquetError> {
        // numerators are u64, so 4^level must fit
        if level == 0 || level > 31 || numerators.len() != level || perm.len() != level + 1 {
            return Err(ChoquetError::ShapeError(format!("grid map of level {level}")));
        }
        let mut seen = vec![false; level + 1];
        for &p in &perm {
            if p > level || std::mem::replace(&mut seen[p], true) {
                return Err(ChoquetError::ShapeError("not a permutation".into()));
            }
        }
        let total: BigInt = numerators.iter().map(|&k| BigInt::from(k)).sum();
        if total != grid_denominator(level) {
            return Err(ChoquetError::NotOrderUnit(format!("level {level} row does not sum to 1")));
        }
        Ok(GridMap { level, numerators, perm })
    }

    /// Reads a level-`n` map given as a matrix: it must be a normal step on
    /// the grid after some permutation of rows.
    pub fn from_map(level: usize, map: &OrderUnitMap) -> Result<Self, ChoquetError> {
        if map.rows != level + 1 || map.cols != level {
            return Err(ChoquetError::ShapeError("grid map shape".into()));
        }
        let (order, _) = normal_form_rows(map)?;
        let extra = order[level];
        let den = grid_denominator(level);
        let numerators = map.entries[extra]
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let k = a * Q::from_integer(den.clone());
                if !k.is_integer() {
                    return Err(ChoquetError::NotOnGrid { level, entry: i });
                }
                Ok(k.to_integer().to_u64().expect("entry at most 1"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        // position j of the normal form lands on row order[j]
        GridMap::new(level, numerators, order)
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn last_row(&self) -> Vec<Q> {
        let den = grid_denominator(self.level);
        self.numerators
            .iter()
            .map(|&k| Q::new(BigInt::from(k), den.clone()))
            .collect()
    }

    pub fn normal_part(&self) -> OrderUnitMap {
        normal_step(&self.last_row())
    }

    pub fn to_map(&self) -> OrderUnitMap {
        OrderUnitMap::permutation(&self.perm)
            .after(&self.normal_part())
            .expect("shapes agree")
    }
}

/// Rows equal to `e_0, ..., e_{m-1}` (lowest index each) followed by the
/// remaining rows in increasing order. The second value is the permuted map.
fn normal_form_rows(map: &OrderUnitMap) -> Result<(Vec<usize>, OrderUnitMap), ChoquetError> {
    let m = map.cols;
    let mut order = Vec::with_capacity(map.rows);
    for i in 0..m {
        let r = (0..map.rows)
            .find(|&r| map.entries[r][i].is_one())
            .ok_or(ChoquetError::NotRepresentingForm(i + 1))?;
        order.push(r);
    }
    let rest: Vec<usize> = (0..map.rows).filter(|r| !order.contains(r)).collect();
    order.extend(rest);
    let entries = order.iter().map(|&r| map.entries[r].clone()).collect();
    Ok((order, OrderUnitMap { rows: map.rows, cols: m, entries }))
}

/// A direct system `R^{f(1)} -> R^{f(2)} -> ...`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectSystem {
    dims: Vec<usize>,
    maps: Vec<OrderUnitMap>,
}

impl DirectSystem {
    pub fn new(dims: Vec<usize>, maps: Vec<OrderUnitMap>) -> Result<Self, ChoquetError> {
        if dims.is_empty() || maps.len() + 1 != dims.len() {
            return Err(ChoquetError::ShapeError("need one map between consecutive dims".into()));
        }
        for (k, m) in maps.iter().enumerate() {
            if m.cols != dims[k] || m.rows != dims[k + 1] {
                return Err(ChoquetError::ShapeError(format!("map {} has the wrong shape", k + 1)));
            }
        }
        Ok(DirectSystem { dims, maps })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn maps(&self) -> &[OrderUnitMap] {
        &self.maps
    }

    /// Stage count `T`.
    pub fn stages(&self) -> usize {
        self.dims.len()
    }

    /// Map out of stage `n` (one-based).
    pub fn step(&self, n: usize) -> Result<&OrderUnitMap, ChoquetError> {
        self.maps.get(n.wrapping_sub(1)).ok_or(ChoquetError::StageError(n))
    }
}

/// Representing matrix of a grid system, with the permutations relating the two.
#[derive(Clone, Debug)]
pub struct Lambda2Conversion {
    pub matrix: RepresentingMatrix,
    /// `q[n-1]` is the permutation `Q_n` of `R^n`, so that
    /// `ψ_n Q_n = Q_{n+1} N_n` with `N_n` the normal step of column `n`.
    pub perms: Vec<Vec<usize>>,
}

pub fn lambda3_to_lambda2(steps: &[GridMap]) -> Result<Lambda2Conversion, ChoquetError> {
    let mut q = vec![0usize];
    let mut perms = vec![q.clone()];
    let mut columns = Vec::with_capacity(steps.len());
    for (k, g) in steps.iter().enumerate() {
        if g.level != k + 1 {
            return Err(ChoquetError::ShapeError(format!("step {} has level {}", k + 1, g.level)));
        }
        // N Q = (Q ⊕ 1) N'' with last row a Q
        let a = g.last_row();
        let col: Vec<Q> = (0..=k).map(|j| a[q[j]].clone()).collect();
        columns.push(col);
        let mut ext = q.clone();
        ext.push(k + 1);
        q = ext.iter().map(|&j| g.perm[j]).collect();
        perms.push(q.clone());
    }
    Ok(Lambda2Conversion { matrix: RepresentingMatrix::new(columns)?, perms })
}

/// The system `R^1 -> R^2 -> ...` of normal steps given by the first `t` columns.
pub fn lambda2_to_lambda(r: &RepresentingMatrix, t: usize) -> Result<DirectSystem, ChoquetError> {
    if t > r.depth() {
        return Err(ChoquetError::StageError(t));
    }
    let maps = r.columns[..t].iter().map(|c| normal_step(c)).collect();
    DirectSystem::new((1..=t + 1).collect(), maps)
}

/// Rounds a probability vector to the `1/den` grid by largest remainders,
/// breaking ties toward the lowest index. Returns numerators.
pub fn round_to_grid(row: &[Q], den: &BigInt) -> Vec<BigInt> {
    let scaled: Vec<Q> = row.iter().map(|a| a * Q::from_integer(den.clone())).collect();
    let mut nums: Vec<BigInt> = scaled.iter().map(|s| s.floor().to_integer()).collect();
    let missing: BigInt = den - nums.iter().sum::<BigInt>();
    let mut order: Vec<usize> = (0..row.len()).collect();
    let frac = |i: usize| &scaled[i] - Q::from_integer(nums[i].clone());
    let fracs: Vec<Q> = order.iter().map(|&i| frac(i)).collect();
    order.sort_by(|&i, &j| fracs[j].cmp(&fracs[i]).then(i.cmp(&j)));
    let missing = missing.to_usize().expect("at most the row length");
    for &i in order.iter().take(missing) {
        nums[i] += 1;
    }
    nums
}

#[derive(Clone, Debug)]
pub struct GridFactorization {
    /// Target-basis permutation: row `j` of the normal form is row `perm[j]` of `Φ`.
    pub perm: Vec<usize>,
    /// The exact steps `Φ_m, ..., Φ_{n-1}` of the permuted map.
    pub exact_steps: Vec<OrderUnitMap>,
    /// Their grid roundings `F_m, ..., F_{n-1}`.
    pub steps: Vec<GridMap>,
    /// Largest entrywise deviation `F_k - Φ_k`, per step.
    pub step_entry_errors: Vec<Q>,
    /// Operator-norm distance `‖F_k - Φ_k‖`, per step.
    pub step_norm_errors: Vec<Q>,
    /// Operator-norm distance between the composed grid maps and the permuted `Φ`.
    pub error: Q,
}

/// Factors a map `R^m -> R^n` in normal form into grid steps.
pub fn grid_factor(phi: &OrderUnitMap) -> Result<GridFactorization, ChoquetError> {
    let (m, n) = (phi.cols, phi.rows);
    if m >= n {
        return Err(ChoquetError::ShapeError(format!("need m < n, got {m} -> {n}")));
    }
    let (perm, permuted) = normal_form_rows(phi)?;
    let mut exact_steps = Vec::new();
    let mut steps = Vec::new();
    let mut step_entry_errors = Vec::new();
    let mut step_norm_errors = Vec::new();
    for k in m..n {
        let mut last = permuted.entries[k].clone();
        last.resize(k, Q::zero());
        let exact = normal_step(&last);
        let den = grid_denominator(k);
        let nums = round_to_grid(&last, &den);
        let grid = GridMap::new(
            k,
            nums.iter().map(|x| x.to_u64().expect("bounded by 4^k")).collect(),
            (0..=k).collect(),
        )?;
        let approx = grid.to_map();
        step_entry_errors.push(max_entry_distance(&approx, &exact));
        step_norm_errors.push(inf_norm_distance(&approx, &exact)?);
        exact_steps.push(exact);
        steps.push(grid);
    }
    let composed = compose(&steps.iter().map(GridMap::to_map).collect::<Vec<_>>())?;
    let error = inf_norm_distance(&composed, &permuted)?;
    Ok(GridFactorization { perm, exact_steps, steps, step_entry_errors, step_norm_errors, error })
}

/// `2^-m` as an exact rational.
pub fn two_pow_neg(m: usize) -> Q {
    Q::new(BigInt::one(), BigInt::from(2).pow(m as u32))
}

// ------------------------------------------------------------- polytopes

/// Points in `R^k` with exact coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polytope {
    pub ambient: usize,
    pub vertices: Vec<Vec<Q>>,
    pub is_simplex: bool,
}

impl Polytope {
    /// The probability simplex in `R^k`, spanned by the basis vectors.
    pub fn standard_simplex(k: usize) -> Self {
        let vertices = (0..k)
            .map(|i| (0..k).map(|j| if i == j { Q::one() } else { Q::zero() }).collect())
            .collect();
        Polytope { ambient: k, vertices, is_simplex: true }
    }

    pub fn barycenter(&self) -> Vec<Q> {
        let n = Q::from_integer(BigInt::from(self.vertices.len()));
        (0..self.ambient)
            .map(|j| self.vertices.iter().map(|v| v[j].clone()).sum::<Q>() / &n)
            .collect()
    }

    /// CSV with a header `vertex,x1,...,xk` and decimal coordinates.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("vertex");
        for j in 1..=self.ambient {
            out.push_str(&format!(",x{j}"));
        }
        out.push('\n');
        for (i, v) in self.vertices.iter().enumerate() {
            out.push_str(&i.to_string());
            for x in v {
                out.push_str(&format!(",{}", q_to_f64(x)));
            }
            out.push('\n');
        }
        out
    }

    /// Same layout with exact rationals.
    pub fn to_exact_csv(&self) -> String {
        let mut out = String::from("vertex");
        for j in 1..=self.ambient {
            out.push_str(&format!(",x{j}"));
        }
        out.push('\n');
        for (i, v) in self.vertices.iter().enumerate() {
            out.push_str(&i.to_string());
            for x in v {
                out.push_str(&format!(",{}", format_q(x)));
            }
            out.push('\n');
        }
        out
    }
}

/// Exact membership in the probability simplex of `R^k`.
pub fn in_probability_simplex(x: &[Q]) -> bool {
    x.iter().all(|v| !v.is_negative()) && x.iter().sum::<Q>() == Q::one()
}

/// The affine surjection between stage simplexes dual to a step map.
#[derive(Clone, Debug)]
pub struct DualStep {
    map: OrderUnitMap,
}

impl DualStep {
    pub fn apply(&self, state: &[Q]) -> Vec<Q> {
        self.map.dual_apply(state)
    }

    /// Images of the vertices of the upper simplex.
    pub fn image(&self) -> Polytope {
        let upper = Polytope::standard_simplex(self.map.rows);
        Polytope {
            ambient: self.map.cols,
            vertices: upper.vertices.iter().map(|v| self.apply(v)).collect(),
            is_simplex: false,
        }
    }
}

/// Stage `N` polytope and the dual of the step out of it (none at the last stage).
pub fn finite_stage_simplex(
    d: &DirectSystem,
    n: usize,
) -> Result<(Polytope, Option<DualStep>), ChoquetError> {
    if n == 0 || n > d.stages() {
        return Err(ChoquetError::StageError(n));
    }
    let poly = Polytope::standard_simplex(d.dims[n - 1]);
    let dual = d.maps.get(n - 1).map(|m| DualStep { map: m.clone() });
    Ok((poly, dual))
}

/// The constant system on `Δ_{k-1}` with identity steps, `stages` long.
pub fn bauer_from_finite<T>(points: &[T], stages: usize) -> Result<DirectSystem, ChoquetError> {
    let k = points.len();
    if k == 0 || stages == 0 {
        return Err(ChoquetError::ShapeError("need at least one point and one stage".into()));
    }
    DirectSystem::new(vec![k; stages], vec![OrderUnitMap::identity(k); stages - 1])
}

// ---------------------------------------------------- peaked partitions

/// Grid samples of functions on `[0,1]`, one vector per function.
pub type Sampled = Vec<Vec<f64>>;

/// Sums to 1, is nonnegative, and each member peaks at 1, all within `tol`.
pub fn ppu_check(p: &Sampled, tol: f64) -> Result<bool, ChoquetError> {
    let len = p.first().ok_or(ChoquetError::EmptyPartition)?.len();
    if p.iter().any(|f| f.len() != len) {
        return Err(ChoquetError::ShapeError("samples on different grids".into()));
    }
    let sums_ok = (0..len).all(|x| (p.iter().map(|f| f[x]).sum::<f64>() - 1.0).abs() <= tol);
    let pos_ok = p.iter().flatten().all(|&v| v >= -tol);
    let peak_ok = p
        .iter()
        .all(|f| (f.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - 1.0).abs() <= tol);
    Ok(sums_ok && pos_ok && peak_ok)
}

/// Best uniform approximation of `f` on the grid by the span of `basis`:
/// the coefficients and the max residual.
pub fn chebyshev_fit(f: &[f64], basis: &Sampled) -> Result<(Vec<f64>, f64), ChoquetError> {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let t = lp.add_var(1.0, (0.0, f64::INFINITY));
    let coeffs: Vec<_> = basis
        .iter()
        .map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    for (x, &fx) in f.iter().enumerate() {
        // f(x) - Σ c_j g_j(x) <= t  and  >= -t
        let mut upper: Vec<_> = coeffs.iter().zip(basis).map(|(&c, g)| (c, g[x])).collect();
        upper.push((t, 1.0));
        lp.add_constraint(upper.as_slice(), ComparisonOp::Ge, fx);
        let mut lower: Vec<_> = coeffs.iter().zip(basis).map(|(&c, g)| (c, -g[x])).collect();
        lower.push((t, 1.0));
        lp.add_constraint(lower.as_slice(), ComparisonOp::Ge, -fx);
    }
    let sol = lp.solve().map_err(|e| ChoquetError::Fit(e.to_string()))?;
    let c: Vec<f64> = coeffs.iter().map(|&v| sol[v]).collect();
    // report the residual of the returned coefficients, not the LP objective
    let resid = f
        .iter()
        .enumerate()
        .map(|(x, &fx)| (fx - c.iter().zip(basis).map(|(cj, g)| cj * g[x]).sum::<f64>()).abs())
        .fold(0.0, f64::max);
    Ok((c, resid))
}

#[derive(Clone, Debug)]
pub struct Refinement {
    pub refines: bool,
    /// Grid residual of each member of the coarse family.
    pub residuals: Vec<f64>,
}

/// Whether every member of `p` is within `eps` of `span(finer)` on the grid.
pub fn ppu_refines(p: &Sampled, finer: &Sampled, eps: f64) -> Result<Refinement, ChoquetError> {
    if p.is_empty() || finer.is_empty() {
        return Err(ChoquetError::EmptyPartition);
    }
    // the LP solution is accurate to roughly 1e-9; residuals below are zero
    const LP_SLACK: f64 = 1e-9;
    let residuals = p
        .iter()
        .map(|f| chebyshev_fit(f, finer).map(|(_, r)| r))
        .collect::<Result<Vec<_>, _>>()?;
    let refines = residuals.iter().all(|&r| r <= eps + LP_SLACK);
    Ok(Refinement { refines, residuals })
}

/// `n` uniform points on `[0,1]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

pub const DEFAULT_FIT_GRID: usize = 257;

/// Greatest common divisor of the denominators, used to pick a grid level.
pub fn common_denominator(row: &[Q]) -> BigInt {
    row.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::q;

    fn map(rows: &[&[(i64, i64)]]) -> OrderUnitMap {
        OrderUnitMap::new(rows.iter().map(|r| r.iter().map(|&(a, b)| q(a, b)).collect()).collect())
            .unwrap()
    }

    #[test]
    fn rejects_non_stochastic() {
        assert!(OrderUnitMap::new(vec![vec![q(1, 2), q(1, 3)]]).is_err());
        assert!(OrderUnitMap::new(vec![vec![q(3, 2), q(-1, 2)]]).is_err());
    }

    #[test]
    fn identity_composes_neutrally() {
        let a = map(&[&[(1, 1), (0, 1)], &[(0, 1), (1, 1)], &[(1, 3), (2, 3)]]);
        let c = compose(&[OrderUnitMap::identity(2), a.clone(), OrderUnitMap::identity(3)]).unwrap();
        assert_eq!(c, a);
        assert!(compose(&[a.clone(), a]).is_err());
    }

    #[test]
    fn basis_rows_factor_exactly() {
        let phi = map(&[&[(0, 1), (1, 1)], &[(1, 1), (0, 1)], &[(1, 1), (0, 1)], &[(0, 1), (1, 1)]]);
        let f = grid_factor(&phi).unwrap();
        assert!(f.error.is_zero());
        assert_eq!(f.perm, vec![1, 0, 2, 3]);
    }

    #[test]
    fn missing_basis_row() {
        let phi = map(&[&[(1, 2), (1, 2)], &[(1, 1), (0, 1)], &[(1, 1), (0, 1)]]);
        assert_eq!(grid_factor(&phi).unwrap_err(), ChoquetError::NotRepresentingForm(2));
    }

    #[test]
    fn exact_steps_compose_back() {
        let phi = map(&[&[(1, 1), (0, 1)], &[(1, 3), (2, 3)], &[(0, 1), (1, 1)], &[(5, 7), (2, 7)]]);
        let f = grid_factor(&phi).unwrap();
        let back = compose(&f.exact_steps).unwrap();
        let permuted = OrderUnitMap::new(f.perm.iter().map(|&r| phi.row(r).to_vec()).collect()).unwrap();
        assert_eq!(back, permuted);
        assert!(f.error <= two_pow_neg(2));
    }

    #[test]
    fn largest_remainder_rounding() {
        let nums = round_to_grid(&[q(1, 3), q(1, 3), q(1, 3)], &BigInt::from(4));
        assert_eq!(nums, vec![BigInt::from(2), BigInt::from(1), BigInt::from(1)]);
    }

    #[test]
    fn grid_map_roundtrip() {
        let g = GridMap::new(2, vec![4, 12], vec![2, 0, 1]).unwrap();
        assert_eq!(GridMap::from_map(2, &g.to_map()).unwrap().to_map(), g.to_map());
        let first = GridMap::new(1, vec![4], vec![0, 1]).unwrap();
        let conv = lambda3_to_lambda2(&[first]).unwrap();
        assert_eq!(conv.matrix.column(1), &[Q::one()]);
    }

    #[test]
    fn lambda_roundtrip_with_perms() {
        let steps = vec![
            GridMap::new(1, vec![4], vec![1, 0]).unwrap(),
            GridMap::new(2, vec![3, 13], vec![2, 0, 1]).unwrap(),
            GridMap::new(3, vec![10, 20, 34], vec![0, 3, 1, 2]).unwrap(),
        ];
        let conv = lambda3_to_lambda2(&steps).unwrap();
        let sys = lambda2_to_lambda(&conv.matrix, 3).unwrap();
        for (k, g) in steps.iter().enumerate() {
            let lhs = g.to_map().after(&OrderUnitMap::permutation(&conv.perms[k])).unwrap();
            let rhs = OrderUnitMap::permutation(&conv.perms[k + 1]).after(&sys.maps()[k]).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn stage_polytopes() {
        let sys = bauer_from_finite(&["a", "b", "c"], 3).unwrap();
        let (p, dual) = finite_stage_simplex(&sys, 1).unwrap();
        assert_eq!(p.vertices.len(), 3);
        let img = dual.unwrap().image();
        assert!(img.vertices.iter().all(|v| in_probability_simplex(v)));
        assert!(finite_stage_simplex(&sys, 4).is_err());
        assert!(p.to_csv().starts_with("vertex,x1,x2,x3\n"));
    }

    #[test]
    fn chebyshev_of_hat_against_lines() {
        let grid = uniform_grid(101);
        let hat: Vec<f64> = grid.iter().map(|&x| 1.0 - (2.0 * x - 1.0).abs()).collect();
        let lines = vec![grid.iter().map(|&x| 1.0 - x).collect(), grid.clone()];
        let (_, r) = chebyshev_fit(&hat, &lines).unwrap();
        assert!((r - 0.5).abs() < 1e-9);
        assert!(ppu_check(&lines, 0.0).unwrap());
    }
}
