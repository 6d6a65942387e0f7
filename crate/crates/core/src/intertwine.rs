//! Approximate intertwining of two matrix towers through an enumerated
//! dictionary of unitaries.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{adjoint, c, distance_to_span, kron, op_norm, span_basis, CMat};

/// Norm comparisons and set membership are decided at this scale.
pub const NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone)]
pub enum IntertwineError {
    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("no dictionary unitary meets the bound at stage {stage}")]
    NoUnitaryFound { stage: usize, record: Box<IntertwineRecord> },
    #[error("stage cap reached after {} stages", .0.stages.len())]
    Capped(Box<IntertwineRecord>),
    #[error("element is outside the span of the recorded sets")]
    OutOfScope,
}

/// A unital *-homomorphism `M_p → M_q`, `a ↦ V (I_r ⊗ a) V*` with `q = r p`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixHom {
    source: usize,
    target: usize,
    v: CMat,
}

impl MatrixHom {
    pub fn new(source: usize, target: usize, v: CMat) -> Result<Self, IntertwineError> {
        if source == 0 || target % source != 0 || v.nrows() != target || v.ncols() != target {
            return Err(IntertwineError::ShapeError(format!("no unital map M_{source} → M_{target} with this V")));
        }
        let defect = op_norm(&(&v * adjoint(&v) - CMat::identity(target, target)));
        if defect > NORM_TOL {
            return Err(IntertwineError::ShapeError(format!("V is not unitary (defect {defect:e})")));
        }
        Ok(MatrixHom { source, target, v })
    }

    pub fn identity(n: usize) -> Self {
        MatrixHom { source: n, target: n, v: CMat::identity(n, n) }
    }

    /// `Ad(u)` on `M_n`.
    pub fn inner(u: CMat) -> Result<Self, IntertwineError> {
        let n = u.nrows();
        MatrixHom::new(n, n, u)
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn unitary(&self) -> &CMat {
        &self.v
    }

    pub fn apply(&self, a: &CMat) -> CMat {
        let r = self.target / self.source;
        let amp = kron(&CMat::identity(r, r), a);
        &self.v * amp * adjoint(&self.v)
    }

    /// `Ad(u) ∘ self`.
    pub fn then_ad(&self, u: &CMat) -> MatrixHom {
        MatrixHom { source: self.source, target: self.target, v: u * &self.v }
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &MatrixHom) -> Result<MatrixHom, IntertwineError> {
        if other.source != self.target {
            return Err(IntertwineError::ShapeError("composition shapes differ".into()));
        }
        let r = other.target / other.source;
        let v = &other.v * kron(&CMat::identity(r, r), &self.v);
        Ok(MatrixHom { source: self.source, target: other.target, v })
    }

    /// Largest failure of unitality, multiplicativity and *-preservation on the pairs from `gens`.
    pub fn hom_defect(&self, gens: &[CMat]) -> f64 {
        let one = op_norm(&(self.apply(&CMat::identity(self.source, self.source)) - CMat::identity(self.target, self.target)));
        let mut worst = one;
        for a in gens {
            worst = worst.max(op_norm(&(self.apply(&adjoint(a)) - adjoint(&self.apply(a)))));
            for b in gens {
                worst = worst.max(op_norm(&(self.apply(&(a * b)) - self.apply(a) * self.apply(b))));
            }
        }
        worst
    }
}

/// The dictionary `u_1 = I`, then `ω^j P_σ` (phases `ω = e^{2πi/J}`, permutations
/// in lexicographic order), then diagonal phase unitaries with first entry 1,
/// then QR factors of seeded random matrices.
#[derive(Clone, Debug)]
pub struct UnitaryDict {
    n: usize,
    phases: usize,
    seed: u64,
    size: usize,
    perms: Vec<Vec<usize>>,
    random: Vec<CMat>,
    rng: ChaCha8Rng,
}

impl UnitaryDict {
    pub const DEFAULT_PHASES: usize = 16;
    pub const DEFAULT_SIZE: usize = 10_000;

    pub fn new(n: usize, phases: usize, seed: u64, size: usize) -> Self {
        UnitaryDict {
            n,
            phases: phases.max(1),
            seed,
            size,
            perms: permutations(n),
            random: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn with_seed(n: usize, seed: u64) -> Self {
        UnitaryDict::new(n, Self::DEFAULT_PHASES, seed, Self::DEFAULT_SIZE)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn phase(&self, j: usize) -> Complex64 {
        Complex64::from_polar(1.0, 2.0 * PI * j as f64 / self.phases as f64)
    }

    /// `u_i`, one-based.
    pub fn at(&mut self, i: usize) -> Option<CMat> {
        if i == 0 || i > self.size {
            return None;
        }
        let n = self.n;
        if i == 1 {
            return Some(CMat::identity(n, n));
        }
        let mut r = i - 2;
        let perm_block = self.phases * self.perms.len() - 1;
        if r < perm_block {
            // skip (j = 0, σ = id), which is u_1
            let r = r + 1;
            let (j, s) = (r / self.perms.len(), r % self.perms.len());
            let w = self.phase(j);
            let perm = &self.perms[s];
            let mut p = CMat::zeros(n, n);
            for (col, &row) in perm.iter().enumerate() {
                p[(row, col)] = w;
            }
            return Some(p);
        }
        r -= perm_block;
        let diag_block = self.phases.pow(n.saturating_sub(1) as u32) - 1;
        if r < diag_block {
            let mut r = r + 1;
            let mut d = CMat::identity(n, n);
            for k in (1..n).rev() {
                d[(k, k)] = self.phase(r % self.phases);
                r /= self.phases;
            }
            return Some(d);
        }
        r -= diag_block;
        while self.random.len() <= r {
            let m = DMatrix::from_fn(n, n, |_, _| c(self.rng.gen_range(-1.0..1.0), self.rng.gen_range(-1.0..1.0)));
            self.random.push(m.qr().q());
        }
        Some(self.random[r].clone())
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut cur: Vec<usize> = (0..n).collect();
    let mut out = vec![cur.clone()];
    loop {
        // next permutation in lexicographic order
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else { return out };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).expect("a larger entry exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
}

/// A matrix tower with its dense element stream and unitary dictionary.
#[derive(Clone, Debug)]
pub struct Tower {
    dims: Vec<usize>,
    maps: Vec<MatrixHom>,
    elements: Vec<CMat>,
    unitaries: UnitaryDict,
}

impl Tower {
    pub fn new(dims: Vec<usize>, maps: Vec<MatrixHom>, elements: Vec<CMat>, unitaries: UnitaryDict) -> Result<Self, IntertwineError> {
        if dims.is_empty() || maps.len() + 1 != dims.len() {
            return Err(IntertwineError::ShapeError("one connecting map per consecutive pair of stages".into()));
        }
        for (k, m) in maps.iter().enumerate() {
            if m.source != dims[k] || m.target != dims[k + 1] {
                return Err(IntertwineError::ShapeError(format!("connecting map {} has the wrong shape", k + 1)));
            }
        }
        let top = *dims.last().expect("nonempty");
        if unitaries.n != top || elements.iter().any(|x| x.nrows() != top || x.ncols() != top) {
            return Err(IntertwineError::ShapeError("elements and unitaries must live in the last stage".into()));
        }
        Ok(Tower { dims, maps, elements, unitaries })
    }

    /// The tower `M_n → M_n → ⋯` with identity connecting maps.
    pub fn stationary(n: usize, elements: Vec<CMat>, unitaries: UnitaryDict) -> Result<Self, IntertwineError> {
        Tower::new(vec![n], Vec::new(), elements, unitaries)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn maps(&self) -> &[MatrixHom] {
        &self.maps
    }

    pub fn elements(&self) -> &[CMat] {
        &self.elements
    }

    pub fn unitaries_mut(&mut self) -> &mut UnitaryDict {
        &mut self.unitaries
    }

    /// Size of the algebra the recursion runs in.
    pub fn top(&self) -> usize {
        *self.dims.last().expect("nonempty")
    }

    /// Largest homomorphism defect of the connecting maps on matrix units.
    pub fn connecting_defect(&self) -> f64 {
        self.maps.iter().map(|m| m.hom_defect(&matrix_units(m.source))).fold(0.0, f64::max)
    }
}

/// The matrix units `e_ij` of `M_n`.
pub fn matrix_units(n: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut e = CMat::zeros(n, n);
            e[(i, j)] = c(1.0, 0.0);
            out.push(e);
        }
    }
    out
}

/// `ε_k = scale · ratio^k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub scale: f64,
    pub ratio: f64,
}

impl Tolerances {
    /// `ε_k = 2^{-k}`.
    pub fn halving() -> Self {
        Tolerances { scale: 1.0, ratio: 0.5 }
    }

    pub fn at(&self, k: usize) -> f64 {
        self.scale * self.ratio.powi(k as i32)
    }

    /// `Σ_{j ≥ k} ε_j`.
    pub fn tail(&self, k: usize) -> f64 {
        self.at(k) / (1.0 - self.ratio)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IntertwineStage {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub f_size: usize,
    pub g_size: usize,
    /// `max_{a∈F_k} ‖η_k ι_{k-1}(a) - a‖`.
    pub eta_residual: f64,
    /// `max_{b∈G_k} ‖ι_k η_k(b) - b‖`.
    pub iota_residual: f64,
    pub eps: f64,
}

/// Everything the recursion chose, stage by stage.
#[derive(Clone, Debug)]
pub struct IntertwineRecord {
    pub stages: Vec<IntertwineStage>,
    pub f_sets: Vec<Vec<CMat>>,
    pub g_sets: Vec<Vec<CMat>>,
    /// `ι_k`, `η_k` as homomorphisms.
    pub iotas: Vec<MatrixHom>,
    pub etas: Vec<MatrixHom>,
    pub tolerances: Tolerances,
    /// Whether the sets stopped growing once both element streams were used up.
    pub stabilized: bool,
}

impl IntertwineRecord {
    /// Stage table as text.
    pub fn to_table(&self) -> String {
        let mut out = format!("intertwine stages={} stabilized={}\n", self.stages.len(), self.stabilized);
        out.push_str("k\tn_k\tm_k\t|F_k|\t|G_k|\teps_k\teta_residual\tiota_residual\n");
        for s in &self.stages {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{:e}\t{:e}\t{:e}",
                s.k, s.n, s.m, s.f_size, s.g_size, s.eps, s.eta_residual, s.iota_residual
            );
        }
        out
    }

    pub fn eta(&self, k: usize) -> Option<&MatrixHom> {
        self.etas.get(k.wrapping_sub(1))
    }

    pub fn iota(&self, k: usize) -> Option<&MatrixHom> {
        self.iotas.get(k.wrapping_sub(1))
    }
}

fn max_residual(set: &[CMat], f: impl Fn(&CMat) -> CMat) -> f64 {
    set.iter().map(|a| op_norm(&(f(a) - a))).fold(0.0, f64::max)
}

fn insert_new(set: &mut Vec<CMat>, x: CMat) {
    if !set.iter().any(|y| op_norm(&(y - &x)) <= NORM_TOL) {
        set.push(x);
    }
}

/// Runs steps (1)–(4) from `ι_1 = ι`, `η_1 = η`, `n_1 = m_1 = 1`, `F_1 = G_1 = ∅`.
///
/// Stops with a record once both element streams are used up and `F_k`, `G_k`
/// no longer grow; returns `Capped` if that has not happened by `stage_cap`.
pub fn run_intertwining(
    a: &mut Tower,
    b: &mut Tower,
    iota: &MatrixHom,
    eta: &MatrixHom,
    tolerances: Tolerances,
    stage_cap: usize,
) -> Result<IntertwineRecord, IntertwineError> {
    let (p, q) = (a.top(), b.top());
    if iota.source != p || iota.target != q || eta.source != q || eta.target != p {
        return Err(IntertwineError::ShapeError(format!("need ι: M_{p} → M_{q} and η: M_{q} → M_{p}")));
    }
    let mut rec = IntertwineRecord {
        stages: vec![IntertwineStage { k: 1, n: 1, m: 1, f_size: 0, g_size: 0, eta_residual: 0.0, iota_residual: 0.0, eps: tolerances.at(1) }],
        f_sets: vec![Vec::new()],
        g_sets: vec![Vec::new()],
        iotas: vec![iota.clone()],
        etas: vec![eta.clone()],
        tolerances,
        stabilized: false,
    };
    for k in 2..=stage_cap {
        let prev = k - 2;
        let eps = tolerances.at(k);

        // (1)
        let mut fk = rec.f_sets[prev].clone();
        if let Some(x) = a.elements.get(k - 2) {
            insert_new(&mut fk, x.clone());
        }
        for y in &rec.g_sets[prev] {
            insert_new(&mut fk, rec.etas[prev].apply(y));
        }
        // (2)
        let mut gk = rec.g_sets[prev].clone();
        if let Some(y) = b.elements.get(k - 2) {
            insert_new(&mut gk, y.clone());
        }
        for x in &fk {
            insert_new(&mut gk, rec.iotas[prev].apply(x));
        }

        // (3)
        let iota_prev = rec.iotas[prev].clone();
        let mut chosen = None;
        for n in rec.stages[prev].n + 1..=a.unitaries.len() {
            let u = a.unitaries.at(n).expect("index within the dictionary");
            let cand = eta.then_ad(&u);
            let r = max_residual(&fk, |x| cand.apply(&iota_prev.apply(x)));
            if r < eps {
                chosen = Some((n, cand, r));
                break;
            }
        }
        let Some((n, eta_k, eta_res)) = chosen else {
            return Err(IntertwineError::NoUnitaryFound { stage: k, record: Box::new(rec) });
        };

        // (4)
        let mut chosen = None;
        for m in rec.stages[prev].m + 1..=b.unitaries.len() {
            let v = b.unitaries.at(m).expect("index within the dictionary");
            let cand = iota.then_ad(&v);
            let r = max_residual(&gk, |y| cand.apply(&eta_k.apply(y)));
            if r < eps {
                chosen = Some((m, cand, r));
                break;
            }
        }
        let Some((m, iota_k, iota_res)) = chosen else {
            return Err(IntertwineError::NoUnitaryFound { stage: k, record: Box::new(rec) });
        };

        let grew = fk.len() != rec.f_sets[prev].len() || gk.len() != rec.g_sets[prev].len();
        rec.stages.push(IntertwineStage {
            k,
            n,
            m,
            f_size: fk.len(),
            g_size: gk.len(),
            eta_residual: eta_res,
            iota_residual: iota_res,
            eps,
        });
        rec.f_sets.push(fk);
        rec.g_sets.push(gk);
        rec.etas.push(eta_k);
        rec.iotas.push(iota_k);
        let streams_done = k > a.elements.len() + 1 && k > b.elements.len() + 1;
        if streams_done && !grew {
            rec.stabilized = true;
            return Ok(rec);
        }
    }
    Err(IntertwineError::Capped(Box::new(rec)))
}

/// `η_K(b)` with the bound `Σ_{j≥K} ε_j`, for `b` in the span of `G_K` and the unit.
pub fn limit_map(rec: &IntertwineRecord, b: &CMat, k: usize) -> Result<(CMat, f64), IntertwineError> {
    let eta = rec.eta(k).ok_or(IntertwineError::OutOfScope)?;
    if b.nrows() != eta.source || b.ncols() != eta.source {
        return Err(IntertwineError::ShapeError("element has the wrong size".into()));
    }
    let mut gens = rec.g_sets[k - 1].clone();
    gens.push(CMat::identity(eta.source, eta.source));
    let basis = span_basis(&gens, NORM_TOL);
    if distance_to_span(b, &basis) > NORM_TOL * b.norm().max(1.0) {
        return Err(IntertwineError::OutOfScope);
    }
    Ok((eta.apply(b), rec.tolerances.tail(k)))
}

/// Elements `a ⊗ I_2` of `M_4` for seeded random `a ∈ M_2`, and seeded random elements of `M_4`.
pub fn seeded_elements(seed: u64, count: usize) -> (Vec<CMat>, Vec<CMat>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| DMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let xs = (0..count).map(|_| kron(&draw(2), &CMat::identity(2, 2))).collect();
    let ys = (0..count).map(|_| draw(4)).collect();
    (xs, ys)
}

/// The tensor swap on `C^2 ⊗ C^2`, carrying `a ⊗ I` to `I ⊗ a`.
pub fn swap_unitary() -> CMat {
    let mut p = CMat::zeros(4, 4);
    for (col, row) in [0, 2, 1, 3].into_iter().enumerate() {
        p[(row, col)] = c(1.0, 0.0);
    }
    p
}

/// The seeded instance: `M_2 ⊗ I` inside `M_4` on the A side, all of `M_4` on
/// the B side, `ι` the inclusion and `η = Ad(P)` for the tensor swap `P`.
pub struct M2InM4 {
    pub a: Tower,
    pub b: Tower,
    pub iota: MatrixHom,
    pub eta: MatrixHom,
}

pub fn m2_in_m4(seed: u64, elements: usize) -> M2InM4 {
    let (xs, ys) = seeded_elements(seed, elements);
    M2InM4 {
        a: Tower::stationary(4, xs, UnitaryDict::with_seed(4, seed)).expect("shapes agree"),
        b: Tower::stationary(4, ys, UnitaryDict::with_seed(4, seed.wrapping_add(1))).expect("shapes agree"),
        iota: MatrixHom::identity(4),
        eta: MatrixHom::inner(swap_unitary()).expect("permutation matrices are unitary"),
    }
}
