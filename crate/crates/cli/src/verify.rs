//! Randomized property suites, seeded by `--seed`. Each suite becomes one report row.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use cstar_desk::aialg::{beta, eta};
use cstar_desk::choquet::{compose, grid_factor, two_pow_neg, GridMap, OrderUnitMap};
use cstar_desk::exact::{format_q, Q};
use cstar_desk::finite_cstar::{proj_iter, PROJ_MAX_ITER};
use cstar_desk::linalg::{c, op_norm, CMat};
use cstar_desk::ncpoly::{check_xi, xi_code, MatrixTuple, CODE_TOL};
use cstar_desk::supernatural::{leq_infty, pointwise_leq, uhf_iso, ExpSeq, LeqInfty};

use crate::doc::{Options, Report, Status};

type Suite = fn(&mut ChaCha8Rng, usize) -> Result<String, String>;

const SUITES: &[(&str, Suite, usize)] = &[
    ("supernatural: least shift against term-by-term search", shift_oracle, 300),
    ("supernatural: preorder laws and refinements", preorder, 300),
    ("choquet: grid factorization within 2^-m", factor_bound, 60),
    ("aialg: beta after eta is the identity", beta_eta, 200),
    ("ncpoly: norm codes satisfy the axioms", xi_axioms, 20),
    ("finite_cstar: gapped spectra iterate to projections", projections, 60),
];

fn rq(rng: &mut ChaCha8Rng, den: i64) -> Q {
    Q::new(BigInt::from(rng.gen_range(0..=den)), BigInt::from(den))
}

fn random_seq(rng: &mut ChaCha8Rng, slope: u64) -> ExpSeq {
    let len = rng.gen_range(0..6);
    ExpSeq::new((0..len).map(|_| rng.gen_range(0..30)).collect(), slope, rng.gen_range(0..20))
}

fn shift_oracle(rng: &mut ChaCha8Rng, cases: usize) -> Result<String, String> {
    for _ in 0..cases {
        let slope = rng.gen_range(0..4);
        let (f, g) = (random_seq(rng, slope), random_seq(rng, slope));
        // equal slopes: the difference is constant past both prefixes
        let brute = (0..200u64).map(|i| f.at(i) - g.at(i)).fold(BigInt::zero(), |a, x| a.max(x));
        match leq_infty(&f, &g) {
            LeqInfty::Holds { m } if m == brute => {}
            other => return Err(format!("{f} vs {g}: got {other:?}, search gives m = {brute}")),
        }
        let steep = ExpSeq::new(f.prefix.clone(), slope + 1 + rng.gen_range(0..3), f.intercept);
        let refuted = leq_infty(&steep, &g);
        let i = refuted.refutation(50).ok_or_else(|| format!("{steep} ≤∞ {g} was not refuted"))?;
        if steep.at(i) <= g.at(i) + 50 {
            return Err(format!("refutation index {i} does not exceed the shift 50"));
        }
    }
    Ok(format!("{cases} pairs"))
}

fn preorder(rng: &mut ChaCha8Rng, cases: usize) -> Result<String, String> {
    for _ in 0..cases {
        let (a, b, c) = {
            let mut s = || {
                let slope = rng.gen_range(0..3);
                random_seq(rng, slope)
            };
            (s(), s(), s())
        };
        if leq_infty(&a, &a) != (LeqInfty::Holds { m: BigInt::zero() }) {
            return Err(format!("{a} is not ≤∞ itself with shift 0"));
        }
        if leq_infty(&a, &b).holds() && leq_infty(&b, &c).holds() && !leq_infty(&a, &c).holds() {
            return Err(format!("transitivity fails on {a}, {b}, {c}"));
        }
        if pointwise_leq(&a, &b) && leq_infty(&a, &b) != (LeqInfty::Holds { m: BigInt::zero() }) {
            return Err(format!("{a} ≤ {b} pointwise but the shift is not 0"));
        }
        if uhf_iso(&a, &b) && !(leq_infty(&a, &b).holds() && leq_infty(&b, &a).holds()) {
            return Err(format!("{a} ≅ {b} but not bi-embeddable"));
        }
    }
    Ok(format!("{cases} triples"))
}

/// A map `R^m -> R^n` whose first `m` rows are the identity, with rows permuted.
fn normal_form_map(rng: &mut ChaCha8Rng, m: usize, n: usize) -> (OrderUnitMap, Vec<usize>) {
    let mut rows: Vec<Vec<Q>> = (0..m).map(|i| (0..m).map(|j| if i == j { Q::one() } else { Q::zero() }).collect()).collect();
    for _ in m..n {
        let raw: Vec<u64> = (0..m).map(|_| rng.gen_range(0..50)).collect();
        let total: u64 = raw.iter().sum::<u64>().max(1);
        let mut row: Vec<Q> = raw.iter().map(|&x| Q::new(x.into(), total.into())).collect();
        if raw.iter().all(|&x| x == 0) {
            row[0] = Q::one();
        }
        rows.push(row);
    }
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let shuffled = order.iter().map(|&i| rows[i].clone()).collect();
    (OrderUnitMap::new(shuffled).expect("rows are probability vectors"), order)
}

fn factor_bound(rng: &mut ChaCha8Rng, cases: usize) -> Result<String, String> {
    let mut worst = Q::zero();
    for _ in 0..cases {
        let m = rng.gen_range(1..=3);
        let n = rng.gen_range(m + 1..=m + 4);
        let (phi, _) = normal_form_map(rng, m, n);
        let fac = grid_factor(&phi).map_err(|e| e.to_string())?;
        let composed = compose(&fac.steps.iter().map(GridMap::to_map).collect::<Vec<_>>()).map_err(|e| e.to_string())?;
        // ‖A‖ on l∞ is the largest absolute row sum
        let err = (0..n)
            .map(|j| {
                let target = phi.row(fac.perm[j]);
                composed.row(j).iter().zip(target).map(|(a, b)| (a - b).abs()).sum::<Q>()
            })
            .max()
            .unwrap_or_else(Q::zero);
        if err > two_pow_neg(m) || err > fac.error {
            return Err(format!("{m} -> {n}: measured {} against bound {}", format_q(&err), format_q(&fac.error)));
        }
        worst = worst.max(err * Q::from_integer(BigInt::from(1u64 << m)));
    }
    Ok(format!("{cases} maps, worst error/2^-m = {}", format_q(&worst)))
}

fn beta_eta(rng: &mut ChaCha8Rng, cases: usize) -> Result<String, String> {
    for _ in 0..cases {
        let n = rng.gen_range(1..=9);
        let x: Vec<Q> = (0..n).map(|_| rq(rng, 12) - rq(rng, 7)).collect();
        let back = beta(n, &eta(n, &x).map_err(|e| e.to_string())?);
        if back != x {
            return Err(format!("n = {n}: β(η(x)) differs from x"));
        }
    }
    Ok(format!("{cases} vectors"))
}

fn random_c(rng: &mut ChaCha8Rng, d: usize) -> CMat {
    CMat::from_fn(d, d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn xi_axioms(rng: &mut ChaCha8Rng, cases: usize) -> Result<String, String> {
    for _ in 0..cases {
        let d = rng.gen_range(1..=3);
        let len = rng.gen_range(1..=2);
        let tuple = MatrixTuple::new(d, (0..len).map(|_| random_c(rng, d)).collect()).map_err(|e| e.to_string())?;
        if let Some(v) = check_xi(&xi_code(&tuple, 40), CODE_TOL) {
            return Err(format!("dim {d}: {v:?}"));
        }
    }
    Ok(format!("{cases} tuples, codes of length 40"))
}

fn projections(rng: &mut ChaCha8Rng, cases: usize) -> Result<String, String> {
    let mut most = 0;
    for _ in 0..cases {
        let d = rng.gen_range(1..=4);
        let (q, _) = random_c(rng, d).qr().unpack();
        let spectrum: Vec<f64> = (0..d)
            .map(|_| if rng.gen_bool(0.5) { rng.gen_range(-0.3..0.24) } else { rng.gen_range(0.76..1.3) })
            .collect();
        let diag = CMat::from_diagonal(&nalgebra::DVector::from_iterator(d, spectrum.iter().map(|&x| c(x, 0.0))));
        let a = &q * diag * q.adjoint();
        let p = proj_iter(&a, 0.01, PROJ_MAX_ITER).map_err(|e| e.to_string())?;
        let defect = op_norm(&(&p.projection * &p.projection - &p.projection));
        if defect > 1e-8 {
            return Err(format!("idempotence defect {defect:e}"));
        }
        most = most.max(p.iterations);
    }
    Ok(format!("{cases} matrices, at most {most} iterations"))
}

/// Runs every suite. The report fails with a violation if any suite does.
pub fn verify(opts: &Options) -> Report {
    let seed = opts.seed.unwrap_or(0);
    let mut rows: Vec<Value> = Vec::new();
    let mut failed = 0;
    for (i, (name, suite, cases)) in SUITES.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let (pass, detail) = match suite(&mut rng, *cases) {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        failed += usize::from(!pass);
        rows.push(json!({ "suite": name, "pass": pass, "detail": detail }));
    }
    let status = if failed == 0 { Status::Ok } else { Status::Violation };
    Report {
        verb: "verify".into(),
        status,
        message: (failed > 0).then(|| format!("{failed} suite(s) failed")),
        result: json!({ "seed": seed, "suites": SUITES.len(), "failed": failed }),
        rows,
        csv: None,
    }
}
