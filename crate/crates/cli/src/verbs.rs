//! One function per verb. Each returns the finished report or a [`Failure`].

use std::fmt::Write as _;

use num_traits::Zero;
use serde_json::{json, Value};

use cstar_desk::aialg::{
    approx_standard, build_system, commuting_square_residual, default_delta, grid_points, simplicity_cert,
    trace_intertwining_check, varsigma, AISystem, AffineEndo, AiError, DenseSeq, PLFunc, SearchBounds, Stage,
    TraceInputs, DEFAULT_GRID,
};
use cstar_desk::choquet::{
    bauer_from_finite, finite_stage_simplex, grid_factor, in_probability_simplex, lambda2_to_lambda,
    lambda3_to_lambda2, ppu_check, ppu_refines, two_pow_neg, ChoquetError, GridMap, RepresentingMatrix, Sampled,
    DEFAULT_FIT_GRID,
};
use cstar_desk::exact::{format_q, parse_q, q_to_f64, Q};
use cstar_desk::finite_cstar::{gns, CStarError, DensityState};
use cstar_desk::intertwine::{
    limit_map, m2_in_m4, run_intertwining, IntertwineError, IntertwineRecord, MatrixHom, Tolerances, Tower,
    UnitaryDict,
};
use cstar_desk::linalg::{op_norm, CMat};
use cstar_desk::ncpoly::{
    check_state, check_xi, enum_poly, index_of, xi_code, Family, NcError, NcPolynomial, StateCheck, StateCode,
    CODE_TOL,
};
use cstar_desk::supernatural::{
    bounded_leq_infty, cf_biembed, k0_contains, leq_infty, pointwise_leq, supernatural_of_multiplicities, uhf_iso,
    LeqInfty, SupernaturalError, SupernaturalNumber,
};

use crate::codec::*;
use crate::doc::{parse_err, Failure, Options, Report, Status};

type Done = Result<Report, Failure>;

fn report(verb: &str, status: Status, result: Value) -> Report {
    Report { verb: verb.into(), status, message: None, result, rows: Vec::new(), csv: None }
}

fn ok(verb: &str, result: Value) -> Report {
    report(verb, Status::Ok, result)
}

/// `Ok` when `holds`, otherwise a violation carrying `why`.
fn checked(verb: &str, holds: bool, why: impl FnOnce() -> String, result: Value) -> Report {
    let mut r = report(verb, if holds { Status::Ok } else { Status::Violation }, result);
    if !holds {
        r.message = Some(why());
    }
    r
}

fn nc_err(e: NcError) -> Failure {
    parse_err(e.to_string())
}

fn cstar_err(e: CStarError) -> Failure {
    parse_err(e.to_string())
}

fn choquet_err(e: ChoquetError) -> Failure {
    parse_err(e.to_string())
}

fn sn_err(e: SupernaturalError) -> Failure {
    parse_err(e.to_string())
}

fn ai_err(e: AiError) -> Failure {
    match e {
        AiError::SearchExhausted { .. } | AiError::CertNotFound(_) => Failure::Exhausted(e.to_string()),
        e => parse_err(e.to_string()),
    }
}

fn json_of<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("plain data serializes")
}

fn tol_f64(opts: &Options, default: f64) -> Result<f64, Failure> {
    match &opts.tol {
        None => Ok(default),
        Some(t) => {
            let v = match t.parse::<f64>() {
                Ok(v) => v,
                Err(_) => parse_q(t).map(|q| q_to_f64(&q)).map_err(|e| parse_err(format!("--tol: {e}")))?,
            };
            if v.is_finite() && v >= 0.0 {
                Ok(v)
            } else {
                Err(parse_err(format!("--tol {t} must be a nonnegative number")))
            }
        }
    }
}

/// `--bounds key=value,...` over the fields of [`SearchBounds`].
pub fn search_bounds(opts: &Options) -> Result<SearchBounds, Failure> {
    let mut b = SearchBounds::default();
    if let Some(g) = opts.grid {
        b.grid = g;
    }
    let Some(text) = &opts.bounds else { return Ok(b) };
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| parse_err(format!("bound `{part}` is not key=value")))?;
        let v: u64 = v.trim().parse().map_err(|_| parse_err(format!("bound `{part}` needs an integer")))?;
        match k.trim() {
            "max_len" => b.max_len = v,
            "depth" => b.depth = v,
            "dense_depth" => b.dense_depth = v,
            "max_g" => b.max_g = v,
            "node_budget" => b.node_budget = v,
            other => return Err(parse_err(format!("unknown bound {other}"))),
        }
    }
    Ok(b)
}

// ------------------------------------------------------------------ nc

fn family(p: &Value) -> Result<Family, Failure> {
    match p.get("family").and_then(Value::as_str) {
        None | Some("unital") => Ok(Family::Unital),
        Some("noconstant") => Ok(Family::NoConstant),
        Some(other) => Err(parse_err(format!("family must be \"unital\" or \"noconstant\", not {other}"))),
    }
}

fn polynomial(p: &Value) -> Result<NcPolynomial, Failure> {
    let fam = family(p)?;
    match (p.get("poly"), p.get("index")) {
        (Some(_), None) => NcPolynomial::parse(&string(p, "poly")?, fam).map_err(nc_err),
        (None, Some(_)) => Ok(enum_poly(uint(p, "index")?, fam)),
        _ => Err(parse_err("payload needs exactly one of \"poly\" and \"index\"")),
    }
}

pub fn nc_eval(verb: &str, p: &Value) -> Done {
    let poly = polynomial(p)?;
    let tuple = exact_tuple(field(p, "tuple")?)?;
    let value = tuple.eval(&poly).map_err(nc_err)?;
    let index = if poly.is_zero() { Value::Null } else { json!(index_of(&poly).map_err(nc_err)?.to_string()) };
    Ok(ok(verb, json!({ "poly": poly.to_string(), "index": index, "value": qmatrix_json(&value) })))
}

pub fn nc_xicode(verb: &str, p: &Value, opts: &Options) -> Done {
    let tuple = exact_tuple(field(p, "tuple")?)?.to_float();
    let len = uint(p, "len")? as usize;
    let tol = tol_f64(opts, CODE_TOL)?;
    let code = xi_code(&tuple, len);
    let violation = check_xi(&code, tol);
    let mut result = json!({ "len": len, "values": code.values, "violation": json_of(&violation) });
    let mut holds = violation.is_none();
    if let Some(rho) = p.get("state") {
        let state = DensityState::new(cmatrix(rho, "state")?).map_err(cstar_err)?;
        let phi = StateCode {
            values: (0..len as u64).map(|k| state.eval(&tuple.eval_padded(&enum_poly(k, Family::NoConstant)))).collect(),
        };
        let verdict = check_state(&code, &phi, tol).map_err(nc_err)?;
        holds &= verdict == StateCheck::Accept;
        result["state_check"] = json_of(&verdict);
    }
    Ok(checked(verb, holds, || "the code fails an axiom".into(), result))
}

pub fn nc_gns(verb: &str, p: &Value, opts: &Options) -> Done {
    let tuple = exact_tuple(field(p, "tuple")?)?.to_float();
    let d = tuple.dim();
    let state = match (p.get("state"), p.get("vector")) {
        (Some(rho), None) => DensityState::new(cmatrix(rho, "state")?).map_err(cstar_err)?,
        (None, Some(v)) => {
            let v = cvector(v, "vector")?;
            let norm = v.norm();
            if norm == 0.0 {
                return Err(parse_err("vector must be nonzero"));
            }
            DensityState::vector(&v.unscale(norm)).map_err(cstar_err)?
        }
        (None, None) => DensityState::normalized_trace(d),
        _ => return Err(parse_err("give at most one of \"state\" and \"vector\"")),
    };
    let res = gns(&tuple, &state).map_err(cstar_err)?;
    let tol = tol_f64(opts, 1e-9)?;
    // re-measure on the generators and their products
    let mut probes: Vec<CMat> = tuple.entries().to_vec();
    for a in tuple.entries() {
        for b in tuple.entries() {
            probes.push(a * b);
        }
    }
    let xi = &res.cyclic_vector;
    let mut state_defect = 0.0f64;
    for a in &probes {
        let pa = res.represent(a);
        state_defect = state_defect.max(((xi.adjoint() * &pa * xi)[(0, 0)] - state.eval(a)).norm());
    }
    let result = json!({
        "rep_dim": res.rep_dim(),
        "rep": res.rep.entries().iter().map(cmatrix_json).collect::<Vec<_>>(),
        "cyclic_vector": xi.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        "state_defect": state_defect,
    });
    Ok(checked(verb, state_defect <= tol, || format!("state defect {state_defect:e} exceeds {tol:e}"), result))
}

// ------------------------------------------------------------ uhf / af

fn pair(p: &Value) -> Result<(cstar_desk::supernatural::ExpSeq, cstar_desk::supernatural::ExpSeq), Failure> {
    Ok((exp_seq(p, "f")?, exp_seq(p, "g")?))
}

fn leq_json(l: &LeqInfty) -> Value {
    match l {
        LeqInfty::Holds { m } => json!({ "holds": true, "m": m.to_string() }),
        LeqInfty::Fails { slope_gap, offset, start } => json!({
            "holds": false,
            "slope_gap": slope_gap,
            "offset": offset.to_string(),
            "start": start,
            "refutes_m_0_at": l.refutation(0),
        }),
    }
}

pub fn uhf_iso_verb(verb: &str, p: &Value) -> Done {
    let (f, g) = pair(p)?;
    Ok(ok(verb, json!({ "f": f.to_string(), "g": g.to_string(), "isomorphic": uhf_iso(&f, &g) })))
}

pub fn uhf_embed(verb: &str, p: &Value) -> Done {
    let (f, g) = pair(p)?;
    Ok(ok(verb, json!({ "f": f.to_string(), "g": g.to_string(), "embeds": pointwise_leq(&f, &g) })))
}

fn supernatural_json(s: &SupernaturalNumber) -> Value {
    json!({ "text": s.to_string(), "exponents": json_of(s) })
}

pub fn uhf_k0(verb: &str, p: &Value) -> Done {
    let mults = uint_list(field(p, "mults")?, "mults")?;
    if mults.is_empty() {
        return Err(parse_err("mults must be nonempty"));
    }
    let s = supernatural_of_multiplicities(&mults, opt_uint(p, "infinity_after")?).map_err(sn_err)?;
    let mut result = json!({ "supernatural": supernatural_json(&s) });
    if p.get("contains").is_some() {
        let q = rational(p, "contains")?;
        let num = i64::try_from(q.numer()).map_err(|_| parse_err("numerator too large"))?;
        let den = u64::try_from(q.denom()).map_err(|_| parse_err("denominator too large"))?;
        result["contains"] = json!({ "q": format_q(&q), "member": k0_contains(num, den, &s).map_err(sn_err)? });
    }
    Ok(ok(verb, result))
}

/// With `f`, `g` decides exactly. With raw prefixes it answers only whether
/// some `m ≤ max_m` works on the given terms.
pub fn af_biembed(verb: &str, p: &Value) -> Done {
    if p.get("f_prefix").is_some() {
        let f = uint_list(field(p, "f_prefix")?, "f_prefix")?;
        let g = uint_list(field(p, "g_prefix")?, "g_prefix")?;
        if f.len() != g.len() {
            return Err(parse_err("prefixes must have equal length"));
        }
        let max_m = uint(p, "max_m")?;
        let fg = bounded_leq_infty(&f, &g, max_m);
        let gf = bounded_leq_infty(&g, &f, max_m);
        return Ok(ok(
            verb,
            json!({
                "mode": "semi-decision on the given terms",
                "terms": f.len(),
                "max_m": max_m,
                "f_leq_g_m": fg,
                "g_leq_f_m": gf,
                "biembed_on_prefix": fg.is_some() && gf.is_some(),
            }),
        ));
    }
    let (f, g) = pair(p)?;
    Ok(ok(
        verb,
        json!({
            "f": f.to_string(),
            "g": g.to_string(),
            "biembed": cf_biembed(&f, &g),
            "f_leq_g": leq_json(&leq_infty(&f, &g)),
            "g_leq_f": leq_json(&leq_infty(&g, &f)),
        }),
    ))
}

// ------------------------------------------------------------- simplex

fn grid_step(v: &Value, i: usize) -> Result<GridMap, Failure> {
    let level = uint(v, "level")? as usize;
    let nums = uint_list(field(v, "numerators")?, "numerators")?;
    let perm = match v.get("perm") {
        Some(x) => uint_list(x, "perm")?.into_iter().map(|j| j as usize).collect(),
        None => (0..=level).collect(),
    };
    GridMap::new(level, nums, perm).map_err(|e| parse_err(format!("grid step {}: {e}", i + 1)))
}

fn representing_json(r: &RepresentingMatrix) -> Value {
    rows_json(r.columns())
}

pub fn simplex_convert(verb: &str, p: &Value, opts: &Options) -> Done {
    if let Some(steps) = p.get("grid_steps") {
        let steps: Vec<GridMap> = steps
            .as_array()
            .ok_or_else(|| parse_err("grid_steps must be an array"))?
            .iter()
            .enumerate()
            .map(|(i, v)| grid_step(v, i))
            .collect::<Result<_, _>>()?;
        let conv = lambda3_to_lambda2(&steps).map_err(choquet_err)?;
        let sys = lambda2_to_lambda(&conv.matrix, conv.matrix.depth()).map_err(choquet_err)?;
        return Ok(ok(
            verb,
            json!({ "columns": representing_json(&conv.matrix), "perms": conv.perms, "system": system_json(&sys) }),
        ));
    }
    if let Some(cols) = p.get("columns") {
        let r = RepresentingMatrix::new(rational_rows(cols, "columns")?).map_err(choquet_err)?;
        let t = opts.stages.map_or(Ok(r.depth()), |s| Ok::<_, Failure>(s.min(r.depth())))?;
        let sys = lambda2_to_lambda(&r, t).map_err(choquet_err)?;
        return Ok(ok(verb, json!({ "system": system_json(&sys) })));
    }
    if p.get("points").is_some() {
        let k = uint(p, "points")? as usize;
        let stages = opts.stages.unwrap_or(2);
        let sys = bauer_from_finite(&vec![(); k], stages).map_err(choquet_err)?;
        return Ok(ok(verb, json!({ "system": system_json(&sys) })));
    }
    Err(parse_err("payload needs \"grid_steps\", \"columns\" or \"points\""))
}

pub fn simplex_stage(verb: &str, p: &Value) -> Done {
    let sys = direct_system(field(p, "system")?)?;
    let n = uint(p, "n")? as usize;
    let (poly, dual) = finite_stage_simplex(&sys, n).map_err(choquet_err)?;
    let mut result = json!({ "stage": n, "dim": poly.ambient, "vertices": rows_json(&poly.vertices) });
    let mut csv = poly.to_exact_csv();
    let mut holds = true;
    if let Some(dual) = dual {
        let image = dual.image();
        holds = image.vertices.iter().all(|v| in_probability_simplex(v));
        let bary = dual.apply(&cstar_desk::choquet::Polytope::standard_simplex(sys.dims()[n]).barycenter());
        holds &= in_probability_simplex(&bary) && bary == image.barycenter();
        result["dual_image"] = rows_json(&image.vertices);
        result["dual_barycenter"] = rationals_json(&bary);
        csv.push('\n');
        csv.push_str(&image.to_exact_csv());
    }
    let mut r = checked(verb, holds, || "dual step leaves the stage simplex".into(), result);
    r.csv = Some(csv);
    Ok(r)
}

pub fn simplex_factor(verb: &str, p: &Value) -> Done {
    let map = order_unit_map(field(p, "map")?, "map")?;
    let fac = grid_factor(&map).map_err(choquet_err)?;
    let bound = two_pow_neg(map.cols());
    let steps: Vec<Value> = fac
        .steps
        .iter()
        .zip(&fac.step_entry_errors)
        .zip(&fac.step_norm_errors)
        .map(|((g, e), n)| {
            json!({
                "level": g.level(),
                "last_row": rationals_json(&g.last_row()),
                "entry_error": format_q(e),
                "norm_error": format_q(n),
            })
        })
        .collect();
    // each step must sit strictly inside its 4^-k cell
    let steps_ok = fac.step_entry_errors.iter().enumerate().all(|(i, e)| *e < two_pow_neg(2 * (map.cols() + i)));
    let holds = fac.error <= bound && steps_ok;
    let result = json!({
        "perm": fac.perm,
        "steps": steps,
        "error": format_q(&fac.error),
        "bound": format_q(&bound),
    });
    Ok(checked(verb, holds, || format!("error {} exceeds the bound {}", format_q(&fac.error), format_q(&bound)), result))
}

fn sampled(fs: &[PLFunc], n: usize) -> Sampled {
    fs.iter().map(|f| f.sample(n).iter().map(q_to_f64).collect()).collect()
}

pub fn simplex_ppu(verb: &str, p: &Value, opts: &Options) -> Done {
    let grid = opts.grid.unwrap_or(DEFAULT_FIT_GRID);
    let coarse = pl_list(p, "p")?;
    let finer = pl_list(p, "finer")?;
    let eps = q_to_f64(&rational(p, "eps")?);
    let tol = tol_f64(opts, 1e-12)?;
    let (ps, fs) = (sampled(&coarse, grid), sampled(&finer, grid));
    let refinement = ppu_refines(&ps, &fs, eps).map_err(choquet_err)?;
    let result = json!({
        "grid": grid,
        "p_is_ppu": ppu_check(&ps, tol).map_err(choquet_err)?,
        "finer_is_ppu": ppu_check(&fs, tol).map_err(choquet_err)?,
        "refines": refinement.refines,
        "residuals": refinement.residuals,
    });
    Ok(ok(verb, result))
}

// ------------------------------------------------------------------ ai

fn trace_csv(columns: &[(&str, &PLFunc)], n: usize) -> String {
    let mut out = String::from("x");
    for (name, _) in columns {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    let samples: Vec<Vec<Q>> = columns.iter().map(|(_, f)| f.sample(n)).collect();
    for (i, x) in grid_points(n).iter().enumerate() {
        let _ = write!(out, "{}", q_to_f64(x));
        for s in &samples {
            let _ = write!(out, ",{}", q_to_f64(&s[i]));
        }
        out.push('\n');
    }
    out
}

pub fn ai_sigma(verb: &str, p: &Value, opts: &Options) -> Done {
    let sys = direct_system(field(p, "system")?)?;
    let n = uint(p, "n")? as usize;
    let g = pl(p, "g")?;
    let sigma = varsigma(&sys, n).map_err(ai_err)?;
    let image = sigma.apply(&g);
    let residual = commuting_square_residual(&sys, n, &g).map_err(ai_err)?;
    let result = json!({
        "n": n,
        "image": image.to_string(),
        "square_residual": format_q(&residual),
    });
    let mut r = checked(verb, residual.is_zero(), || "the commuting square does not close".into(), result);
    r.csv = Some(trace_csv(&[("g", &g), ("sigma_g", &image)], opts.grid.unwrap_or(DEFAULT_GRID)));
    Ok(r)
}

pub fn ai_approx(verb: &str, p: &Value, opts: &Options) -> Done {
    let psi = affine_endo(field(p, "psi")?)?;
    let bounds = search_bounds(opts)?;
    let fs = match (p.get("f"), p.get("f_count")) {
        (Some(_), None) => pl_list(p, "f")?,
        (None, Some(_)) => DenseSeq::new(bounds.grid).prefix(uint(p, "f_count")?).map_err(ai_err)?,
        _ => return Err(parse_err("payload needs exactly one of \"f\" and \"f_count\"")),
    };
    let eps = rational(p, "eps")?;
    let n = opt_uint(p, "n")?.unwrap_or(1);
    let k = opt_uint(p, "k")?.unwrap_or(1);
    let big_n = opt_uint(p, "big_n")?.unwrap_or(1);
    let a = approx_standard(&psi, n, k, &eps, &fs, big_n, &bounds).map_err(ai_err)?;
    let result = json!({
        "m": a.m,
        "t": a.t,
        "residual": format_q(&a.residual),
        "eps": format_q(&eps),
        "nodes": a.nodes,
    });
    Ok(checked(verb, a.residual < eps, || "residual is not below ε".into(), result))
}

fn built(p: &Value, opts: &Options) -> Result<(AISystem, Vec<AffineEndo>, SearchBounds), Failure> {
    let sigmas = sigmas(p)?;
    let k = opts.stages.unwrap_or(3);
    if sigmas.len() < k {
        return Err(parse_err(format!("{k} stages need {k} maps, got {}", sigmas.len())));
    }
    let bounds = search_bounds(opts)?;
    let sys = build_system(&sigmas, &default_delta, k, &bounds).map_err(ai_err)?;
    Ok((sys, sigmas, bounds))
}

fn stage_rows(sys: &AISystem) -> Vec<Value> {
    sys.stages.iter().map(|s: &Stage| json_of(s)).collect()
}

pub fn ai_build(verb: &str, p: &Value, opts: &Options) -> Done {
    let (sys, _, _) = built(p, opts)?;
    let check = sys.check_invariants();
    let result = json!({
        "stages": sys.k(),
        "d": sys.stages.iter().map(|s| s.d).collect::<Vec<_>>(),
        "table": sys.to_table(),
    });
    let mut r = checked(verb, check.is_ok(), || check.clone().unwrap_err().to_string(), result);
    r.rows = stage_rows(&sys);
    Ok(r)
}

pub fn ai_k0(verb: &str, p: &Value, opts: &Options) -> Done {
    let mults = match p.get("bold_d") {
        Some(v) => uint_list(v, "bold_d")?,
        None => built(p, opts)?.0.stages.iter().map(|s| s.bold_d).collect(),
    };
    if mults.is_empty() {
        return Err(parse_err("bold_d must be nonempty"));
    }
    let s = supernatural_of_multiplicities(&mults, None).map_err(sn_err)?;
    let mut product = 1u128;
    let mut sixth = None;
    for (i, &m) in mults.iter().enumerate() {
        product = product.saturating_mul(m as u128);
        if sixth.is_none() && product % 6 == 0 {
            sixth = Some(i + 1);
        }
    }
    let dk: u128 = mults.iter().fold(1u128, |a, &m| a.saturating_mul(m as u128));
    let result = json!({
        "bold_d": mults,
        "supernatural": supernatural_json(&s),
        "d_last": dk.to_string(),
        "one_sixth_from_stage": sixth,
    });
    Ok(ok(verb, result))
}

pub fn ai_cert(verb: &str, p: &Value, opts: &Options) -> Done {
    let f = pl(p, "f")?;
    let t = rational(p, "t")?;
    let (sys, _, _) = built(p, opts)?;
    let max_stage = opt_uint(p, "max_stage")?.map_or(sys.k(), |m| m as usize);
    let cert = simplicity_cert(&sys, &f, &t, max_stage).map_err(ai_err)?;
    Ok(ok(verb, json_of(&cert)))
}

pub fn ai_tracecheck(verb: &str, p: &Value, opts: &Options) -> Done {
    let (sys, sigmas, bounds) = built(p, opts)?;
    let inputs = TraceInputs::from_system(&sys, &sigmas, bounds.grid).map_err(ai_err)?;
    let rep = trace_intertwining_check(&inputs, &default_delta, bounds.grid).map_err(ai_err)?;
    let failed: Vec<String> = [("a", rep.a), ("b", rep.b), ("c", rep.c), ("d", rep.d)]
        .iter()
        .filter_map(|(h, s)| s.map(|s| format!("({h}) at stage {s}")))
        .collect();
    Ok(checked(verb, rep.passed(), || format!("hypotheses fail: {}", failed.join(", ")), json_of(&rep)))
}

// ---------------------------------------------------------- intertwine

struct Instance {
    a: Tower,
    b: Tower,
    iota: MatrixHom,
    eta: MatrixHom,
}

/// The seeded `m2-in-m4` instance, or a custom pair of stationary towers.
fn instance(p: &Value, opts: &Options) -> Result<Instance, Failure> {
    let seed = opts.seed.unwrap_or(11);
    match p.get("instance").and_then(Value::as_str).unwrap_or("m2-in-m4") {
        "m2-in-m4" => {
            let count = opt_uint(p, "elements")?.unwrap_or(4) as usize;
            let inst = m2_in_m4(seed, count);
            Ok(Instance { a: inst.a, b: inst.b, iota: inst.iota, eta: inst.eta })
        }
        "custom" => {
            let n = uint(p, "dim")? as usize;
            let shape = |e: IntertwineError| parse_err(e.to_string());
            let a = Tower::stationary(n, cmatrices(field(p, "a_elements")?, "a_elements")?, UnitaryDict::with_seed(n, seed))
                .map_err(shape)?;
            let b = Tower::stationary(
                n,
                cmatrices(field(p, "b_elements")?, "b_elements")?,
                UnitaryDict::with_seed(n, seed.wrapping_add(1)),
            )
            .map_err(shape)?;
            let iota = match p.get("iota") {
                Some(u) => MatrixHom::inner(cmatrix(u, "iota")?).map_err(shape)?,
                None => MatrixHom::identity(n),
            };
            let eta = match p.get("eta") {
                Some(u) => MatrixHom::inner(cmatrix(u, "eta")?).map_err(shape)?,
                None => MatrixHom::identity(n),
            };
            Ok(Instance { a, b, iota, eta })
        }
        other => Err(parse_err(format!("unknown instance {other}"))),
    }
}

fn record_rows(rec: &IntertwineRecord) -> Vec<Value> {
    rec.stages.iter().map(json_of).collect()
}

/// Re-measures every recorded residual against its tolerance.
fn reverify(rec: &IntertwineRecord) -> Option<String> {
    for (i, st) in rec.stages.iter().enumerate().skip(1) {
        let (eta, iota_prev, iota) = (&rec.etas[i], &rec.iotas[i - 1], &rec.iotas[i]);
        let er = rec.f_sets[i].iter().map(|x| op_norm(&(eta.apply(&iota_prev.apply(x)) - x))).fold(0.0, f64::max);
        let ir = rec.g_sets[i].iter().map(|y| op_norm(&(iota.apply(&eta.apply(y)) - y))).fold(0.0, f64::max);
        if er >= st.eps || ir >= st.eps {
            return Some(format!("stage {}: residuals {er:e}, {ir:e} against ε = {:e}", st.k, st.eps));
        }
    }
    None
}

fn run(p: &Value, opts: &Options) -> Result<IntertwineRecord, Failure> {
    let mut inst = instance(p, opts)?;
    let cap = opts.stages.unwrap_or(8);
    run_intertwining(&mut inst.a, &mut inst.b, &inst.iota, &inst.eta, Tolerances::halving(), cap).map_err(|e| match e {
        IntertwineError::NoUnitaryFound { .. } | IntertwineError::Capped(_) => Failure::Exhausted(e.to_string()),
        e => parse_err(e.to_string()),
    })
}

pub fn intertwine_run(verb: &str, p: &Value, opts: &Options) -> Done {
    let rec = run(p, opts)?;
    let problem = reverify(&rec);
    let result = json!({
        "stages": rec.stages.len(),
        "stabilized": rec.stabilized,
        "table": rec.to_table(),
    });
    let mut r = checked(verb, problem.is_none(), || problem.clone().unwrap_or_default(), result);
    r.rows = record_rows(&rec);
    Ok(r)
}

pub fn intertwine_limit(verb: &str, p: &Value, opts: &Options) -> Done {
    let rec = run(p, opts)?;
    let b = cmatrix(field(p, "element")?, "element")?;
    let k = opt_uint(p, "stage")?.map_or(rec.stages.len(), |k| k as usize);
    match limit_map(&rec, &b, k) {
        Ok((image, bound)) => {
            let defect = (op_norm(&image) - op_norm(&b)).abs();
            let result = json!({
                "stage": k,
                "image": cmatrix_json(&image),
                "tail_bound": bound,
                "isometry_defect": defect,
            });
            Ok(checked(verb, defect <= bound, || format!("isometry defect {defect:e} exceeds {bound:e}"), result))
        }
        Err(IntertwineError::OutOfScope) => Ok(Report {
            message: Some(format!("element is outside the span of G_{k} and the unit")),
            ..report(verb, Status::Violation, json!({ "stage": k }))
        }),
        Err(e) => Err(parse_err(e.to_string())),
    }
}

/// Routes a verb to its implementation. Never panics on bad input.
pub fn dispatch(verb: &str, payload: &Value, opts: &Options) -> Report {
    let run = || -> Done {
        opts.validate()?;
        if !payload.is_object() {
            return Err(parse_err("payload must be an object"));
        }
        match verb {
            "nc eval" => nc_eval(verb, payload),
            "nc xicode" => nc_xicode(verb, payload, opts),
            "nc gns" => nc_gns(verb, payload, opts),
            "uhf iso" => uhf_iso_verb(verb, payload),
            "uhf embed" => uhf_embed(verb, payload),
            "uhf k0" => uhf_k0(verb, payload),
            "af biembed" => af_biembed(verb, payload),
            "simplex convert" => simplex_convert(verb, payload, opts),
            "simplex stage" => simplex_stage(verb, payload),
            "simplex factor" => simplex_factor(verb, payload),
            "simplex ppu" => simplex_ppu(verb, payload, opts),
            "ai sigma" => ai_sigma(verb, payload, opts),
            "ai approx" => ai_approx(verb, payload, opts),
            "ai build" => ai_build(verb, payload, opts),
            "ai k0" => ai_k0(verb, payload, opts),
            "ai cert" => ai_cert(verb, payload, opts),
            "ai tracecheck" => ai_tracecheck(verb, payload, opts),
            "intertwine run" => intertwine_run(verb, payload, opts),
            "intertwine limit" => intertwine_limit(verb, payload, opts),
            other => Err(parse_err(format!("unknown verb {other}"))),
        }
    };
    match run() {
        Ok(r) => r,
        Err(Failure::Parse(m)) => Report::failed(verb, Status::ParseError, m),
        Err(Failure::Exhausted(m)) => Report::failed(verb, Status::Exhausted, m),
    }
}
