//! Three browser entry points. Each takes text, returns a JSON string, and
//! never throws: failures come back as `{"error": ...}`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use cstar_desk::aialg::{grid_points, AffineEndo, PLFunc};
use cstar_desk::choquet::OrderUnitMap;
use cstar_desk::exact::{parse_q, q_to_f64};
use cstar_desk::finite_cstar::{f_scalar, proj_iter, PROJ_MAX_ITER};
use cstar_desk::linalg::{c, CMat};
use cstar_desk::supernatural::{leq_infty, ExpSeq, LeqInfty};

fn error(msg: impl ToString) -> String {
    json!({ "error": msg.to_string() }).to_string()
}

fn numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(|ch: char| ch == ',' || ch.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
        .collect()
}

/// Orbits of each eigenvalue under the scalar map, plus the verdict of the
/// matrix iteration on `diag(values)` with band margin `margin`.
#[wasm_bindgen]
pub fn projection_orbits(values: &str, margin: f64) -> String {
    let vals = match numbers(values) {
        Ok(v) if !v.is_empty() => v,
        Ok(_) => return error("enter at least one eigenvalue"),
        Err(e) => return error(e),
    };
    let orbits: Vec<Vec<f64>> = vals
        .iter()
        .map(|&v| std::iter::successors(Some(v), |&x| Some(f_scalar(x))).take(PROJ_MAX_ITER.min(24) + 1).collect())
        .collect();
    let n = vals.len();
    let a = CMat::from_fn(n, n, |i, j| if i == j { c(vals[i], 0.0) } else { c(0.0, 0.0) });
    let verdict = match proj_iter(&a, margin, PROJ_MAX_ITER) {
        Ok(p) => json!({
            "converged": true,
            "iterations": p.iterations,
            "limit": (0..n).map(|i| p.projection[(i, i)].re).collect::<Vec<_>>(),
        }),
        Err(e) => json!({ "converged": false, "reason": e.to_string() }),
    };
    json!({ "orbits": orbits, "verdict": verdict }).to_string()
}

/// Rows separated by `;`, entries by `,`, each a rational.
fn map_rows(text: &str) -> Result<OrderUnitMap, String> {
    let rows = text
        .split(';')
        .map(str::trim)
        .filter(|r| !r.is_empty())
        .map(|r| r.split(',').map(|x| parse_q(x.trim()).map_err(|e| e.to_string())).collect())
        .collect::<Result<Vec<Vec<_>>, _>>()?;
    OrderUnitMap::new(rows).map_err(|e| e.to_string())
}

/// Samples of `g` and of its image under the trace map of `psi` on `points` grid points.
#[wasm_bindgen]
pub fn trace_image(psi: &str, g: &str, points: usize) -> String {
    let psi = match map_rows(psi) {
        Ok(m) => m,
        Err(e) => return error(format!("map: {e}")),
    };
    let g: PLFunc = match g.parse() {
        Ok(f) => f,
        Err(e) => return error(format!("function: {e}")),
    };
    let image = AffineEndo::Varsigma { psi }.apply(&g);
    let n = points.clamp(2, 2049);
    let sample = |f: &PLFunc| f.sample(n).iter().map(q_to_f64).collect::<Vec<_>>();
    json!({
        "x": grid_points(n).iter().map(q_to_f64).collect::<Vec<_>>(),
        "g": sample(&g),
        "image": sample(&image),
        "image_text": image.to_string(),
    })
    .to_string()
}

/// Decides `f ≤∞ g` both ways and lists the first `terms` values of each sequence.
#[wasm_bindgen]
pub fn shift_relation(f: &str, g: &str, terms: u32) -> String {
    let parse = |s: &str| s.parse::<ExpSeq>().map_err(|e| e.to_string());
    let (f, g) = match (parse(f), parse(g)) {
        (Ok(f), Ok(g)) => (f, g),
        (Err(e), _) | (_, Err(e)) => return error(e),
    };
    let side = |a: &ExpSeq, b: &ExpSeq| -> Value {
        match leq_infty(a, b) {
            LeqInfty::Holds { m } => json!({ "holds": true, "m": m.to_string() }),
            fails => json!({ "holds": false, "breaks_shift_10_at": fails.refutation(10) }),
        }
    };
    let values = |s: &ExpSeq| s.values(terms.min(200) as usize).iter().map(|v| v.to_string()).collect::<Vec<_>>();
    json!({
        "f": values(&f),
        "g": values(&g),
        "f_leq_g": side(&f, &g),
        "g_leq_f": side(&g, &f),
    })
    .to_string()
}
