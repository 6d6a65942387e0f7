//! Payload fields: rationals as strings (`"3/4"`, `"-2"`) or integers,
//! matrices as row-major arrays of `re+im i` strings.

use nalgebra::DVector;
use num_complex::Complex64;
use serde_json::{json, Value};

use cstar_desk::aialg::{AffineEndo, PLFunc};
use cstar_desk::choquet::{DirectSystem, OrderUnitMap};
use cstar_desk::exact::{format_q, parse_q, parse_qc, qc_to_c64, QMat, Q};
use cstar_desk::linalg::CMat;
use cstar_desk::ncpoly::{format_matrix, parse_matrix, ExactTuple};
use cstar_desk::supernatural::ExpSeq;

use crate::doc::{parse_err, Failure};

pub fn field<'a>(p: &'a Value, key: &str) -> Result<&'a Value, Failure> {
    p.get(key).ok_or_else(|| parse_err(format!("payload needs \"{key}\"")))
}

pub fn string(p: &Value, key: &str) -> Result<String, Failure> {
    field(p, key)?
        .as_str()
        .map(str::to_owned)
        .ok_or_else(|| parse_err(format!("\"{key}\" must be a string")))
}

pub fn uint(p: &Value, key: &str) -> Result<u64, Failure> {
    field(p, key)?
        .as_u64()
        .ok_or_else(|| parse_err(format!("\"{key}\" must be a nonnegative integer")))
}

pub fn opt_uint(p: &Value, key: &str) -> Result<Option<u64>, Failure> {
    p.get(key).map(|_| uint(p, key)).transpose()
}

pub fn uint_list(v: &Value, what: &str) -> Result<Vec<u64>, Failure> {
    v.as_array()
        .ok_or_else(|| parse_err(format!("{what} must be an array")))?
        .iter()
        .map(|x| x.as_u64().ok_or_else(|| parse_err(format!("{what} holds a non-integer"))))
        .collect()
}

pub fn rational_value(v: &Value) -> Result<Q, Failure> {
    match v {
        Value::String(s) => parse_q(s).map_err(|e| parse_err(e.to_string())),
        Value::Number(n) if n.is_i64() => Ok(Q::from_integer(n.as_i64().unwrap_or_default().into())),
        _ => Err(parse_err(format!("{v} is not an exact rational; write it as a string like \"3/4\""))),
    }
}

pub fn rational(p: &Value, key: &str) -> Result<Q, Failure> {
    rational_value(field(p, key)?)
}

pub fn rational_rows(v: &Value, what: &str) -> Result<Vec<Vec<Q>>, Failure> {
    v.as_array()
        .ok_or_else(|| parse_err(format!("{what} must be an array of rows")))?
        .iter()
        .map(|row| {
            row.as_array()
                .ok_or_else(|| parse_err(format!("{what}: each row must be an array")))?
                .iter()
                .map(rational_value)
                .collect()
        })
        .collect()
}

pub fn rationals_json(xs: &[Q]) -> Value {
    json!(xs.iter().map(format_q).collect::<Vec<_>>())
}

pub fn rows_json(rows: &[Vec<Q>]) -> Value {
    json!(rows.iter().map(|r| rationals_json(r)).collect::<Vec<_>>())
}

pub fn order_unit_map(v: &Value, what: &str) -> Result<OrderUnitMap, Failure> {
    OrderUnitMap::new(rational_rows(v, what)?).map_err(|e| parse_err(format!("{what}: {e}")))
}

/// `{"dims": [..], "maps": [rows, ..]}`.
pub fn direct_system(v: &Value) -> Result<DirectSystem, Failure> {
    let dims = uint_list(field(v, "dims")?, "dims")?.into_iter().map(|d| d as usize).collect();
    let maps = field(v, "maps")?
        .as_array()
        .ok_or_else(|| parse_err("maps must be an array"))?
        .iter()
        .enumerate()
        .map(|(i, m)| order_unit_map(m, &format!("map {}", i + 1)))
        .collect::<Result<_, _>>()?;
    DirectSystem::new(dims, maps).map_err(|e| parse_err(e.to_string()))
}

pub fn system_json(sys: &DirectSystem) -> Value {
    json!({
        "dims": sys.dims(),
        "maps": sys.maps().iter().map(|m| rows_json(m.entries())).collect::<Vec<_>>(),
    })
}

pub fn qmatrix(v: &Value, what: &str) -> Result<QMat, Failure> {
    let rows: Vec<Vec<String>> = v
        .as_array()
        .ok_or_else(|| parse_err(format!("{what} must be an array of rows")))?
        .iter()
        .map(|row| {
            row.as_array()
                .ok_or_else(|| parse_err(format!("{what}: each row must be an array")))?
                .iter()
                .map(|x| match x {
                    Value::String(s) => Ok(s.clone()),
                    Value::Number(n) => Ok(n.to_string()),
                    _ => Err(parse_err(format!("{what}: entries are strings like \"1/2+3i\""))),
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    parse_matrix(&rows).map_err(|e| parse_err(format!("{what}: {e}")))
}

pub fn cmatrix(v: &Value, what: &str) -> Result<CMat, Failure> {
    Ok(qmatrix(v, what)?.to_c64())
}

pub fn cmatrices(v: &Value, what: &str) -> Result<Vec<CMat>, Failure> {
    v.as_array()
        .ok_or_else(|| parse_err(format!("{what} must be an array of matrices")))?
        .iter()
        .enumerate()
        .map(|(i, m)| cmatrix(m, &format!("{what}[{i}]")))
        .collect()
}

pub fn cvector(v: &Value, what: &str) -> Result<DVector<Complex64>, Failure> {
    let entries = v
        .as_array()
        .ok_or_else(|| parse_err(format!("{what} must be an array")))?
        .iter()
        .map(|x| match x {
            Value::String(s) => parse_qc(s).map(|z| qc_to_c64(&z)).map_err(|e| parse_err(format!("{what}: {e}"))),
            Value::Number(n) => parse_qc(&n.to_string()).map(|z| qc_to_c64(&z)).map_err(|e| parse_err(format!("{what}: {e}"))),
            _ => Err(parse_err(format!("{what}: entries are strings like \"1/2+3i\""))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DVector::from_vec(entries))
}

pub fn qmatrix_json(m: &QMat) -> Value {
    json!(format_matrix(m))
}

/// Complex entries as `[re, im]` pairs of decimals.
pub fn cmatrix_json(m: &CMat) -> Value {
    json!((0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

/// `{"dim": d, "matrices": [..]}`.
pub fn exact_tuple(v: &Value) -> Result<ExactTuple, Failure> {
    let dim = uint(v, "dim")? as usize;
    let mats = field(v, "matrices")?
        .as_array()
        .ok_or_else(|| parse_err("matrices must be an array"))?
        .iter()
        .enumerate()
        .map(|(i, m)| qmatrix(m, &format!("matrices[{i}]")))
        .collect::<Result<_, _>>()?;
    ExactTuple::new(dim, mats).map_err(|e| parse_err(e.to_string()))
}

pub fn exp_seq(p: &Value, key: &str) -> Result<ExpSeq, Failure> {
    string(p, key)?.parse().map_err(|e| parse_err(format!("\"{key}\": {e}")))
}

pub fn pl_value(v: &Value, what: &str) -> Result<PLFunc, Failure> {
    v.as_str()
        .ok_or_else(|| parse_err(format!("{what} must be a string like \"0:0,1/2:1,1:0\"")))?
        .parse()
        .map_err(|e| parse_err(format!("{what}: {e}")))
}

pub fn pl(p: &Value, key: &str) -> Result<PLFunc, Failure> {
    pl_value(field(p, key)?, &format!("\"{key}\""))
}

pub fn pl_list(p: &Value, key: &str) -> Result<Vec<PLFunc>, Failure> {
    field(p, key)?
        .as_array()
        .ok_or_else(|| parse_err(format!("\"{key}\" must be an array")))?
        .iter()
        .enumerate()
        .map(|(i, v)| pl_value(v, &format!("{key}[{i}]")))
        .collect()
}

/// `{"kind": "identity"}`, `{"kind": "induced", "t": [..]}` or `{"kind": "varsigma", "map": rows}`.
pub fn affine_endo(v: &Value) -> Result<AffineEndo, Failure> {
    match string(v, "kind")?.as_str() {
        "identity" => Ok(AffineEndo::Identity),
        "induced" => AffineEndo::induced(uint_list(field(v, "t")?, "t")?).map_err(|e| parse_err(e.to_string())),
        "varsigma" => Ok(AffineEndo::Varsigma { psi: order_unit_map(field(v, "map")?, "map")? }),
        other => Err(parse_err(format!("unknown map kind {other}"))),
    }
}

/// The maps `ς_1, ς_2, …` from `"sigmas"` or from the steps of `"system"`.
pub fn sigmas(p: &Value) -> Result<Vec<AffineEndo>, Failure> {
    if let Some(list) = p.get("sigmas") {
        return list
            .as_array()
            .ok_or_else(|| parse_err("\"sigmas\" must be an array"))?
            .iter()
            .map(affine_endo)
            .collect();
    }
    if let Some(sys) = p.get("system") {
        return Ok(cstar_desk::aialg::sigma_sequence(&direct_system(sys)?));
    }
    Err(parse_err("payload needs \"sigmas\" or \"system\""))
}

#[cfg(test)]
mod tests {
    use super::*;
    use cstar_desk::exact::q;

    #[test]
    fn rationals_accept_strings_and_integers() {
        assert_eq!(rational_value(&json!("3/4")).unwrap(), q(3, 4));
        assert_eq!(rational_value(&json!(-2)).unwrap(), q(-2, 1));
        assert!(rational_value(&json!(0.5)).is_err());
    }

    #[test]
    fn systems_round_trip() {
        let v = json!({"dims": [1, 2], "maps": [[["1"], ["1"]]]});
        let sys = direct_system(&v).unwrap();
        assert_eq!(system_json(&sys), v);
    }
}
