//! Random inputs shared by the property suites.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cstar_desk::exact::{q, qc, QMat, Q};
use cstar_desk::linalg::CMat;
use cstar_desk::ncpoly::ExactTuple;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn norm(a: &CMat) -> f64 {
    a.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

pub fn random_c(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    random_c(rng, n).qr().q()
}

pub fn with_spectrum(u: &CMat, vals: &[f64]) -> CMat {
    let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| Complex64::new(v, 0.0)),
    ));
    u * d * u.adjoint()
}

pub fn random_qmat(rng: &mut ChaCha8Rng, d: usize) -> QMat {
    let entry = |rng: &mut ChaCha8Rng| q(rng.gen_range(-6..=6), rng.gen_range(1..=4));
    let rows = (0..d)
        .map(|_| (0..d).map(|_| qc(entry(rng), entry(rng))).collect())
        .collect();
    QMat::from_rows(rows).unwrap()
}

pub fn random_exact_tuple(rng: &mut ChaCha8Rng, d: usize, len: usize) -> ExactTuple {
    ExactTuple::new(d, (0..len).map(|_| random_qmat(rng, d)).collect()).unwrap()
}

pub fn random_prob_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<Q> {
    loop {
        let w: Vec<i64> = (0..n).map(|_| if rng.gen_bool(0.3) { 0 } else { rng.gen_range(0..40) }).collect();
        let s: i64 = w.iter().sum();
        if s > 0 {
            return w.into_iter().map(|x| q(x, s)).collect();
        }
    }
}
