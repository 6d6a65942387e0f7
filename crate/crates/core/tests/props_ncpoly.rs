mod common;

use proptest::prelude::*;
use rand::Rng;

use common::{random_c, random_exact_tuple, rng};
use cstar_desk::ncpoly::{
    check_state, check_xi, enum_poly, index_of, xi_code, Family, MatrixTuple, StateCheck, StateCode,
};
use num_bigint::BigUint;
use num_complex::Complex64;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enumeration_round_trips(j in 0u64..20_000) {
        let p = enum_poly(j, Family::NoConstant);
        prop_assert_eq!(index_of(&p).unwrap(), BigUint::from(j));
    }

    #[test]
    fn evaluation_is_additive_exactly(seed in any::<u64>(), i in 0u64..3000, j in 0u64..3000, d in 1usize..=3) {
        let mut r = rng(seed);
        let gamma = random_exact_tuple(&mut r, d, 2);
        let (p, q) = (enum_poly(i, Family::NoConstant), enum_poly(j, Family::NoConstant));
        let sum = gamma.eval_padded(&p.add(&q));
        prop_assert_eq!(sum, gamma.eval_padded(&p).add(&gamma.eval_padded(&q)));
    }

    #[test]
    fn xi_codes_satisfy_the_axioms(seed in any::<u64>(), d in 1usize..=4, len in 1usize..=3) {
        let mut r = rng(seed);
        let gamma = random_exact_tuple(&mut r, d, len).to_float();
        let code = xi_code(&gamma, 60);
        prop_assert!(code.values.iter().all(|&v| v >= 0.0));
        prop_assert_eq!(check_xi(&code, 1e-9), None);
    }

    #[test]
    fn vector_states_are_accepted(seed in any::<u64>(), d in 1usize..=3) {
        let mut r = rng(seed);
        let gamma = MatrixTuple::new(d, vec![random_c(&mut r, d), random_c(&mut r, d)]).unwrap();
        let mut v = nalgebra::DVector::from_fn(d, |_, _| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)));
        v /= Complex64::new(v.norm(), 0.0);
        let len = 60;
        let phi = StateCode {
            values: (0..len as u64)
                .map(|j| (v.adjoint() * gamma.eval_padded(&enum_poly(j, Family::NoConstant)) * &v)[(0, 0)])
                .collect(),
        };
        prop_assert_eq!(check_state(&xi_code(&gamma, len), &phi, 1e-9).unwrap(), StateCheck::Accept);
    }
}
