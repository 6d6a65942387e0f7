use num_bigint::BigInt;
use proptest::prelude::*;

use cstar_desk::supernatural::{
    cf_biembed, cf_embeds, factor, k0_contains, leq_infty, pointwise_leq, supernatural_of_multiplicities,
    uhf_iso, Exponent, ExpSeq, LeqInfty,
};

fn exp_seq() -> impl Strategy<Value = ExpSeq> {
    (prop::collection::vec(0u64..60, 0..10), 0u64..4, 0u64..30)
        .prop_map(|(prefix, slope, intercept)| ExpSeq::new(prefix, slope, intercept))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn leq_infty_is_a_preorder(f in exp_seq(), g in exp_seq(), h in exp_seq()) {
        prop_assert!(cf_embeds(&f, &f));
        if cf_embeds(&f, &g) && cf_embeds(&g, &h) {
            prop_assert!(cf_embeds(&f, &h));
        }
    }

    #[test]
    fn pointwise_order_needs_no_shift(f in exp_seq(), g in exp_seq()) {
        if pointwise_leq(&f, &g) {
            prop_assert_eq!(leq_infty(&f, &g), LeqInfty::Holds { m: BigInt::from(0) });
        }
    }

    #[test]
    fn embedding_is_monotone(f in exp_seq(), f2 in exp_seq(), g in exp_seq()) {
        if pointwise_leq(&f, &f2) && cf_embeds(&f2, &g) {
            prop_assert!(cf_embeds(&f, &g));
        }
    }

    #[test]
    fn isomorphism_refines_biembedding(f in exp_seq(), g in exp_seq()) {
        let g = if g.slope % 2 == 0 { f.clone() } else { g };
        if uhf_iso(&f, &g) {
            prop_assert!(cf_biembed(&f, &g));
            prop_assert!(pointwise_leq(&f, &g) && pointwise_leq(&g, &f));
        }
    }

    #[test]
    fn least_shift_is_a_witness(f in exp_seq(), g in exp_seq()) {
        if let LeqInfty::Holds { m } = leq_infty(&f, &g) {
            let vals_f = f.values(120);
            let vals_g = g.values(120);
            prop_assert!(vals_f.iter().zip(&vals_g).all(|(a, b)| *a <= b + &m));
            if m > BigInt::from(0) {
                let smaller = &m - 1;
                prop_assert!(vals_f.iter().zip(&vals_g).any(|(a, b)| *a > b + &smaller));
            }
        }
    }

    #[test]
    fn codec_round_trips(f in exp_seq()) {
        let text = f.to_string();
        let back: ExpSeq = text.parse().unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn k0_membership_is_divisibility(mults in prop::collection::vec(1u64..40, 1..6), num in -50i64..50, den in 1u64..400) {
        let s = supernatural_of_multiplicities(&mults, None).unwrap();
        let product: u128 = mults.iter().map(|&m| m as u128).product();
        let g = num_integer::gcd(num.unsigned_abs(), den);
        let reduced = den / g.max(1);
        prop_assert_eq!(k0_contains(num, den, &s).unwrap(), product % reduced as u128 == 0);
        for (p, e) in factor(product as u64) {
            prop_assert_eq!(s.exponent(p), Exponent::Finite(e as u64));
        }
    }
}
