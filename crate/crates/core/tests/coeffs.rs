use std::collections::BTreeSet;

use fedpair_core::coeffs::*;
use itertools::Itertools;
use num_bigint::BigInt;
use proptest::prelude::*;

fn arb_poly(vars: usize, max_deg: u32) -> impl Strategy<Value = Poly> {
    prop::collection::vec((prop::collection::vec(0..=max_deg, vars), -4i64..=4, 1i64..=3), 0..5).prop_map(
        move |terms| {
            let mut p = Poly::zero();
            for (e, n, d) in terms {
                if e.iter().sum::<u32>() <= max_deg {
                    p.add_term(Mono::from_exps(&e), frac(n, d));
                }
            }
            p
        },
    )
}

proptest! {
    #[test]
    fn ring_axioms(a in arb_poly(3, 3), b in arb_poly(3, 3), c in arb_poly(3, 3)) {
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert!((&a - &a).is_zero());
        prop_assert_eq!(&a * &Poly::one(), a.clone());
    }

    #[test]
    fn display_parses_back(a in arb_poly(3, 4)) {
        prop_assert_eq!(Poly::parse(&a.to_string()).unwrap(), a);
    }

    #[test]
    fn derivations_obey_leibniz(
        f in arb_poly(2, 4), g in arb_poly(2, 4), v0 in arb_poly(2, 2), v1 in arb_poly(2, 2),
    ) {
        let v = BaseDerivation(vec![v0, v1]);
        let lhs = apply_derivation(&v, &(&f * &g)).unwrap();
        let rhs = &(&apply_derivation(&v, &f).unwrap() * &g) + &(&f * &apply_derivation(&v, &g).unwrap());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn wedge_sign_is_sorting_parity(a in 0u32..64, b in 0u32..64) {
        let bits = |m: u32| (0..6).filter(|i| m >> i & 1 == 1).collect::<Vec<usize>>();
        match wedge_sign(a, b) {
            None => prop_assert!(a & b != 0),
            Some(s) => {
                let mut w = bits(a);
                w.extend(bits(b));
                prop_assert_eq!(s, sort_sign(&w));
            }
        }
    }
}

#[test]
fn pairing_is_the_permutation_sum() {
    for r in 1..=3 {
        for i in MultiIndex::all_up_to(r, 4) {
            for j in MultiIndex::all_up_to(r, 4) {
                let wi = i.word();
                let wj = j.word();
                let brute = if wi.len() != wj.len() {
                    0
                } else {
                    (0..wi.len())
                        .permutations(wi.len())
                        .filter(|s| (0..wi.len()).all(|k| wi[k] == wj[s[k]]))
                        .count()
                };
                assert_eq!(duality_pairing(&i, &j).unwrap(), rat(brute as i64), "{i:?} {j:?}");
            }
        }
    }
}

#[test]
fn shuffles_decompose_the_symmetric_group() {
    for n in 0..=5usize {
        for p in 0..=n {
            let q = n - p;
            let mut seen = BTreeSet::new();
            for sh in shuffles(p, q) {
                assert_eq!(sh.sign, sort_sign(&sh.perm));
                assert!(sh.perm[..p].windows(2).all(|w| w[0] < w[1]));
                assert!(sh.perm[p..].windows(2).all(|w| w[0] < w[1]));
                for alpha in (0..p).permutations(p) {
                    for beta in (0..q).permutations(q) {
                        let block: Vec<usize> = alpha.iter().copied().chain(beta.iter().map(|b| b + p)).collect();
                        let composed: Vec<usize> = block.iter().map(|&k| sh.perm[k]).collect();
                        assert_eq!(sort_sign(&composed), sh.sign * sort_sign(&block));
                        assert!(seen.insert(composed), "duplicate in ({p},{q})");
                    }
                }
            }
            let all: usize = (1..=n).product();
            assert_eq!(seen.len(), all, "({p},{q}) misses permutations");
        }
    }
}

#[test]
fn factorials_do_not_overflow() {
    let f30: BigInt = "265252859812191058636308480000000".parse().unwrap();
    assert_eq!(factorial(30), f30);
    assert_eq!(MultiIndex::from_slice(&[21, 1]).factorial(), factorial(21));
    assert_eq!(binomial(40, 20), "137846528820".parse::<BigInt>().unwrap());
}

#[test]
fn canonical_form_on_construction() {
    let mut p = Poly::zero();
    p.add_term(Mono::from_exps(&[1, 0]), rat(2));
    p.add_term(Mono::from_exps(&[1, 0]), rat(-2));
    assert!(p.is_zero());
    assert_eq!(p.len(), 0);
    assert_eq!(Poly::parse("x2*x1 + x1*x2").unwrap(), Poly::parse("2*x1*x2").unwrap());
}
