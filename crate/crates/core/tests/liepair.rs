use fedpair_core::coeffs::Poly;
use fedpair_core::corpus;
use fedpair_core::forms::{Form, PolyForm, Theta};
use fedpair_core::liepair::*;
use proptest::prelude::*;

#[test]
fn corpus_validates() {
    for cfg in corpus::all().into_iter().chain([corpus::sl2_matched_torsioned()]) {
        let rep = cfg.pair.validate();
        assert!(rep.passed(), "{}: {:?}", cfg.name(), rep.first_failure());
        for name in ["antisymmetry", "a-closure", "jacobi", "anchor-morphism"] {
            assert!(rep.get(name).is_some_and(|c| c.passed), "{} {name}", cfg.name());
        }
    }
}

#[test]
fn violations_name_their_witness() {
    let rep = corpus::broken_antisymmetry().validate();
    let c = rep.first_failure().unwrap();
    assert_eq!(c.name, "antisymmetry");
    // c(f, e) and c(e, f) both carry +h; indices are 1-based
    assert_eq!(c.witness, Some(vec![2, 3, 1]));

    let rep = corpus::open_subspace().validate();
    let c = rep.get("a-closure").unwrap();
    assert!(!c.passed);
    assert_eq!(c.witness, Some(vec![1, 2, 3]));
    assert!(rep.get("antisymmetry").unwrap().passed);
}

#[test]
fn ce_differentials_square_to_zero() {
    for cfg in corpus::all() {
        let ad = cfg.adapted().unwrap();
        let alg = ad.alg(0);
        for f in alg.basis(3, 0) {
            let f: PolyForm = f.attach(&Theta(0));
            for which in [CeAlgebroid::L, CeAlgebroid::A] {
                let once = ce_differential(&ad, &alg, which, CeModule::Trivial, &f).unwrap();
                let twice = ce_differential(&ad, &alg, which, CeModule::Trivial, &once).unwrap();
                assert!(twice.is_zero(), "{} {which:?} on {}", cfg.name(), f.render());
            }
        }
        // the Bott representation of A on Λ B
        for f in alg.a_basis(2) {
            for q in 0..1u32 << alg.r {
                let x: PolyForm = alg.lmul(&f, &Form::term(0, alg.chi0(), Theta(q), Poly::one()));
                let once = ce_differential(&ad, &alg, CeAlgebroid::A, CeModule::Bott, &x).unwrap();
                let twice = ce_differential(&ad, &alg, CeAlgebroid::A, CeModule::Bott, &once).unwrap();
                assert!(twice.is_zero(), "{} Bott", cfg.name());
            }
        }
    }
}

#[test]
fn forbidden_bidegree_vanishes() {
    for cfg in corpus::all() {
        let ad = cfg.adapted().unwrap();
        let alg = ad.alg(0);
        for f in lambda_basis(&alg, 3) {
            bidegree_check(&ad, &f).unwrap_or_else(|e| panic!("{}: {e}", cfg.name()));
        }
    }
}

#[test]
fn curvature_shape() {
    for cfg in corpus::all() {
        let p = &cfg.pair;
        let r = p.curvature(&cfg.conn);
        let n = p.n();
        for i in 0..n {
            for j in 0..n {
                for k in 0..p.r {
                    for m in 0..p.r {
                        assert_eq!(r[i][j][k][m], -r[j][i][k][m].clone(), "{}", cfg.name());
                        if i < p.a && j < p.a {
                            assert!(r[i][j][k][m].is_zero(), "{}: Bott curvature", cfg.name());
                        }
                    }
                }
            }
        }
    }
}

fn arb_gamma_b(r: usize) -> impl Strategy<Value = Vec<Vec<Vec<i64>>>> {
    prop::collection::vec(prop::collection::vec(prop::collection::vec(-2i64..=2, r), r), r)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn torsion_correction_keeps_a_directions(g in arb_gamma_b(2)) {
        let cfg = corpus::sl2_matched();
        let p = &cfg.pair;
        let gb: Vec<Vec<Vec<Poly>>> =
            g.iter().map(|x| x.iter().map(|y| y.iter().map(|&c| Poly::int(c)).collect()).collect()).collect();
        let conn = LConnection::bott_extension(p, &cfg.splitting, &gb);
        let t = torsion_and_correct(p, &cfg.splitting, &conn).unwrap();
        let b = beta(p, &cfg.splitting, &t.corrected);
        prop_assert!(b.iter().flatten().flatten().all(Poly::is_zero));
        let ad = Adapted::new(p, &cfg.splitting, &t.corrected).unwrap();
        prop_assert!(ad.is_torsion_free());
        for i in 0..p.a {
            prop_assert_eq!(&t.corrected.gamma[i], &conn.gamma[i]);
        }
    }

    #[test]
    fn bracket_axioms_on_sections(
        xs in prop::collection::vec(prop::collection::vec((-2i64..=2, 0u32..3), 2), 3),
        f in (-2i64..=2, 0u32..3),
    ) {
        // T ℝ² foliation pair: polynomial anchor, so Leibniz has content
        let p = corpus::foliation_plane().pair;
        let sec = |v: &Vec<(i64, u32)>| -> Vec<Poly> {
            v.iter().map(|&(c, e)| Poly::parse(&format!("{c}*x1^{e} + x2")).unwrap()).collect()
        };
        let (x, y, z) = (sec(&xs[0]), sec(&xs[1]), sec(&xs[2]));
        let fp = Poly::parse(&format!("{}*x2^{} + x1", f.0, f.1)).unwrap();
        let add = |a: &Vec<Poly>, b: &Vec<Poly>| -> Vec<Poly> { a.iter().zip(b).map(|(u, v)| u + v).collect() };
        let jac = add(&add(&p.bracket(&x, &p.bracket(&y, &z)), &p.bracket(&y, &p.bracket(&z, &x))), &p.bracket(&z, &p.bracket(&x, &y)));
        prop_assert!(jac.iter().all(Poly::is_zero));
        let anti = add(&p.bracket(&x, &y), &p.bracket(&y, &x));
        prop_assert!(anti.iter().all(Poly::is_zero));
        let fy: Vec<Poly> = y.iter().map(|c| &fp * c).collect();
        let lhs = p.bracket(&x, &fy);
        let xf = p.anchor(&x).apply(&fp).unwrap();
        let rhs: Vec<Poly> = p.bracket(&x, &y).iter().zip(&y).map(|(b, c)| &(&fp * b) + &(&xf * c)).collect();
        prop_assert_eq!(lhs, rhs);
        prop_assert_eq!(p.anchor(&p.bracket(&x, &y)), p.anchor(&x).bracket(&p.anchor(&y)));
    }
}

#[test]
fn matched_flags() {
    let matched: Vec<String> = corpus::all()
        .iter()
        .filter(|c| c.adapted().unwrap().matched)
        .map(|c| c.name().to_owned())
        .collect();
    assert!(matched.iter().any(|n| n == "sl2-matched"));
    // [x, y] = z leaves B
    assert!(!matched.iter().any(|n| n == "heisenberg"));
}
