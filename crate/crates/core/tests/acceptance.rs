//! Acceptance run: every criterion is an exact rational identity checked on
//! the bundled corpus. Prints one line per criterion and exits non-zero if
//! any of them fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use fedpair_core::coeffs::{binomial, factorial, rat, MultiIndex, Poly, Rational};
use fedpair_core::corpus;
use fedpair_core::dpoly::{self, PolyDiffCochain, Slots};
use fedpair_core::fedosov::*;
use fedpair_core::forms::{ContractionData, Form, MixedForm, Orientation, PolyForm, Theta};
use fedpair_core::tpoly::{self, ClassOp, Gerstenhaber, TpolyKind};
use fedpair_core::uea::{sym_comul, PbwTable, Sym, Tensor2, UElem};
use itertools::Itertools;
use num_rational::BigRational;

mod common;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn sgn(odd: bool) -> Rational {
    if odd {
        rat(-1)
    } else {
        rat(1)
    }
}

fn structure_validation() -> Outcome {
    for cfg in corpus::all() {
        let rep = cfg.pair.validate();
        for name in ["antisymmetry", "a-closure", "jacobi", "anchor-morphism"] {
            ensure!(rep.get(name).is_some_and(|c| c.passed), "{} fails {name}", cfg.name());
        }
    }
    let c = corpus::broken_antisymmetry().validate();
    let c = c.first_failure().ok_or("mistyped bracket accepted")?;
    ensure!(c.name == "antisymmetry" && c.witness == Some(vec![2, 3, 1]), "wrong witness {:?}", c);
    let rep = corpus::open_subspace().validate();
    let c = rep.get("a-closure").ok_or("a-closure not checked")?;
    ensure!(!c.passed && c.witness == Some(vec![1, 2, 3]), "wrong witness {:?}", c);
    Ok("7 pairs valid, 2 violations caught with witnesses".into())
}

fn base_contraction() -> Outcome {
    let mut checked = 0;
    for cfg in corpus::all() {
        let ad = cfg.adapted().map_err(|e| e.to_string())?;
        let g = ad.alg(6);
        let big = g.basis(3, 4);
        let small = g.a_basis(3);
        for o in [Orientation::MinusDelta, Orientation::PlusDelta] {
            ContractionData::<()>::base(g, o)
                .verify(&big, &small, 4)
                .map_err(|e| format!("{} {o:?}: {e}", cfg.name()))?;
        }
        for x in &big {
            ensure!(g.delta(&g.delta(x)).is_zero() && g.h(&g.h(x)).is_zero(), "{}: δ² or h² on {}", cfg.name(), x.render());
        }
        checked += big.len();
    }
    Ok(format!("{checked} basis elements, both orientations"))
}

fn pbw() -> Outcome {
    let mut checked = 0;
    for cfg in corpus::all() {
        let ad = cfg.adapted().map_err(|e| e.to_string())?;
        let t = PbwTable::build(&ad, 4);
        let u = &t.uea;
        for j in MultiIndex::all_up_to(t.r(), 4) {
            let s = Sym::mono(j.clone(), Poly::one());
            let img = t.pbw_mono(&j);
            ensure!(t.pbw_inv(img).map_err(|e| e.to_string())? == s, "{}: pbw⁻¹∘pbw on {j:?}", cfg.name());
            let c = UElem::mono(u.b_monomial(&j), Poly::one());
            let back = t.pbw(&t.pbw_inv(&c).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            ensure!(back == c, "{}: pbw∘pbw⁻¹ on {j:?}", cfg.name());

            let mut rhs = Tensor2::new();
            for ((i, k), w) in sym_comul(&s) {
                for (e1, f1) in &t.pbw_mono(&i).terms {
                    for (e2, f2) in &t.pbw_mono(&k).terms {
                        let slot = rhs.entry((e1.clone(), e2.clone())).or_insert_with(Poly::zero);
                        *slot += &(&(&w * f1) * f2);
                    }
                }
            }
            rhs.retain(|_, v| !v.is_zero());
            ensure!(u.comul(img) == rhs, "{}: Δ∘pbw on {j:?}", cfg.name());

            let word: Vec<usize> = j.word().into_iter().map(|k| u.a + k).collect();
            let mut sym_img = UElem::zero();
            for perm in (0..word.len()).permutations(word.len()) {
                sym_img.add_assign(&u.word_product(&perm.iter().map(|&p| word[p]).collect::<Vec<_>>()));
            }
            let sym_img = u.coset(&sym_img).scale(&BigRational::new(1.into(), factorial(word.len() as u32)));
            ensure!(img.minus(&sym_img).degree().is_none_or(|d| d < j.abs()), "{}: leading term of {j:?}", cfg.name());
            checked += 1;
        }
    }
    Ok(format!("{checked} monomials, |J| ≤ 4"))
}

fn fedosov_certificate() -> Outcome {
    let n = 4;
    let mut checked = 0;
    for cfg in corpus::all() {
        let res = fedosov_iterate(&cfg.adapted().map_err(|e| e.to_string())?, n).map_err(|e| format!("{}: {e}", cfg.name()))?;
        let g = res.alg;
        let mut probe: Vec<MixedForm> = (0..g.d).map(|l| g.scalar(Poly::var(l))).collect();
        probe.extend(g.basis(g.n as u32, n));
        for x in &probe {
            let qq = res.q.apply(&g, &res.q.apply(&g, x));
            ensure!(qq.upto(n).is_zero(), "{}: Q² on {}", cfg.name(), x.render());
        }
        checked += probe.len();
        if cfg.name() == "sl2-borel" {
            ensure!(!res.parts[2].is_zero(), "sl2-borel: X₂ vanished");
        }
    }
    Ok(format!("{checked} basis elements, Ŝ-degree ≤ {n}"))
}

fn fedosov_field_against_pbw() -> Outcome {
    for cfg in corpus::all() {
        let ad = cfg.adapted().map_err(|e| e.to_string())?;
        let res = fedosov_iterate(&ad, 4).map_err(|e| e.to_string())?;
        let table = PbwTable::build(&ad, res.alg.t + 1);
        ew_check_with(&res, &table).map_err(|e| format!("{}: {e}", cfg.name()))?;
        let xi = table.xi(&res.alg).map_err(|e| e.to_string())?;
        for k in 2..=4 {
            let pick = |f: &PolyForm| f.filter(|key| key.chi.abs() == k);
            ensure!(pick(&res.x) == pick(&xi.neg()), "{}: degree {k}", cfg.name());
        }
        let (h_zero, low) = xi_properties(&ad, &table, 4).map_err(|e| e.to_string())?;
        ensure!(h_zero && low.is_none_or(|d| d >= 2), "{}: h̃Ξ = 0 or degree bound", cfg.name());
    }
    let ad = corpus::sl2_matched_torsioned().adapted().map_err(|e| e.to_string())?;
    let (h_zero, low) = xi_properties(&ad, &PbwTable::build(&ad, 5), 4).map_err(|e| e.to_string())?;
    ensure!(h_zero && low == Some(1), "torsioned control: h̃Ξ = 0 {h_zero}, lowest degree {low:?}");
    Ok("X = −Ξ in degrees 2..4 on 7 pairs; torsioned control has degree-1 part".into())
}

fn perturbed_contractions() -> Outcome {
    for cfg in corpus::all() {
        let ad = cfg.adapted().map_err(|e| e.to_string())?;
        let res = fedosov_iterate(&ad, 4).map_err(|e| e.to_string())?;
        perturbed_tau_functions(&res).map_err(|e| format!("{} functions: {e}", cfg.name()))?;
        for kind in [TpolyKind::Polyvector(-1), TpolyKind::Polyvector(0), TpolyKind::Polyvector(1), TpolyKind::Tensor(1, 1)] {
            tpoly::contract_tpoly(&res, kind).map_err(|e| format!("{} {kind:?}: {e}", cfg.name()))?;
        }
        let table = PbwTable::build(&ad, 5);
        tpoly::lightning_bott_check(&ad, &table, &ad.alg(4)).map_err(|e| format!("{}: {e}", cfg.name()))?;
        dpoly::lightning_bott_dpoly(&table, &ad.alg(3), 3).map_err(|e| format!("{}: {e}", cfg.name()))?;

        let filt = 2;
        let res = fedosov_iterate_with_margin(&ad, 3, filt + 2).map_err(|e| e.to_string())?;
        let table = Arc::new(PbwTable::build(&ad, filt + 1));
        dpoly::contract_dpoly(&res, table, filt, 2).map_err(|e| format!("{} D_poly: {e}", cfg.name()))?;
    }
    Ok("functions, polyvectors k ≤ 1, (1,1)-tensors, D_poly arities ≤ 2".into())
}

fn matched_pair() -> Outcome {
    let ad = corpus::sl2_matched().adapted().map_err(|e| e.to_string())?;
    let res = fedosov_iterate(&ad, 3).map_err(|e| e.to_string())?;
    let table = PbwTable::build(&ad, res.alg.t + 1);
    let triple = matched_tau_triple(&res, &table, 3).map_err(|e| e.to_string())?;
    matched_split(&res).map_err(|e| e.to_string())?;
    let res4 = fedosov_iterate(&ad, 4).map_err(|e| e.to_string())?;
    let g = Gerstenhaber::new(&res4).map_err(|e| e.to_string())?;
    let ids = tpoly::matched_tpoly_identities(&res4, &g).map_err(|e| e.to_string())?;
    let (_, rep) = dpoly::matched_uea(&ad, Arc::new(PbwTable::build(&ad, 3)), 2).map_err(|e| e.to_string())?;
    ensure!(rep.compared > 0, "matched algebra compared nothing");
    Ok(format!(
        "three-way τ̆ on {} forms, {} bracket / {} product / {} action identities, {} complex elements",
        triple.checked, ids.brackets, ids.products, ids.actions, rep.compared
    ))
}

fn schouten_basis(g: &fedpair_core::forms::Alg) -> Vec<PolyForm> {
    let mut out = Vec::new();
    for j in MultiIndex::all_up_to(g.r, 3) {
        for m in 0..1u32 << g.r {
            out.push(Form::term(0, j.clone(), Theta(m), Poly::one()));
        }
    }
    out
}

fn gerstenhaber_axioms() -> Outcome {
    let g = fedpair_core::forms::Alg { n: 2, a: 0, r: 2, d: 0, t: 12 };
    let basis = schouten_basis(&g);
    let par = |f: &PolyForm| f.is_homogeneous_parity().unwrap() as usize;
    for f in &basis {
        for gg in &basis {
            let (pf, pg) = (par(f), par(gg));
            let s = sgn((pf + 1) * (pg + 1) % 2 == 1);
            let fg = tpoly::schouten(&g, f, gg);
            ensure!(fg == tpoly::schouten(&g, gg, f).scale(&-s.clone()), "antisymmetry {f:?} {gg:?}");
            for h in &basis {
                let lhs = tpoly::schouten(&g, f, &tpoly::schouten(&g, gg, h));
                let mut rhs = tpoly::schouten(&g, &fg, h);
                rhs.add_scaled(&tpoly::schouten(&g, gg, &tpoly::schouten(&g, f, h)), &s);
                ensure!(lhs == rhs, "Jacobi {f:?} {gg:?} {h:?}");
                let lhs = tpoly::schouten(&g, f, &g.mul(gg, h));
                let mut rhs = g.mul(&fg, h);
                rhs.add_scaled(&g.mul(gg, &tpoly::schouten(&g, f, h)), &sgn((pf + 1) * pg % 2 == 1));
                ensure!(lhs == rhs, "Leibniz {f:?} {gg:?} {h:?}");
            }
        }
    }

    let g = fedpair_core::forms::Alg { n: 2, a: 0, r: 2, d: 0, t: 8 };
    let m = dpoly::unit_m(&g);
    ensure!(dpoly::gerstenhaber_bracket(&g, &m, &m).is_zero(), "⟦m, m⟧ ≠ 0");
    let deg = |x: &PolyDiffCochain| {
        let k = x.terms.keys().next().unwrap();
        k.lam.count_ones() as i64 + k.val.0.len() as i64 - 1
    };
    for v in -1..=2 {
        for x in dpoly::vertical_basis(&g, 2, 1, v, 2) {
            let want = dpoly::hochschild_d(&x).scale(&sgn(deg(&x) % 2 == 1));
            ensure!(dpoly::gerstenhaber_bracket(&g, &m, &x) == want, "⟦m, −⟧ ≠ ±d_H on {}", x.render());
        }
    }
    let c = |lam: u32, chi: &[u32], slots: &[&[u32]], k: i64| -> PolyDiffCochain {
        Form::term(lam, MultiIndex::from_slice(chi), Slots(slots.iter().map(|s| MultiIndex::from_slice(s)).collect()), Poly::int(k))
    };
    let samples = [
        c(0, &[1, 0], &[&[0, 1]], 1).plus(&c(0, &[0, 2], &[&[1, 0]], -2)),
        c(0b01, &[0, 1], &[&[1, 0]], 3),
        c(0, &[1, 1], &[&[1, 0], &[0, 1]], 1),
        c(0, &[2, 0], &[&[1, 0], &[1, 0]], 1).plus(&c(0b10, &[0, 0], &[&[1, 1]], 1)),
        c(0, &[1, 0], &[&[1, 0], &[0, 0], &[0, 1]], 2),
    ];
    let br = |x: &PolyDiffCochain, y: &PolyDiffCochain| dpoly::gerstenhaber_bracket(&g, x, y);
    let mut triples = 0;
    for x in &samples {
        for y in &samples {
            let s = sgn(deg(x) * deg(y) % 2 == 1);
            ensure!(br(x, y) == br(y, x).scale(&-s.clone()), "⟦−,−⟧ antisymmetry on {} {}", x.render(), y.render());
            for z in samples.iter().take(3) {
                let lhs = br(x, &br(y, z));
                let rhs = br(&br(x, y), z).plus(&br(y, &br(x, z)).scale(&s));
                ensure!(lhs == rhs, "⟦−,−⟧ Jacobi on {} {} {}", x.render(), y.render(), z.render());
                triples += 1;
            }
        }
    }

    let ad = corpus::sl2_borel().adapted().map_err(|e| e.to_string())?;
    let res = fedosov_iterate(&ad, 4).map_err(|e| e.to_string())?;
    let gs = Gerstenhaber::new(&res).map_err(|e| e.to_string())?;
    let a = gs.alg;
    let one = a.one().attach(&Theta(0));
    let hv = a.lam(0).attach(&Theta(0));
    let ev = a.lam(1).attach(&Theta(0));
    let shift = gs.d_small(&ev);
    let shift0 = gs.d_small(&one.scale(&rat(5)));
    for op in [ClassOp::Wedge, ClassOp::Bracket] {
        for (x, y) in [(&one, &hv), (&hv, &hv), (&hv, &one)] {
            let base = gs.product(op, x, y).map_err(|e| e.to_string())?;
            let moved = gs.product(op, &x.plus(&shift), &y.plus(&shift0)).map_err(|e| e.to_string())?;
            ensure!(gs.same_class(&base, &moved).map_err(|e| e.to_string())?, "{op:?} depends on representatives");
        }
    }
    Ok(format!("Schouten on {} basis elements, {triples} ⟦−,−⟧ triples, Borel classes", basis.len()))
}

fn cohomology() -> Outcome {
    let mut pairs = 0;
    for cfg in corpus::all() {
        let ad = cfg.adapted().map_err(|e| e.to_string())?;
        if ad.d() != 0 {
            continue;
        }
        let rep = tpoly::cohomology_tpoly(&ad, 8, 0);
        ensure!(rep.blocks == common::oracle_blocks(&ad), "{}: engine {:?}", cfg.name(), rep.blocks);
        pairs += 1;
    }
    let ad = corpus::sl2_borel().adapted().map_err(|e| e.to_string())?;
    let rep = tpoly::cohomology_tpoly(&ad, 8, 0);
    let col = |q: i32| -> Vec<usize> { (0..=2).map(|p| rep.blocks[&(p, q)]).collect() };
    ensure!(col(-1) == vec![1, 1, 0] && col(0) == vec![0, 0, 0], "Borel columns {:?} {:?}", col(-1), col(0));

    let ad = corpus::heisenberg().adapted().map_err(|e| e.to_string())?;
    let rep = dpoly::cohomology_dpoly(&ad, Arc::new(PbwTable::build(&ad, 4)), 4, 2).map_err(|e| e.to_string())?;
    ensure!(rep.stabilized, "Heisenberg D_poly not stable: {:?}", rep.family);
    ensure!(rep.family.iter().map(|f| f.0).collect::<Vec<_>>() == vec![3, 4], "filtrations {:?}", rep.family);
    Ok(format!("{pairs} point-base pairs match the oracle; D_poly Betti {:?} at F = 3, 4", rep.betti))
}

fn classical_limit() -> Outcome {
    let ad = corpus::tangent_line().adapted().map_err(|e| e.to_string())?;
    let n = 5;
    let res = fedosov_iterate(&ad, n).map_err(|e| e.to_string())?;
    let g = res.alg;
    ensure!(res.is_flat(), "X ≠ 0");
    for x in g.basis(1, n - 1) {
        let want = res.d_nabla.apply(&g, &x).minus(&g.delta(&x));
        ensure!(res.q.apply(&g, &x) == want, "Q ≠ −δ + d∇ on {}", x.render());
    }
    let fc = perturbed_tau_functions(&res).map_err(|e| e.to_string())?;
    ensure!((fc.data.small_d)(&g.one()).is_zero(), "small differential is not zero on R");
    // Q-closed lifts are Taylor series f(x + χ)
    for p in 0..=4u32 {
        let f = g.scalar(Poly::parse(&format!("x1^{p}")).unwrap());
        let mut want = MixedForm::zero();
        for k in 0..=p {
            let c = Poly::parse(&format!("x1^{}", p - k)).unwrap();
            want.add_assign(&g.mono(0, MultiIndex::from_slice(&[k])).scale_poly(&c).scale(&BigRational::from_integer(binomial(p, k))));
        }
        ensure!((fc.data.tau)(&f).eq_upto(&want, n), "τ̆(x^{p}) is not the Taylor series");
    }
    Ok("X = 0, Q = −δ + d∇, τ̆(f) = f(x + χ)".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("structure validation", structure_validation),
        ("base contraction", base_contraction),
        ("PBW coalgebra isomorphism", pbw),
        ("Fedosov certificate", fedosov_certificate),
        ("Fedosov field against the PBW field", fedosov_field_against_pbw),
        ("perturbed contractions", perturbed_contractions),
        ("matched pair", matched_pair),
        ("Gerstenhaber axioms", gerstenhaber_axioms),
        ("cohomology oracles", cohomology),
        ("classical limit", classical_limit),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} ({secs:.1}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why} ({secs:.1}s)", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
