//! Polydifferential cochains on both sides of the PBW identification.
//!
//! A vertical cochain of arity `v` is `Σ ω ⊗ ∂^{J_0} ⊗ ⋯ ⊗ ∂^{J_v}`, acting
//! on `v + 1` functions by `ω · ∂^{J_0}a_0 ⋯ ∂^{J_v}a_v`; arity `-1` is a
//! plain function. Small-side cochains replace `∂^J` by basis cosets of
//! `𝒰(L)/𝒰(L)Γ(A)`. Both coproducts are the shuffle coproduct on
//! exponents, so one Hochschild differential serves both.
//!
//! Total differentials carry `(-1)^p d_H` with `p` the form degree.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rayon::prelude::*;
use thiserror::Error;

use crate::coeffs::{big, rat, MultiIndex, Poly, Rational};
use crate::fedosov::{matched_lie_derivative, FedosovError, FedosovResult};
use crate::forms::{
    hpl_perturb, op, vvf_deriv, vvf_from_components, Alg, ContractionData, ContractionError, Deriv, Form, Key,
    MixedForm, Op, Orientation, Value,
};
use crate::liepair::{Adapted, CeAlgebroid};
use crate::linalg;
use crate::tpoly::{dchi, BettiReport};
use crate::uea::{coproduct_splits, PbwTable, Sym, UElem, Uea, UeaError};

#[derive(Debug, Error, Clone)]
pub enum DpolyError {
    #[error("slot degree {degree} exceeds the filtration budget {budget}")]
    Filtration { degree: u32, budget: u32 },
    #[error("{0}")]
    Unsupported(String),
    #[error("{0}")]
    Check(String),
    #[error(transparent)]
    Pbw(#[from] UeaError),
    #[error(transparent)]
    Fedosov(#[from] FedosovError),
    #[error(transparent)]
    Contraction(#[from] ContractionError),
}

/// Values made of ordered slots of exponent vectors.
pub trait SlotValue: Value {
    fn slots(&self) -> &[MultiIndex];
    fn from_slots(v: Vec<MultiIndex>) -> Self;

    fn total(&self) -> u32 {
        self.slots().iter().map(MultiIndex::abs).sum()
    }
}

/// `∂^{J_0} ⊗ ⋯ ⊗ ∂^{J_v}` in `S B^{⊗(v+1)}`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Slots(pub Vec<MultiIndex>);

/// Basis cosets `x^{β_0} ⊗ ⋯ ⊗ x^{β_v}`, each `β` a `B`-exponent vector.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Cosets(pub Vec<MultiIndex>);

macro_rules! slot_value {
    ($t:ident, $tag:literal) => {
        impl Value for $t {
            fn parity(&self) -> u32 {
                0
            }
        }

        impl SlotValue for $t {
            fn slots(&self) -> &[MultiIndex] {
                &self.0
            }
            fn from_slots(v: Vec<MultiIndex>) -> Self {
                $t(v)
            }
        }

        impl fmt::Debug for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, $tag)?;
                for (i, s) in self.0.iter().enumerate() {
                    if i > 0 {
                        write!(f, "⊗")?;
                    }
                    write!(f, "{:?}", s)?;
                }
                Ok(())
            }
        }
    };
}

slot_value!(Slots, "D");
slot_value!(Cosets, "U");

pub type PolyDiffCochain = Form<Slots>;
pub type SmallDCochain = Form<Cosets>;

/// Arity `v` (number of slots minus one) when homogeneous.
pub fn arity<V: SlotValue>(x: &Form<V>) -> Option<i32> {
    let mut it = x.terms.keys().map(|k| k.val.slots().len() as i32 - 1);
    let first = it.next()?;
    it.all(|a| a == first).then_some(first)
}

/// A single cochain `1 ⊗ ∂^{J_0} ⊗ ⋯` with unit coefficient.
pub fn cochain<V: SlotValue>(alg: &Alg, slots: &[MultiIndex]) -> Form<V> {
    Form::term(0, alg.chi0(), V::from_slots(slots.to_vec()), Poly::one())
}

fn sign(odd: bool) -> Rational {
    if odd {
        rat(-1)
    } else {
        rat(1)
    }
}

/// `d_H(u_1⊗⋯⊗u_k) = 1⊗u + Σ_i (-1)^i u_1⊗⋯⊗Δu_i⊗⋯ + (-1)^{k+1} u⊗1`, zero on functions.
pub fn hochschild_d<V: SlotValue>(x: &Form<V>) -> Form<V> {
    let mut out = Form::zero();
    for (key, c) in &x.terms {
        let s = key.val.slots();
        let k = s.len();
        if k == 0 {
            continue;
        }
        let r = s[0].len();
        let unit = MultiIndex::zero(r);
        let mut push = |slots: Vec<MultiIndex>, coef: Poly| {
            out.add_term(
                Key {
                    lam: key.lam,
                    chi: key.chi.clone(),
                    val: V::from_slots(slots),
                },
                coef,
            );
        };
        let mut first = vec![unit.clone()];
        first.extend(s.iter().cloned());
        push(first, c.clone());
        for i in 0..k {
            let sg = sign(i % 2 == 0);
            for (pieces, m) in coproduct_splits(&s[i], 2) {
                let mut v = s[..i].to_vec();
                v.extend(pieces);
                v.extend(s[i + 1..].iter().cloned());
                push(v, c.scale(&(big(m) * &sg)));
            }
        }
        let mut last = s.to_vec();
        last.push(unit);
        push(last, c.scale(&sign(k % 2 == 0)));
    }
    out
}

/// `(-1)^p d_H`, `p` the form degree.
pub fn signed_hochschild<V: SlotValue>(x: &Form<V>) -> Form<V> {
    let mut out = Form::zero();
    for parity in [0, 1] {
        let part = x.filter(|k| k.lam.count_ones() % 2 == parity);
        let d = hochschild_d(&part);
        if parity == 1 {
            out.sub_assign(&d);
        } else {
            out.add_assign(&d);
        }
    }
    out
}

/// `∂^J f` on the `χ`-variables.
pub fn dmulti<V: Value>(j: &MultiIndex, f: &Form<V>) -> Form<V> {
    let mut cur = f.clone();
    for (k, &e) in j.0.iter().enumerate() {
        for _ in 0..e {
            if cur.is_zero() {
                return cur;
            }
            cur = dchi(k, &cur);
        }
    }
    cur
}

fn scalar_of<V: Value>(key: &Key<V>, c: &Poly) -> MixedForm {
    Form::term(key.lam, key.chi.clone(), (), c.clone())
}

/// `x(a_0, …, a_v) = Σ ω · ∂^{J_0}a_0 ⋯ ∂^{J_v}a_v`.
pub fn eval(alg: &Alg, x: &PolyDiffCochain, args: &[MixedForm]) -> MixedForm {
    let mut out = MixedForm::zero();
    for (key, c) in &x.terms {
        assert_eq!(key.val.0.len(), args.len(), "arity mismatch in evaluation");
        let mut acc = scalar_of(key, c);
        for (j, a) in key.val.0.iter().zip(args) {
            if acc.is_zero() {
                break;
            }
            acc = alg.mul(&acc, &dmulti(j, a));
        }
        out.add_assign(&acc);
    }
    out
}

/// Recovers a cochain with `slots` slots from its values on monomial
/// tuples of total degree ≤ `total`, by triangular elimination.
pub fn extract(alg: &Alg, slots: usize, total: u32, f: &dyn Fn(&[MixedForm]) -> MixedForm) -> PolyDiffCochain {
    if slots == 0 {
        return f(&[]).attach(&Slots(Vec::new()));
    }
    let r = alg.r;
    let mut found: Vec<(Vec<MultiIndex>, MixedForm)> = Vec::new();
    for flat in MultiIndex::all_up_to(slots * r, total) {
        let tuple: Vec<MultiIndex> = (0..slots)
            .map(|s| MultiIndex::from_slice(&flat.0[s * r..(s + 1) * r]))
            .collect();
        let args: Vec<MixedForm> = tuple.iter().map(|i| alg.mono(0, i.clone())).collect();
        let mut val = f(&args);
        for (js, c) in &found {
            let mut w = BigInt::one();
            let mut rest = MultiIndex::zero(r);
            let mut ok = true;
            for (i, j) in tuple.iter().zip(js) {
                match i.checked_sub(j) {
                    Some(d) => {
                        w *= i.factorial() / d.factorial();
                        rest = rest.add(&d);
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                val.add_scaled(&alg.mul(c, &alg.mono(0, rest)), &-big(w));
            }
        }
        if val.is_zero() {
            continue;
        }
        let denom: BigInt = tuple.iter().map(MultiIndex::factorial).product();
        let c = val.scale(&BigRational::new(BigInt::one(), denom));
        found.push((tuple, c));
    }
    let mut out = PolyDiffCochain::zero();
    for (tuple, c) in found {
        out.add_assign(&c.attach(&Slots(tuple)));
    }
    out
}

fn max_total<V: SlotValue>(x: &Form<V>) -> u32 {
    x.terms.keys().map(|k| k.val.total()).max().unwrap_or(0)
}

fn max_chi<V: SlotValue>(x: &Form<V>) -> u32 {
    x.terms.keys().map(|k| k.chi.abs()).max().unwrap_or(0)
}

fn max_slots<V: SlotValue>(x: &Form<V>) -> usize {
    x.terms.keys().map(|k| k.val.slots().len()).max().unwrap_or(0)
}

fn by_parity<V: Value>(x: &Form<V>) -> [Form<V>; 2] {
    [
        x.filter(|k| k.lam.count_ones() % 2 == 0),
        x.filter(|k| k.lam.count_ones() % 2 == 1),
    ]
}

fn by_arity(x: &PolyDiffCochain) -> Vec<(usize, PolyDiffCochain)> {
    let mut out = Vec::new();
    for s in 0..=max_slots(x) {
        let part = x.filter(|k| k.val.0.len() == s);
        if !part.is_zero() {
            out.push((s, part));
        }
    }
    out
}

/// Gerstenhaber composition
/// `φ⋆ψ (a) = Σ_k (-1)^{kv} φ(a_0, …, ψ(a_k, …, a_{k+v}), …)`, computed by
/// evaluation, with the Koszul sign `(-1)^{|η| u}` for a form coefficient
/// `η` of `ψ` moving past `φ` of arity `u`.
pub fn star(alg: &Alg, phi: &PolyDiffCochain, psi: &PolyDiffCochain) -> PolyDiffCochain {
    let mut out = PolyDiffCochain::zero();
    for (sp, ph) in by_arity(phi) {
        if sp == 0 {
            continue;
        }
        let u = sp as i64 - 1;
        for (sq, ps_all) in by_arity(psi) {
            let v = sq as i64 - 1;
            for (eta_par, ps) in by_parity(&ps_all).into_iter().enumerate() {
                if ps.is_zero() {
                    continue;
                }
                let slots = sp + sq - 1;
                let total = max_total(&ph) + max_total(&ps);
                // inner values are differentiated again, so nothing may be cut early
                let alg = &Alg {
                    t: alg.t.max(total + max_chi(&ph) + max_chi(&ps)),
                    ..*alg
                };
                let f = |args: &[MixedForm]| -> MixedForm {
                    let mut acc = MixedForm::zero();
                    for k in 0..sp {
                        let inner = eval(alg, &ps, &args[k..k + sq]);
                        let mut outer: Vec<MixedForm> = args[..k].to_vec();
                        outer.push(inner);
                        outer.extend(args[k + sq..].iter().cloned());
                        let val = eval(alg, &ph, &outer);
                        acc.add_scaled(&val, &sign((k as i64 * v).rem_euclid(2) == 1));
                    }
                    acc
                };
                let piece = extract(alg, slots, total, &f);
                out.add_scaled(&piece, &sign(eta_par as i64 * u % 2 == 1));
            }
        }
    }
    alg.truncate(&out)
}

/// The same composition through `Δ^v` on the inserted slot and slotwise
/// products; needs `ψ` with `χ`-free coefficients.
pub fn star_slotwise(alg: &Alg, phi: &PolyDiffCochain, psi: &PolyDiffCochain) -> Result<PolyDiffCochain, DpolyError> {
    if psi.terms.keys().any(|k| !k.chi.is_zero()) {
        return Err(DpolyError::Unsupported("slotwise composition needs χ-free coefficients in ψ".into()));
    }
    let mut out = PolyDiffCochain::zero();
    for (k1, c1) in &phi.terms {
        let sp = k1.val.0.len();
        if sp == 0 {
            continue;
        }
        let u = sp as i64 - 1;
        for (k2, c2) in &psi.terms {
            let sq = k2.val.0.len();
            let v = sq as i64 - 1;
            let koszul = (k2.lam.count_ones() as i64 * u) % 2 == 1;
            let coef = alg.mul(&scalar_of(k1, c1), &scalar_of(k2, c2));
            if coef.is_zero() {
                continue;
            }
            for k in 0..sp {
                let s = ((k as i64 * v).rem_euclid(2) == 1) ^ koszul;
                for (pieces, m) in coproduct_splits(&k1.val.0[k], sq) {
                    let mut slots = k1.val.0[..k].to_vec();
                    slots.extend(pieces.iter().zip(&k2.val.0).map(|(a, b)| a.add(b)));
                    slots.extend(k1.val.0[k + 1..].iter().cloned());
                    out.add_scaled(&coef.attach(&Slots(slots)), &(big(m) * sign(s)));
                }
            }
        }
    }
    Ok(out)
}

fn degree_parity(x: &PolyDiffCochain) -> Vec<(bool, PolyDiffCochain)> {
    let mut out = Vec::new();
    for (s, part) in by_arity(x) {
        for (p, piece) in by_parity(&part).into_iter().enumerate() {
            if !piece.is_zero() {
                out.push((((s as i64 - 1) + p as i64).rem_euclid(2) == 1, piece));
            }
        }
    }
    out
}

/// `⟦φ, ψ⟧ = φ⋆ψ - (-1)^{|φ||ψ|} ψ⋆φ`, degrees counting form degree plus arity.
pub fn gerstenhaber_bracket(alg: &Alg, phi: &PolyDiffCochain, psi: &PolyDiffCochain) -> PolyDiffCochain {
    let mut out = PolyDiffCochain::zero();
    for (dp, p) in degree_parity(phi) {
        for (dq, q) in degree_parity(psi) {
            out.add_assign(&star(alg, &p, &q));
            out.add_scaled(&star(alg, &q, &p), &-sign(dp && dq));
        }
    }
    out
}

/// `(ω ⊗ u) ∪ (η ⊗ w) = (-1)^{|η| (v_u + 1)} ωη ⊗ u ⊗ w`.
pub fn cup(alg: &Alg, phi: &PolyDiffCochain, psi: &PolyDiffCochain) -> PolyDiffCochain {
    let mut out = PolyDiffCochain::zero();
    for (k1, c1) in &phi.terms {
        for (k2, c2) in &psi.terms {
            let coef = alg.mul(&scalar_of(k1, c1), &scalar_of(k2, c2));
            if coef.is_zero() {
                continue;
            }
            let s = (k2.lam.count_ones() as usize * k1.val.0.len()) % 2 == 1;
            let mut slots = k1.val.0.clone();
            slots.extend(k2.val.0.iter().cloned());
            out.add_scaled(&coef.attach(&Slots(slots)), &sign(s));
        }
    }
    out
}

/// The multiplication `m = 1 ⊗ 1`.
pub fn unit_m(alg: &Alg) -> PolyDiffCochain {
    cochain(alg, &[alg.chi0(), alg.chi0()])
}

/// `[D, ∂^J] = -Σ_m Σ_{0<I≤J} binom(J,I) ∂^I(Dχ_m) ∂^{J-I+e_m}`.
fn commutator_with_monomial(d: &Deriv, j: &MultiIndex) -> Vec<(MixedForm, MultiIndex)> {
    let mut out = Vec::new();
    for i in j.sub_indices() {
        if i.is_zero() {
            continue;
        }
        let b = big(j.binomial(&i));
        let rest = j.checked_sub(&i).unwrap();
        for (m, dm) in d.chi.iter().enumerate() {
            let c = dmulti(&i, dm);
            if c.is_zero() {
                continue;
            }
            out.push((c.scale(&-b.clone()), rest.inc(m)));
        }
    }
    out
}

/// `⟦D, x⟧` for a derivation `D` of the function algebra, slot by slot:
/// `D(ω) ⊗ u + (-1)^{|D||ω|} Σ_i ω · [D, u_i]`.
pub fn deriv_bracket(alg: &Alg, d: &Deriv, x: &PolyDiffCochain) -> PolyDiffCochain {
    let mut out = PolyDiffCochain::zero();
    let mut groups: std::collections::BTreeMap<Slots, MixedForm> = std::collections::BTreeMap::new();
    for (k, c) in &x.terms {
        groups.entry(k.val.clone()).or_default().add_assign(&scalar_of(k, c));
    }
    for (slots, omega) in groups {
        out.add_assign(&d.apply(alg, &omega).attach(&slots));
        for (par, om) in by_parity(&omega).into_iter().enumerate() {
            if om.is_zero() {
                continue;
            }
            let s = sign(d.odd && par == 1);
            for (i, j) in slots.0.iter().enumerate() {
                for (c, new) in commutator_with_monomial(d, j) {
                    let mut v = slots.0.clone();
                    v[i] = new;
                    out.add_scaled(&alg.mul(&om, &c).attach(&Slots(v)), &s);
                }
            }
        }
    }
    alg.truncate(&out)
}

/// `⟦D, x⟧(a) = D(x(a)) - (-1)^{|D||x|} Σ_i x(…, D a_i, …)`, recovered
/// from values on monomials.
pub fn deriv_bracket_eval(alg: &Alg, d: &Deriv, x: &PolyDiffCochain) -> PolyDiffCochain {
    let mut out = PolyDiffCochain::zero();
    for (s, part) in by_arity(x) {
        for (par, piece) in by_parity(&part).into_iter().enumerate() {
            if piece.is_zero() {
                continue;
            }
            let sg = -sign(d.odd && par == 1);
            let f = |args: &[MixedForm]| -> MixedForm {
                let mut acc = d.apply(alg, &eval(alg, &piece, args));
                for i in 0..args.len() {
                    let mut a = args.to_vec();
                    a[i] = d.apply(alg, &args[i]);
                    acc.add_scaled(&eval(alg, &piece, &a), &sg);
                }
                acc
            };
            out.add_assign(&extract(alg, s, max_total(&piece), &f));
        }
    }
    out
}

/// `⟦Q, x⟧ + (-1)^p d_H x`.
pub fn total_differential(res: &FedosovResult, x: &PolyDiffCochain) -> PolyDiffCochain {
    deriv_bracket(&res.alg, &res.q, x).plus(&signed_hochschild(x))
}

/// `pbw^{⊗}`: slots of `S B` to slots of cosets; coefficients move to the front.
pub fn pbw_tensor(table: &PbwTable, x: &PolyDiffCochain) -> Result<SmallDCochain, DpolyError> {
    let r = table.r();
    let mut out = SmallDCochain::zero();
    for (k, c) in &x.terms {
        let mut acc: Vec<(Vec<MultiIndex>, Poly)> = vec![(Vec::new(), c.clone())];
        for j in &k.val.0 {
            let img = table.pbw(&Sym::mono(j.clone(), Poly::one()))?;
            let mut next = Vec::new();
            for (slots, f) in &acc {
                for (e, g) in &img.terms {
                    let mut s = slots.clone();
                    s.push(UElem::beta_of(e, r));
                    next.push((s, f * g));
                }
            }
            acc = next;
        }
        for (slots, f) in acc {
            out.add_term(
                Key {
                    lam: k.lam,
                    chi: k.chi.clone(),
                    val: Cosets(slots),
                },
                f,
            );
        }
    }
    Ok(out)
}

/// `(pbw⁻¹)^{⊗}`.
pub fn pbw_inv_tensor(table: &PbwTable, y: &SmallDCochain) -> Result<PolyDiffCochain, DpolyError> {
    let mut out = PolyDiffCochain::zero();
    for (k, c) in &y.terms {
        let mut acc: Vec<(Vec<MultiIndex>, Poly)> = vec![(Vec::new(), c.clone())];
        for beta in &k.val.0 {
            let e = table.uea.b_monomial(beta);
            let img = table.pbw_inv(&UElem::mono(e, Poly::one()))?;
            let mut next = Vec::new();
            for (slots, f) in &acc {
                for (j, g) in &img.terms {
                    let mut s = slots.clone();
                    s.push(j.clone());
                    next.push((s, f * g));
                }
            }
            acc = next;
        }
        for (slots, f) in acc {
            out.add_term(
                Key {
                    lam: k.lam,
                    chi: k.chi.clone(),
                    val: Slots(slots),
                },
                f,
            );
        }
    }
    Ok(out)
}

/// `A`-action on one basis coset, `coset(ê_i · x^β)`.
fn act_on_coset(uea: &Uea, i: usize, beta: &MultiIndex) -> Vec<(MultiIndex, Poly)> {
    let e = uea.b_monomial(beta);
    uea.act_gen_coset(i, &UElem::mono(e, Poly::one()))
        .terms
        .into_iter()
        .map(|(e, c)| (UElem::beta_of(&e, uea.r), c))
        .collect()
}

/// `d_A^𝒰` on `Λ A∨ ⊗ D_poly`: `d_A` on forms and the `A`-action on
/// each slot (`Δ` of `ê_i` is primitive).
pub struct SmallSide {
    pub alg: Alg,
    pub table: Arc<PbwTable>,
    ce: Deriv,
}

impl SmallSide {
    pub fn new(ad: &Adapted, alg: &Alg, table: Arc<PbwTable>) -> Self {
        let mut ce = ad.ce_deriv(alg, CeAlgebroid::A);
        ce.theta.clear();
        SmallSide { alg: *alg, table, ce }
    }

    fn on_cosets(&self, v: &Cosets) -> SmallDCochain {
        let uea = &self.table.uea;
        let mut out = SmallDCochain::zero();
        for i in 0..self.alg.a {
            for (t, beta) in v.0.iter().enumerate() {
                for (b2, c) in act_on_coset(uea, i, beta) {
                    let mut s = v.0.clone();
                    s[t] = b2;
                    out.add_assign(&Form::term(1 << i, self.alg.chi0(), Cosets(s), c));
                }
            }
        }
        out
    }

    pub fn d_a_u(&self, y: &SmallDCochain) -> SmallDCochain {
        self.ce.apply_with(&self.alg, y, &|v| self.on_cosets(v))
    }

    pub fn total(&self, y: &SmallDCochain) -> SmallDCochain {
        self.d_a_u(y).plus(&signed_hochschild(y))
    }

    /// `Λ^p A∨ ⊗ D_poly^v` basis with total coset degree ≤ `filt`.
    pub fn basis(&self, p: u32, v: i32, filt: u32) -> Vec<SmallDCochain> {
        let r = self.alg.r;
        let slots = (v + 1) as usize;
        let tuples: Vec<Vec<MultiIndex>> = if slots == 0 {
            vec![Vec::new()]
        } else {
            MultiIndex::all_up_to(slots * r, filt)
                .into_iter()
                .map(|flat| {
                    (0..slots)
                        .map(|s| MultiIndex::from_slice(&flat.0[s * r..(s + 1) * r]))
                        .collect()
                })
                .collect()
        };
        let mut out = Vec::new();
        for lam in self.alg.a_masks(p).into_iter().filter(|l| l.count_ones() == p) {
            for t in &tuples {
                out.push(Form::term(lam, self.alg.chi0(), Cosets(t.clone()), Poly::one()));
            }
        }
        out
    }
}

/// Vertical basis `λ^I χ^J ⊗ ∂^{J_0} ⊗ ⋯` with `|I| ≤ lam_max`,
/// `|J| ≤ chi_max`, arity `v` and total slot degree ≤ `filt`.
pub fn vertical_basis(alg: &Alg, lam_max: u32, chi_max: u32, v: i32, filt: u32) -> Vec<PolyDiffCochain> {
    let r = alg.r;
    let slots = (v + 1) as usize;
    let tuples: Vec<Vec<MultiIndex>> = if slots == 0 {
        vec![Vec::new()]
    } else {
        MultiIndex::all_up_to(slots * r, filt)
            .into_iter()
            .map(|flat| {
                (0..slots)
                    .map(|s| MultiIndex::from_slice(&flat.0[s * r..(s + 1) * r]))
                    .collect()
            })
            .collect()
    };
    let mut out = Vec::new();
    for f in alg.basis(lam_max, chi_max) {
        for t in &tuples {
            out.push(f.attach(&Slots(t.clone())));
        }
    }
    out
}

/// The perturbed contraction of `(ΛL∨ ⊗ D_vert, ⟦Q,-⟧ + (-1)^p d_H)` onto
/// `(ΛA∨ ⊗ D_poly, d_A^𝒰 + (-1)^p d_H)`, the latter reached through `pbw^{⊗}`.
pub struct DpolyContraction {
    pub base: ContractionData<Slots>,
    pub data: ContractionData<Slots>,
    pub rho: Op<Slots>,
    pub small: SmallSide,
    pub n: u32,
}

impl DpolyContraction {
    pub fn new(res: &FedosovResult, table: Arc<PbwTable>) -> Result<Self, DpolyError> {
        let alg = res.alg;
        let mut base = ContractionData::<Slots>::base(alg, Orientation::MinusDelta);
        base.big_d = op(move |x: &PolyDiffCochain| alg.delta(x).neg().plus(&signed_hochschild(x)));
        base.small_d = op(|x: &PolyDiffCochain| signed_hochschild(x));
        let rho_d = res.rho();
        let rho: Op<Slots> = op(move |x: &PolyDiffCochain| deriv_bracket(&alg, &rho_d, x));
        let probe = vertical_basis(&alg, alg.n as u32, 2, 0, 2);
        let data = hpl_perturb(&base, rho.clone(), &probe)?;
        Ok(DpolyContraction {
            base,
            data,
            rho,
            small: SmallSide::new(&res.ad, &alg, table),
            n: res.n,
        })
    }

    pub fn sigma_small(&self, x: &PolyDiffCochain) -> Result<SmallDCochain, DpolyError> {
        pbw_tensor(&self.small.table, &(self.data.sigma)(x))
    }

    pub fn tau_small(&self, y: &SmallDCochain) -> Result<PolyDiffCochain, DpolyError> {
        Ok((self.data.tau)(&pbw_inv_tensor(&self.small.table, y)?))
    }

    /// `σ̃ ⟦ϱ,-⟧ τ̆` on the small side, in cosets.
    pub fn theta_small(&self, y: &SmallDCochain) -> Result<SmallDCochain, DpolyError> {
        let x = pbw_inv_tensor(&self.small.table, y)?;
        let t = (self.data.small_d)(&x).minus(&(self.base.small_d)(&x));
        pbw_tensor(&self.small.table, &t)
    }

    /// `σ̃ ⟦ϱ,-⟧ τ̃` with the unperturbed `τ̃`.
    pub fn theta_unperturbed(&self, y: &SmallDCochain) -> Result<SmallDCochain, DpolyError> {
        let x = pbw_inv_tensor(&self.small.table, y)?;
        let t = (self.base.sigma)(&(self.rho)(&(self.base.tau)(&x)));
        pbw_tensor(&self.small.table, &t)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DpolyReport {
    pub arities: Vec<i32>,
    pub big_checked: usize,
    pub small_checked: usize,
}

/// Verifies the perturbed contraction for arities `-1..=max_arity`: the
/// five identities on the vertical side (`Λ`-degree ≤ 3, `Ŝ`-degree ≤ N,
/// slot degree ≤ `filt`, ≤ 2 in arity 2), the transferred differential
/// equal to `d_A^𝒰` on cosets, and `pbw^{⊗}` intertwining the two `d_H`.
pub fn contract_dpoly(res: &FedosovResult, table: Arc<PbwTable>, filt: u32, max_arity: i32) -> Result<DpolyReport, DpolyError> {
    if table.depth < filt {
        return Err(DpolyError::Filtration {
            degree: filt,
            budget: table.depth,
        });
    }
    let c = DpolyContraction::new(res, table)?;
    let alg = res.alg;
    let mut rep = DpolyReport {
        arities: (-1..=max_arity).collect(),
        big_checked: 0,
        small_checked: 0,
    };
    for v in -1..=max_arity {
        let f = if v >= 2 { filt.min(2) } else { filt };
        let big = vertical_basis(&alg, 3, res.n, v, f);
        let small_v = vertical_basis(&alg, 0, 0, v, f)
            .into_iter()
            .flat_map(|x| alg.a_basis(alg.a as u32).into_iter().map(move |a| alg.lmul(&a, &x)))
            .collect::<Vec<_>>();
        c.data.verify(&big, &small_v, res.n)?;
        rep.big_checked += big.len();
        for y in c.small.basis(0, v, f).into_iter().chain(c.small.basis(1, v, f)) {
            let want = c.small.d_a_u(&y);
            let got = c.theta_small(&y)?;
            if got != want {
                return Err(DpolyError::Check(format!(
                    "transferred differential {} ≠ d_A^𝒰 {} on {}",
                    got.render(),
                    want.render(),
                    y.render()
                )));
            }
            if c.theta_unperturbed(&y)? != want {
                return Err(DpolyError::Check(format!("σ̃⟦ϱ,-⟧τ̃ ≠ d_A^𝒰 on {}", y.render())));
            }
            let x = pbw_inv_tensor(&c.small.table, &y)?;
            if pbw_tensor(&c.small.table, &hochschild_d(&x))? != hochschild_d(&y) {
                return Err(DpolyError::Check(format!("pbw^⊗ does not intertwine d_H on {}", y.render())));
            }
            rep.small_checked += 1;
        }
    }
    Ok(rep)
}

/// `pr₀(⟦∇⚡_a, ∂^J⟧)` equals the Bott action of `ê_a` on `∂^J`, i.e. left
/// multiplication on cosets transported by `pbw`, for `|J| ≤ deg`.
pub fn lightning_bott_dpoly(table: &PbwTable, alg: &Alg, deg: u32) -> Result<usize, DpolyError> {
    // χ-degree `deg` of the field suffices for the constant part
    let alg = &Alg { t: deg, ..*alg };
    let mut checked = 0;
    for a in 0..alg.a {
        let comps = table.dual_lightning_chi(alg, a)?;
        let field = vvf_deriv(alg, &vvf_from_components(alg, &comps));
        for j in MultiIndex::all_up_to(alg.r, deg) {
            let x: PolyDiffCochain = cochain(alg, std::slice::from_ref(&j));
            let br = deriv_bracket(alg, &field, &x);
            let pr0 = br.filter(|k| k.chi.is_zero() && k.lam == 0);
            let mut acted = SmallDCochain::zero();
            for (k, c) in &pbw_tensor(table, &x)?.terms {
                for (b2, f) in act_on_coset(&table.uea, a, &k.val.0[0]) {
                    acted.add_term(
                        Key {
                            lam: 0,
                            chi: alg.chi0(),
                            val: Cosets(vec![b2]),
                        },
                        c * &f,
                    );
                }
            }
            let want = pbw_inv_tensor(table, &acted)?;
            if pr0 != want {
                return Err(DpolyError::Check(format!(
                    "pr₀⟦∇⚡_{a}, ∂^{j:?}⟧ = {} but the Bott action gives {}",
                    pr0.render(),
                    want.render()
                )));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

type BettiMaps = (
    std::collections::BTreeMap<i32, usize>,
    std::collections::BTreeMap<i32, usize>,
    std::collections::BTreeMap<(u32, i32), usize>,
);

fn small_coords(y: &SmallDCochain) -> std::collections::BTreeMap<(u32, Cosets), Rational> {
    let mut out = std::collections::BTreeMap::new();
    for (k, c) in &y.terms {
        let v = c.as_constant().expect("point base");
        out.insert((k.lam, k.val.clone()), v);
    }
    out
}

fn dpoly_betti_at(side: &SmallSide, filt: u32, max_degree: i32) -> BettiMaps {
    use std::collections::BTreeMap;
    let a = side.alg.a as i32;
    // ranks of the total differential leaving each total degree
    let per_degree: Vec<(i32, usize, usize)> = (-1..=max_degree)
        .into_par_iter()
        .map(|n| {
            let mut basis = Vec::new();
            for p in 0..=a {
                let v = n - p;
                if v >= -1 {
                    basis.extend(side.basis(p as u32, v, filt));
                }
            }
            let images: Vec<_> = basis.iter().map(|b| small_coords(&side.total(b))).collect();
            (n, basis.len(), linalg::rank_of_images(&images))
        })
        .collect();
    let dims: BTreeMap<i32, usize> = per_degree.iter().map(|&(n, d, _)| (n, d)).collect();
    let rank_out: BTreeMap<i32, usize> = per_degree.iter().map(|&(n, _, r)| (n, r)).collect();
    let mut betti = BTreeMap::new();
    for n in -1..=max_degree {
        let prev = if n == -1 { 0 } else { rank_out[&(n - 1)] };
        betti.insert(n, dims[&n] - rank_out[&n] - prev);
    }
    (betti, dims, BTreeMap::new())
}

/// Cohomology of `(ΛA∨ ⊗ D_poly, d_A^𝒰 + (-1)^p d_H)` restricted to total
/// coset degree ≤ `filt` (a subcomplex), computed at `filt - 1` and `filt`.
pub fn cohomology_dpoly(ad: &Adapted, table: Arc<PbwTable>, filt: u32, max_degree: i32) -> Result<BettiReport, DpolyError> {
    if ad.d() != 0 {
        return Err(DpolyError::Unsupported("D_poly cohomology needs a point base".into()));
    }
    if table.depth < filt {
        return Err(DpolyError::Filtration {
            degree: filt,
            budget: table.depth,
        });
    }
    let side = SmallSide::new(ad, &ad.alg(0), table);
    let lower = filt.saturating_sub(1);
    let (b0, _, _) = dpoly_betti_at(&side, lower, max_degree);
    let (betti, dims, blocks) = dpoly_betti_at(&side, filt, max_degree);
    let stabilized = b0 == betti;
    Ok(BettiReport {
        family: vec![(lower, b0), (filt, betti.clone())],
        betti,
        dims,
        blocks,
        exact: false,
        truncation: Some(filt),
        stabilized,
    })
}

/// `Λ A∨ ⊗ 𝒰(B)` for a matched pair, with
/// `(ξ⊗d)(η⊗d') = Σ ξ ∧ (d_(1) ⋊ η) ⊗ d_(2) d'`.
pub struct MatchedUea {
    pub alg: Alg,
    pub uea: Uea,
    ls: Vec<Deriv>,
    ce: Deriv,
    gamma: Vec<Vec<Vec<Poly>>>,
}

pub type MatchedElem = Form<Cosets>;

impl MatchedUea {
    pub fn new(ad: &Adapted, alg: &Alg) -> Result<Self, DpolyError> {
        if !ad.matched {
            return Err(DpolyError::Unsupported("pair is not matched".into()));
        }
        let mut ce = ad.ce_deriv(alg, CeAlgebroid::A);
        ce.theta.clear();
        Ok(MatchedUea {
            alg: *alg,
            uea: Uea::new(ad),
            ls: (0..alg.r).map(|k| matched_lie_derivative(ad, alg, k, false)).collect(),
            ce,
            gamma: ad.gamma.clone(),
        })
    }

    pub fn elem(&self, xi: &MixedForm, beta: &MultiIndex) -> MatchedElem {
        xi.attach(&Cosets(vec![beta.clone()]))
    }

    /// Source and target maps agree: `ξ ↦ ξ ⊗ 1`.
    pub fn source(&self, xi: &MixedForm) -> MatchedElem {
        self.elem(xi, &self.alg.chi0())
    }

    pub fn b(&self, k: usize) -> MatchedElem {
        self.elem(&self.alg.one(), &MultiIndex::unit(self.alg.r, k))
    }

    /// `x^β ⋊ η`: the rightmost generator acts first.
    pub fn act(&self, beta: &MultiIndex, eta: &MixedForm) -> MixedForm {
        let mut v = eta.clone();
        for g in beta.word().into_iter().rev() {
            v = self.ls[g].apply(&self.alg, &v);
        }
        v
    }

    pub fn mul(&self, x: &MatchedElem, y: &MatchedElem) -> MatchedElem {
        let alg = &self.alg;
        let mut out = MatchedElem::zero();
        for (k1, c1) in &x.terms {
            let xi = scalar_of(k1, c1);
            let d = &k1.val.0[0];
            for (k2, c2) in &y.terms {
                let eta = scalar_of(k2, c2);
                let d2 = UElem::mono(self.uea.b_monomial(&k2.val.0[0]), Poly::one());
                for (pieces, m) in coproduct_splits(d, 2) {
                    let left = alg.mul(&xi, &self.act(&pieces[0], &eta));
                    if left.is_zero() {
                        continue;
                    }
                    let first = UElem::mono(self.uea.b_monomial(&pieces[1]), Poly::one());
                    let prod = self.uea.mul(&first, &d2);
                    for (e, f) in &prod.terms {
                        let beta = UElem::beta_of(e, self.uea.r);
                        let piece = alg.lmul(&alg.scalar(f.clone()), &left.attach(&Cosets(vec![beta])));
                        out.add_scaled(&piece, &big(m.clone()));
                    }
                }
            }
        }
        out
    }

    /// `D(1 ⊗ ê_{a+k}) = Σ_{i<a} λ^i ⊗ ∇^Bott_{ê_i} ê_{a+k}`.
    fn d_generator(&self, k: usize) -> MatchedElem {
        let mut out = MatchedElem::zero();
        for i in 0..self.alg.a {
            for m in 0..self.alg.r {
                let g = &self.gamma[i][k][m];
                if !g.is_zero() {
                    out.add_assign(&self.elem(&self.alg.lam(i).scale_poly(g), &MultiIndex::unit(self.alg.r, m)));
                }
            }
        }
        out
    }

    /// The differential, extended from generators by the Leibniz rule over
    /// the twisted product.
    pub fn d(&self, x: &MatchedElem) -> MatchedElem {
        let alg = &self.alg;
        let mut out = MatchedElem::zero();
        for (k, c) in &x.terms {
            let xi = scalar_of(k, c);
            let beta = &k.val.0[0];
            let word = beta.word();
            let tail = self.elem(&alg.one(), beta);
            out.add_assign(&self.mul(&self.source(&self.ce.apply(alg, &xi)), &tail));
            let mut dd = MatchedElem::zero();
            for t in 0..word.len() {
                let pre = self.elem(&alg.one(), &MultiIndex::from_word(alg.r, &word[..t]));
                let post = self.elem(&alg.one(), &MultiIndex::from_word(alg.r, &word[t + 1..]));
                dd.add_assign(&self.mul(&self.mul(&pre, &self.d_generator(word[t])), &post));
            }
            let s = sign(xi.terms.keys().next().is_some_and(|k| k.lam.count_ones() % 2 == 1));
            out.add_scaled(&self.mul(&self.source(&xi), &dd), &s);
        }
        out
    }

    /// `id ⊗ Δ_{𝒰(B)}`.
    pub fn comul(&self, x: &MatchedElem) -> SmallDCochain {
        let mut out = SmallDCochain::zero();
        for (k, c) in &x.terms {
            for (pieces, m) in coproduct_splits(&k.val.0[0], 2) {
                out.add_term(
                    Key {
                        lam: k.lam,
                        chi: k.chi.clone(),
                        val: Cosets(pieces),
                    },
                    c.scale(&big(m)),
                );
            }
        }
        out
    }

    /// The Hochschild differential of the dg bialgebroid on
    /// `ΛA∨ ⊗ 𝒰(B)^{⊗(v+1)}`: `D` on each tensor factor, form parts moved to
    /// the front, plus `(-1)^p` times the cobar differential of `Δ`.
    pub fn hochschild(&self, y: &SmallDCochain) -> SmallDCochain {
        let alg = &self.alg;
        let mut out = signed_hochschild(y);
        for (k, c) in &y.terms {
            let xi = scalar_of(k, c);
            out.add_assign(&self.ce.apply(alg, &xi).attach(&k.val));
            let s = sign(k.lam.count_ones() % 2 == 1);
            for (t, beta) in k.val.0.iter().enumerate() {
                let dt = self.d(&self.elem(&alg.one(), beta));
                for (k2, c2) in &dt.terms {
                    let mut slots = k.val.0.clone();
                    slots[t] = k2.val.0[0].clone();
                    let coef = alg.mul(&xi, &scalar_of(k2, c2));
                    out.add_scaled(&coef.attach(&Cosets(slots)), &s);
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchedUeaReport {
    pub commutators: usize,
    pub square_zero: usize,
    pub compared: usize,
}

/// The product rule, `D² = 0`, and agreement of the Hochschild complex of
/// the matched algebra with the small `D_poly` complex up to filtration `filt`.
pub fn matched_uea(ad: &Adapted, table: Arc<PbwTable>, filt: u32) -> Result<(MatchedUea, MatchedUeaReport), DpolyError> {
    let alg = ad.alg(0);
    let mu = MatchedUea::new(ad, &alg)?;
    let side = SmallSide::new(ad, &alg, table);
    let mut rep = MatchedUeaReport {
        commutators: 0,
        square_zero: 0,
        compared: 0,
    };
    let mut xis: Vec<MixedForm> = alg.a_basis(alg.a as u32);
    xis.extend((0..alg.d).map(|l| alg.scalar(Poly::var(l))));
    for k in 0..alg.r {
        let b = mu.b(k);
        for xi in &xis {
            let x = mu.source(xi);
            let lhs = mu.mul(&b, &x).minus(&mu.mul(&x, &b));
            let want = mu.source(&mu.ls[k].apply(&alg, xi));
            if lhs != want {
                return Err(DpolyError::Check(format!(
                    "(1⊗b)(ξ⊗1) - (ξ⊗1)(1⊗b) = {} but ∇_b ξ ⊗ 1 = {}",
                    lhs.render(),
                    want.render()
                )));
            }
            rep.commutators += 1;
        }
    }
    let mut gens: Vec<MatchedElem> = xis.iter().map(|x| mu.source(x)).collect();
    gens.extend((0..alg.r).map(|k| mu.b(k)));
    for beta in MultiIndex::all_up_to(alg.r, filt) {
        gens.push(mu.elem(&alg.one(), &beta));
    }
    for g in &gens {
        if !mu.d(&mu.d(g)).is_zero() {
            return Err(DpolyError::Check(format!("D² ≠ 0 on {}", g.render())));
        }
        rep.square_zero += 1;
    }
    for v in -1..=1 {
        for p in 0..=alg.a as u32 {
            for y in side.basis(p, v, filt) {
                let a = mu.hochschild(&y);
                let b = side.total(&y);
                if a != b {
                    return Err(DpolyError::Check(format!(
                        "Hochschild differentials differ on {}: {} vs {}",
                        y.render(),
                        a.render(),
                        b.render()
                    )));
                }
                rep.compared += 1;
            }
        }
    }
    Ok((mu, rep))
}

/// `σ̃` of the unit function, for reports.
pub fn describe(x: &SmallDCochain) -> String {
    x.render()
}
