//! The graded algebra `Λ L∨ ⊗ Ŝ B∨` over the adapted coframe, its
//! value-decorated variants, derivations, the δ/σ/τ/h contraction and the
//! homological perturbation.
//!
//! Coframe indices `0..a` are the `p⊤(A∨)` directions and `a..n` the
//! `q⊤(B∨)` directions; `χ_k` is the fibre coordinate dual to `∂_k`.
//! Every element is written `c · λ^I · χ^J ⊗ v` with the value `v` on the
//! far right, so operators acting on `(I, J)` alone never produce signs.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::coeffs::{rat, wedge_sign, MultiIndex, Poly, Rational};

pub trait Value: Clone + Ord + fmt::Debug + Send + Sync {
    /// Parity contributed by the value leg.
    fn parity(&self) -> u32;
}

/// Values that can be multiplied, making `Form<V>` a graded commutative algebra.
pub trait AlgebraValue: Value {
    fn unit() -> Self;
    fn mul(&self, other: &Self) -> Option<(i8, Self)>;
}

impl Value for () {
    fn parity(&self) -> u32 {
        0
    }
}

impl AlgebraValue for () {
    fn unit() -> Self {}
    fn mul(&self, _: &Self) -> Option<(i8, Self)> {
        Some((1, ()))
    }
}

/// Exterior monomial in the odd generators `θ_k` standing for `∂_k` in
/// `Λ^• B`; polyvectors are elements of `Form<Theta>`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Theta(pub u32);

impl Theta {
    pub fn degree(&self) -> u32 {
        self.0.count_ones()
    }
}

impl fmt::Debug for Theta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "θ{:b}", self.0)
    }
}

impl Value for Theta {
    fn parity(&self) -> u32 {
        self.0.count_ones() & 1
    }
}

impl AlgebraValue for Theta {
    fn unit() -> Self {
        Theta(0)
    }
    fn mul(&self, other: &Self) -> Option<(i8, Self)> {
        wedge_sign(self.0, other.0).map(|s| (s, Theta(self.0 | other.0)))
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Key<V> {
    pub lam: u32,
    pub chi: MultiIndex,
    pub val: V,
}

impl<V: Value> Key<V> {
    pub fn parity(&self) -> u32 {
        (self.lam.count_ones() + self.val.parity()) & 1
    }
}

#[derive(Clone, PartialEq, Eq, Default)]
pub struct Form<V: Value = ()> {
    pub terms: BTreeMap<Key<V>, Poly>,
}

pub type MixedForm = Form<()>;
pub type PolyForm = Form<Theta>;

impl<V: Value> Form<V> {
    pub fn zero() -> Self {
        Form {
            terms: BTreeMap::new(),
        }
    }

    pub fn term(lam: u32, chi: MultiIndex, val: V, c: Poly) -> Self {
        let mut f = Form::zero();
        f.add_term(Key { lam, chi, val }, c);
        f
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, key: Key<V>, c: Poly) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(key) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += &c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add_scaled(&mut self, other: &Form<V>, s: &Rational) {
        if s.is_zero() {
            return;
        }
        for (k, c) in &other.terms {
            self.add_term(k.clone(), c.scale(s));
        }
    }

    pub fn add_assign(&mut self, other: &Form<V>) {
        for (k, c) in &other.terms {
            self.add_term(k.clone(), c.clone());
        }
    }

    pub fn sub_assign(&mut self, other: &Form<V>) {
        for (k, c) in &other.terms {
            self.add_term(k.clone(), -c);
        }
    }

    pub fn plus(&self, other: &Form<V>) -> Form<V> {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn minus(&self, other: &Form<V>) -> Form<V> {
        let mut out = self.clone();
        out.sub_assign(other);
        out
    }

    pub fn neg(&self) -> Form<V> {
        self.scale(&rat(-1))
    }

    pub fn scale(&self, s: &Rational) -> Form<V> {
        if s.is_zero() {
            return Form::zero();
        }
        Form {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (k.clone(), c.scale(s)))
                .collect(),
        }
    }

    pub fn scale_poly(&self, p: &Poly) -> Form<V> {
        let mut out = Form::zero();
        for (k, c) in &self.terms {
            out.add_term(k.clone(), c * p);
        }
        out
    }

    pub fn filter(&self, pred: impl Fn(&Key<V>) -> bool) -> Form<V> {
        Form {
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| pred(k))
                .map(|(k, c)| (k.clone(), c.clone()))
                .collect(),
        }
    }

    /// Keeps `Ŝ`-degree ≤ `deg`.
    pub fn upto(&self, deg: u32) -> Form<V> {
        self.filter(|k| k.chi.abs() <= deg)
    }

    pub fn eq_upto(&self, other: &Form<V>, deg: u32) -> bool {
        self.minus(other).upto(deg).is_zero()
    }

    pub fn map_vals<W: Value>(&self, f: impl Fn(&V) -> W) -> Form<W> {
        let mut out = Form::zero();
        for (k, c) in &self.terms {
            out.add_term(
                Key {
                    lam: k.lam,
                    chi: k.chi.clone(),
                    val: f(&k.val),
                },
                c.clone(),
            );
        }
        out
    }

    /// Applies a linear operator on the scalar part, keeping each value leg.
    pub fn map_scalar(&self, op: impl Fn(&MixedForm) -> MixedForm) -> Form<V> {
        let mut groups: BTreeMap<V, MixedForm> = BTreeMap::new();
        for (k, c) in &self.terms {
            groups.entry(k.val.clone()).or_default().add_term(
                Key {
                    lam: k.lam,
                    chi: k.chi.clone(),
                    val: (),
                },
                c.clone(),
            );
        }
        let mut out = Form::zero();
        for (v, s) in groups {
            out.add_assign(&op(&s).attach(&v));
        }
        out
    }

    /// Lowest `Λ`-degree plus `Ŝ`-degree among the terms.
    pub fn filtration(&self) -> Option<u32> {
        self.terms
            .keys()
            .map(|k| k.lam.count_ones() + k.chi.abs())
            .min()
    }

    pub fn is_homogeneous_parity(&self) -> Option<u32> {
        let mut it = self.terms.keys().map(|k| k.parity());
        let first = it.next()?;
        it.all(|p| p == first).then_some(first)
    }

    pub fn max_chi(&self) -> u32 {
        self.terms.keys().map(|k| k.chi.abs()).max().unwrap_or(0)
    }

    /// Stable textual form, used in reports and for hashing.
    pub fn render(&self) -> String
    where
        V: fmt::Debug,
    {
        if self.is_zero() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for (k, c) in &self.terms {
            parts.push(format!("({c})*L{:b}*X{:?}*{:?}", k.lam, k.chi, k.val));
        }
        parts.join(" + ")
    }
}

impl<V: Value> fmt::Debug for Form<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

impl MixedForm {
    /// Attaches a value leg on the right.
    pub fn attach<V: Value>(&self, v: &V) -> Form<V> {
        let mut out = Form::zero();
        for (k, c) in &self.terms {
            out.add_term(
                Key {
                    lam: k.lam,
                    chi: k.chi.clone(),
                    val: v.clone(),
                },
                c.clone(),
            );
        }
        out
    }
}

/// Shape and truncation of the algebra everything lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Alg {
    pub n: usize,
    pub a: usize,
    pub r: usize,
    pub d: usize,
    /// Largest `Ŝ`-degree kept.
    pub t: u32,
}

impl Alg {
    pub fn with_trunc(&self, t: u32) -> Alg {
        Alg { t, ..*self }
    }

    pub fn a_mask(&self) -> u32 {
        (1u32 << self.a) - 1
    }

    pub fn b_mask(&self) -> u32 {
        ((1u32 << self.n) - 1) & !self.a_mask()
    }

    /// `(u, v)` bidegree of a coframe monomial.
    pub fn bidegree(&self, lam: u32) -> (u32, u32) {
        (
            (lam & self.a_mask()).count_ones(),
            (lam & self.b_mask()).count_ones(),
        )
    }

    pub fn chi0(&self) -> MultiIndex {
        MultiIndex::zero(self.r)
    }

    pub fn one(&self) -> MixedForm {
        self.scalar(Poly::one())
    }

    pub fn scalar(&self, c: Poly) -> MixedForm {
        Form::term(0, self.chi0(), (), c)
    }

    pub fn lam(&self, i: usize) -> MixedForm {
        Form::term(1 << i, self.chi0(), (), Poly::one())
    }

    pub fn chi(&self, k: usize) -> MixedForm {
        Form::term(0, MultiIndex::unit(self.r, k), (), Poly::one())
    }

    pub fn mono(&self, lam: u32, chi: MultiIndex) -> MixedForm {
        Form::term(lam, chi, (), Poly::one())
    }

    pub fn theta(&self, k: usize) -> PolyForm {
        Form::term(0, self.chi0(), Theta(1 << k), Poly::one())
    }

    pub fn mul<V: AlgebraValue>(&self, x: &Form<V>, y: &Form<V>) -> Form<V> {
        let mut out = Form::zero();
        for (k1, c1) in &x.terms {
            for (k2, c2) in &y.terms {
                if k1.chi.abs() + k2.chi.abs() > self.t {
                    continue;
                }
                let Some(s1) = wedge_sign(k1.lam, k2.lam) else {
                    continue;
                };
                let Some((s2, v)) = k1.val.mul(&k2.val) else {
                    continue;
                };
                let mut s = s1 * s2;
                if (k1.val.parity() * k2.lam.count_ones()) & 1 == 1 {
                    s = -s;
                }
                let mut c = c1 * c2;
                if s < 0 {
                    c = -c;
                }
                out.add_term(
                    Key {
                        lam: k1.lam | k2.lam,
                        chi: k1.chi.add(&k2.chi),
                        val: v,
                    },
                    c,
                );
            }
        }
        out
    }

    /// Scalar form times a value-decorated form.
    pub fn lmul<V: Value>(&self, s: &MixedForm, x: &Form<V>) -> Form<V> {
        let mut out = Form::zero();
        for (k1, c1) in &s.terms {
            for (k2, c2) in &x.terms {
                if k1.chi.abs() + k2.chi.abs() > self.t {
                    continue;
                }
                let Some(sg) = wedge_sign(k1.lam, k2.lam) else {
                    continue;
                };
                let c = if sg < 0 { -(c1 * c2) } else { c1 * c2 };
                out.add_term(
                    Key {
                        lam: k1.lam | k2.lam,
                        chi: k1.chi.add(&k2.chi),
                        val: k2.val.clone(),
                    },
                    c,
                );
            }
        }
        out
    }

    /// Value-decorated form times a scalar form, value kept on the right.
    pub fn rmul<V: Value>(&self, x: &Form<V>, s: &MixedForm) -> Form<V> {
        let mut out = Form::zero();
        for (k1, c1) in &x.terms {
            for (k2, c2) in &s.terms {
                if k1.chi.abs() + k2.chi.abs() > self.t {
                    continue;
                }
                let Some(mut sg) = wedge_sign(k1.lam, k2.lam) else {
                    continue;
                };
                if (k1.val.parity() * k2.lam.count_ones()) & 1 == 1 {
                    sg = -sg;
                }
                let c = if sg < 0 { -(c1 * c2) } else { c1 * c2 };
                out.add_term(
                    Key {
                        lam: k1.lam | k2.lam,
                        chi: k1.chi.add(&k2.chi),
                        val: k1.val.clone(),
                    },
                    c,
                );
            }
        }
        out
    }

    pub fn truncate<V: Value>(&self, x: &Form<V>) -> Form<V> {
        x.upto(self.t)
    }

    pub fn graded_mul(&self, x: &MixedForm, y: &MixedForm) -> MixedForm {
        self.mul(x, y)
    }

    /// `δ(ω ⊗ χ^J) = Σ_m J_m q⊤χ_m ∧ ω ⊗ χ^{J-e_m}`, acting on the scalar part.
    pub fn delta<V: Value>(&self, x: &Form<V>) -> Form<V> {
        let mut out = Form::zero();
        for (k, c) in &x.terms {
            for m in 0..self.r {
                let jm = k.chi.get(m);
                if jm == 0 {
                    continue;
                }
                let bit = 1u32 << (self.a + m);
                let Some(sg) = wedge_sign(bit, k.lam) else {
                    continue;
                };
                let coef = c.scale(&rat(sg as i64 * jm as i64));
                out.add_term(
                    Key {
                        lam: k.lam | bit,
                        chi: k.chi.dec(m).unwrap(),
                        val: k.val.clone(),
                    },
                    coef,
                );
            }
        }
        out
    }

    /// Interior product with the frame vector dual to coframe index `i`.
    pub fn interior<V: Value>(&self, i: usize, x: &Form<V>) -> Form<V> {
        let mut out = Form::zero();
        let bit = 1u32 << i;
        for (k, c) in &x.terms {
            if k.lam & bit == 0 {
                continue;
            }
            let below = (k.lam & (bit - 1)).count_ones();
            let coef = if below % 2 == 1 { -c } else { c.clone() };
            out.add_term(
                Key {
                    lam: k.lam & !bit,
                    chi: k.chi.clone(),
                    val: k.val.clone(),
                },
                coef,
            );
        }
        out
    }

    /// `h(ω⊗χ^J) = 1/(v+|J|) Σ_k ι_{j(∂_k)}ω ⊗ χ^{J+e_k}` for `v ≥ 1`, else 0.
    pub fn h<V: Value>(&self, x: &Form<V>) -> Form<V> {
        let mut out = Form::zero();
        let bmask = self.b_mask();
        for (k, c) in &x.terms {
            let v = (k.lam & bmask).count_ones();
            if v == 0 || k.chi.abs() + 1 > self.t {
                continue;
            }
            let w = BigRational::new(1.into(), (v + k.chi.abs()).into());
            for m in 0..self.r {
                let bit = 1u32 << (self.a + m);
                if k.lam & bit == 0 {
                    continue;
                }
                let below = (k.lam & (bit - 1)).count_ones();
                let s = if below % 2 == 1 { -w.clone() } else { w.clone() };
                out.add_term(
                    Key {
                        lam: k.lam & !bit,
                        chi: k.chi.inc(m),
                        val: k.val.clone(),
                    },
                    c.scale(&s),
                );
            }
        }
        out
    }

    /// Projection onto `v = 0`, `|J| = 0`, read as an `A`-form.
    pub fn sigma<V: Value>(&self, x: &Form<V>) -> Form<V> {
        let am = self.a_mask();
        x.filter(|k| k.lam & !am == 0 && k.chi.is_zero())
    }

    /// `τ(α) = p⊤(α) ⊗ 1`: in the adapted coframe this is the inclusion.
    pub fn tau<V: Value>(&self, x: &Form<V>) -> Form<V> {
        debug_assert!(self.is_a_form(x));
        x.clone()
    }

    pub fn is_a_form<V: Value>(&self, x: &Form<V>) -> bool {
        let am = self.a_mask();
        x.terms.keys().all(|k| k.lam & !am == 0 && k.chi.is_zero())
    }

    /// Coframe monomials of `Λ^{≤max} L∨`.
    pub fn lam_masks(&self, max: u32) -> Vec<u32> {
        (0..1u32 << self.n)
            .filter(|m| m.count_ones() <= max)
            .collect()
    }

    pub fn a_masks(&self, max: u32) -> Vec<u32> {
        (0..1u32 << self.a)
            .filter(|m| m.count_ones() <= max)
            .collect()
    }

    /// Monomial basis `λ^I χ^J` with `|I| ≤ lam_max`, `|J| ≤ chi_max`.
    pub fn basis(&self, lam_max: u32, chi_max: u32) -> Vec<MixedForm> {
        let mut out = Vec::new();
        for m in self.lam_masks(lam_max) {
            for j in MultiIndex::all_up_to(self.r, chi_max) {
                out.push(self.mono(m, j));
            }
        }
        out
    }

    pub fn a_basis(&self, lam_max: u32) -> Vec<MixedForm> {
        self.a_masks(lam_max)
            .into_iter()
            .map(|m| self.mono(m, self.chi0()))
            .collect()
    }

    pub fn chi_monomials(&self, max: u32) -> Vec<MultiIndex> {
        MultiIndex::all_up_to(self.r, max)
    }
}

/// A derivation of `Λ L∨ ⊗ Ŝ B∨` (optionally also of polyvectors), given
/// by its values on the generators `x_l`, `λ^i`, `χ_k` and `θ_k`.
#[derive(Clone, Debug, Default)]
pub struct Deriv {
    pub odd: bool,
    pub x: Vec<MixedForm>,
    pub lam: Vec<MixedForm>,
    pub chi: Vec<MixedForm>,
    /// Images of `θ_k`; empty means the derivation kills them.
    pub theta: Vec<PolyForm>,
}

impl Deriv {
    pub fn zero(alg: &Alg, odd: bool) -> Deriv {
        Deriv {
            odd,
            x: vec![Form::zero(); alg.d],
            lam: vec![Form::zero(); alg.n],
            chi: vec![Form::zero(); alg.r],
            theta: Vec::new(),
        }
    }

    pub fn parity(&self) -> u32 {
        self.odd as u32
    }

    pub fn is_vertical(&self) -> bool {
        self.x.iter().all(Form::is_zero) && self.lam.iter().all(Form::is_zero)
    }

    pub fn plus(&self, other: &Deriv) -> Deriv {
        assert_eq!(self.odd, other.odd, "adding derivations of different parity");
        let add = |a: &[MixedForm], b: &[MixedForm]| -> Vec<MixedForm> {
            a.iter().zip(b).map(|(x, y)| x.plus(y)).collect()
        };
        let theta = match (self.theta.is_empty(), other.theta.is_empty()) {
            (true, true) => Vec::new(),
            (false, true) => self.theta.clone(),
            (true, false) => other.theta.clone(),
            (false, false) => self
                .theta
                .iter()
                .zip(&other.theta)
                .map(|(x, y)| x.plus(y))
                .collect(),
        };
        Deriv {
            odd: self.odd,
            x: add(&self.x, &other.x),
            lam: add(&self.lam, &other.lam),
            chi: add(&self.chi, &other.chi),
            theta,
        }
    }

    pub fn scale(&self, s: &Rational) -> Deriv {
        Deriv {
            odd: self.odd,
            x: self.x.iter().map(|f| f.scale(s)).collect(),
            lam: self.lam.iter().map(|f| f.scale(s)).collect(),
            chi: self.chi.iter().map(|f| f.scale(s)).collect(),
            theta: self.theta.iter().map(|f| f.scale(s)).collect(),
        }
    }

    /// Image of a coefficient `c(x)`.
    fn on_coeff(&self, alg: &Alg, c: &Poly) -> MixedForm {
        let mut out = Form::zero();
        for (l, img) in self.x.iter().enumerate() {
            if img.is_zero() {
                continue;
            }
            let dc = c.diff(l);
            if !dc.is_zero() {
                out.add_assign(&alg.truncate(&img.scale_poly(&dc)));
            }
        }
        out
    }

    /// Image of the monomial `λ^I χ^J` (coefficient 1).
    pub fn on_monomial(&self, alg: &Alg, lam: u32, chi: &MultiIndex) -> MixedForm {
        let mut out = Form::zero();
        let bits: Vec<usize> = (0..alg.n).filter(|i| lam & (1 << i) != 0).collect();
        let chi_part = alg.mono(0, chi.clone());
        for (t, &i) in bits.iter().enumerate() {
            let img = &self.lam[i];
            if img.is_zero() {
                continue;
            }
            let before: u32 = bits[..t].iter().map(|&b| 1u32 << b).sum();
            let after: u32 = bits[t + 1..].iter().map(|&b| 1u32 << b).sum();
            let mut piece = alg.mul(&alg.mono(before, alg.chi0()), img);
            piece = alg.mul(&piece, &alg.mono(after, chi.clone()));
            if self.odd && t % 2 == 1 {
                piece = piece.neg();
            }
            out.add_assign(&piece);
        }
        let lam_part = alg.mono(lam, alg.chi0());
        let sign_flip = self.odd && bits.len() % 2 == 1;
        for m in 0..alg.r {
            let jm = chi.get(m);
            if jm == 0 || self.chi[m].is_zero() {
                continue;
            }
            let rest = alg.mono(0, chi.dec(m).unwrap());
            let mut piece = alg.mul(&alg.mul(&lam_part, &self.chi[m]), &rest);
            let mut s = rat(jm as i64);
            if sign_flip {
                s = -s;
            }
            piece = piece.scale(&s);
            out.add_assign(&piece);
        }
        let _ = chi_part;
        out
    }

    pub fn apply(&self, alg: &Alg, f: &MixedForm) -> MixedForm {
        let mut out = Form::zero();
        for (k, c) in &f.terms {
            let dc = self.on_coeff(alg, c);
            if !dc.is_zero() {
                out.add_assign(&alg.mul(&dc, &alg.mono(k.lam, k.chi.clone())));
            }
            let dm = self.on_monomial(alg, k.lam, &k.chi);
            if !dm.is_zero() {
                out.add_assign(&dm.scale_poly(c));
            }
        }
        alg.truncate(&out)
    }

    /// Applies to a value-decorated form, with `val(v)` the image of the
    /// value leg: `D(s ⊗ v) = D(s) ⊗ v + (-1)^{|D||s|} s · D(v)`.
    pub fn apply_with<V: Value>(
        &self,
        alg: &Alg,
        f: &Form<V>,
        val: &dyn Fn(&V) -> Form<V>,
    ) -> Form<V> {
        let mut groups: BTreeMap<V, MixedForm> = BTreeMap::new();
        for (k, c) in &f.terms {
            groups.entry(k.val.clone()).or_default().add_term(
                Key {
                    lam: k.lam,
                    chi: k.chi.clone(),
                    val: (),
                },
                c.clone(),
            );
        }
        let mut out = Form::zero();
        for (v, s) in groups {
            out.add_assign(&self.apply(alg, &s).attach(&v));
            let dv = val(&v);
            if dv.is_zero() {
                continue;
            }
            for (k, c) in &s.terms {
                let mut piece = alg.lmul(&Form::term(k.lam, k.chi.clone(), (), c.clone()), &dv);
                if self.odd && k.lam.count_ones() % 2 == 1 {
                    piece = piece.neg();
                }
                out.add_assign(&piece);
            }
        }
        alg.truncate(&out)
    }

    /// Image of the exterior monomial `θ^K`.
    pub fn on_theta(&self, alg: &Alg, th: &Theta) -> PolyForm {
        if self.theta.is_empty() || th.0 == 0 {
            return Form::zero();
        }
        let bits: Vec<usize> = (0..alg.r).filter(|k| th.0 & (1 << k) != 0).collect();
        let mut out = Form::zero();
        for (t, &k) in bits.iter().enumerate() {
            let img = &self.theta[k];
            if img.is_zero() {
                continue;
            }
            let before: u32 = bits[..t].iter().map(|&b| 1u32 << b).sum();
            let after: u32 = bits[t + 1..].iter().map(|&b| 1u32 << b).sum();
            let pre = Form::term(0, alg.chi0(), Theta(before), Poly::one());
            let post = Form::term(0, alg.chi0(), Theta(after), Poly::one());
            let mut piece = alg.mul(&alg.mul(&pre, img), &post);
            if self.odd && t % 2 == 1 {
                piece = piece.neg();
            }
            out.add_assign(&piece);
        }
        out
    }

    pub fn apply_poly(&self, alg: &Alg, f: &PolyForm) -> PolyForm {
        self.apply_with(alg, f, &|th| self.on_theta(alg, th))
    }

    /// `D1∘D2` evaluated on a form.
    pub fn compose_apply(&self, other: &Deriv, alg: &Alg, f: &MixedForm) -> MixedForm {
        self.apply(alg, &other.apply(alg, f))
    }

    /// Graded commutator `[D1, D2] = D1 D2 - (-1)^{|D1||D2|} D2 D1`,
    /// determined by its values on generators.
    pub fn commutator(&self, other: &Deriv, alg: &Alg) -> Deriv {
        let sign = if self.odd && other.odd { rat(1) } else { rat(-1) };
        let on = |g: &MixedForm| -> MixedForm {
            let mut v = self.apply(alg, &other.apply(alg, g));
            v.add_scaled(&other.apply(alg, &self.apply(alg, g)), &sign);
            v
        };
        let x = (0..alg.d)
            .map(|l| on(&alg.scalar(Poly::var(l))))
            .collect();
        let lam = (0..alg.n).map(|i| on(&alg.lam(i))).collect();
        let chi = (0..alg.r).map(|k| on(&alg.chi(k))).collect();
        let theta = if self.theta.is_empty() && other.theta.is_empty() {
            Vec::new()
        } else {
            (0..alg.r)
                .map(|k| {
                    let g = alg.theta(k);
                    let mut v = self.apply_poly(alg, &other.apply_poly(alg, &g));
                    v.add_scaled(&other.apply_poly(alg, &self.apply_poly(alg, &g)), &sign);
                    v
                })
                .collect()
        };
        Deriv {
            odd: self.odd ^ other.odd,
            x,
            lam,
            chi,
            theta,
        }
    }

    /// Splits by how the derivation shifts the `(u, v)` bidegree.
    pub fn bidegree_part(&self, alg: &Alg, du: i32, dv: i32) -> Deriv {
        let pick = |f: &MixedForm, base: (i32, i32)| -> MixedForm {
            f.filter(|k| {
                let (u, v) = alg.bidegree(k.lam);
                u as i32 - base.0 == du && v as i32 - base.1 == dv
            })
        };
        Deriv {
            odd: self.odd,
            x: self.x.iter().map(|f| pick(f, (0, 0))).collect(),
            lam: self
                .lam
                .iter()
                .enumerate()
                .map(|(i, f)| pick(f, if i < alg.a { (1, 0) } else { (0, 1) }))
                .collect(),
            chi: self.chi.iter().map(|f| pick(f, (0, 0))).collect(),
            theta: self
                .theta
                .iter()
                .map(|f| {
                    f.filter(|k| {
                        let (u, v) = alg.bidegree(k.lam);
                        u as i32 == du && v as i32 == dv
                    })
                })
                .collect(),
        }
    }
}

/// `δ` as a derivation: `χ_k ↦ q⊤χ_k`.
pub fn delta_deriv(alg: &Alg) -> Deriv {
    let mut d = Deriv::zero(alg, true);
    for k in 0..alg.r {
        d.chi[k] = alg.lam(alg.a + k);
    }
    d
}

pub fn delta_op(alg: &Alg, x: &MixedForm) -> MixedForm {
    alg.delta(x)
}

pub fn sigma_op(alg: &Alg, x: &MixedForm) -> MixedForm {
    alg.sigma(x)
}

pub fn tau_op(alg: &Alg, x: &MixedForm) -> MixedForm {
    alg.tau(x)
}

pub fn h_op(alg: &Alg, x: &MixedForm) -> MixedForm {
    alg.h(x)
}

pub fn graded_mul(alg: &Alg, x: &MixedForm, y: &MixedForm) -> MixedForm {
    alg.mul(x, y)
}

/// `Σ_k X_k θ_k ↦ (X_1, …, X_r)`.
pub fn vvf_components(alg: &Alg, x: &PolyForm) -> Vec<MixedForm> {
    let mut comps = vec![MixedForm::zero(); alg.r];
    for (k, c) in &x.terms {
        assert_eq!(k.val.degree(), 1, "not a vector field: {x:?}");
        let idx = k.val.0.trailing_zeros() as usize;
        comps[idx].add_term(
            Key {
                lam: k.lam,
                chi: k.chi.clone(),
                val: (),
            },
            c.clone(),
        );
    }
    comps
}

pub fn vvf_from_components(alg: &Alg, comps: &[MixedForm]) -> PolyForm {
    let mut out = Form::zero();
    for (k, c) in comps.iter().enumerate() {
        out.add_assign(&c.attach(&Theta(1 << k)));
    }
    let _ = alg;
    out
}

/// The derivation `χ_k ↦ X_k` of a vertical vector field.
pub fn vvf_deriv(alg: &Alg, x: &PolyForm) -> Deriv {
    let comps = vvf_components(alg, x);
    let odd = comps
        .iter()
        .find_map(|c| c.is_homogeneous_parity())
        .unwrap_or(0)
        == 1;
    let mut d = Deriv::zero(alg, odd);
    d.chi = comps;
    d
}

pub fn act_vvf(alg: &Alg, x: &PolyForm, f: &MixedForm) -> MixedForm {
    vvf_deriv(alg, x).apply(alg, f)
}

/// Graded commutator of the derivations induced by two vertical fields,
/// returned as a vertical field.
pub fn vvf_bracket(alg: &Alg, x: &PolyForm, y: &PolyForm) -> PolyForm {
    let dx = vvf_deriv(alg, x);
    let dy = vvf_deriv(alg, y);
    let c = dx.commutator(&dy, alg);
    vvf_from_components(alg, &c.chi)
}

pub type Op<V> = Arc<dyn Fn(&Form<V>) -> Form<V> + Send + Sync>;

pub fn op<V: Value>(f: impl Fn(&Form<V>) -> Form<V> + Send + Sync + 'static) -> Op<V> {
    Arc::new(f)
}

/// How an operator moves the `Λ`-degree and the `Ŝ`-degree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shift {
    pub lam: i32,
    /// Smallest change of `Ŝ`-degree.
    pub sym_min: i32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// Big-side differential `-δ`, homotopy `h`.
    MinusDelta,
    /// Big-side differential `δ`, homotopy `-h`.
    PlusDelta,
}

/// `(D, σ, τ, h)` together with the small-side differential, satisfying
/// `στ = id`, `τσ - id = Dh + hD`, `σh = 0`, `hτ = 0`, `h² = 0`.
#[derive(Clone)]
pub struct ContractionData<V: Value> {
    pub big_d: Op<V>,
    pub small_d: Op<V>,
    pub sigma: Op<V>,
    pub tau: Op<V>,
    pub h: Op<V>,
    pub shifts: [(&'static str, Shift); 4],
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContractionError {
    #[error("perturbation does not raise the filtration on {witness}")]
    NotFiltered { witness: String },
    #[error("identity {identity} fails on {witness}")]
    Identity {
        identity: &'static str,
        witness: String,
    },
    #[error("perturbation series did not terminate on {witness}")]
    Divergent { witness: String },
}

impl<V: Value + 'static> ContractionData<V> {
    /// The contraction of `(Λ L∨ ⊗ Ŝ B∨, ∓δ)` onto `(Λ A∨, 0)`.
    pub fn base(alg: Alg, orientation: Orientation) -> Self {
        let sign = match orientation {
            Orientation::MinusDelta => rat(-1),
            Orientation::PlusDelta => rat(1),
        };
        let hs = -sign.clone();
        ContractionData {
            big_d: op(move |x: &Form<V>| alg.delta(x).scale(&sign)),
            small_d: op(|_: &Form<V>| Form::zero()),
            sigma: op(move |x: &Form<V>| alg.sigma(x)),
            tau: op(move |x: &Form<V>| alg.tau(x)),
            h: op(move |x: &Form<V>| alg.h(x).scale(&hs)),
            shifts: [
                ("d", Shift { lam: 1, sym_min: -1 }),
                ("sigma", Shift { lam: 0, sym_min: 0 }),
                ("tau", Shift { lam: 0, sym_min: 0 }),
                ("h", Shift { lam: -1, sym_min: 1 }),
            ],
        }
    }

    /// Checks the contraction identities on `big` (big-side elements) and
    /// `small` (small-side elements), comparing up to `Ŝ`-degree `deg`.
    pub fn verify(&self, big: &[Form<V>], small: &[Form<V>], deg: u32) -> Result<(), ContractionError> {
        let fail = |identity: &'static str, x: &Form<V>| ContractionError::Identity {
            identity,
            witness: x.render(),
        };
        for x in small {
            if !(self.sigma)(&(self.tau)(x)).eq_upto(x, deg) {
                return Err(fail("sigma tau = id", x));
            }
            let lhs = (self.big_d)(&(self.tau)(x));
            let rhs = (self.tau)(&(self.small_d)(x));
            if !lhs.eq_upto(&rhs, deg) {
                return Err(fail("D tau = tau d", x));
            }
            if !(self.h)(&(self.tau)(x)).upto(deg).is_zero() {
                return Err(fail("h tau = 0", x));
            }
        }
        for x in big {
            let hx = (self.h)(x);
            let lhs = (self.tau)(&(self.sigma)(x)).minus(x);
            let rhs = (self.big_d)(&hx).plus(&(self.h)(&(self.big_d)(x)));
            if !lhs.eq_upto(&rhs, deg) {
                return Err(fail("tau sigma - id = D h + h D", x));
            }
            if !(self.sigma)(&hx).upto(deg).is_zero() {
                return Err(fail("sigma h = 0", x));
            }
            if !(self.h)(&hx).upto(deg).is_zero() {
                return Err(fail("h h = 0", x));
            }
            let lhs = (self.sigma)(&(self.big_d)(x));
            let rhs = (self.small_d)(&(self.sigma)(x));
            if !lhs.eq_upto(&rhs, deg) {
                return Err(fail("sigma D = d sigma", x));
            }
        }
        Ok(())
    }
}

/// Upper bound on the number of series terms; the filtration is bounded by
/// `n + t`, so real series stop long before this.
const SERIES_CAP: usize = 64;

fn series<V: Value>(start: Form<V>, step: &dyn Fn(&Form<V>) -> Form<V>) -> Result<Form<V>, ContractionError> {
    let mut acc = start.clone();
    let mut cur = start;
    for _ in 0..SERIES_CAP {
        cur = step(&cur);
        if cur.is_zero() {
            return Ok(acc);
        }
        acc.add_assign(&cur);
    }
    Err(ContractionError::Divergent {
        witness: acc.render(),
    })
}

/// Transfers the perturbation `rho` through the contraction. `probe` lists
/// big-side elements on which the filtration condition is checked.
pub fn hpl_perturb<V: Value + 'static>(
    c: &ContractionData<V>,
    rho: Op<V>,
    probe: &[Form<V>],
) -> Result<ContractionData<V>, ContractionError> {
    for x in probe {
        let Some(fx) = x.filtration() else { continue };
        let y = rho(x);
        if let Some(fy) = y.filtration() {
            if fy <= fx {
                return Err(ContractionError::NotFiltered { witness: x.render() });
            }
        }
    }
    let h = c.h.clone();
    let sigma = c.sigma.clone();
    let tau = c.tau.clone();
    let r1 = rho.clone();
    let h1 = h.clone();
    let hr: Arc<dyn Fn(&Form<V>) -> Form<V> + Send + Sync> = Arc::new(move |x| h1(&r1(x)));
    let r2 = rho.clone();
    let h2 = h.clone();
    let rh: Arc<dyn Fn(&Form<V>) -> Form<V> + Send + Sync> = Arc::new(move |x| r2(&h2(x)));

    let hr_t = hr.clone();
    let tau_t = tau.clone();
    let new_tau: Op<V> = op(move |x| series(tau_t(x), &|y| hr_t(y)).expect("tau series"));

    let hr_h = hr.clone();
    let h_h = h.clone();
    let new_h: Op<V> = op(move |x| series(h_h(x), &|y| hr_h(y)).expect("h series"));

    let rh_s = rh.clone();
    let sig_s = sigma.clone();
    let new_sigma: Op<V> = op(move |x| {
        let full = series(x.clone(), &|y| rh_s(y)).expect("sigma series");
        sig_s(&full)
    });

    let nt = new_tau.clone();
    let r3 = rho.clone();
    let sig3 = sigma.clone();
    let theta: Op<V> = op(move |x| sig3(&r3(&nt(x))));

    let bd = c.big_d.clone();
    let r4 = rho.clone();
    let big_d: Op<V> = op(move |x| bd(x).plus(&r4(x)));
    let sd = c.small_d.clone();
    let th2 = theta.clone();
    let small_d: Op<V> = op(move |x| sd(x).plus(&th2(x)));

    Ok(ContractionData {
        big_d,
        small_d,
        sigma: new_sigma,
        tau: new_tau,
        h: new_h,
        shifts: c.shifts,
    })
}

/// The transferred small-side perturbation `θ = Σ σϱ(hϱ)^kτ` on its own.
pub fn transferred_theta<V: Value + 'static>(c: &ContractionData<V>, rho: &Op<V>, x: &Form<V>) -> Form<V> {
    let h = c.h.clone();
    let r = rho.clone();
    let t = series((c.tau)(x), &|y| h(&r(y))).expect("tau series");
    (c.sigma)(&rho(&t))
}

pub fn one_over(n: u32) -> Rational {
    BigRational::new(One::one(), n.into())
}
