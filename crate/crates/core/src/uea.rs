//! The universal enveloping algebra of a Lie algebroid in normal-ordered
//! form, its coalgebra structure, the quotient by the left ideal generated
//! by `Γ(A)`, and the PBW map for a splitting and connection.
//!
//! Monomials are exponent vectors over *positions*: position `p < r` is the
//! `B`-generator `ê_{a+p}`, position `r + i` is the `A`-generator `ê_i`.
//! Normal order is ascending position, so every normal monomial reads
//! `(B-part)(A-part)` and the ideal `𝒰(L)Γ(A)` is spanned by monomials with
//! nonzero `A`-part. Coefficients from `R` always sit on the left.

use std::collections::{BTreeMap, HashMap};
use std::sync::RwLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use thiserror::Error;

use crate::coeffs::{big, BaseDerivation, MultiIndex, Poly, Rational};
use crate::forms::{Alg, Deriv, Key, MixedForm, PolyForm, Theta};
use crate::liepair::Adapted;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UeaError {
    #[error("filtration {degree} exceeds table depth {depth}")]
    Overflow { degree: u32, depth: u32 },
    #[error("element is not reduced modulo 𝒰(L)Γ(A)")]
    NotCoset,
    #[error("{what} fails on ∂^{index:?}")]
    Identity { what: &'static str, index: Vec<u32> },
}

/// An element of `𝒰(L)`, a finite sum `Σ f_E x^E` over normal monomials.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct UElem {
    pub terms: BTreeMap<MultiIndex, Poly>,
}

/// Elements of `𝒰(L)/𝒰(L)Γ(A)`, stored as `UElem`s without `A`-part.
pub type CosetElem = UElem;

impl UElem {
    pub fn zero() -> Self {
        UElem::default()
    }

    pub fn mono(e: MultiIndex, c: Poly) -> Self {
        let mut u = UElem::zero();
        u.add_term(e, c);
        u
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, e: MultiIndex, c: Poly) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(e.clone()).or_insert_with(Poly::zero);
        *slot += &c;
        if slot.is_zero() {
            self.terms.remove(&e);
        }
    }

    pub fn add_assign(&mut self, o: &UElem) {
        for (e, c) in &o.terms {
            self.add_term(e.clone(), c.clone());
        }
    }

    pub fn add_scaled(&mut self, o: &UElem, s: &Poly) {
        for (e, c) in &o.terms {
            self.add_term(e.clone(), c * s);
        }
    }

    pub fn scale(&self, s: &Rational) -> UElem {
        let mut out = UElem::zero();
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c.scale(s));
        }
        out
    }

    pub fn minus(&self, o: &UElem) -> UElem {
        let mut out = self.clone();
        for (e, c) in &o.terms {
            out.add_term(e.clone(), -c);
        }
        out
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(MultiIndex::abs).max()
    }

    /// Drops every monomial with a nonzero `A`-part.
    pub fn coset(&self, r: usize) -> CosetElem {
        UElem {
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.0[r..].iter().all(|&x| x == 0))
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn is_coset(&self, r: usize) -> bool {
        self.terms.keys().all(|e| e.0[r..].iter().all(|&x| x == 0))
    }

    /// The `B`-exponents of a coset element, as a symmetric-tensor index.
    pub fn beta_of(e: &MultiIndex, r: usize) -> MultiIndex {
        MultiIndex::from_slice(&e.0[..r])
    }
}

/// A section of `S B`, `Σ f_J ∂^J`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Sym {
    pub terms: BTreeMap<MultiIndex, Poly>,
}

impl Sym {
    pub fn zero() -> Self {
        Sym::default()
    }

    pub fn mono(j: MultiIndex, c: Poly) -> Self {
        let mut s = Sym::zero();
        s.add_term(j, c);
        s
    }

    pub fn one(r: usize) -> Self {
        Sym::mono(MultiIndex::zero(r), Poly::one())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, j: MultiIndex, c: Poly) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(j.clone()).or_insert_with(Poly::zero);
        *slot += &c;
        if slot.is_zero() {
            self.terms.remove(&j);
        }
    }

    pub fn add_assign(&mut self, o: &Sym) {
        for (j, c) in &o.terms {
            self.add_term(j.clone(), c.clone());
        }
    }

    pub fn sub_assign(&mut self, o: &Sym) {
        for (j, c) in &o.terms {
            self.add_term(j.clone(), -c);
        }
    }

    pub fn scale_poly(&self, p: &Poly) -> Sym {
        let mut out = Sym::zero();
        for (j, c) in &self.terms {
            out.add_term(j.clone(), c * p);
        }
        out
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(MultiIndex::abs).max()
    }

    pub fn coeff(&self, j: &MultiIndex) -> Poly {
        self.terms.get(j).cloned().unwrap_or_else(Poly::zero)
    }

    /// `b ⊙ s` for `b = ∂_k`.
    pub fn mul_generator(&self, k: usize) -> Sym {
        Sym {
            terms: self.terms.iter().map(|(j, c)| (j.inc(k), c.clone())).collect(),
        }
    }
}

/// Splittings of an exponent vector into `parts` ordered pieces, with the
/// multinomial multiplicities produced by the shuffle coproduct.
pub fn coproduct_splits(e: &MultiIndex, parts: usize) -> Vec<(Vec<MultiIndex>, BigInt)> {
    let mut out = vec![(Vec::new(), BigInt::one())];
    if parts == 0 {
        return if e.is_zero() { out } else { Vec::new() };
    }
    for p in 0..parts {
        let mut next = Vec::new();
        for (pieces, m) in &out {
            let used = pieces.iter().fold(MultiIndex::zero(e.len()), |acc, x| acc.add(x));
            let avail = e.checked_sub(&used).unwrap();
            let choices = if p + 1 == parts {
                vec![avail.clone()]
            } else {
                avail.sub_indices()
            };
            for c in choices {
                let mut v = pieces.clone();
                let mult = m * avail.binomial(&c);
                v.push(c);
                next.push((v, mult));
            }
        }
        out = next;
    }
    out
}

/// Two-slot tensors `Σ f · x ⊗ y` with coefficients pulled into the left slot.
pub type Tensor2 = BTreeMap<(MultiIndex, MultiIndex), Poly>;

fn tensor_add(t: &mut Tensor2, k: (MultiIndex, MultiIndex), c: Poly) {
    if c.is_zero() {
        return;
    }
    let slot = t.entry(k.clone()).or_insert_with(Poly::zero);
    *slot += &c;
    if slot.is_zero() {
        t.remove(&k);
    }
}

/// Normal-ordering engine for one adapted Lie pair.
pub struct Uea {
    pub a: usize,
    pub r: usize,
    pub n: usize,
    c: Vec<Vec<Vec<Poly>>>,
    rho: Vec<BaseDerivation>,
    cache: RwLock<HashMap<(usize, MultiIndex), UElem>>,
}

impl Clone for Uea {
    fn clone(&self) -> Self {
        Uea {
            a: self.a,
            r: self.r,
            n: self.n,
            c: self.c.clone(),
            rho: self.rho.clone(),
            cache: RwLock::new(self.cache.read().unwrap().clone()),
        }
    }
}

impl Uea {
    pub fn new(ad: &Adapted) -> Self {
        Uea {
            a: ad.a(),
            r: ad.r(),
            n: ad.n(),
            c: ad.c.clone(),
            rho: ad.rho.clone(),
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn pos(&self, g: usize) -> usize {
        if g >= self.a {
            g - self.a
        } else {
            self.r + g
        }
    }

    pub fn gen_at(&self, p: usize) -> usize {
        if p < self.r {
            self.a + p
        } else {
            p - self.r
        }
    }

    pub fn one(&self) -> UElem {
        UElem::mono(MultiIndex::zero(self.n), Poly::one())
    }

    pub fn scalar(&self, f: Poly) -> UElem {
        UElem::mono(MultiIndex::zero(self.n), f)
    }

    /// The generator `ê_g` as an element.
    pub fn gen(&self, g: usize) -> UElem {
        UElem::mono(MultiIndex::unit(self.n, self.pos(g)), Poly::one())
    }

    /// Monomial `∂^β ↦ x^β` over `B`-positions.
    pub fn b_monomial(&self, beta: &MultiIndex) -> MultiIndex {
        let mut e = MultiIndex::zero(self.n);
        for k in 0..self.r {
            e.0[k] = beta.get(k);
        }
        e
    }

    /// The generator word of a normal monomial, left to right.
    pub fn word(&self, e: &MultiIndex) -> Vec<usize> {
        e.word().into_iter().map(|p| self.gen_at(p)).collect()
    }

    /// `ê_g · x^E` in normal form.
    pub fn lmul_gen_mono(&self, g: usize, e: &MultiIndex) -> UElem {
        let key = (g, e.clone());
        if let Some(v) = self.cache.read().unwrap().get(&key) {
            return v.clone();
        }
        let p = self.pos(g);
        let first = (0..self.n).find(|&q| e.get(q) > 0);
        let out = match first {
            Some(q) if q < p => {
                let rest = e.dec(q).unwrap();
                let xq = self.gen_at(q);
                let inner = self.lmul_gen_mono(g, &rest);
                let mut out = self.lmul_gen(xq, &inner);
                for k in 0..self.n {
                    let c = &self.c[g][xq][k];
                    if !c.is_zero() {
                        out.add_scaled(&self.lmul_gen_mono(k, &rest), c);
                    }
                }
                out
            }
            _ => UElem::mono(e.inc(p), Poly::one()),
        };
        self.cache.write().unwrap().insert(key, out.clone());
        out
    }

    /// `ê_g · u`, using `ê_g · (f M) = f ê_g·M + ρ(ê_g)(f) M`.
    pub fn lmul_gen(&self, g: usize, u: &UElem) -> UElem {
        let mut out = UElem::zero();
        for (e, f) in &u.terms {
            out.add_scaled(&self.lmul_gen_mono(g, e), f);
            let df = self.rho[g].apply_unchecked(f);
            out.add_term(e.clone(), df);
        }
        out
    }

    /// Normal-ordered product.
    pub fn mul(&self, x: &UElem, y: &UElem) -> UElem {
        let mut out = UElem::zero();
        for (e, f) in &x.terms {
            let mut acc = y.clone();
            for g in self.word(e).into_iter().rev() {
                acc = self.lmul_gen(g, &acc);
            }
            out.add_scaled(&acc, f);
        }
        out
    }

    /// Product of a word of generators, each optionally carrying a left
    /// coefficient; the plain way of entering arbitrary-order products.
    pub fn word_product(&self, word: &[usize]) -> UElem {
        let mut acc = self.one();
        for &g in word.iter().rev() {
            acc = self.lmul_gen(g, &acc);
        }
        acc
    }

    pub fn coset(&self, u: &UElem) -> CosetElem {
        u.coset(self.r)
    }

    /// `ê_g` acting on the quotient from the left.
    pub fn act_gen_coset(&self, g: usize, u: &CosetElem) -> CosetElem {
        self.lmul_gen(g, u).coset(self.r)
    }

    /// Shuffle comultiplication, coefficients in the left slot.
    pub fn comul(&self, u: &UElem) -> Tensor2 {
        let mut t = Tensor2::new();
        for (e, f) in &u.terms {
            for (pieces, m) in coproduct_splits(e, 2) {
                tensor_add(&mut t, (pieces[0].clone(), pieces[1].clone()), f.scale(&big(m)));
            }
        }
        t
    }

    pub fn counit(&self, u: &UElem) -> Poly {
        u.terms
            .get(&MultiIndex::zero(self.n))
            .cloned()
            .unwrap_or_else(Poly::zero)
    }
}

/// `Δ` on `S B`: `Δ∂^J = Σ_{I≤J} binom(J,I) ∂^I ⊗ ∂^{J-I}`.
pub fn sym_comul(s: &Sym) -> Tensor2 {
    let mut t = Tensor2::new();
    for (j, f) in &s.terms {
        for (pieces, m) in coproduct_splits(j, 2) {
            tensor_add(&mut t, (pieces[0].clone(), pieces[1].clone()), f.scale(&big(m)));
        }
    }
    t
}

/// `pbw(∂^J)` for every `|J| ≤ depth`, with the inverse by peeling.
pub struct PbwTable {
    pub depth: u32,
    pub uea: Uea,
    pub fwd: BTreeMap<MultiIndex, CosetElem>,
    gamma: Vec<Vec<Vec<Poly>>>,
    rho: Vec<BaseDerivation>,
    a: usize,
    r: usize,
    n: usize,
}

impl PbwTable {
    pub fn build(ad: &Adapted, depth: u32) -> PbwTable {
        let uea = Uea::new(ad);
        let mut t = PbwTable {
            depth,
            fwd: BTreeMap::new(),
            gamma: ad.gamma.clone(),
            rho: ad.rho.clone(),
            a: ad.a(),
            r: ad.r(),
            n: ad.n(),
            uea,
        };
        t.fwd.insert(MultiIndex::zero(t.r), t.uea.one());
        for deg in 1..=depth {
            for j in MultiIndex::all_of_degree(t.r, deg) {
                let mut acc = UElem::zero();
                for k in 0..t.r {
                    let jk = j.get(k);
                    if jk == 0 {
                        continue;
                    }
                    let lower = j.dec(k).unwrap();
                    let mut piece = t.uea.act_gen_coset(t.a + k, &t.fwd[&lower]);
                    let nab = t.nabla_mono(t.a + k, &lower);
                    piece = piece.minus(&t.pbw_known(&nab));
                    acc.add_scaled(&piece, &Poly::int(jk as i64));
                }
                let inv = BigRational::new(1.into(), deg.into());
                t.fwd.insert(j, acc.scale(&inv));
            }
        }
        t
    }

    /// Rebuilds a table from stored entries (used by on-disk caches).
    pub fn from_entries(ad: &Adapted, depth: u32, fwd: BTreeMap<MultiIndex, CosetElem>) -> PbwTable {
        PbwTable {
            depth,
            uea: Uea::new(ad),
            fwd,
            gamma: ad.gamma.clone(),
            rho: ad.rho.clone(),
            a: ad.a(),
            r: ad.r(),
            n: ad.n(),
        }
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn a(&self) -> usize {
        self.a
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `∇_{ê_l} ∂^I = Σ_j I_j Σ_m Γ[l][j][m] ∂^{I-e_j+e_m}`.
    pub fn nabla_mono(&self, l: usize, i: &MultiIndex) -> Sym {
        let mut out = Sym::zero();
        for jj in 0..self.r {
            let ij = i.get(jj);
            if ij == 0 {
                continue;
            }
            let base = i.dec(jj).unwrap();
            for m in 0..self.r {
                let g = &self.gamma[l][jj][m];
                if !g.is_zero() {
                    out.add_term(base.inc(m), g * &Poly::int(ij as i64));
                }
            }
        }
        out
    }

    /// `∇_{ê_l}` on `S B`, including the anchor on coefficients.
    pub fn nabla(&self, l: usize, s: &Sym) -> Sym {
        let mut out = Sym::zero();
        for (i, f) in &s.terms {
            out.add_term(i.clone(), self.rho[l].apply_unchecked(f));
            out.add_assign(&self.nabla_mono(l, i).scale_poly(f));
        }
        out
    }

    fn pbw_known(&self, s: &Sym) -> UElem {
        let mut out = UElem::zero();
        for (j, f) in &s.terms {
            out.add_scaled(&self.fwd[j], f);
        }
        out
    }

    pub fn pbw(&self, s: &Sym) -> Result<CosetElem, UeaError> {
        if let Some(d) = s.degree() {
            if d > self.depth {
                return Err(UeaError::Overflow {
                    degree: d,
                    depth: self.depth,
                });
            }
        }
        Ok(self.pbw_known(s))
    }

    pub fn pbw_mono(&self, j: &MultiIndex) -> &CosetElem {
        &self.fwd[j]
    }

    pub fn pbw_inv(&self, u: &CosetElem) -> Result<Sym, UeaError> {
        if !u.is_coset(self.r) {
            return Err(UeaError::NotCoset);
        }
        let mut rest = u.clone();
        let mut out = Sym::zero();
        while let Some(d) = rest.degree() {
            if d > self.depth {
                return Err(UeaError::Overflow {
                    degree: d,
                    depth: self.depth,
                });
            }
            let top: Vec<(MultiIndex, Poly)> = rest
                .terms
                .iter()
                .filter(|(e, _)| e.abs() == d)
                .map(|(e, c)| (UElem::beta_of(e, self.r), c.clone()))
                .collect();
            for (beta, f) in top {
                rest = rest.minus(&{
                    let mut x = UElem::zero();
                    x.add_scaled(&self.fwd[&beta], &f);
                    x
                });
                out.add_term(beta, f);
            }
        }
        Ok(out)
    }

    /// `∇⚡_{ê_l} s = pbw⁻¹(ê_l · pbw(s))`.
    pub fn nabla_lightning(&self, l: usize, s: &Sym) -> Result<Sym, UeaError> {
        let p = self.pbw(s)?;
        let lp = self.uea.act_gen_coset(l, &p);
        self.pbw_inv(&lp)
    }

    /// `Θ(ê_l; s) = ∇⚡_l s - ∇_l s - q(ê_l) ⊙ s`.
    pub fn theta(&self, l: usize, s: &Sym) -> Result<Sym, UeaError> {
        let mut out = self.nabla_lightning(l, s)?;
        out.sub_assign(&self.nabla(l, s));
        if l >= self.a {
            out.sub_assign(&s.mul_generator(l - self.a));
        }
        Ok(out)
    }

    /// `ι_{ê_l} Ξ(χ_k) = Σ_I (1/I!) ⟨Θ(ê_l; ∂^I), χ_k⟩ χ^I`, for all `k` at once.
    pub fn xi_components(&self, alg: &Alg, l: usize) -> Result<Vec<MixedForm>, UeaError> {
        self.dualise(alg, |i| self.theta(l, &Sym::mono(i.clone(), Poly::one())), 1)
    }

    /// Transposes an operator on `S B` against the pairing `⟨∂^I, χ^J⟩ = I! δ`:
    /// component `k` is `Σ_I (sign/I!) ⟨op(∂^I), χ_k⟩ χ^I`.
    fn dualise(
        &self,
        alg: &Alg,
        op: impl Fn(&MultiIndex) -> Result<Sym, UeaError>,
        sign: i64,
    ) -> Result<Vec<MixedForm>, UeaError> {
        let mut out = vec![MixedForm::zero(); self.r];
        for i in alg.chi_monomials(alg.t) {
            let v = op(&i)?;
            let w = BigRational::new(sign.into(), i.factorial());
            for (k, slot) in out.iter_mut().enumerate() {
                let c = v.coeff(&MultiIndex::unit(self.r, k));
                if c.is_zero() {
                    continue;
                }
                slot.add_term(
                    Key {
                        lam: 0,
                        chi: i.clone(),
                        val: (),
                    },
                    c.scale(&w),
                );
            }
        }
        Ok(out)
    }

    /// `Ξ∇` as a one-form valued vertical field, up to `Ŝ`-degree `alg.t`.
    pub fn xi(&self, alg: &Alg) -> Result<PolyForm, UeaError> {
        if self.depth < alg.t + 1 {
            return Err(UeaError::Overflow {
                degree: alg.t + 1,
                depth: self.depth,
            });
        }
        let mut out = PolyForm::zero();
        for l in 0..self.n {
            for (k, comp) in self.xi_components(alg, l)?.into_iter().enumerate() {
                out.add_assign(&alg.lmul(&alg.lam(l), &comp).attach(&Theta(1 << k)));
            }
        }
        Ok(out)
    }

    /// `∇⚡_{ê_l} χ_m = -Σ_J (1/J!) ⟨∇⚡_l ∂^J, χ_m⟩ χ^J`, for all `m`.
    pub fn dual_lightning_chi(&self, alg: &Alg, l: usize) -> Result<Vec<MixedForm>, UeaError> {
        self.dualise(alg, |j| self.nabla_lightning(l, &Sym::mono(j.clone(), Poly::one())), -1)
    }

    /// `d_L^{∇⚡}` on `Λ L∨ ⊗ Ŝ B∨` as a derivation.
    pub fn d_lightning(&self, ad: &Adapted, alg: &Alg) -> Result<Deriv, UeaError> {
        if self.depth < alg.t + 1 {
            return Err(UeaError::Overflow {
                degree: alg.t + 1,
                depth: self.depth,
            });
        }
        let mut d = ad.d_nabla(alg);
        d.theta.clear();
        for c in d.chi.iter_mut() {
            *c = MixedForm::zero();
        }
        for l in 0..self.n {
            for (m, comp) in self.dual_lightning_chi(alg, l)?.into_iter().enumerate() {
                d.chi[m].add_assign(&alg.lmul(&alg.lam(l), &comp));
            }
        }
        Ok(d)
    }

    /// Checks `pbw⁻¹∘pbw = id`, `pbw∘pbw⁻¹ = id` on normal cosets and
    /// `Δ∘pbw = (pbw⊗pbw)∘Δ` on every `∂^J` with `|J| ≤ max`.
    /// Returns the number of monomials checked.
    pub fn self_check(&self, max: u32) -> Result<usize, UeaError> {
        let fail = |what, j: &MultiIndex| UeaError::Identity { what, index: j.0.to_vec() };
        let js = MultiIndex::all_up_to(self.r, max.min(self.depth));
        for j in &js {
            let s = Sym::mono(j.clone(), Poly::one());
            let img = self.pbw_mono(j);
            if self.pbw_inv(img)? != s {
                return Err(fail("pbw⁻¹∘pbw", j));
            }
            let c = UElem::mono(self.uea.b_monomial(j), Poly::one());
            if self.pbw(&self.pbw_inv(&c)?)? != c {
                return Err(fail("pbw∘pbw⁻¹", j));
            }
            let mut rhs = Tensor2::new();
            for ((i, k), w) in sym_comul(&s) {
                for (e1, f1) in &self.pbw_mono(&i).terms {
                    for (e2, f2) in &self.pbw_mono(&k).terms {
                        tensor_add(&mut rhs, (e1.clone(), e2.clone()), &(&w * f1) * f2);
                    }
                }
            }
            if self.uea.comul(img) != rhs {
                return Err(fail("Δ∘pbw", j));
            }
        }
        Ok(js.len())
    }

    /// Stable textual dump of the forward table.
    pub fn entries(&self) -> Vec<(Vec<u32>, Vec<(Vec<u32>, String)>)> {
        self.fwd
            .iter()
            .map(|(j, u)| {
                (
                    j.0.to_vec(),
                    u.terms.iter().map(|(e, c)| (e.0.to_vec(), c.to_string())).collect(),
                )
            })
            .collect()
    }
}
