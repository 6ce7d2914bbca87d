//! Vertical polyvector fields and `(r', s')`-tensors with form coefficients.
//!
//! Polyvectors are `Form<Theta>`: `θ_k` stands for `∂_k` and the
//! `Λ^{k+1} B` leg sits to the right of the scalar part. The Schouten
//! bracket uses right derivatives in `θ`, which gives
//! `[X, Y]` = commutator on vector fields, `[X, f] = X(f)` and Leibniz in
//! the second slot with Gerstenhaber degree `k` on `Λ^{k+1} B`.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use smallvec::SmallVec;
use thiserror::Error;

use crate::coeffs::{rat, Mono, MultiIndex, Poly, Rational};
use crate::fedosov::{FedosovError, FedosovResult, matched_lie_derivative};
use crate::forms::{
    hpl_perturb, op, Alg, ContractionData, ContractionError, Deriv, Form, Key, MixedForm, Op, Orientation,
    PolyForm, Theta, Value,
};
use crate::liepair::{Adapted, CeAlgebroid};
use crate::linalg;
use crate::uea::PbwTable;

#[derive(Debug, Error, Clone)]
pub enum TpolyError {
    #[error("truncation mismatch: {left} vs {right}")]
    Truncation { left: u32, right: u32 },
    #[error("not a cocycle: {witness}")]
    NotCocycle { witness: String },
    #[error("{0}")]
    Unsupported(String),
    #[error("{0}")]
    Check(String),
    #[error(transparent)]
    Fedosov(#[from] FedosovError),
    #[error(transparent)]
    Contraction(#[from] ContractionError),
}

/// A polyvector-valued form together with the algebra it is truncated in.
#[derive(Clone, PartialEq)]
pub struct PolyVectorForm {
    pub alg: Alg,
    pub form: PolyForm,
}

impl PolyVectorForm {
    pub fn new(alg: Alg, form: PolyForm) -> Self {
        let form = alg.truncate(&form);
        PolyVectorForm { alg, form }
    }

    /// `k` with values in `Λ^{k+1} B`, when homogeneous.
    pub fn arity(&self) -> Option<i32> {
        let mut it = self.form.terms.keys().map(|k| k.val.degree() as i32 - 1);
        let first = it.next()?;
        it.all(|d| d == first).then_some(first)
    }

    pub fn schouten(&self, other: &PolyVectorForm) -> Result<PolyVectorForm, TpolyError> {
        self.same_trunc(other)?;
        Ok(PolyVectorForm::new(self.alg, schouten(&self.alg, &self.form, &other.form)))
    }

    pub fn wedge(&self, other: &PolyVectorForm) -> Result<PolyVectorForm, TpolyError> {
        self.same_trunc(other)?;
        Ok(PolyVectorForm::new(self.alg, self.alg.mul(&self.form, &other.form)))
    }

    fn same_trunc(&self, other: &PolyVectorForm) -> Result<(), TpolyError> {
        if self.alg.t != other.alg.t {
            return Err(TpolyError::Truncation {
                left: self.alg.t,
                right: other.alg.t,
            });
        }
        Ok(())
    }
}

impl fmt::Debug for PolyVectorForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.form)
    }
}

/// `∂/∂χ_k` on the scalar part.
pub fn dchi<V: Value>(k: usize, f: &Form<V>) -> Form<V> {
    let mut out = Form::zero();
    for (key, c) in &f.terms {
        let jk = key.chi.get(k);
        if jk == 0 {
            continue;
        }
        out.add_term(
            Key {
                lam: key.lam,
                chi: key.chi.dec(k).unwrap(),
                val: key.val.clone(),
            },
            c.scale(&rat(jk as i64)),
        );
    }
    out
}

/// Right derivative `F ∂⃖/∂θ_k`.
pub fn rdtheta(k: usize, f: &PolyForm) -> PolyForm {
    let bit = 1u32 << k;
    let mut out = Form::zero();
    for (key, c) in &f.terms {
        if key.val.0 & bit == 0 {
            continue;
        }
        let above = (key.val.0 & !((bit << 1) - 1)).count_ones();
        let c = if above % 2 == 1 { -c } else { c.clone() };
        out.add_term(
            Key {
                lam: key.lam,
                chi: key.chi.clone(),
                val: Theta(key.val.0 ^ bit),
            },
            c,
        );
    }
    out
}

fn parity_split(f: &PolyForm) -> [PolyForm; 2] {
    [f.filter(|k| k.parity() == 0), f.filter(|k| k.parity() == 1)]
}

/// `[F, G] = Σ_k (F∂⃖/∂θ_k)(∂G/∂χ_k) - (-1)^{(|F|-1)(|G|-1)} (G∂⃖/∂θ_k)(∂F/∂χ_k)`,
/// with `|·|` the total parity (`λ` count plus `θ` count).
pub fn schouten(alg: &Alg, f: &PolyForm, g: &PolyForm) -> PolyForm {
    let mut out = PolyForm::zero();
    let fs = parity_split(f);
    let gs = parity_split(g);
    for (pf, ff) in fs.iter().enumerate() {
        if ff.is_zero() {
            continue;
        }
        for (pg, gg) in gs.iter().enumerate() {
            if gg.is_zero() {
                continue;
            }
            let swap = if (pf + 1) * (pg + 1) % 2 == 1 { rat(1) } else { rat(-1) };
            for k in 0..alg.r {
                out.add_assign(&alg.mul(&rdtheta(k, ff), &dchi(k, gg)));
                out.add_scaled(&alg.mul(&rdtheta(k, gg), &dchi(k, ff)), &swap);
            }
        }
    }
    out
}

/// Tensor legs `(B∨)^{⊗r'} ⊗ B^{⊗s'}`: `lower[i] = j` is `χ_j`, `upper[i] = k` is `∂_k`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Legs {
    pub lower: SmallVec<[u8; 2]>,
    pub upper: SmallVec<[u8; 2]>,
}

impl Legs {
    pub fn new(lower: &[usize], upper: &[usize]) -> Self {
        Legs {
            lower: lower.iter().map(|&j| j as u8).collect(),
            upper: upper.iter().map(|&k| k as u8).collect(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.lower.len(), self.upper.len())
    }

    /// Every leg assignment of shape `(rs, ss)` over `r` fibre directions.
    pub fn all(r: usize, rs: usize, ss: usize) -> Vec<Legs> {
        let mut out = vec![Legs::default()];
        for _ in 0..rs {
            out = out
                .into_iter()
                .flat_map(|l| {
                    (0..r).map(move |j| {
                        let mut l = l.clone();
                        l.lower.push(j as u8);
                        l
                    })
                })
                .collect();
        }
        for _ in 0..ss {
            out = out
                .into_iter()
                .flat_map(|l| {
                    (0..r).map(move |k| {
                        let mut l = l.clone();
                        l.upper.push(k as u8);
                        l
                    })
                })
                .collect();
        }
        out
    }
}

impl fmt::Debug for Legs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{:?}{:?}", self.lower.as_slice(), self.upper.as_slice())
    }
}

impl Value for Legs {
    fn parity(&self) -> u32 {
        0
    }
}

pub type TensorForm = Form<Legs>;

/// How a derivation acts on single legs: `up[k][j]` is the coefficient of
/// `∂_j` in the image of `∂_k`, `low[j][m]` that of `χ_m` in the image of `χ_j`.
#[derive(Clone, Debug)]
pub struct LegAction {
    pub up: Vec<Vec<MixedForm>>,
    pub low: Vec<Vec<MixedForm>>,
}

impl LegAction {
    /// Action of `L_D` for a derivation `D` of the function algebra:
    /// `∂_k ↦ -Σ_j ∂_k(Dχ_j) ∂_j`, and on `χ_j` the dual
    /// `χ_j ↦ Σ_m ∂_m(Dχ_j) χ_m`.
    pub fn of_deriv(alg: &Alg, d: &Deriv) -> Self {
        let r = alg.r;
        let up = (0..r)
            .map(|k| (0..r).map(|j| dchi(k, &d.chi[j]).neg()).collect())
            .collect();
        let low = (0..r)
            .map(|j| (0..r).map(|m| dchi(m, &d.chi[j])).collect())
            .collect();
        LegAction { up, low }
    }

    /// The `A`-connection of Bott type: `∂_k ↦ Σ_{i<a} λ^i Γ[i][k][j] ∂_j`.
    pub fn bott(ad: &Adapted, alg: &Alg) -> Self {
        let r = alg.r;
        let coeff = |k: usize, j: usize| -> MixedForm {
            let mut f = MixedForm::zero();
            for i in 0..alg.a {
                let g = &ad.gamma[i][k][j];
                if !g.is_zero() {
                    f.add_assign(&alg.lam(i).scale_poly(g));
                }
            }
            f
        };
        let up = (0..r).map(|k| (0..r).map(|j| coeff(k, j)).collect()).collect();
        let low = (0..r)
            .map(|j| (0..r).map(|m| coeff(m, j).neg()).collect())
            .collect();
        LegAction { up, low }
    }

    pub fn theta_images(&self, alg: &Alg) -> Vec<PolyForm> {
        (0..alg.r)
            .map(|k| {
                let mut f = PolyForm::zero();
                for j in 0..alg.r {
                    f.add_assign(&self.up[k][j].attach(&Theta(1 << j)));
                }
                f
            })
            .collect()
    }

    /// Sum over legs of the leg-wise images; scalar coefficients move to the left.
    pub fn on_legs(&self, legs: &Legs) -> TensorForm {
        let mut out = TensorForm::zero();
        for (t, &j) in legs.lower.iter().enumerate() {
            for (m, c) in self.low[j as usize].iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let mut l = legs.clone();
                l.lower[t] = m as u8;
                out.add_assign(&c.attach(&l));
            }
        }
        for (t, &k) in legs.upper.iter().enumerate() {
            for (j, c) in self.up[k as usize].iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let mut l = legs.clone();
                l.upper[t] = j as u8;
                out.add_assign(&c.attach(&l));
            }
        }
        out
    }
}

/// A derivation together with its action on tensor legs.
#[derive(Clone, Debug)]
pub struct TensorDeriv {
    pub deriv: Deriv,
    pub legs: LegAction,
}

impl TensorDeriv {
    pub fn apply_poly(&self, alg: &Alg, f: &PolyForm) -> PolyForm {
        self.deriv.apply_poly(alg, f)
    }

    pub fn apply_tensor(&self, alg: &Alg, f: &TensorForm) -> TensorForm {
        self.deriv.apply_with(alg, f, &|l| self.legs.on_legs(l))
    }
}

/// `L_Q` on polyvectors and tensors.
pub fn lq(res: &FedosovResult) -> TensorDeriv {
    let alg = res.alg;
    let legs = LegAction::of_deriv(&alg, &res.q);
    let mut deriv = res.q.clone();
    deriv.theta = legs.theta_images(&alg);
    TensorDeriv { deriv, legs }
}

/// `d_A^Bott` (on polyvectors) and `d_A^{∇Bott}` (on tensors).
pub fn d_bott(ad: &Adapted, alg: &Alg) -> TensorDeriv {
    let legs = LegAction::bott(ad, alg);
    let mut deriv = ad.ce_deriv(alg, CeAlgebroid::A);
    deriv.theta = legs.theta_images(alg);
    TensorDeriv { deriv, legs }
}

pub fn lie_derivative_q(res: &FedosovResult, p: &PolyForm) -> PolyForm {
    lq(res).apply_poly(&res.alg, p)
}

pub fn lie_derivative_q_tensor(res: &FedosovResult, t: &TensorForm) -> TensorForm {
    lq(res).apply_tensor(&res.alg, t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TpolyKind {
    /// Values in `Λ^{k+1} B`, `k ≥ -1`.
    Polyvector(i32),
    /// Values in `(B∨)^{⊗r'} ⊗ B^{⊗s'}`.
    Tensor(usize, usize),
}

/// A perturbed contraction of the vertical complex onto `Λ A∨ ⊗ (values)`.
pub struct TpolyContraction<V: Value> {
    pub data: ContractionData<V>,
    pub base: ContractionData<V>,
    pub rho: Op<V>,
    pub small: Op<V>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TpolyReport {
    pub kind: TpolyKind,
    pub big_checked: usize,
    pub small_checked: usize,
}

/// The contraction on all polyvector degrees at once (the operators do not
/// see the `θ`-degree).
pub fn polyvector_contraction(res: &FedosovResult) -> Result<TpolyContraction<Theta>, TpolyError> {
    let alg = res.alg;
    let l = lq(res);
    let base = ContractionData::<Theta>::base(alg, Orientation::MinusDelta);
    let rho: Op<Theta> = op(move |x: &PolyForm| l.apply_poly(&alg, x).plus(&alg.delta(x)));
    let probe = polyvector_basis(&alg, alg.n as u32, res.n, None);
    let data = hpl_perturb(&base, rho.clone(), &probe)?;
    let b = d_bott(&res.ad, &alg);
    let small: Op<Theta> = op(move |x: &PolyForm| b.apply_poly(&alg, x));
    Ok(TpolyContraction { data, base, rho, small })
}

pub fn tensor_contraction(res: &FedosovResult, rs: usize, ss: usize) -> Result<TpolyContraction<Legs>, TpolyError> {
    let alg = res.alg;
    let l = lq(res);
    let base = ContractionData::<Legs>::base(alg, Orientation::MinusDelta);
    let rho: Op<Legs> = op(move |x: &TensorForm| l.apply_tensor(&alg, x).plus(&alg.delta(x)));
    let probe = tensor_basis(&alg, alg.n as u32, res.n, rs, ss);
    let data = hpl_perturb(&base, rho.clone(), &probe)?;
    let b = d_bott(&res.ad, &alg);
    let small: Op<Legs> = op(move |x: &TensorForm| b.apply_tensor(&alg, x));
    Ok(TpolyContraction { data, base, rho, small })
}

/// `λ^I χ^J θ^K` with `|I| ≤ lam_max`, `|J| ≤ chi_max`, `|K| = k + 1` (all `K` if `None`).
pub fn polyvector_basis(alg: &Alg, lam_max: u32, chi_max: u32, k: Option<i32>) -> Vec<PolyForm> {
    let thetas: Vec<u32> = (0..1u32 << alg.r)
        .filter(|m| k.is_none_or(|k| m.count_ones() as i32 == k + 1))
        .collect();
    let mut out = Vec::new();
    for f in alg.basis(lam_max, chi_max) {
        for &m in &thetas {
            out.push(f.attach(&Theta(m)));
        }
    }
    out
}

pub fn small_polyvector_basis(alg: &Alg, k: Option<i32>) -> Vec<PolyForm> {
    let thetas: Vec<u32> = (0..1u32 << alg.r)
        .filter(|m| k.is_none_or(|k| m.count_ones() as i32 == k + 1))
        .collect();
    let mut out = Vec::new();
    for f in alg.a_basis(alg.a as u32) {
        for &m in &thetas {
            out.push(f.attach(&Theta(m)));
        }
    }
    out
}

pub fn tensor_basis(alg: &Alg, lam_max: u32, chi_max: u32, rs: usize, ss: usize) -> Vec<TensorForm> {
    let legs = Legs::all(alg.r, rs, ss);
    let mut out = Vec::new();
    for f in alg.basis(lam_max, chi_max) {
        for l in &legs {
            out.push(f.attach(l));
        }
    }
    out
}

fn small_tensor_basis(alg: &Alg, rs: usize, ss: usize) -> Vec<TensorForm> {
    let legs = Legs::all(alg.r, rs, ss);
    let mut out = Vec::new();
    for f in alg.a_basis(alg.a as u32) {
        for l in &legs {
            out.push(f.attach(l));
        }
    }
    out
}

fn check_transfer<V: Value + 'static>(
    c: &TpolyContraction<V>,
    big: &[Form<V>],
    small: &[Form<V>],
    deg: u32,
) -> Result<(), TpolyError> {
    c.data.verify(big, small, deg)?;
    for x in small {
        let want = (c.small)(x);
        if (c.data.small_d)(x) != want {
            return Err(TpolyError::Check(format!("transferred differential ≠ Bott on {}", x.render())));
        }
        let unperturbed = (c.base.sigma)(&(c.rho)(&(c.base.tau)(x)));
        if unperturbed != want {
            return Err(TpolyError::Check(format!("σ̃ L_ϱ τ̃ ≠ Bott on {}", x.render())));
        }
    }
    Ok(())
}

/// Builds and verifies the contraction of the given kind: the five
/// identities on a basis with `Λ`-degree ≤ 3 and `Ŝ`-degree ≤ N, and the
/// transferred differential equal to the Bott differential.
pub fn contract_tpoly(res: &FedosovResult, kind: TpolyKind) -> Result<TpolyReport, TpolyError> {
    let alg = res.alg;
    let (nb, ns) = match kind {
        TpolyKind::Polyvector(k) => {
            let c = polyvector_contraction(res)?;
            let big = polyvector_basis(&alg, 3, res.n, Some(k));
            let small = small_polyvector_basis(&alg, Some(k));
            check_transfer(&c, &big, &small, res.n)?;
            (big.len(), small.len())
        }
        TpolyKind::Tensor(rs, ss) => {
            let c = tensor_contraction(res, rs, ss)?;
            let big = tensor_basis(&alg, 3, res.n, rs, ss);
            let small = small_tensor_basis(&alg, rs, ss);
            check_transfer(&c, &big, &small, res.n)?;
            (big.len(), small.len())
        }
    };
    Ok(TpolyReport {
        kind,
        big_checked: nb,
        small_checked: ns,
    })
}

/// `pr₀([∇⚡_a, ∂_j]) = ∇^Bott_a ∂_j` for every `A`-direction `a` and every `j`,
/// with `∇⚡_a` read as the vertical field `χ_m ↦ ∇⚡_a χ_m`.
pub fn lightning_bott_check(ad: &Adapted, table: &PbwTable, alg: &Alg) -> Result<usize, TpolyError> {
    let mut checked = 0;
    for a in 0..alg.a {
        let comps = table
            .dual_lightning_chi(alg, a)
            .map_err(|e| TpolyError::Fedosov(e.into()))?;
        let field = crate::forms::vvf_from_components(alg, &comps);
        for j in 0..alg.r {
            let br = schouten(alg, &field, &alg.theta(j));
            let pr0 = br.filter(|k| k.chi.is_zero());
            let mut want = PolyForm::zero();
            for m in 0..alg.r {
                let g = &ad.gamma[a][j][m];
                if !g.is_zero() {
                    want.add_assign(&alg.scalar(g.clone()).attach(&Theta(1 << m)));
                }
            }
            if pr0 != want {
                return Err(TpolyError::Check(format!(
                    "pr₀[∇⚡_{a}, ∂_{j}] = {} but Bott gives {}",
                    pr0.render(),
                    want.render()
                )));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// Betti numbers of a total complex, with truncation metadata.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BettiReport {
    /// Total degree to cohomology dimension.
    pub betti: BTreeMap<i32, usize>,
    /// Total degree to cochain dimension.
    pub dims: BTreeMap<i32, usize>,
    /// `(p, q)` to the cohomology of that block; the total complex is the
    /// direct sum of these when the vertical differential vanishes.
    pub blocks: BTreeMap<(u32, i32), usize>,
    /// True when no truncation was needed.
    pub exact: bool,
    /// The truncation parameter the numbers refer to, if any.
    pub truncation: Option<u32>,
    /// Betti numbers at each truncation computed, in increasing order.
    pub family: Vec<(u32, BTreeMap<i32, usize>)>,
    /// Set only when the last two truncations in `family` agree.
    pub stabilized: bool,
}

impl BettiReport {
    pub fn euler_characteristic(&self) -> (i64, i64) {
        let sgn = |d: i32| if d.rem_euclid(2) == 0 { 1 } else { -1 };
        let chain = self.dims.iter().map(|(&d, &n)| sgn(d) * n as i64).sum();
        let coh = self.betti.iter().map(|(&d, &n)| sgn(d) * n as i64).sum();
        (chain, coh)
    }
}

type Coord = (u32, u32, Mono);

fn coords(f: &PolyForm) -> BTreeMap<Coord, Rational> {
    let mut out = BTreeMap::new();
    for (k, c) in &f.terms {
        for (m, v) in c.terms() {
            out.insert((k.lam, k.val.0, m.clone()), v.clone());
        }
    }
    out
}

fn blocks(alg: &Alg, max_degree: i32) -> Vec<(u32, i32)> {
    let mut out = Vec::new();
    for q in -1..alg.r as i32 {
        for p in 0..=alg.a as u32 {
            if p as i32 + q <= max_degree + 1 {
                out.push((p, q));
            }
        }
    }
    out
}

/// Basis of `Λ^p A∨ ⊗ Λ^{q+1} B` with coefficient monomials of degree ≤ `poly`.
pub fn small_block_basis(alg: &Alg, p: u32, q: i32, poly: u32) -> Vec<PolyForm> {
    let monos: Vec<Mono> = if alg.d == 0 {
        vec![Mono::one()]
    } else {
        MultiIndex::all_up_to(alg.d, poly)
            .into_iter()
            .map(|e| Mono::from_exps(&e.0))
            .collect()
    };
    let mut out = Vec::new();
    for lam in alg.a_masks(p).into_iter().filter(|l| l.count_ones() == p) {
        for th in (0..1u32 << alg.r).filter(|m| m.count_ones() as i32 == q + 1) {
            for m in &monos {
                out.push(Form::term(
                    lam,
                    alg.chi0(),
                    Theta(th),
                    Poly::monomial(m.clone(), Rational::from_integer(1.into())),
                ));
            }
        }
    }
    out
}

type Betti = (BTreeMap<i32, usize>, BTreeMap<i32, usize>, BTreeMap<(u32, i32), usize>);

fn betti_at(ad: &Adapted, max_degree: i32, poly: u32) -> Betti {
    let alg = ad.alg(0);
    let d = d_bott(ad, &alg);
    let bl = blocks(&alg, max_degree);
    let ranks: BTreeMap<(u32, i32), (usize, usize)> = bl
        .par_iter()
        .map(|&(p, q)| {
            let basis = small_block_basis(&alg, p, q, poly);
            let images: Vec<_> = basis.iter().map(|b| coords(&d.apply_poly(&alg, b))).collect();
            ((p, q), (basis.len(), linalg::rank_of_images(&images)))
        })
        .collect();
    let mut betti = BTreeMap::new();
    let mut dims = BTreeMap::new();
    let mut block = BTreeMap::new();
    for (&(p, q), &(dim, rk)) in &ranks {
        let deg = p as i32 + q;
        if deg > max_degree {
            continue;
        }
        let prev = if p == 0 { 0 } else { ranks.get(&(p - 1, q)).map_or(0, |x| x.1) };
        *betti.entry(deg).or_insert(0) += dim - rk - prev;
        *dims.entry(deg).or_insert(0) += dim;
        block.insert((p, q), dim - rk - prev);
    }
    (betti, dims, block)
}

/// Cohomology of `(Λ A∨ ⊗ X_poly, d_A^Bott)` by total degree `p + q`
/// (`q ≥ -1`); exact when the base is a point, otherwise computed on
/// polynomial-degree blocks `poly` and `poly + 1` and flagged.
pub fn cohomology_tpoly(ad: &Adapted, max_degree: i32, poly: u32) -> BettiReport {
    if ad.d() == 0 {
        let (betti, dims, blocks) = betti_at(ad, max_degree, 0);
        return BettiReport {
            betti,
            dims,
            blocks,
            exact: true,
            truncation: None,
            family: Vec::new(),
            stabilized: false,
        };
    }
    let family: Vec<(u32, Betti)> = [poly, poly + 1]
        .iter()
        .map(|&p| (p, betti_at(ad, max_degree, p)))
        .collect();
    let stabilized = family[0].1 .0 == family[1].1 .0;
    let (p, (betti, dims, blocks)) = family[1].clone();
    BettiReport {
        betti,
        dims,
        blocks,
        exact: false,
        truncation: Some(p),
        family: family.into_iter().map(|(p, b)| (p, b.0)).collect(),
        stabilized,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassOp {
    Bracket,
    Wedge,
}

/// Transports small-side cocycles upstairs, multiplies there and projects back.
pub struct Gerstenhaber {
    pub alg: Alg,
    pub n: u32,
    pub contraction: TpolyContraction<Theta>,
    bott: TensorDeriv,
}

impl Gerstenhaber {
    pub fn new(res: &FedosovResult) -> Result<Self, TpolyError> {
        Ok(Gerstenhaber {
            alg: res.alg,
            n: res.n,
            contraction: polyvector_contraction(res)?,
            bott: d_bott(&res.ad, &res.alg),
        })
    }

    pub fn d_small(&self, x: &PolyForm) -> PolyForm {
        self.bott.apply_poly(&self.alg, x)
    }

    pub fn tau(&self, x: &PolyForm) -> PolyForm {
        (self.contraction.data.tau)(x)
    }

    pub fn sigma(&self, x: &PolyForm) -> PolyForm {
        (self.contraction.data.sigma)(x)
    }

    pub fn upstairs(&self, op: ClassOp, x: &PolyForm, y: &PolyForm) -> PolyForm {
        match op {
            ClassOp::Bracket => schouten(&self.alg, x, y),
            ClassOp::Wedge => self.alg.mul(x, y),
        }
    }

    /// `σ̆(τ̆P ⋄ τ̆Q)` for cocycles `P`, `Q`; the result is checked to be a cocycle.
    pub fn product(&self, op: ClassOp, p: &PolyForm, q: &PolyForm) -> Result<PolyForm, TpolyError> {
        for x in [p, q] {
            if !self.d_small(x).is_zero() {
                return Err(TpolyError::NotCocycle { witness: x.render() });
            }
        }
        let out = self.sigma(&self.upstairs(op, &self.tau(p), &self.tau(q)));
        if !self.d_small(&out).is_zero() {
            return Err(TpolyError::Check(format!("product is not a cocycle: {}", out.render())));
        }
        Ok(out)
    }

    /// Whether `x - y` is a coboundary; needs a point base.
    pub fn same_class(&self, x: &PolyForm, y: &PolyForm) -> Result<bool, TpolyError> {
        if self.alg.d != 0 {
            return Err(TpolyError::Unsupported("class comparison needs a point base".into()));
        }
        let diff = coords(&x.minus(y));
        if diff.is_empty() {
            return Ok(true);
        }
        let images: Vec<_> = small_polyvector_basis(&self.alg, None)
            .iter()
            .map(|b| coords(&self.d_small(b)))
            .collect();
        Ok(linalg::in_span(&images, &diff))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchedTpolyReport {
    pub brackets: usize,
    pub products: usize,
    pub actions: usize,
}

/// `[b, c]` for `b, c ∈ Γ(B)` given as `θ`-degree-one small elements with
/// function coefficients; only meaningful for matched pairs.
pub fn b_bracket(ad: &Adapted, alg: &Alg, b: &PolyForm, c: &PolyForm) -> PolyForm {
    let section = |x: &PolyForm| -> Vec<Poly> {
        let mut s = vec![Poly::zero(); alg.n];
        for (k, v) in &x.terms {
            let idx = k.val.0.trailing_zeros() as usize;
            s[alg.a + idx] += v;
        }
        s
    };
    let br = ad.bracket(&section(b), &section(c));
    let mut out = PolyForm::zero();
    for m in 0..alg.r {
        out.add_assign(&alg.scalar(br[alg.a + m].clone()).attach(&Theta(1 << m)));
    }
    out
}

/// The three matched-pair identities for the transported generators:
/// `[τ̆b, τ̆c] = τ̆[b, c]`, `τ̆(ξ b) = τ̆(ξ) τ̆(b)`, `[τ̆b, τ̆ξ] = τ̆(∇^Bott_b ξ)`,
/// plus `σ̃` turning brackets and products of transported generators back
/// into the small-side ones.
pub fn matched_tpoly_identities(res: &FedosovResult, g: &Gerstenhaber) -> Result<MatchedTpolyReport, TpolyError> {
    let ad = &res.ad;
    if !ad.matched {
        return Err(TpolyError::Unsupported("pair is not matched".into()));
    }
    let alg = g.alg;
    let n = res.n;
    let fail = |what: &str, x: &PolyForm, y: &PolyForm| {
        TpolyError::Check(format!("{what} fails on ({}, {})", x.render(), y.render()))
    };
    let bs: Vec<PolyForm> = (0..alg.r).map(|k| alg.theta(k)).collect();
    let mut xis: Vec<PolyForm> = alg.a_basis(alg.a as u32).into_iter().map(|f| f.attach(&Theta(0))).collect();
    if alg.d > 0 {
        xis.extend((0..alg.d).map(|l| alg.scalar(Poly::var(l)).attach(&Theta(0))));
    }
    let mut rep = MatchedTpolyReport {
        brackets: 0,
        products: 0,
        actions: 0,
    };
    for b in &bs {
        for c in &bs {
            let bc = b_bracket(ad, &alg, b, c);
            let lhs = schouten(&alg, &g.tau(b), &g.tau(c));
            if !lhs.eq_upto(&g.tau(&bc), n) {
                return Err(fail("[τ̆b, τ̆c] = τ̆[b, c]", b, c));
            }
            if g.sigma(&lhs) != bc {
                return Err(fail("σ̃[τ̆b, τ̆c] = [b, c]", b, c));
            }
            rep.brackets += 1;
        }
    }
    for (k, b) in bs.iter().enumerate() {
        let lk = matched_lie_derivative(ad, &alg, k, false);
        for xi in &xis {
            let xb = alg.mul(xi, b);
            let lhs = g.tau(&xb);
            let prod = alg.mul(&g.tau(xi), &g.tau(b));
            if !lhs.eq_upto(&prod, n) {
                return Err(fail("τ̆(ξ b) = τ̆ξ · τ̆b", xi, b));
            }
            if g.sigma(&prod) != xb {
                return Err(fail("σ̃(τ̆ξ · τ̆b) = ξ b", xi, b));
            }
            rep.products += 1;

            let scalar_xi = xi.map_vals(|_| ());
            let act = lk.apply(&alg, &scalar_xi).attach(&Theta(0));
            let lhs = schouten(&alg, &g.tau(b), &g.tau(xi));
            if !lhs.eq_upto(&g.tau(&act), n) {
                return Err(fail("[τ̆b, τ̆ξ] = τ̆(∇^Bott_b ξ)", b, xi));
            }
            if g.sigma(&lhs) != act {
                return Err(fail("σ̃[τ̆b, τ̆ξ] = ∇^Bott_b ξ", b, xi));
            }
            rep.actions += 1;
        }
    }
    Ok(rep)
}
