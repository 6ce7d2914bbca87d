//! Fedosov iteration for a Lie pair, the `Q² = 0` certificate, comparison
//! with the PBW-side field `Ξ∇`, the perturbed contraction on functions and
//! the closed formulas available for matched pairs.

use thiserror::Error;

use crate::coeffs::{frac, rat, Poly};
use crate::forms::{
    hpl_perturb, op, vvf_bracket, vvf_components, vvf_deriv, vvf_from_components, Alg, ContractionData,
    ContractionError, Deriv, MixedForm, Op, Orientation, PolyForm,
};
use crate::liepair::{torsion_and_correct, Adapted, CeAlgebroid, LConnection, PairError};
use crate::uea::{PbwTable, UeaError};

#[derive(Debug, Error, Clone)]
pub enum FedosovError {
    #[error("connection has torsion; use the corrected connection ∇' instead")]
    Torsion { corrected: Box<LConnection> },
    #[error("δ d∇ + d∇ δ ≠ 0 on {witness}")]
    Anticommutator { witness: String },
    #[error("Q² ≠ 0 on {witness}")]
    Residue { witness: String },
    #[error("the two forms of the recursion disagree at degree {degree}")]
    CrossCheck { degree: u32 },
    #[error("X and -Ξ differ at degree {degree}, coframe index {index}, monomial {monomial:?}")]
    Mismatch {
        degree: u32,
        index: usize,
        monomial: Vec<u32>,
    },
    #[error("{0}")]
    Check(String),
    #[error(transparent)]
    Pair(#[from] PairError),
    #[error(transparent)]
    Pbw(#[from] UeaError),
    #[error(transparent)]
    Contraction(#[from] ContractionError),
}

#[derive(Clone)]
pub struct FedosovResult {
    pub ad: Adapted,
    /// Asserted truncation `N`.
    pub n: u32,
    /// Internal algebra, truncated at `N + margin`.
    pub alg: Alg,
    pub margin: u32,
    /// `parts[k]` is `X_k`, of pure `Ŝ`-degree `k`.
    pub parts: Vec<PolyForm>,
    pub x: PolyForm,
    pub d_nabla: Deriv,
    pub q: Deriv,
}

impl FedosovResult {
    pub fn x_deriv(&self) -> Deriv {
        field_deriv(&self.alg, &self.x)
    }

    /// `ϱ = d_L^∇ + X∇`.
    pub fn rho(&self) -> Deriv {
        self.d_nabla.plus(&self.x_deriv())
    }

    pub fn is_flat(&self) -> bool {
        self.x.is_zero()
    }

    pub fn q_op(&self) -> Op<()> {
        let q = self.q.clone();
        let alg = self.alg;
        op(move |f: &MixedForm| q.apply(&alg, f))
    }

    pub fn rho_op(&self) -> Op<()> {
        let rho = self.rho();
        let alg = self.alg;
        op(move |f: &MixedForm| rho.apply(&alg, f))
    }
}

fn field_deriv(alg: &Alg, x: &PolyForm) -> Deriv {
    if x.is_zero() {
        Deriv::zero(alg, true)
    } else {
        let mut d = vvf_deriv(alg, x);
        d.odd = true;
        d
    }
}

fn scalar_part(d: &Deriv) -> Deriv {
    let mut d = d.clone();
    d.theta.clear();
    d
}

/// `δ d∇ + d∇ δ` on generators; zero exactly when `∇` is torsion-free.
pub fn delta_anticommutator(ad: &Adapted, alg: &Alg) -> Vec<MixedForm> {
    let d = scalar_part(&ad.d_nabla(alg));
    let mut gens: Vec<MixedForm> = (0..alg.r).map(|k| alg.chi(k)).collect();
    gens.extend((0..alg.n).map(|i| alg.lam(i)));
    gens.extend((0..alg.d).map(|l| alg.scalar(Poly::var(l))));
    gens.iter()
        .map(|g| alg.delta(&d.apply(alg, g)).plus(&d.apply(alg, &alg.delta(g))))
        .collect()
}

pub fn fedosov_iterate(ad: &Adapted, n: u32) -> Result<FedosovResult, FedosovError> {
    fedosov_iterate_with_margin(ad, n, 2)
}

pub fn fedosov_iterate_with_margin(ad: &Adapted, n: u32, margin: u32) -> Result<FedosovResult, FedosovError> {
    if !ad.is_torsion_free() {
        let t = torsion_and_correct(&ad.pair, &ad.splitting, &ad.conn)?;
        return Err(FedosovError::Torsion {
            corrected: Box::new(t.corrected),
        });
    }
    let t = n + margin;
    let alg = ad.alg(t);
    for img in delta_anticommutator(ad, &alg) {
        if !img.is_zero() {
            return Err(FedosovError::Anticommutator { witness: img.render() });
        }
    }
    let dn = scalar_part(&ad.d_nabla(&alg));
    let mut parts = vec![PolyForm::zero(); t as usize + 1];
    let dn_chi: Vec<MixedForm> = (0..alg.r).map(|m| dn.apply(&alg, &alg.chi(m))).collect();

    for k in 1..t as usize {
        let mut rhs = Vec::with_capacity(alg.r);
        for m in 0..alg.r {
            let v = if k == 1 {
                dn.apply(&alg, &dn_chi[m])
            } else {
                let xk = field_deriv(&alg, &parts[k]);
                let xk_m = &vvf_components(&alg, &parts[k])[m];
                let mut v = dn.apply(&alg, xk_m);
                v.add_assign(&xk.apply(&alg, &dn_chi[m]));
                for p in 2..k {
                    let q = k + 1 - p;
                    if q < 2 {
                        continue;
                    }
                    let xp = field_deriv(&alg, &parts[p]);
                    v.add_assign(&xp.apply(&alg, &vvf_components(&alg, &parts[q])[m]));
                }
                v
            };
            rhs.push(v);
        }
        let next = alg.h(&vvf_from_components(&alg, &rhs));
        parts[k + 1] = next.filter(|key| key.chi.abs() == k as u32 + 1);
        if parts[k + 1] != next {
            return Err(FedosovError::Check(format!("X_{} is not of pure degree", k + 1)));
        }
        cross_check(&alg, &dn, &parts, k)?;
    }

    let mut x = PolyForm::zero();
    for p in &parts {
        x.add_assign(p);
    }
    let mut q = dn.plus(&field_deriv(&alg, &x));
    let mut minus_delta = crate::forms::delta_deriv(&alg);
    minus_delta = minus_delta.scale(&rat(-1));
    q = q.plus(&minus_delta);
    let res = FedosovResult {
        ad: ad.clone(),
        n,
        alg,
        margin,
        parts,
        x,
        d_nabla: dn,
        q,
    };
    certify(&res)?;
    Ok(res)
}

/// Recomputes `X_{k+1}` from the bracket form `h̃(R + [d, Y] + ½[Y, Y])`
/// with `Y = X_2 + … + X_k`.
fn cross_check(alg: &Alg, dn: &Deriv, parts: &[PolyForm], k: usize) -> Result<(), FedosovError> {
    let mut y = PolyForm::zero();
    for p in &parts[..=k] {
        y.add_assign(p);
    }
    let yd = field_deriv(alg, &y);
    let comm = dn.commutator(&yd, alg);
    let sq = dn.commutator(dn, alg).scale(&frac(1, 2));
    let mut w = vvf_from_components(alg, &comm.chi);
    w.add_assign(&vvf_from_components(alg, &sq.chi));
    w.add_assign(&vvf_bracket(alg, &y, &y).scale(&frac(1, 2)));
    let w = w.filter(|key| key.chi.abs() == k as u32);
    if alg.h(&w) != parts[k + 1] {
        return Err(FedosovError::CrossCheck { degree: k as u32 + 1 });
    }
    Ok(())
}

/// Checks `Q² = 0` on generators and on every monomial basis element of
/// `Ŝ`-degree at most `N`, comparing components up to `Ŝ`-degree `N`.
pub fn certify(res: &FedosovResult) -> Result<(), FedosovError> {
    let alg = &res.alg;
    let q = &res.q;
    let mut probe: Vec<MixedForm> = (0..alg.d).map(|l| alg.scalar(Poly::var(l))).collect();
    probe.extend(alg.basis(alg.n as u32, res.n));
    for x in &probe {
        let qq = q.apply(alg, &q.apply(alg, x));
        if !qq.upto(res.n).is_zero() {
            return Err(FedosovError::Residue { witness: x.render() });
        }
    }
    Ok(())
}

/// The two halves of `Q` for a matched pair, split by bidegree shift.
pub struct MatchedSplit {
    pub d10: Deriv,
    pub d01: Deriv,
}

pub fn matched_split(res: &FedosovResult) -> Result<MatchedSplit, FedosovError> {
    let alg = &res.alg;
    if !res.ad.matched {
        return Err(PairError::NotMatched { i: 0, j: 0 }.into());
    }
    let d10 = res.q.bidegree_part(alg, 1, 0);
    let d01 = res.q.bidegree_part(alg, 0, 1);
    let sum = d10.plus(&d01);
    let same = |a: &[MixedForm], b: &[MixedForm]| a.iter().zip(b).all(|(x, y)| x == y);
    if !(same(&sum.x, &res.q.x) && same(&sum.lam, &res.q.lam) && same(&sum.chi, &res.q.chi)) {
        return Err(FedosovError::Check("Q has components outside bidegrees (1,0) and (0,1)".into()));
    }
    let probe = alg.basis(alg.n as u32, res.n);
    for x in &probe {
        let a = d10.apply(alg, &d10.apply(alg, x));
        let b = d01.apply(alg, &d01.apply(alg, x));
        let c = d10
            .apply(alg, &d01.apply(alg, x))
            .plus(&d01.apply(alg, &d10.apply(alg, x)));
        for (name, v) in [("D10²", a), ("D01²", b), ("[D10, D01]", c)] {
            if !v.upto(res.n).is_zero() {
                return Err(FedosovError::Check(format!("{name} ≠ 0 on {}", x.render())));
            }
        }
    }
    Ok(MatchedSplit { d10, d01 })
}

#[derive(Clone, Debug)]
pub struct EwReport {
    pub degrees: Vec<u32>,
    pub x_terms: usize,
    pub xi_terms: usize,
    /// `(degree, X_k, -Ξ_k)` rendered, for reports.
    pub table: Vec<(u32, String, String)>,
}

/// Compares the Fedosov field with `-Ξ∇` from the PBW pipeline, and `Q`
/// with `d_L^{∇⚡}`.
pub fn ew_check(ad: &Adapted, n: u32) -> Result<EwReport, FedosovError> {
    let res = fedosov_iterate(ad, n)?;
    let table = PbwTable::build(ad, res.alg.t + 1);
    ew_check_with(&res, &table)
}

pub fn ew_check_with(res: &FedosovResult, table: &PbwTable) -> Result<EwReport, FedosovError> {
    let alg = &res.alg;
    let xi = table.xi(alg)?;
    let minus_xi = xi.neg();
    let diff = res.x.minus(&minus_xi);
    if let Some((k, _)) = diff.terms.iter().find(|(k, _)| k.chi.abs() <= res.n) {
        return Err(FedosovError::Mismatch {
            degree: k.chi.abs(),
            index: k.lam.trailing_zeros() as usize,
            monomial: k.chi.0.to_vec(),
        });
    }
    let dl = table.d_lightning(&res.ad, alg)?;
    let mut probe: Vec<MixedForm> = (0..alg.d).map(|l| alg.scalar(Poly::var(l))).collect();
    probe.extend((0..alg.n).map(|i| alg.lam(i)));
    probe.extend(alg.basis(1, res.n));
    for f in &probe {
        if !res.q.apply(alg, f).eq_upto(&dl.apply(alg, f), res.n) {
            return Err(FedosovError::Check(format!("Q ≠ d^∇⚡ on {}", f.render())));
        }
    }
    let degrees: Vec<u32> = (2..=res.n).collect();
    let rows = degrees
        .iter()
        .map(|&d| {
            let pick = |f: &PolyForm| f.filter(|k| k.chi.abs() == d).render();
            (d, pick(&res.x), pick(&minus_xi))
        })
        .collect();
    Ok(EwReport {
        degrees,
        x_terms: res.x.upto(res.n).len(),
        xi_terms: xi.upto(res.n).len(),
        table: rows,
    })
}

/// `h̃(Ξ∇) = 0` and the lowest `Ŝ`-degree of `Ξ∇` (2 when torsion-free,
/// at least 1 otherwise).
pub fn xi_properties(ad: &Adapted, table: &PbwTable, t: u32) -> Result<(bool, Option<u32>), FedosovError> {
    let alg = ad.alg(t);
    let xi = table.xi(&alg)?;
    let h_zero = alg.h(&xi).is_zero();
    let low = xi.terms.keys().map(|k| k.chi.abs()).min();
    Ok((h_zero, low))
}

/// The perturbed contraction of `(Λ L∨ ⊗ Ŝ B∨, Q)` onto `(Λ A∨, d_A)`.
pub struct FunctionContraction {
    pub data: ContractionData<()>,
    pub rho: Op<()>,
}

pub fn perturbed_tau_functions(res: &FedosovResult) -> Result<FunctionContraction, FedosovError> {
    let alg = res.alg;
    let base = ContractionData::<()>::base(alg, Orientation::MinusDelta);
    let rho = res.rho_op();
    let probe = alg.basis(alg.n as u32, res.n);
    let data = hpl_perturb(&base, rho.clone(), &probe)?;
    let big = alg.basis(3, res.n);
    let small = alg.a_basis(alg.a as u32);
    data.verify(&big, &small, res.n)?;

    let da = scalar_part(&res.ad.ce_deriv(&alg, CeAlgebroid::A));
    for a in &small {
        if (data.small_d)(a) != da.apply(&alg, a) {
            return Err(FedosovError::Check(format!("θ ≠ d_A on {}", a.render())));
        }
        let lhs = (data.tau)(a).minus(&(base.h)(&rho(&(data.tau)(a))));
        if !lhs.eq_upto(a, res.n) {
            return Err(FedosovError::Check("(id - hϱ)τ̆ ≠ τ".into()));
        }
    }
    for x in &big {
        if (data.sigma)(x) != alg.sigma(x) {
            return Err(FedosovError::Check(format!("σ̆ ≠ σ on {}", x.render())));
        }
        let hh = (data.h)(x);
        let lhs = hh.minus(&(base.h)(&rho(&hh)));
        if !lhs.eq_upto(&(base.h)(x), res.n) {
            return Err(FedosovError::Check("(id - hϱ)h̆ ≠ h".into()));
        }
    }
    Ok(FunctionContraction { data, rho })
}

/// `L_{ê_{a+k}}` restricted to `A`-forms, plus the dual connection on `χ`:
/// the derivation whose `χ`-weighted sum is the matched-pair operator `𝒟`.
pub fn matched_lie_derivative(ad: &Adapted, alg: &Alg, k: usize, with_chi: bool) -> Deriv {
    let l = ad.a() + k;
    let full = scalar_part(&ad.d_nabla(alg));
    let mut d = Deriv::zero(alg, false);
    for x in 0..alg.d {
        d.x[x] = alg.scalar(ad.rho[l].0[x].clone());
    }
    let am = alg.a_mask();
    for i in 0..alg.a {
        let img = alg.interior(l, &full.lam[i]);
        d.lam[i] = img.filter(|key| key.lam & !am == 0);
    }
    if with_chi {
        for m in 0..alg.r {
            let mut f = MixedForm::zero();
            for j in 0..alg.r {
                let g = &ad.gamma[l][j][m];
                if !g.is_zero() {
                    f.add_assign(&alg.chi(j).scale_poly(&-g));
                }
            }
            d.chi[m] = f;
        }
    }
    d
}

/// `𝒟(ω) = Σ_k χ_k · L_k(ω)`.
pub fn matched_d(ad: &Adapted, alg: &Alg) -> impl Fn(&MixedForm) -> MixedForm {
    let ls: Vec<Deriv> = (0..alg.r).map(|k| matched_lie_derivative(ad, alg, k, true)).collect();
    let alg = *alg;
    move |f: &MixedForm| {
        let mut out = MixedForm::zero();
        for (k, l) in ls.iter().enumerate() {
            out.add_assign(&alg.mul(&alg.chi(k), &l.apply(&alg, f)));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TripleReport {
    pub checked: usize,
    pub max_degree: u32,
}

/// Computes `τ̆(α)` by the perturbation series, by `exp(𝒟)τ`, and by
/// `Σ_J (1/J!) (pbw(∂^J) ⋊ α) χ^J`, and checks that all three agree.
pub fn matched_tau_triple(res: &FedosovResult, table: &PbwTable, deg: u32) -> Result<TripleReport, FedosovError> {
    let ad = &res.ad;
    if !ad.matched {
        return Err(PairError::NotMatched { i: 0, j: 0 }.into());
    }
    let alg = res.alg;
    let fc = perturbed_tau_functions(res)?;
    let dd = matched_d(ad, &alg);
    let ls: Vec<Deriv> = (0..alg.r).map(|k| matched_lie_derivative(ad, &alg, k, false)).collect();
    let small = alg.a_basis(alg.a as u32);
    for a in &small {
        let series = (fc.data.tau)(a);

        let mut exp = a.clone();
        let mut cur = a.clone();
        for m in 1..=alg.t {
            cur = dd(&cur).scale(&frac(1, m as i64));
            if cur.is_zero() {
                break;
            }
            exp.add_assign(&cur);
        }

        let mut closed = MixedForm::zero();
        for j in alg.chi_monomials(deg) {
            let p = table.pbw_mono(&j);
            let mut acted = MixedForm::zero();
            for (e, f) in &p.terms {
                let mut v = a.clone();
                for g in table.uea.word(e).into_iter().rev() {
                    v = ls[g - ad.a()].apply(&alg, &v);
                }
                acted.add_assign(&v.scale_poly(f));
            }
            let w = num_rational::BigRational::new(1.into(), j.factorial());
            closed.add_assign(&alg.mul(&acted, &alg.mono(0, j.clone())).scale(&w));
        }

        if !series.eq_upto(&exp, deg) {
            return Err(FedosovError::Check(format!("series ≠ exp(𝒟)τ on {}", a.render())));
        }
        if !series.eq_upto(&closed, deg) {
            return Err(FedosovError::Check(format!("series ≠ pbw closed formula on {}", a.render())));
        }
    }
    Ok(TripleReport {
        checked: small.len(),
        max_degree: deg,
    })
}

/// The Fedosov result with margin computations dropped, for reports.
pub fn x_table(res: &FedosovResult) -> Vec<(u32, String)> {
    (2..=res.n)
        .map(|k| (k, res.parts.get(k as usize).cloned().unwrap_or_default().render()))
        .collect()
}
