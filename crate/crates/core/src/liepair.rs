//! Lie pairs given by structure functions and anchors, splittings,
//! L-connections extending the Bott representation, Chevalley–Eilenberg
//! differentials, torsion and curvature.
//!
//! Basis conventions: `e_0..e_{a-1}` span `A`, `e_a..e_{n-1}` project to the
//! basis `∂_0..∂_{r-1}` of `B = L/A`. Witnesses in reports are 1-based.

use std::fmt;

use thiserror::Error;

use crate::coeffs::{frac, BaseDerivation, Poly};
use crate::forms::{Alg, Deriv, Form, Key, MixedForm, PolyForm, Theta};

/// A section of `L` (length `n`) or of `B` (length `r`) in basis coordinates.
pub type Section = Vec<Poly>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiePair {
    pub name: String,
    pub d: usize,
    pub a: usize,
    pub r: usize,
    /// `[e_i, e_j] = Σ_k c[i][j][k] e_k`.
    pub c: Vec<Vec<Vec<Poly>>>,
    pub rho: Vec<BaseDerivation>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Splitting {
    /// `j(∂_k) = e_{a+k} + Σ_m J[m][k] e_m`, an `a × r` table.
    pub j: Vec<Vec<Poly>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LConnection {
    /// `∇_{e_i} ∂_j = Σ_k gamma[i][j][k] ∂_k`, an `n × r × r` table.
    pub gamma: Vec<Vec<Vec<Poly>>>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PairError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("connection does not extend the Bott representation at (i={i}, j={j})")]
    NotBott { i: usize, j: usize },
    #[error("pair fails validation: {0}")]
    Invalid(String),
    #[error("j(B) is not a subalgebroid: p([j∂_{i}, j∂_{j}]) ≠ 0")]
    NotMatched { i: usize, j: usize },
    #[error("module is not flat for this algebroid")]
    NonFlat,
    #[error("torsion correction failed its own check: {0}")]
    Internal(String),
}

fn zeros2(a: usize, b: usize) -> Vec<Vec<Poly>> {
    vec![vec![Poly::zero(); b]; a]
}

fn zeros3(a: usize, b: usize, c: usize) -> Vec<Vec<Vec<Poly>>> {
    vec![zeros2(b, c); a]
}

impl Splitting {
    pub fn zero(a: usize, r: usize) -> Self {
        Splitting { j: zeros2(a, r) }
    }

    /// `j(∂_k)` as a section of `L`.
    pub fn section(&self, p: &LiePair, k: usize) -> Section {
        let mut s = vec![Poly::zero(); p.n()];
        for m in 0..p.a {
            s[m] = self.j[m][k].clone();
        }
        s[p.a + k] = Poly::one();
        s
    }
}

impl LConnection {
    pub fn zero(n: usize, r: usize) -> Self {
        LConnection {
            gamma: zeros3(n, r, r),
        }
    }

    /// The connection equal to Bott on `A` and to `gamma_b` on the
    /// `e_{a+k}` directions.
    pub fn bott_extension(p: &LiePair, s: &Splitting, gamma_b: &[Vec<Vec<Poly>>]) -> Self {
        let mut g = LConnection::zero(p.n(), p.r);
        for i in 0..p.a {
            for jj in 0..p.r {
                let br = p.bracket(&p.basis(i), &s.section(p, jj));
                for k in 0..p.r {
                    g.gamma[i][jj][k] = br[p.a + k].clone();
                }
            }
        }
        for (k, row) in gamma_b.iter().enumerate() {
            g.gamma[p.a + k] = row.clone();
        }
        g
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub witness: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            match &c.witness {
                None => writeln!(f, "{}: {}", c.name, if c.passed { "pass" } else { "FAIL" })?,
                Some(w) => writeln!(f, "{}: FAIL at {:?}", c.name, w)?,
            }
        }
        Ok(())
    }
}

impl LiePair {
    pub fn new(name: impl Into<String>, d: usize, a: usize, r: usize) -> Self {
        let n = a + r;
        LiePair {
            name: name.into(),
            d,
            a,
            r,
            c: zeros3(n, n, n),
            rho: vec![BaseDerivation::zero(d); n],
        }
    }

    pub fn n(&self) -> usize {
        self.a + self.r
    }

    /// Sets `[e_i, e_j] = Σ_k c_k e_k` together with its antisymmetric partner.
    pub fn set_bracket(&mut self, i: usize, j: usize, coeffs: &[(usize, Poly)]) {
        for (k, c) in coeffs {
            self.c[i][j][*k] = c.clone();
            self.c[j][i][*k] = -c;
        }
    }

    pub fn basis(&self, i: usize) -> Section {
        let mut s = vec![Poly::zero(); self.n()];
        s[i] = Poly::one();
        s
    }

    pub fn check_shape(&self) -> Result<(), PairError> {
        let n = self.n();
        if n > 24 {
            return Err(PairError::Shape(format!("rank {n} too large")));
        }
        if self.c.len() != n
            || self.c.iter().any(|row| row.len() != n || row.iter().any(|v| v.len() != n))
        {
            return Err(PairError::Shape("structure table is not n×n×n".into()));
        }
        if self.rho.len() != n || self.rho.iter().any(|v| v.dim() != self.d) {
            return Err(PairError::Shape("anchor table is not n×d".into()));
        }
        for row in &self.c {
            for v in row {
                for p in v {
                    if p.min_dim() > self.d {
                        return Err(PairError::Shape(format!("coefficient {p} uses variables beyond d")));
                    }
                }
            }
        }
        for v in &self.rho {
            for p in &v.0 {
                if p.min_dim() > self.d {
                    return Err(PairError::Shape(format!("anchor {p} uses variables beyond d")));
                }
            }
        }
        Ok(())
    }

    pub fn anchor(&self, x: &Section) -> BaseDerivation {
        let mut out = BaseDerivation::zero(self.d);
        for (i, f) in x.iter().enumerate() {
            if !f.is_zero() {
                out = out.add(&self.rho[i].scale(f));
            }
        }
        out
    }

    /// `[Σ f_i e_i, Σ g_j e_j]` with the anchor-Leibniz terms.
    pub fn bracket(&self, x: &Section, y: &Section) -> Section {
        let n = self.n();
        let mut out = vec![Poly::zero(); n];
        for i in 0..n {
            if x[i].is_zero() {
                continue;
            }
            for j in 0..n {
                if y[j].is_zero() {
                    continue;
                }
                let fg = &x[i] * &y[j];
                for k in 0..n {
                    if !self.c[i][j][k].is_zero() {
                        out[k] += &(&fg * &self.c[i][j][k]);
                    }
                }
            }
        }
        let ax = self.anchor(x);
        let ay = self.anchor(y);
        for k in 0..n {
            out[k] += &ax.apply_unchecked(&y[k]);
            out[k] -= &ay.apply_unchecked(&x[k]);
        }
        out
    }

    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        if let Err(e) = self.check_shape() {
            let _ = e;
            rep.checks.push(Check {
                name: "shape",
                passed: false,
                witness: None,
            });
            return rep;
        }
        let n = self.n();
        let mut push = |name, w: Option<Vec<usize>>| {
            rep.checks.push(Check {
                name,
                passed: w.is_none(),
                witness: w,
            })
        };

        let mut w = None;
        'anti: for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if !(&self.c[i][j][k] + &self.c[j][i][k]).is_zero() {
                        w = Some(vec![i.min(j) + 1, i.max(j) + 1, k + 1]);
                        break 'anti;
                    }
                }
            }
        }
        push("antisymmetry", w);

        let mut w = None;
        'close: for i in 0..self.a {
            for j in 0..self.a {
                for k in self.a..n {
                    if !self.c[i][j][k].is_zero() {
                        w = Some(vec![i + 1, j + 1, k + 1]);
                        break 'close;
                    }
                }
            }
        }
        push("a-closure", w);

        let mut w = None;
        'jac: for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let (x, y, z) = (self.basis(i), self.basis(j), self.basis(k));
                    let t1 = self.bracket(&x, &self.bracket(&y, &z));
                    let t2 = self.bracket(&y, &self.bracket(&z, &x));
                    let t3 = self.bracket(&z, &self.bracket(&x, &y));
                    if (0..n).any(|m| !(&(&t1[m] + &t2[m]) + &t3[m]).is_zero()) {
                        w = Some(vec![i + 1, j + 1, k + 1]);
                        break 'jac;
                    }
                }
            }
        }
        push("jacobi", w);

        let mut w = None;
        'anc: for i in 0..n {
            for j in i + 1..n {
                let lhs = self.anchor(&self.bracket(&self.basis(i), &self.basis(j)));
                let rhs = self.rho[i].bracket(&self.rho[j]);
                if lhs != rhs {
                    w = Some(vec![i + 1, j + 1]);
                    break 'anc;
                }
            }
        }
        push("anchor-morphism", w);
        rep
    }

    /// `∇_l b` for a section `l` of `L` and `b` of `B`.
    pub fn nabla(&self, conn: &LConnection, l: &Section, b: &Section) -> Section {
        let mut out = vec![Poly::zero(); self.r];
        let al = self.anchor(l);
        for k in 0..self.r {
            out[k] += &al.apply_unchecked(&b[k]);
        }
        for (i, li) in l.iter().enumerate() {
            if li.is_zero() {
                continue;
            }
            for k in 0..self.r {
                if b[k].is_zero() {
                    continue;
                }
                let lb = li * &b[k];
                for m in 0..self.r {
                    if !conn.gamma[i][k][m].is_zero() {
                        out[m] += &(&lb * &conn.gamma[i][k][m]);
                    }
                }
            }
        }
        out
    }

    pub fn q(&self, l: &Section) -> Section {
        l[self.a..].to_vec()
    }

    pub fn torsion(&self, conn: &LConnection, l1: &Section, l2: &Section) -> Section {
        let t1 = self.nabla(conn, l1, &self.q(l2));
        let t2 = self.nabla(conn, l2, &self.q(l1));
        let br = self.q(&self.bracket(l1, l2));
        (0..self.r).map(|k| &(&t1[k] - &t2[k]) - &br[k]).collect()
    }

    /// First `(i, j)` where `∇_{e_i}∂_j ≠ q([e_i, j∂_j])` for `i` in `A`.
    pub fn bott_defect(&self, s: &Splitting, conn: &LConnection) -> Option<(usize, usize)> {
        for i in 0..self.a {
            for jj in 0..self.r {
                let br = self.bracket(&self.basis(i), &s.section(self, jj));
                for k in 0..self.r {
                    if conn.gamma[i][jj][k] != br[self.a + k] {
                        return Some((i, jj));
                    }
                }
            }
        }
        None
    }

    pub fn is_matched(&self, s: &Splitting) -> Result<(), PairError> {
        for i in 0..self.r {
            for j in i + 1..self.r {
                let br = self.bracket(&s.section(self, i), &s.section(self, j));
                let jq: Section = {
                    let qb = self.q(&br);
                    let mut v = vec![Poly::zero(); self.n()];
                    for (k, c) in qb.iter().enumerate() {
                        let sk = s.section(self, k);
                        for m in 0..self.n() {
                            v[m] += &(c * &sk[m]);
                        }
                    }
                    v
                };
                if (0..self.a).any(|m| br[m] != jq[m]) {
                    return Err(PairError::NotMatched { i, j });
                }
            }
        }
        Ok(())
    }

    /// `R(e_i, e_j)∂_k = Σ_m R[i][j][k][m] ∂_m`.
    pub fn curvature(&self, conn: &LConnection) -> Vec<Vec<Vec<Vec<Poly>>>> {
        let n = self.n();
        let mut out = vec![vec![zeros2(self.r, self.r); n]; n];
        for i in 0..n {
            for j in 0..n {
                let (ei, ej) = (self.basis(i), self.basis(j));
                let br = self.bracket(&ei, &ej);
                for k in 0..self.r {
                    let mut dk = vec![Poly::zero(); self.r];
                    dk[k] = Poly::one();
                    let a1 = self.nabla(conn, &ei, &self.nabla(conn, &ej, &dk));
                    let a2 = self.nabla(conn, &ej, &self.nabla(conn, &ei, &dk));
                    let a3 = self.nabla(conn, &br, &dk);
                    for m in 0..self.r {
                        out[i][j][k][m] = &(&a1[m] - &a2[m]) - &a3[m];
                    }
                }
            }
        }
        out
    }
}

/// Torsion data: `T(e_i, e_j)`, its descent `β` to `Λ²B → B`, and the
/// torsion-free connection `∇' = ∇ - ½T(-, j(-))`.
#[derive(Clone, Debug)]
pub struct TorsionData {
    pub t: Vec<Vec<Section>>,
    pub beta: Vec<Vec<Section>>,
    pub corrected: LConnection,
}

impl TorsionData {
    pub fn is_torsion_free(&self) -> bool {
        self.beta.iter().flatten().flatten().all(Poly::is_zero)
    }
}

pub fn beta(p: &LiePair, s: &Splitting, conn: &LConnection) -> Vec<Vec<Section>> {
    (0..p.r)
        .map(|i| {
            (0..p.r)
                .map(|j| p.torsion(conn, &s.section(p, i), &s.section(p, j)))
                .collect()
        })
        .collect()
}

pub fn torsion_and_correct(p: &LiePair, s: &Splitting, conn: &LConnection) -> Result<TorsionData, PairError> {
    if let Some((i, j)) = p.bott_defect(s, conn) {
        return Err(PairError::NotBott { i, j });
    }
    let n = p.n();
    let t: Vec<Vec<Section>> = (0..n)
        .map(|i| (0..n).map(|j| p.torsion(conn, &p.basis(i), &p.basis(j))).collect())
        .collect();
    let b = beta(p, s, conn);
    let half = frac(1, 2);
    let mut corrected = conn.clone();
    for i in 0..n {
        for jj in 0..p.r {
            let tij = p.torsion(conn, &p.basis(i), &s.section(p, jj));
            for k in 0..p.r {
                corrected.gamma[i][jj][k] -= &tij[k].scale(&half);
            }
        }
    }
    let b2 = beta(p, s, &corrected);
    if b2.iter().flatten().flatten().any(|c| !c.is_zero()) {
        return Err(PairError::Internal("corrected connection still has torsion".into()));
    }
    if p.bott_defect(s, &corrected).is_some() {
        return Err(PairError::Internal("corrected connection no longer extends Bott".into()));
    }
    Ok(TorsionData {
        t,
        beta: b,
        corrected,
    })
}

/// Everything rewritten in the frame adapted to the splitting:
/// `ê_i = e_i` for `i < a` and `ê_{a+k} = j(∂_k)`.
#[derive(Clone, Debug)]
pub struct Adapted {
    pub pair: LiePair,
    pub splitting: Splitting,
    pub conn: LConnection,
    /// `[ê_i, ê_j] = Σ_k c[i][j][k] ê_k`.
    pub c: Vec<Vec<Vec<Poly>>>,
    pub rho: Vec<BaseDerivation>,
    /// `∇_{ê_i} ∂_j = Σ_k gamma[i][j][k] ∂_k`.
    pub gamma: Vec<Vec<Vec<Poly>>>,
    pub matched: bool,
}

impl Adapted {
    pub fn new(p: &LiePair, s: &Splitting, conn: &LConnection) -> Result<Adapted, PairError> {
        p.check_shape()?;
        if s.j.len() != p.a || s.j.iter().any(|row| row.len() != p.r) {
            return Err(PairError::Shape("splitting is not a×r".into()));
        }
        if conn.gamma.len() != p.n()
            || conn
                .gamma
                .iter()
                .any(|row| row.len() != p.r || row.iter().any(|v| v.len() != p.r))
        {
            return Err(PairError::Shape("connection is not n×r×r".into()));
        }
        let rep = p.validate();
        if let Some(c) = rep.first_failure() {
            return Err(PairError::Invalid(format!("{} {:?}", c.name, c.witness)));
        }
        if let Some((i, j)) = p.bott_defect(s, conn) {
            return Err(PairError::NotBott { i, j });
        }
        let n = p.n();
        let frame: Vec<Section> = (0..n)
            .map(|i| if i < p.a { p.basis(i) } else { s.section(p, i - p.a) })
            .collect();
        let mut c = zeros3(n, n, n);
        for i in 0..n {
            for j in 0..n {
                let br = p.bracket(&frame[i], &frame[j]);
                c[i][j] = to_adapted(p, s, &br);
            }
        }
        let rho = frame.iter().map(|f| p.anchor(f)).collect();
        let mut gamma = zeros3(n, p.r, p.r);
        for i in 0..n {
            for jj in 0..p.r {
                let mut b = vec![Poly::zero(); p.r];
                b[jj] = Poly::one();
                gamma[i][jj] = p.nabla(conn, &frame[i], &b);
            }
        }
        let matched = p.is_matched(s).is_ok();
        Ok(Adapted {
            pair: p.clone(),
            splitting: s.clone(),
            conn: conn.clone(),
            c,
            rho,
            gamma,
            matched,
        })
    }

    pub fn n(&self) -> usize {
        self.pair.n()
    }

    pub fn a(&self) -> usize {
        self.pair.a
    }

    pub fn r(&self) -> usize {
        self.pair.r
    }

    pub fn d(&self) -> usize {
        self.pair.d
    }

    pub fn alg(&self, t: u32) -> Alg {
        Alg {
            n: self.n(),
            a: self.a(),
            r: self.r(),
            d: self.d(),
            t,
        }
    }

    /// `β(∂_i, ∂_j)` in adapted terms.
    pub fn beta(&self, i: usize, j: usize, k: usize) -> Poly {
        let a = self.a();
        &(&self.gamma[a + i][j][k] - &self.gamma[a + j][i][k]) - &self.c[a + i][a + j][a + k]
    }

    pub fn is_torsion_free(&self) -> bool {
        let r = self.r();
        (0..r).all(|i| (0..r).all(|j| (0..r).all(|k| self.beta(i, j, k).is_zero())))
    }

    /// Bracket of sections written in the adapted frame.
    pub fn bracket(&self, x: &Section, y: &Section) -> Section {
        let n = self.n();
        let mut out = vec![Poly::zero(); n];
        for i in 0..n {
            for j in 0..n {
                if x[i].is_zero() || y[j].is_zero() {
                    continue;
                }
                let fg = &x[i] * &y[j];
                for k in 0..n {
                    if !self.c[i][j][k].is_zero() {
                        out[k] += &(&fg * &self.c[i][j][k]);
                    }
                }
            }
        }
        for i in 0..n {
            if !x[i].is_zero() {
                for k in 0..n {
                    out[k] += &(&x[i] * &self.rho[i].apply_unchecked(&y[k]));
                }
            }
            if !y[i].is_zero() {
                for k in 0..n {
                    out[k] -= &(&y[i] * &self.rho[i].apply_unchecked(&x[k]));
                }
            }
        }
        out
    }

    /// `∇_{ê_i}` applied to a `B`-section.
    pub fn nabla_basis(&self, i: usize, b: &Section) -> Section {
        let mut out: Section = b.iter().map(|f| self.rho[i].apply_unchecked(f)).collect();
        for (k, bk) in b.iter().enumerate() {
            if bk.is_zero() {
                continue;
            }
            for m in 0..self.r() {
                if !self.gamma[i][k][m].is_zero() {
                    out[m] += &(bk * &self.gamma[i][k][m]);
                }
            }
        }
        out
    }

    /// The Chevalley–Eilenberg differential (with coefficients in `Ŝ B∨`
    /// and `Λ B` through the connection) as a derivation.
    pub fn ce_deriv(&self, alg: &Alg, which: CeAlgebroid) -> Deriv {
        let dirs: Vec<usize> = match which {
            CeAlgebroid::L => (0..self.n()).collect(),
            CeAlgebroid::A => (0..self.a()).collect(),
            CeAlgebroid::B => (self.a()..self.n()).collect(),
        };
        let mut d = Deriv::zero(alg, true);
        for l in 0..self.d() {
            let mut f = MixedForm::zero();
            for &i in &dirs {
                f.add_assign(&alg.lam(i).scale_poly(&self.rho[i].0[l]));
            }
            d.x[l] = f;
        }
        for k in 0..self.n() {
            let mut f = MixedForm::zero();
            for (ii, &i) in dirs.iter().enumerate() {
                for &j in &dirs[ii + 1..] {
                    let c = &self.c[i][j][k];
                    if !c.is_zero() {
                        f.add_assign(&alg.mono((1 << i) | (1 << j), alg.chi0()).scale_poly(&-c));
                    }
                }
            }
            d.lam[k] = f;
        }
        for m in 0..self.r() {
            let mut f = MixedForm::zero();
            for &i in &dirs {
                for j in 0..self.r() {
                    let g = &self.gamma[i][j][m];
                    if !g.is_zero() {
                        f.add_assign(
                            &Form::term(1 << i, crate::coeffs::MultiIndex::unit(self.r(), j), (), -g),
                        );
                    }
                }
            }
            d.chi[m] = f;
        }
        d.theta = (0..self.r())
            .map(|k| {
                let mut f = PolyForm::zero();
                for &i in &dirs {
                    for j in 0..self.r() {
                        let g = &self.gamma[i][k][j];
                        if !g.is_zero() {
                            f.add_term(
                                Key {
                                    lam: 1 << i,
                                    chi: alg.chi0(),
                                    val: Theta(1 << j),
                                },
                                g.clone(),
                            );
                        }
                    }
                }
                f
            })
            .collect();
        d
    }

    /// `d_L^∇` on `Λ L∨ ⊗ Ŝ B∨`.
    pub fn d_nabla(&self, alg: &Alg) -> Deriv {
        self.ce_deriv(alg, CeAlgebroid::L)
    }
}

/// Converts a section in the original basis to adapted coordinates.
pub fn to_adapted(p: &LiePair, s: &Splitting, x: &Section) -> Section {
    let mut out = x.clone();
    for m in 0..p.a {
        for k in 0..p.r {
            if !s.j[m][k].is_zero() && !x[p.a + k].is_zero() {
                out[m] -= &(&s.j[m][k] * &x[p.a + k]);
            }
        }
    }
    out
}

pub fn from_adapted(p: &LiePair, s: &Splitting, x: &Section) -> Section {
    let mut out = x.clone();
    for m in 0..p.a {
        for k in 0..p.r {
            if !s.j[m][k].is_zero() && !x[p.a + k].is_zero() {
                out[m] += &(&s.j[m][k] * &x[p.a + k]);
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CeAlgebroid {
    L,
    A,
    /// `j(B)`, only meaningful for matched pairs.
    B,
}

/// Coefficient module for a Chevalley–Eilenberg differential. Forms are
/// `Form<Theta>`: the `θ`-degree selects `Λ^q B`, and `χ`-legs carry `Ŝ B∨`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CeModule {
    Trivial,
    /// The Bott action on `Λ^q B` (and dually on `Ŝ B∨`); requires `A`.
    Bott,
    /// The given connection on `Λ^q B` and `Ŝ B∨`; must be flat on the algebroid.
    Connection,
}

pub fn ce_differential(
    ad: &Adapted,
    alg: &Alg,
    which: CeAlgebroid,
    module: CeModule,
    omega: &PolyForm,
) -> Result<PolyForm, PairError> {
    if which == CeAlgebroid::B && !ad.matched {
        return Err(PairError::NotMatched { i: 0, j: 0 });
    }
    let mut d = ad.ce_deriv(alg, which);
    match module {
        CeModule::Trivial => {
            if omega.terms.keys().any(|k| k.val.0 != 0 || !k.chi.is_zero()) {
                return Err(PairError::Shape("trivial module takes scalar forms".into()));
            }
            for c in d.chi.iter_mut() {
                *c = MixedForm::zero();
            }
            d.theta.clear();
        }
        CeModule::Bott => {
            if which != CeAlgebroid::A {
                return Err(PairError::NonFlat);
            }
        }
        CeModule::Connection => {
            if !connection_is_flat(ad, which) {
                return Err(PairError::NonFlat);
            }
        }
    }
    Ok(d.apply_poly(alg, omega))
}

/// Whether the connection restricted to the given directions is flat.
pub fn connection_is_flat(ad: &Adapted, which: CeAlgebroid) -> bool {
    let dirs: Vec<usize> = match which {
        CeAlgebroid::L => (0..ad.n()).collect(),
        CeAlgebroid::A => (0..ad.a()).collect(),
        CeAlgebroid::B => (ad.a()..ad.n()).collect(),
    };
    for &i in &dirs {
        for &j in &dirs {
            if j <= i {
                continue;
            }
            let mut ei = vec![Poly::zero(); ad.n()];
            ei[i] = Poly::one();
            let mut ej = vec![Poly::zero(); ad.n()];
            ej[j] = Poly::one();
            let br = ad.bracket(&ei, &ej);
            for k in 0..ad.r() {
                let mut dk = vec![Poly::zero(); ad.r()];
                dk[k] = Poly::one();
                let a1 = ad.nabla_basis(i, &ad.nabla_basis(j, &dk));
                let a2 = ad.nabla_basis(j, &ad.nabla_basis(i, &dk));
                let mut a3 = vec![Poly::zero(); ad.r()];
                for (m, f) in br.iter().enumerate() {
                    if f.is_zero() {
                        continue;
                    }
                    let t = ad.nabla_basis(m, &dk);
                    for q in 0..ad.r() {
                        a3[q] += &(f * &t[q]);
                    }
                }
                if (0..ad.r()).any(|q| !(&(&a1[q] - &a2[q]) - &a3[q]).is_zero()) {
                    return false;
                }
            }
        }
    }
    true
}

/// Components of `d_L ω` by bidegree shift.
#[derive(Clone, Debug, Default)]
pub struct BidegreeSplit {
    /// `Ω^{u+2, v-1}`
    pub forbidden: MixedForm,
    pub p10: MixedForm,
    pub p01: MixedForm,
    /// `Ω^{u-1, v+2}`
    pub m12: MixedForm,
}

pub fn bidegree_check(ad: &Adapted, omega: &MixedForm) -> Result<BidegreeSplit, String> {
    let alg = ad.alg(0);
    let mut d = ad.ce_deriv(&alg, CeAlgebroid::L);
    for c in d.chi.iter_mut() {
        *c = MixedForm::zero();
    }
    let mut out = BidegreeSplit::default();
    for (k, c) in &omega.terms {
        if !k.chi.is_zero() {
            return Err("bidegree_check takes scalar forms".into());
        }
        let (u, v) = alg.bidegree(k.lam);
        let img = d.apply(&alg, &Form::term(k.lam, k.chi.clone(), (), c.clone()));
        for (k2, c2) in img.terms {
            let (u2, v2) = alg.bidegree(k2.lam);
            let target = match (u2 as i32 - u as i32, v2 as i32 - v as i32) {
                (2, -1) => &mut out.forbidden,
                (1, 0) => &mut out.p10,
                (0, 1) => &mut out.p01,
                (-1, 2) => &mut out.m12,
                other => return Err(format!("unexpected bidegree shift {other:?}")),
            };
            target.add_term(k2, c2);
        }
    }
    if !out.forbidden.is_zero() {
        return Err(format!("Ω^(u+2,v-1) component {:?}", out.forbidden));
    }
    if ad.matched && !out.m12.is_zero() {
        return Err(format!("Ω^(u-1,v+2) component for a matched pair {:?}", out.m12));
    }
    Ok(out)
}

/// Scalar basis of `Λ^{≤k}` over the coframe indices in `dirs`.
pub fn lambda_basis(alg: &Alg, max: u32) -> Vec<MixedForm> {
    alg.lam_masks(max)
        .into_iter()
        .map(|m| alg.mono(m, alg.chi0()))
        .collect()
}

impl From<&TorsionData> for LConnection {
    fn from(t: &TorsionData) -> Self {
        t.corrected.clone()
    }
}
