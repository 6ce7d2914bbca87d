//! The bundled example pairs, each with a splitting and a connection.

use crate::coeffs::Poly;
use crate::liepair::{Adapted, LConnection, LiePair, PairError, Splitting};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairConfig {
    pub pair: LiePair,
    pub splitting: Splitting,
    pub conn: LConnection,
}

impl PairConfig {
    pub fn adapted(&self) -> Result<Adapted, PairError> {
        Adapted::new(&self.pair, &self.splitting, &self.conn)
    }

    pub fn name(&self) -> &str {
        &self.pair.name
    }
}

fn p(n: i64) -> Poly {
    Poly::int(n)
}

fn zero_b(p: &LiePair) -> Vec<Vec<Vec<Poly>>> {
    vec![vec![vec![Poly::zero(); p.r]; p.r]; p.r]
}

fn with_bott(pair: LiePair, gamma_b: Vec<Vec<Vec<Poly>>>) -> PairConfig {
    let splitting = Splitting::zero(pair.a, pair.r);
    let conn = LConnection::bott_extension(&pair, &splitting, &gamma_b);
    PairConfig { pair, splitting, conn }
}

/// Three-dimensional abelian algebra, `A` a plane.
pub fn abelian() -> PairConfig {
    let pair = LiePair::new("abelian", 0, 2, 1);
    let g = zero_b(&pair);
    with_bott(pair, g)
}

/// `h₃` with `e0 = z`, `e1 = x`, `e2 = y`, `[x, y] = z`, `A = ⟨z⟩`.
pub fn heisenberg() -> PairConfig {
    let mut pair = LiePair::new("heisenberg", 0, 1, 2);
    pair.set_bracket(1, 2, &[(0, p(1))]);
    let g = zero_b(&pair);
    with_bott(pair, g)
}

/// `[h, e] = e` with `A = ⟨h⟩`, `B = ⟨ē⟩`.
pub fn aff1() -> PairConfig {
    let mut pair = LiePair::new("aff1", 0, 1, 1);
    pair.set_bracket(0, 1, &[(1, p(1))]);
    let g = zero_b(&pair);
    with_bott(pair, g)
}

/// `sl₂` with `e0 = h`, `e1 = e`, `e2 = f` and `A` the Borel `⟨h, e⟩`.
pub fn sl2_borel() -> PairConfig {
    let mut pair = LiePair::new("sl2-borel", 0, 2, 1);
    pair.set_bracket(0, 1, &[(1, p(2))]);
    pair.set_bracket(0, 2, &[(2, p(-2))]);
    pair.set_bracket(1, 2, &[(0, p(1))]);
    let g = zero_b(&pair);
    with_bott(pair, g)
}

/// `sl₂` with `e0 = f`, `e1 = h`, `e2 = e`, `A = ⟨f⟩`, `B = ⟨h̄, ē⟩`, and
/// `∇_h ē = 2ē` so that `∇` is torsion-free.
pub fn sl2_matched() -> PairConfig {
    let mut pair = sl2_matched_pair();
    pair.name = "sl2-matched".into();
    let mut g = zero_b(&pair);
    g[0][1][1] = p(2);
    with_bott(pair, g)
}

/// Same pair with `∇ = 0` on `B` directions, which has torsion.
pub fn sl2_matched_torsioned() -> PairConfig {
    let mut pair = sl2_matched_pair();
    pair.name = "sl2-matched-torsioned".into();
    let g = zero_b(&pair);
    with_bott(pair, g)
}

fn sl2_matched_pair() -> LiePair {
    let mut pair = LiePair::new("sl2", 0, 1, 2);
    pair.set_bracket(0, 1, &[(0, p(2))]);
    pair.set_bracket(0, 2, &[(1, p(-1))]);
    pair.set_bracket(1, 2, &[(2, p(2))]);
    pair
}

/// `T ℝ` over the line with `A = 0`.
pub fn tangent_line() -> PairConfig {
    let mut pair = LiePair::new("tangent-line-a0", 1, 0, 1);
    pair.rho[0].0[0] = p(1);
    let g = zero_b(&pair);
    with_bott(pair, g)
}

/// `T ℝ²` with frame `e0 = ∂x + y∂y`, `e1 = ∂y` and `A = ⟨e0⟩`.
pub fn foliation_plane() -> PairConfig {
    let mut pair = LiePair::new("foliation-plane-poly", 2, 1, 1);
    pair.rho[0].0[0] = p(1);
    pair.rho[0].0[1] = Poly::var(1);
    pair.rho[1].0[1] = p(1);
    pair.set_bracket(0, 1, &[(1, p(-1))]);
    let g = zero_b(&pair);
    with_bott(pair, g)
}

/// The seven bundled pairs.
pub fn all() -> Vec<PairConfig> {
    vec![
        abelian(),
        heisenberg(),
        aff1(),
        sl2_borel(),
        sl2_matched(),
        tangent_line(),
        foliation_plane(),
    ]
}

pub fn by_name(name: &str) -> Option<PairConfig> {
    all()
        .into_iter()
        .chain([sl2_matched_torsioned()])
        .find(|c| c.name() == name)
}

/// `sl₂` with `[e, f] = h` but `[f, e]` recorded as `+h`.
pub fn broken_antisymmetry() -> LiePair {
    let mut pair = sl2_borel().pair;
    pair.name = "sl2-typo".into();
    pair.c[2][1][0] = p(1);
    pair
}

/// Heisenberg with `A = ⟨x, y⟩`, which is not closed under the bracket.
pub fn open_subspace() -> LiePair {
    let mut pair = LiePair::new("heisenberg-open", 0, 2, 1);
    pair.set_bracket(0, 1, &[(2, p(1))]);
    pair
}
