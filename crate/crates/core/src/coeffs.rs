//! Exact scalars, polynomial coefficients on the base, multi-indices and
//! the small amount of combinatorics shared by every other module.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use smallvec::SmallVec;
use thiserror::Error;

pub type Rational = BigRational;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn frac(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

pub fn binomial(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoeffError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("cannot parse polynomial {input:?}: {reason}")]
    Parse { input: String, reason: String },
}

/// Exponent vector of a monomial on the base, trailing zeros trimmed so that
/// the same monomial has one representation whatever the ambient dimension.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Mono(SmallVec<[u32; 4]>);

impl Mono {
    pub fn one() -> Self {
        Mono(SmallVec::new())
    }

    pub fn var(i: usize) -> Self {
        let mut v: SmallVec<[u32; 4]> = SmallVec::from_elem(0, i + 1);
        v[i] = 1;
        Mono(v)
    }

    pub fn from_exps(exps: &[u32]) -> Self {
        let mut m = Mono(exps.iter().copied().collect());
        m.trim();
        m
    }

    fn trim(&mut self) {
        while self.0.last() == Some(&0) {
            self.0.pop();
        }
    }

    pub fn exp(&self, i: usize) -> u32 {
        self.0.get(i).copied().unwrap_or(0)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Number of leading coordinates this monomial touches.
    pub fn span(&self) -> usize {
        self.0.len()
    }

    pub fn mul(&self, other: &Mono) -> Mono {
        let len = self.0.len().max(other.0.len());
        let v = (0..len).map(|i| self.exp(i) + other.exp(i)).collect();
        Mono(v)
    }

    /// `∂/∂x_i` applied to the monomial: (multiplier, result).
    pub fn diff(&self, i: usize) -> Option<(u32, Mono)> {
        let e = self.exp(i);
        if e == 0 {
            return None;
        }
        let mut m = self.clone();
        m.0[i] -= 1;
        m.trim();
        Some((e, m))
    }
}

// graded lexicographic: total degree first, then lexicographic with x1 biggest
impl Ord for Mono {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Mono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Mono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{}", i + 1)?;
            } else {
                write!(f, "x{}^{}", i + 1, e)?;
            }
        }
        if first {
            write!(f, "1")?;
        }
        Ok(())
    }
}

/// A polynomial on the base `ℝ^d` with exact rational coefficients.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    terms: BTreeMap<Mono, Rational>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn one() -> Self {
        Poly::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        let mut p = Poly::zero();
        p.add_term(Mono::one(), c);
        p
    }

    pub fn int(n: i64) -> Self {
        Poly::constant(rat(n))
    }

    pub fn var(i: usize) -> Self {
        let mut p = Poly::zero();
        p.add_term(Mono::var(i), Rational::one());
        p
    }

    pub fn monomial(m: Mono, c: Rational) -> Self {
        let mut p = Poly::zero();
        p.add_term(m, c);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .get(&Mono::one())
                .is_some_and(|c| c.is_one())
    }

    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => self.terms.get(&Mono::one()).cloned(),
            _ => None,
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Rational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(Mono::degree).max()
    }

    /// Smallest `d` such that the polynomial lives on `ℝ^d`.
    pub fn min_dim(&self) -> usize {
        self.terms.keys().map(Mono::span).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, m: Mono, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn scale(&self, c: &Rational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
        }
    }

    pub fn diff(&self, i: usize) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            if let Some((e, m2)) = m.diff(i) {
                out.add_term(m2, c * rat(e as i64));
            }
        }
        out
    }

    /// Drops every monomial of degree above `deg`.
    pub fn truncate(&self, deg: u32) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() <= deg)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn parse(input: &str) -> Result<Poly, CoeffError> {
        parse_poly(input)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for Poly {
    type Output = Poly;
    fn add(mut self, rhs: Poly) -> Poly {
        self += &rhs;
        self
    }
}

impl AddAssign<&Poly> for Poly {
    fn add_assign(&mut self, rhs: &Poly) {
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), c.clone());
        }
    }
}

impl SubAssign<&Poly> for Poly {
    fn sub_assign(&mut self, rhs: &Poly) {
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), -c);
        }
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(mut self, rhs: Poly) -> Poly {
        self -= &rhs;
        self
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        -&self
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }
}

impl Mul for Poly {
    type Output = Poly;
    fn mul(self, rhs: Poly) -> Poly {
        &self * &rhs
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // highest term first reads more naturally
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let is_const = *m == Mono::one();
            if is_const {
                write!(f, "{abs}")?;
            } else if abs.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{abs}*{m}")?;
            }
        }
        Ok(())
    }
}

fn parse_err(input: &str, reason: impl Into<String>) -> CoeffError {
    CoeffError::Parse {
        input: input.to_string(),
        reason: reason.into(),
    }
}

fn parse_uint(s: &str, input: &str) -> Result<BigInt, CoeffError> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(parse_err(input, format!("expected an integer, found {s:?}")));
    }
    s.parse::<BigInt>()
        .map_err(|e| parse_err(input, e.to_string()))
}

fn parse_factor(tok: &str, input: &str) -> Result<(Rational, Mono), CoeffError> {
    if let Some(rest) = tok.strip_prefix('x') {
        let (idx, pow) = match rest.split_once('^') {
            Some((i, p)) => (i, p),
            None => (rest, "1"),
        };
        let i = parse_uint(idx, input)?;
        let p = parse_uint(pow, input)?;
        let i: usize = i
            .try_into()
            .map_err(|_| parse_err(input, "variable index too large"))?;
        if i == 0 {
            return Err(parse_err(input, "variables are numbered from x1"));
        }
        let p: u32 = p
            .try_into()
            .map_err(|_| parse_err(input, "exponent too large"))?;
        let mut e = vec![0u32; i];
        e[i - 1] = p;
        return Ok((Rational::one(), Mono::from_exps(&e)));
    }
    let (n, d) = match tok.split_once('/') {
        Some((n, d)) => (n, d),
        None => (tok, "1"),
    };
    let n = parse_uint(n, input)?;
    let d = parse_uint(d, input)?;
    if d.is_zero() {
        return Err(parse_err(input, "zero denominator"));
    }
    Ok((Rational::new(n, d), Mono::one()))
}

fn parse_poly(input: &str) -> Result<Poly, CoeffError> {
    let s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(parse_err(input, "empty expression"));
    }
    let mut out = Poly::zero();
    let bytes = s.as_bytes();
    let mut pos = 0;
    while pos < bytes.len() {
        let mut sign = Rational::one();
        while pos < bytes.len() && (bytes[pos] == b'+' || bytes[pos] == b'-') {
            if bytes[pos] == b'-' {
                sign = -sign;
            }
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos] != b'+' && bytes[pos] != b'-' {
            pos += 1;
        }
        let term = &s[start..pos];
        if term.is_empty() {
            return Err(parse_err(input, "dangling sign"));
        }
        let mut coeff = sign;
        let mut mono = Mono::one();
        for factor in term.split('*') {
            let (c, m) = parse_factor(factor, input)?;
            coeff *= c;
            mono = mono.mul(&m);
        }
        out.add_term(mono, coeff);
    }
    Ok(out)
}

/// A vector field `Σ v_i ∂/∂x_i` on the base.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct BaseDerivation(pub Vec<Poly>);

impl BaseDerivation {
    pub fn zero(d: usize) -> Self {
        BaseDerivation(vec![Poly::zero(); d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Poly::is_zero)
    }

    pub fn apply(&self, f: &Poly) -> Result<Poly, CoeffError> {
        if f.min_dim() > self.dim() {
            return Err(CoeffError::Dimension {
                expected: self.dim(),
                found: f.min_dim(),
            });
        }
        Ok(self.apply_unchecked(f))
    }

    pub fn apply_unchecked(&self, f: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (i, v) in self.0.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            let df = f.diff(i);
            if !df.is_zero() {
                out += &(v * &df);
            }
        }
        out
    }

    pub fn scale(&self, f: &Poly) -> BaseDerivation {
        BaseDerivation(self.0.iter().map(|v| v * f).collect())
    }

    pub fn add(&self, other: &BaseDerivation) -> BaseDerivation {
        BaseDerivation(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Commutator of base vector fields.
    pub fn bracket(&self, other: &BaseDerivation) -> BaseDerivation {
        let comps = (0..self.dim())
            .map(|i| &self.apply_unchecked(&other.0[i]) - &other.apply_unchecked(&self.0[i]))
            .collect();
        BaseDerivation(comps)
    }
}

pub fn apply_derivation(v: &BaseDerivation, f: &Poly) -> Result<Poly, CoeffError> {
    v.apply(f)
}

/// Exponent vector over the fibre coordinates of `B`; its length is the rank.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MultiIndex(pub SmallVec<[u32; 4]>);

impl MultiIndex {
    pub fn zero(r: usize) -> Self {
        MultiIndex(SmallVec::from_elem(0, r))
    }

    pub fn unit(r: usize, k: usize) -> Self {
        let mut m = MultiIndex::zero(r);
        m.0[k] = 1;
        m
    }

    pub fn from_slice(v: &[u32]) -> Self {
        MultiIndex(v.iter().copied().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> u32 {
        self.0[k]
    }

    pub fn abs(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn factorial(&self) -> BigInt {
        self.0
            .iter()
            .fold(BigInt::one(), |acc, &e| acc * factorial(e))
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        let mut out = self.clone();
        for (x, &y) in out.0.iter_mut().zip(&other.0) {
            if *x < y {
                return None;
            }
            *x -= y;
        }
        Some(out)
    }

    pub fn inc(&self, k: usize) -> MultiIndex {
        let mut m = self.clone();
        m.0[k] += 1;
        m
    }

    pub fn dec(&self, k: usize) -> Option<MultiIndex> {
        if self.0[k] == 0 {
            return None;
        }
        let mut m = self.clone();
        m.0[k] -= 1;
        Some(m)
    }

    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `Π binom(J_k, I_k)`.
    pub fn binomial(&self, sub: &MultiIndex) -> BigInt {
        self.0
            .iter()
            .zip(&sub.0)
            .fold(BigInt::one(), |acc, (&j, &i)| acc * binomial(j, i))
    }

    /// Every `I ≤ self` componentwise.
    pub fn sub_indices(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex(SmallVec::new())];
        for &e in &self.0 {
            let mut next = Vec::with_capacity(out.len() * (e as usize + 1));
            for m in &out {
                for k in 0..=e {
                    let mut m2 = m.clone();
                    m2.0.push(k);
                    next.push(m2);
                }
            }
            out = next;
        }
        out
    }

    /// The letters `k` repeated `J_k` times, ascending.
    pub fn word(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.abs() as usize);
        for (k, &e) in self.0.iter().enumerate() {
            for _ in 0..e {
                w.push(k);
            }
        }
        w
    }

    pub fn from_word(r: usize, word: &[usize]) -> MultiIndex {
        let mut m = MultiIndex::zero(r);
        for &k in word {
            m.0[k] += 1;
        }
        m
    }

    /// All multi-indices of length `r` with `|I| = deg`, in lexicographic order.
    pub fn all_of_degree(r: usize, deg: u32) -> Vec<MultiIndex> {
        fn rec(r: usize, deg: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if prefix.len() + 1 == r {
                prefix.push(deg);
                out.push(MultiIndex::from_slice(prefix));
                prefix.pop();
                return;
            }
            for k in (0..=deg).rev() {
                prefix.push(k);
                rec(r, deg - k, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        if r == 0 {
            if deg == 0 {
                out.push(MultiIndex::zero(0));
            }
            return out;
        }
        rec(r, deg, &mut Vec::new(), &mut out);
        out
    }

    pub fn all_up_to(r: usize, max: u32) -> Vec<MultiIndex> {
        (0..=max).flat_map(|d| MultiIndex::all_of_degree(r, d)).collect()
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// `⟨∂^I, χ^J⟩ = I! δ_{I,J}`.
pub fn duality_pairing(i: &MultiIndex, j: &MultiIndex) -> Result<Rational, CoeffError> {
    if i.len() != j.len() {
        return Err(CoeffError::Dimension {
            expected: i.len(),
            found: j.len(),
        });
    }
    if i == j {
        Ok(Rational::from_integer(i.factorial()))
    } else {
        Ok(Rational::zero())
    }
}

/// A permutation of `0..p+q` stored as images, with its sign.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shuffle {
    pub perm: Vec<usize>,
    pub sign: i8,
}

/// Every `(p,q)`-shuffle: `σ(0) < … < σ(p-1)` and `σ(p) < … < σ(p+q-1)`.
pub fn shuffles(p: usize, q: usize) -> Vec<Shuffle> {
    let n = p + q;
    let mut out = Vec::new();
    for first in itertools::Itertools::combinations(0..n, p) {
        let mut perm = first.clone();
        perm.extend((0..n).filter(|x| !first.contains(x)));
        // inversions: pairs (a in first block, b in second) with σ(a) > σ(b)
        let inv: usize = first
            .iter()
            .enumerate()
            .map(|(i, &x)| x - i)
            .sum();
        let sign = if inv % 2 == 0 { 1 } else { -1 };
        out.push(Shuffle { perm, sign });
    }
    out
}

/// Sign of the permutation that sorts `word` (which must have distinct entries).
pub fn sort_sign(word: &[usize]) -> i8 {
    let mut inv = 0usize;
    for i in 0..word.len() {
        for j in i + 1..word.len() {
            if word[i] > word[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Koszul sign of multiplying two exterior monomials given as bit masks.
/// Returns `None` when they share a factor.
pub fn wedge_sign(a: u32, b: u32) -> Option<i8> {
    if a & b != 0 {
        return None;
    }
    // each bit of b must hop over the bits of a that sit above it
    let mut count = 0u32;
    let mut bb = b;
    while bb != 0 {
        let low = bb.trailing_zeros();
        count += (a >> (low + 1)).count_ones();
        bb &= bb - 1;
    }
    Some(if count % 2 == 0 { 1 } else { -1 })
}

pub fn sign_rat(s: i8) -> Rational {
    rat(s as i64)
}

pub fn big(n: BigInt) -> Rational {
    Rational::from_integer(n)
}
