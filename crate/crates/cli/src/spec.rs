//! Pair-spec files: JSON with a schema version, sparse 1-based tables and
//! coefficients written as polynomial strings.

use std::path::Path;

use anyhow::{bail, Context, Result};
use fedpair_core::coeffs::Poly;
use fedpair_core::corpus::PairConfig;
use fedpair_core::liepair::{LConnection, LiePair, Splitting};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// A sparse entry `(i, j, k, coefficient)`.
pub type Entry3 = (usize, usize, usize, String);
/// A sparse entry `(i, j, coefficient)`.
pub type Entry2 = (usize, usize, String);

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub schema_version: u32,
    pub name: String,
    pub d: usize,
    pub a: usize,
    pub r: usize,
    /// `[e_i, e_j] ∋ c e_k`. Both orders must be listed.
    #[serde(default)]
    pub brackets: Vec<Entry3>,
    /// `ρ(e_i) ∋ c ∂/∂x_l`.
    #[serde(default)]
    pub anchor: Vec<Entry2>,
    /// `j(ē_k) ∋ c e_m` for `m ≤ a`.
    #[serde(default)]
    pub splitting: Vec<Entry2>,
    #[serde(default)]
    pub connection: ConnectionSpec,
    #[serde(default = "default_trunc")]
    pub trunc: u32,
    #[serde(default = "default_filt")]
    pub filt: u32,
    #[serde(default)]
    pub suites: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConnectionSpec {
    /// Christoffel symbols along `B` only, `∇_{ē_i} ē_j ∋ c ē_k`; the
    /// `A` directions are filled in by the Bott representation.
    Bott {
        #[serde(default)]
        gamma_b: Vec<Entry3>,
    },
    /// The whole table `∇_{e_i} ē_j ∋ c ē_k` with `i` ranging over `L`.
    Full {
        #[serde(default)]
        gamma: Vec<Entry3>,
    },
}

impl Default for ConnectionSpec {
    fn default() -> Self {
        ConnectionSpec::Bott { gamma_b: Vec::new() }
    }
}

fn default_trunc() -> u32 {
    4
}

fn default_filt() -> u32 {
    4
}

pub fn parse_spec(path: &Path) -> Result<PairSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_spec_str(&text).with_context(|| format!("in {}", path.display()))
}

pub fn parse_spec_str(text: &str) -> Result<PairSpec> {
    let spec: PairSpec = serde_json::from_str(text).context("schema violation")?;
    if spec.schema_version != SCHEMA_VERSION {
        bail!("unsupported schema_version {} (expected {SCHEMA_VERSION})", spec.schema_version);
    }
    spec.build()?;
    Ok(spec)
}

fn coeff(field: &str, at: usize, s: &str, d: usize) -> Result<Poly> {
    let p = Poly::parse(s).with_context(|| format!("field `{field}[{at}]`: {s:?} is not a rational polynomial"))?;
    if p.terms().any(|(m, _)| m.span() > d) {
        bail!("field `{field}[{at}]`: {s:?} uses a coordinate beyond x{d}");
    }
    Ok(p)
}

fn index(field: &str, at: usize, what: &str, v: usize, max: usize) -> Result<usize> {
    if v == 0 || v > max {
        bail!("field `{field}[{at}]`: {what} = {v} is outside 1..={max}");
    }
    Ok(v - 1)
}

impl PairSpec {
    pub fn n(&self) -> usize {
        self.a + self.r
    }

    /// Builds the pair with its splitting and connection. Shape and
    /// coefficient errors name the offending field; structural validation
    /// is left to the `validate` suite.
    pub fn build(&self) -> Result<PairConfig> {
        let (n, a, r, d) = (self.n(), self.a, self.r, self.d);
        let mut pair = LiePair::new(self.name.clone(), d, a, r);
        for (at, (i, j, k, c)) in self.brackets.iter().enumerate() {
            let f = "brackets";
            let (i, j, k) = (index(f, at, "i", *i, n)?, index(f, at, "j", *j, n)?, index(f, at, "k", *k, n)?);
            pair.c[i][j][k] = coeff(f, at, c, d)?;
        }
        for (at, (i, l, c)) in self.anchor.iter().enumerate() {
            if d == 0 {
                bail!("field `anchor[{at}]`: the base is a point");
            }
            let (i, l) = (index("anchor", at, "i", *i, n)?, index("anchor", at, "l", *l, d)?);
            pair.rho[i].0[l] = coeff("anchor", at, c, d)?;
        }
        let mut splitting = Splitting::zero(a, r);
        for (at, (k, m, c)) in self.splitting.iter().enumerate() {
            let f = "splitting";
            let (k, m) = (index(f, at, "k", *k, r)?, index(f, at, "m", *m, a)?);
            splitting.j[m][k] = coeff(f, at, c, d)?;
        }
        let conn = match &self.connection {
            ConnectionSpec::Bott { gamma_b } => {
                let mut g = vec![vec![vec![Poly::zero(); r]; r]; r];
                for (at, (i, j, k, c)) in gamma_b.iter().enumerate() {
                    let f = "connection.gamma_b";
                    let (i, j, k) = (index(f, at, "i", *i, r)?, index(f, at, "j", *j, r)?, index(f, at, "k", *k, r)?);
                    g[i][j][k] = coeff(f, at, c, d)?;
                }
                LConnection::bott_extension(&pair, &splitting, &g)
            }
            ConnectionSpec::Full { gamma } => {
                let mut conn = LConnection::zero(n, r);
                for (at, (i, j, k, c)) in gamma.iter().enumerate() {
                    let f = "connection.gamma";
                    let (i, j, k) = (index(f, at, "i", *i, n)?, index(f, at, "j", *j, r)?, index(f, at, "k", *k, r)?);
                    conn.gamma[i][j][k] = coeff(f, at, c, d)?;
                }
                conn
            }
        };
        pair.check_shape()?;
        Ok(PairConfig { pair, splitting, conn })
    }

    /// The spec describing an in-memory configuration, with the connection
    /// written out in full.
    pub fn from_config(cfg: &PairConfig, trunc: u32, filt: u32) -> PairSpec {
        let p = &cfg.pair;
        let s = |c: &Poly| c.to_string();
        let mut brackets = Vec::new();
        for (i, row) in p.c.iter().enumerate() {
            for (j, col) in row.iter().enumerate() {
                for (k, c) in col.iter().enumerate() {
                    if !c.is_zero() {
                        brackets.push((i + 1, j + 1, k + 1, s(c)));
                    }
                }
            }
        }
        let mut anchor = Vec::new();
        for (i, v) in p.rho.iter().enumerate() {
            for (l, c) in v.0.iter().enumerate() {
                if !c.is_zero() {
                    anchor.push((i + 1, l + 1, s(c)));
                }
            }
        }
        let mut splitting = Vec::new();
        for (m, row) in cfg.splitting.j.iter().enumerate() {
            for (k, c) in row.iter().enumerate() {
                if !c.is_zero() {
                    splitting.push((k + 1, m + 1, s(c)));
                }
            }
        }
        let mut gamma = Vec::new();
        for (i, row) in cfg.conn.gamma.iter().enumerate() {
            for (j, col) in row.iter().enumerate() {
                for (k, c) in col.iter().enumerate() {
                    if !c.is_zero() {
                        gamma.push((i + 1, j + 1, k + 1, s(c)));
                    }
                }
            }
        }
        PairSpec {
            schema_version: SCHEMA_VERSION,
            name: p.name.clone(),
            d: p.d,
            a: p.a,
            r: p.r,
            brackets,
            anchor,
            splitting,
            connection: ConnectionSpec::Full { gamma },
            trunc,
            filt,
            suites: Vec::new(),
        }
    }
}
