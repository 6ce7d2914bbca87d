//! Orchestration of the verification suites for one pair spec.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use clap::ValueEnum;
use fedpair_core::dpoly;
use fedpair_core::fedosov::{self, FedosovError, FedosovResult};
use fedpair_core::forms::{ContractionData, Orientation};
use fedpair_core::liepair::{Adapted, LConnection};
use fedpair_core::tpoly::{self, Gerstenhaber, TpolyKind};
use fedpair_core::uea::PbwTable;
use serde::{Deserialize, Serialize};

use crate::cache::{Cache, Served};
use crate::report::{Check, RunStats, Status, SuiteReport};
use crate::spec::PairSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Validate,
    Pbw,
    Contraction,
    Fedosov,
    Ew,
    Tpoly,
    Dpoly,
    Matched,
    Cohomology,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Validate,
        Suite::Pbw,
        Suite::Contraction,
        Suite::Fedosov,
        Suite::Ew,
        Suite::Tpoly,
        Suite::Dpoly,
        Suite::Matched,
        Suite::Cohomology,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Validate => "validate",
            Suite::Pbw => "pbw",
            Suite::Contraction => "contraction",
            Suite::Fedosov => "fedosov",
            Suite::Ew => "ew",
            Suite::Tpoly => "tpoly",
            Suite::Dpoly => "dpoly",
            Suite::Matched => "matched",
            Suite::Cohomology => "cohomology",
        }
    }

    pub fn parse(s: &str) -> Option<Suite> {
        Suite::from_str(s, true).ok()
    }
}

/// Settings after flags have been applied over the spec.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct RunConfig {
    pub trunc: u32,
    pub filt: u32,
    pub suites: Vec<Suite>,
}

type CheckResult = Result<String, String>;

struct Ctx<'a> {
    spec: &'a PairSpec,
    run: &'a RunConfig,
    cache: Option<&'a Cache>,
    ad: Option<Adapted>,
    res: Option<Result<FedosovResult, String>>,
    tables: BTreeMap<u32, Arc<PbwTable>>,
    checks: Vec<Check>,
    timings: Vec<(String, f64)>,
    stats: RunStats,
}

impl Ctx<'_> {
    fn record(&mut self, suite: Suite, name: &str, identity: &str, f: impl FnOnce(&mut Self) -> CheckResult) {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| f(self))).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (status, detail, witness) = match outcome {
            Ok(d) => (Status::Pass, (!d.is_empty()).then_some(d), None),
            Err(w) => (Status::Fail, None, Some(w)),
        };
        self.push(suite, name, identity, status, detail, witness);
        self.timings.push((format!("{}/{name}", suite.name()), start.elapsed().as_secs_f64()));
    }

    fn skip(&mut self, suite: Suite, name: &str, identity: &str, why: &str) {
        self.push(suite, name, identity, Status::Skip, Some(why.to_string()), None);
    }

    fn push(&mut self, suite: Suite, name: &str, identity: &str, status: Status, detail: Option<String>, witness: Option<String>) {
        self.checks.push(Check {
            suite,
            name: name.to_string(),
            identity: identity.to_string(),
            status,
            detail,
            witness,
        });
    }

    fn table(&mut self, depth: u32) -> Arc<PbwTable> {
        if let Some(t) = self.tables.get(&depth) {
            return t.clone();
        }
        let ad = self.ad.as_ref().expect("tables need adapted data");
        let t = match self.cache {
            Some(c) => {
                let (t, served, warning) = c.pbw_table(self.spec, ad, depth);
                match served {
                    Served::Hit => self.stats.cache_hits += 1,
                    Served::Miss => self.stats.cache_misses += 1,
                    Served::Bypassed => self.stats.cache_bypassed += 1,
                }
                self.stats.warnings.extend(warning);
                t
            }
            None => PbwTable::build(ad, depth),
        };
        let t = Arc::new(t);
        self.tables.insert(depth, t.clone());
        t
    }

    fn fedosov(&mut self) -> Result<&FedosovResult, String> {
        if self.res.is_none() {
            let ad = self.ad.as_ref().expect("checked by caller");
            let r = fedosov::fedosov_iterate(ad, self.run.trunc).map_err(|e| match e {
                FedosovError::Torsion { corrected } => {
                    format!("connection has torsion; torsion-free replacement ∇' = {}", render_connection(&corrected))
                }
                e => e.to_string(),
            });
            self.res = Some(r);
        }
        self.res.as_ref().unwrap().as_ref().map_err(Clone::clone)
    }
}

/// Nonzero Christoffel symbols as 1-based `(i, j, k): c` entries.
pub fn render_connection(conn: &LConnection) -> String {
    let mut parts = Vec::new();
    for (i, row) in conn.gamma.iter().enumerate() {
        for (j, col) in row.iter().enumerate() {
            for (k, c) in col.iter().enumerate() {
                if !c.is_zero() {
                    parts.push(format!("({}, {}, {}): {c}", i + 1, j + 1, k + 1));
                }
            }
        }
    }
    if parts.is_empty() {
        "0".into()
    } else {
        format!("{{{}}}", parts.join(", "))
    }
}

fn identity_for_validation(name: &str) -> &'static str {
    match name {
        "antisymmetry" => "c_ij^k = -c_ji^k",
        "jacobi" => "[[x, y], z] + cyclic = 0",
        "anchor-morphism" => "ρ[x, y] = [ρx, ρy]",
        "a-closure" => "[A, A] ⊂ A",
        "shape" => "table dimensions match (d, a, r)",
        _ => "structure check",
    }
}

pub fn run_suites(spec: &PairSpec, run: &RunConfig, cache: Option<&Cache>) -> SuiteReport {
    let cfg = spec.build().expect("spec was validated on load");
    let mut ctx = Ctx {
        spec,
        run,
        cache,
        ad: None,
        res: None,
        tables: BTreeMap::new(),
        checks: Vec::new(),
        timings: Vec::new(),
        stats: RunStats::default(),
    };
    let start = Instant::now();

    // validation gates everything else
    let rep = cfg.pair.validate();
    for c in &rep.checks {
        let witness = c.witness.as_ref().map(|w| format!("({})", w.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")));
        if run.suites.contains(&Suite::Validate) {
            let status = if c.passed { Status::Pass } else { Status::Fail };
            ctx.push(Suite::Validate, c.name, identity_for_validation(c.name), status, None, witness);
        }
    }
    let mut blocked = (!rep.passed()).then(|| "the pair fails validation".to_string());
    if blocked.is_none() {
        match cfg.adapted() {
            Ok(ad) => ctx.ad = Some(ad),
            Err(e) => blocked = Some(format!("adapted data unavailable: {e}")),
        }
    }
    if let Some(why) = &blocked {
        if !rep.passed() && !run.suites.contains(&Suite::Validate) {
            ctx.push(Suite::Validate, "structure", "pair axioms", Status::Fail, None, Some(why.clone()));
        } else if rep.passed() {
            ctx.push(Suite::Validate, "adapted", "splitting and connection", Status::Fail, None, Some(why.clone()));
        }
    }

    for &suite in &run.suites {
        if suite == Suite::Validate {
            continue;
        }
        if let Some(why) = &blocked {
            let why = why.clone();
            ctx.skip(suite, "all", "", &why);
            continue;
        }
        match suite {
            Suite::Validate => {}
            Suite::Pbw => pbw_suite(&mut ctx),
            Suite::Contraction => contraction_suite(&mut ctx),
            Suite::Fedosov => fedosov_suite(&mut ctx),
            Suite::Ew => ew_suite(&mut ctx),
            Suite::Tpoly => tpoly_suite(&mut ctx),
            Suite::Dpoly => dpoly_suite(&mut ctx),
            Suite::Matched => matched_suite(&mut ctx),
            Suite::Cohomology => cohomology_suite(&mut ctx),
        }
    }

    ctx.stats.wall_seconds = start.elapsed().as_secs_f64();
    ctx.stats.timings = ctx.timings;
    SuiteReport::new(spec, run.clone(), ctx.checks, ctx.stats)
}

fn pbw_suite(ctx: &mut Ctx) {
    let f = ctx.run.filt;
    ctx.record(Suite::Pbw, "coalgebra-isomorphism", "Δ∘pbw = (pbw⊗pbw)∘Δ, pbw∘pbw⁻¹ = id", |c| {
        let t = c.table(f);
        let n = t.self_check(f).map_err(|e| e.to_string())?;
        Ok(format!("{n} monomials of filtration ≤ {f}"))
    });
}

fn contraction_suite(ctx: &mut Ctx) {
    let n = ctx.run.trunc;
    for o in [Orientation::MinusDelta, Orientation::PlusDelta] {
        let name = match o {
            Orientation::MinusDelta => "base (-δ)",
            Orientation::PlusDelta => "base (+δ)",
        };
        ctx.record(Suite::Contraction, name, "στ = id, id - τσ = hδ + δh, side conditions", |c| {
            let g = c.ad.as_ref().unwrap().alg(n + 2);
            let lam = (g.n as u32).min(3);
            let big = g.basis(lam, n);
            ContractionData::<()>::base(g, o)
                .verify(&big, &g.a_basis(lam), n)
                .map_err(|e| e.to_string())?;
            Ok(format!("{} basis elements", big.len()))
        });
    }
}

fn fedosov_suite(ctx: &mut Ctx) {
    ctx.record(Suite::Fedosov, "torsion-free", "β = 0", |c| {
        let ad = c.ad.as_ref().unwrap();
        if ad.is_torsion_free() {
            Ok(String::new())
        } else {
            let t = fedpair_core::liepair::torsion_and_correct(&ad.pair, &ad.splitting, &ad.conn).map_err(|e| e.to_string())?;
            Err(format!("torsion-free replacement ∇' = {}", render_connection(&t.corrected)))
        }
    });
    ctx.record(Suite::Fedosov, "certificate", "Q² = 0", |c| {
        let res = c.fedosov()?;
        fedosov::certify(res).map_err(|e| e.to_string())?;
        Ok(format!("Ŝ-degree ≤ {}", res.n))
    });
    ctx.record(Suite::Fedosov, "field", "X∇ recorded by degree", |c| {
        let res = c.fedosov()?;
        if res.is_flat() {
            return Ok("X∇ = 0".into());
        }
        Ok(fedosov::x_table(res)
            .into_iter()
            .filter(|(_, s)| s != "0")
            .map(|(k, s)| format!("X{k} = {s}"))
            .collect::<Vec<_>>()
            .join("; "))
    });
}

fn ew_suite(ctx: &mut Ctx) {
    ctx.record(Suite::Ew, "field-vs-pbw", "X∇ = -Ξ∇ degree by degree", |c| {
        let depth = c.fedosov()?.alg.t + 1;
        let table = c.table(depth);
        let res = c.fedosov()?;
        let rep = fedosov::ew_check_with(res, &table).map_err(|e| e.to_string())?;
        let rows: Vec<String> = rep
            .table
            .iter()
            .filter(|(_, x, _)| x != "0")
            .map(|(k, x, xi)| format!("deg {k}: X = {x}, -Ξ = {xi}"))
            .collect();
        Ok(if rows.is_empty() { "both fields vanish".into() } else { rows.join("; ") })
    });
    ctx.record(Suite::Ew, "pbw-field-shape", "h̃Ξ = 0 and lowest χ-degree", |c| {
        let t = c.run.trunc;
        let table = c.table(t + 1);
        let ad = c.ad.as_ref().unwrap();
        let (h_zero, low) = fedosov::xi_properties(ad, &table, t).map_err(|e| e.to_string())?;
        if !h_zero {
            return Err("h̃Ξ ≠ 0".into());
        }
        match (ad.is_torsion_free(), low) {
            (true, Some(d)) if d < 2 => Err(format!("torsion-free but Ξ has χ-degree {d}")),
            (_, low) => Ok(format!("lowest χ-degree {}", low.map_or("none".into(), |d| d.to_string()))),
        }
    });
}

fn tpoly_suite(ctx: &mut Ctx) {
    ctx.record(Suite::Tpoly, "functions", "perturbed contraction onto (ΛA∨, d_A)", |c| {
        fedosov::perturbed_tau_functions(c.fedosov()?).map_err(|e| e.to_string())?;
        Ok(String::new())
    });
    for kind in [TpolyKind::Polyvector(-1), TpolyKind::Polyvector(0), TpolyKind::Polyvector(1), TpolyKind::Tensor(1, 1)] {
        let name = match kind {
            TpolyKind::Polyvector(k) => format!("polyvectors k={k}"),
            TpolyKind::Tensor(p, q) => format!("tensors ({p},{q})"),
        };
        ctx.record(Suite::Tpoly, &name, "perturbed contraction, θ = Bott differential", |c| {
            let rep = tpoly::contract_tpoly(c.fedosov()?, kind).map_err(|e| e.to_string())?;
            Ok(format!("{} upstairs / {} small elements", rep.big_checked, rep.small_checked))
        });
    }
    ctx.record(Suite::Tpoly, "lightning-bott", "σ̃ L_ϱ τ̃ = d_A^Bott on generators", |c| {
        let n = c.run.trunc;
        let table = c.table(n + 1);
        let ad = c.ad.as_ref().unwrap();
        let k = tpoly::lightning_bott_check(ad, &table, &ad.alg(n)).map_err(|e| e.to_string())?;
        Ok(format!("{k} generators"))
    });
}

fn dpoly_suite(ctx: &mut Ctx) {
    let n = ctx.run.trunc.min(3);
    let f = ctx.run.filt;
    ctx.record(Suite::Dpoly, "lightning-action", "σ̃ L_ϱ τ̃ = d_A^𝒰 on generators", |c| {
        let table = c.table(n + 1);
        let ad = c.ad.as_ref().unwrap();
        let k = dpoly::lightning_bott_dpoly(&table, &ad.alg(n), n).map_err(|e| e.to_string())?;
        Ok(format!("{k} generators"))
    });
    ctx.record(Suite::Dpoly, "contraction", "perturbed contraction, arities ≤ 2", |c| {
        let ad = c.ad.as_ref().unwrap();
        let res = fedosov::fedosov_iterate_with_margin(ad, n, f + 2).map_err(|e| e.to_string())?;
        let table = c.table(f + 1);
        let rep = dpoly::contract_dpoly(&res, table, f, 2).map_err(|e| e.to_string())?;
        Ok(format!("arities {:?}, {} upstairs / {} small elements", rep.arities, rep.big_checked, rep.small_checked))
    });
}

fn matched_suite(ctx: &mut Ctx) {
    if !ctx.ad.as_ref().unwrap().matched {
        ctx.skip(Suite::Matched, "all", "", "j(B) is not a subalgebroid");
        return;
    }
    ctx.record(Suite::Matched, "split", "Q = D¹⁰ + D⁰¹, both square to zero", |c| {
        fedosov::matched_split(c.fedosov()?).map_err(|e| e.to_string())?;
        Ok(String::new())
    });
    ctx.record(Suite::Matched, "three-way", "τ̆ by series = exp(𝒟)τ = closed formula", |c| {
        let deg = c.run.trunc.min(3);
        let depth = c.fedosov()?.alg.t + 1;
        let table = c.table(depth);
        let rep = fedosov::matched_tau_triple(c.fedosov()?, &table, deg).map_err(|e| e.to_string())?;
        Ok(format!("{} forms to Ŝ-degree {}", rep.checked, rep.max_degree))
    });
    ctx.record(Suite::Matched, "polyvector-identities", "τ̆ respects brackets, products and the Bott action", |c| {
        let res = c.fedosov()?;
        let g = Gerstenhaber::new(res).map_err(|e| e.to_string())?;
        let rep = tpoly::matched_tpoly_identities(res, &g).map_err(|e| e.to_string())?;
        Ok(format!("{} brackets, {} products, {} actions", rep.brackets, rep.products, rep.actions))
    });
    ctx.record(Suite::Matched, "uea-complex", "matched 𝒰 complex = small D_poly complex", |c| {
        let f = c.run.filt.min(2);
        let table = c.table(f + 1);
        let (_, rep) = dpoly::matched_uea(c.ad.as_ref().unwrap(), table, f).map_err(|e| e.to_string())?;
        Ok(format!("{} commutators, {} square-zero, {} compared", rep.commutators, rep.square_zero, rep.compared))
    });
}

fn betti_line(b: &BTreeMap<i32, usize>) -> String {
    b.iter().map(|(k, v)| format!("b{k}={v}")).collect::<Vec<_>>().join(" ")
}

fn cohomology_suite(ctx: &mut Ctx) {
    ctx.record(Suite::Cohomology, "polyvectors", "H(ΛA∨ ⊗ X_poly, d_A^Bott)", |c| {
        let ad = c.ad.as_ref().unwrap();
        let rep = tpoly::cohomology_tpoly(ad, ad.n() as i32, c.run.filt);
        let (chain, coh) = rep.euler_characteristic();
        if chain != coh {
            return Err(format!("Euler characteristics differ: cochains {chain}, cohomology {coh}"));
        }
        let note = match rep.truncation {
            None => String::new(),
            Some(p) => format!(" (polynomial degree {p}, stable from {}: {})", p - 1, rep.stabilized),
        };
        Ok(format!("{}{note}", betti_line(&rep.betti)))
    });
    if ctx.ad.as_ref().unwrap().d() != 0 {
        ctx.skip(Suite::Cohomology, "polydifferential", "H(ΛA∨ ⊗ D_poly)", "needs a point base");
        return;
    }
    ctx.record(Suite::Cohomology, "polydifferential", "H(ΛA∨ ⊗ D_poly)", |c| {
        let f = c.run.filt;
        let table = c.table(f);
        let ad = c.ad.as_ref().unwrap();
        // degrees above the cutoff are not built, so there is no Euler check here
        let rep = dpoly::cohomology_dpoly(ad, table, f, ad.n() as i32 - 1).map_err(|e| e.to_string())?;
        Ok(format!("{} (filtration {f}, stable from {}: {})", betti_line(&rep.betti), f - 1, rep.stabilized))
    });
}
