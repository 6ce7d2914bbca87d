//! Report types and their JSON and markdown renderings.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cache::structure_bytes;
use crate::spec::PairSpec;
use crate::suites::{RunConfig, Suite};

pub const REPORT_FORMAT: &str = "fedpair-report/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub identity: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub skip: usize,
}

/// The deterministic part of a run: identical inputs give identical bytes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportBody {
    pub format: String,
    pub pair: String,
    pub content_hash: String,
    pub config: RunConfig,
    pub summary: Summary,
    pub checks: Vec<Check>,
}

/// Everything that may legitimately differ between runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub cache_hits: usize,
    pub cache_misses: usize,
    pub cache_bypassed: usize,
    pub warnings: Vec<String>,
    pub wall_seconds: f64,
    pub timings: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub report: ReportBody,
    pub run: RunStats,
}

/// Hash of the pair data and the effective run configuration.
pub fn content_hash(spec: &PairSpec, config: &RunConfig) -> String {
    let mut h = Sha256::new();
    h.update(structure_bytes(spec));
    h.update(serde_json::to_vec(config).expect("config serializes"));
    hex::encode(h.finalize())
}

impl SuiteReport {
    pub fn new(spec: &PairSpec, config: RunConfig, checks: Vec<Check>, run: RunStats) -> Self {
        let mut summary = Summary::default();
        for c in &checks {
            match c.status {
                Status::Pass => summary.pass += 1,
                Status::Fail => summary.fail += 1,
                Status::Skip => summary.skip += 1,
            }
        }
        SuiteReport {
            report: ReportBody {
                format: REPORT_FORMAT.into(),
                pair: spec.name.clone(),
                content_hash: content_hash(spec, &config),
                config,
                summary,
                checks,
            },
            run,
        }
    }

    pub fn passed(&self) -> bool {
        self.report.summary.fail == 0
    }
}

pub fn to_json(reports: &[SuiteReport]) -> String {
    let mut s = if reports.len() == 1 {
        serde_json::to_string_pretty(&reports[0])
    } else {
        serde_json::to_string_pretty(reports)
    }
    .expect("reports serialize");
    s.push('\n');
    s
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

pub fn to_markdown(reports: &[SuiteReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let b = &r.report;
        out += &format!("## {}\n\n", b.pair);
        out += &format!(
            "truncation N = {}, filtration F = {}, hash `{}`\n\n",
            b.config.trunc,
            b.config.filt,
            &b.content_hash[..16]
        );
        out += &format!("{} passed, {} failed, {} skipped\n\n", b.summary.pass, b.summary.fail, b.summary.skip);
        out += "| suite | check | identity | status | notes |\n|---|---|---|---|---|\n";
        for c in &b.checks {
            let status = match c.status {
                Status::Pass => "pass",
                Status::Fail => "**FAIL**",
                Status::Skip => "skip",
            };
            let notes = c.witness.as_deref().or(c.detail.as_deref()).unwrap_or("");
            out += &format!(
                "| {} | {} | {} | {} | {} |\n",
                c.suite.name(),
                cell(&c.name),
                cell(&c.identity),
                status,
                cell(notes)
            );
        }
        if !r.run.warnings.is_empty() {
            out += "\nWarnings:\n\n";
            for w in &r.run.warnings {
                out += &format!("- {}\n", cell(w));
            }
        }
        out += "\n";
    }
    out
}

/// One line per check, for terminals.
pub fn to_lines(r: &SuiteReport) -> String {
    let mut out = String::new();
    for c in &r.report.checks {
        let tag = match c.status {
            Status::Pass => "ok  ",
            Status::Fail => "FAIL",
            Status::Skip => "skip",
        };
        let notes = c.witness.as_deref().or(c.detail.as_deref()).unwrap_or("");
        out += &format!("{tag} {}: {}/{}  {notes}\n", r.report.pair, c.suite.name(), c.name);
    }
    out
}
