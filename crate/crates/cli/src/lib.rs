//! Batch driver: reads pair specs, runs the verification suites and emits
//! reports. The binary in `main.rs` is a thin clap front end over this.

pub mod cache;
pub mod report;
pub mod spec;
pub mod suites;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub use report::SuiteReport;
pub use spec::{parse_spec, PairSpec};
pub use suites::{run_suites, RunConfig, Suite};

/// Expands directories into their `*.json` files, sorted by name.
pub fn collect_specs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("reading {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Flags win over the spec; the spec wins over the defaults.
pub fn effective_config(spec: &PairSpec, suites: Option<&[Suite]>, trunc: Option<u32>, filt: Option<u32>) -> Result<RunConfig> {
    let suites = match suites {
        Some(s) => s.to_vec(),
        None if spec.suites.is_empty() => Suite::ALL.to_vec(),
        None => spec
            .suites
            .iter()
            .map(|s| Suite::parse(s).with_context(|| format!("field `suites`: unknown suite {s:?}")))
            .collect::<Result<_>>()?,
    };
    Ok(RunConfig {
        trunc: trunc.unwrap_or(spec.trunc),
        filt: filt.unwrap_or(spec.filt),
        suites,
    })
}

pub fn load_all(paths: &[PathBuf]) -> Result<Vec<(PathBuf, PairSpec)>> {
    collect_specs(paths)?
        .into_iter()
        .map(|p| parse_spec(&p).map(|s| (p, s)))
        .collect()
}

pub fn display(p: &Path) -> String {
    p.display().to_string()
}
