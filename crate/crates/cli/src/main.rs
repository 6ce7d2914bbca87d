use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use fedpair_cli::cache::Cache;
use fedpair_cli::report::{to_json, to_lines, to_markdown, Status};
use fedpair_cli::{effective_config, load_all, run_suites, Suite, SuiteReport};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "fedpair", version, about = "Exact verification suites for Lie pairs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Spec files or directories of them.
    #[arg(required = true)]
    specs: Vec<PathBuf>,
    /// Suites to run (comma separated); defaults to the spec, then to all.
    #[arg(long, value_delimiter = ',')]
    suites: Option<Vec<Suite>>,
    /// Truncation degree N.
    #[arg(long)]
    trunc: Option<u32>,
    /// Filtration bound F.
    #[arg(long)]
    filt: Option<u32>,
    /// Worker threads for running several specs (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Build every table from scratch and leave the cache alone.
    #[arg(long)]
    no_cache: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Md,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse specs and check the pair axioms.
    Validate {
        #[arg(required = true)]
        specs: Vec<PathBuf>,
    },
    /// Run suites and print one line per check.
    Run {
        #[command(flatten)]
        args: RunArgs,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run suites and print a full report.
    Report {
        #[command(flatten)]
        args: RunArgs,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Manage the table cache.
    Cache {
        #[command(subcommand)]
        action: CacheCmd,
    },
}

#[derive(Subcommand)]
enum CacheCmd {
    /// Remove every cached table.
    Clear,
}

fn execute(args: &RunArgs) -> Result<Vec<SuiteReport>> {
    let specs = load_all(&args.specs)?;
    let cache = (!args.no_cache).then(Cache::from_env);
    let jobs = args.jobs.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let plans = specs
        .iter()
        .map(|(p, s)| {
            effective_config(s, args.suites.as_deref(), args.trunc, args.filt)
                .with_context(|| format!("in {}", p.display()))
                .map(|c| (s, c))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pool.install(|| plans.par_iter().map(|(s, c)| run_suites(s, c, cache.as_ref())).collect()))
}

fn exit_for(reports: &[SuiteReport]) -> ExitCode {
    if reports.iter().all(SuiteReport::passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn warn(reports: &[SuiteReport]) {
    for r in reports {
        for w in &r.run.warnings {
            eprintln!("warning: {w}");
        }
    }
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Validate { specs } => {
            let mut ok = true;
            for (path, spec) in load_all(&specs)? {
                let cfg = effective_config(&spec, Some(&[Suite::Validate]), None, None)?;
                let r = run_suites(&spec, &cfg, None);
                let failed: Vec<_> = r.report.checks.iter().filter(|c| c.status == Status::Fail).collect();
                if failed.is_empty() {
                    println!("{}: valid ({})", path.display(), spec.name);
                } else {
                    ok = false;
                    for c in failed {
                        println!("{}: {} fails, witness {}", path.display(), c.name, c.witness.as_deref().unwrap_or("none"));
                    }
                }
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Cmd::Run { args, out } => {
            let reports = execute(&args)?;
            warn(&reports);
            for r in &reports {
                print!("{}", to_lines(r));
            }
            if let Some(out) = out {
                std::fs::write(&out, to_json(&reports)).with_context(|| format!("writing {}", out.display()))?;
            }
            Ok(exit_for(&reports))
        }
        Cmd::Report { args, format } => {
            let reports = execute(&args)?;
            warn(&reports);
            match format {
                Format::Json => print!("{}", to_json(&reports)),
                Format::Md => print!("{}", to_markdown(&reports)),
            }
            Ok(exit_for(&reports))
        }
        Cmd::Cache { action: CacheCmd::Clear } => {
            let cache = Cache::from_env();
            let n = cache.clear()?;
            println!("removed {n} cached tables from {}", cache.root().display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
