//! Command-line front end of the stable sausage lab: config parsing,
//! report serialization and run manifests.
//!
//! Exit codes: 0 success, 2 usage or config error, 3 numerical error during
//! a run (and selftest failure), 4 I/O error.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod output;
pub mod selftest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

use crate::config::{Cli, Command, Format, RunConfig, SEED_ENV};
use crate::manifest::{manifest_path, now, sibling_path, RunManifest};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (kind, msg) = match self {
            CliError::Usage(m) => ("usage", m),
            CliError::Numerical(m) => ("numerical", m),
            CliError::Io(m) => ("io", m),
        };
        // diagnostics stay on one line
        write!(f, "{kind} error: {}", msg.replace('\n', " "))
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_args<I, T>(args: I, env_seed: Option<&str>) -> Result<Vec<String>, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => return Ok(vec![e.to_string().trim_end().to_string()]),
        Err(e) => return Err(CliError::Usage(config::first_line(&e))),
    };
    let cfg = RunConfig::from_cli(cli, env_seed)?;
    run_config(&cfg)
}

/// Runs a resolved config, writes its outputs and returns the stdout lines.
pub fn run_config(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    if cfg.command == Command::Selftest {
        let (lines, failures) = selftest::run();
        if failures > 0 {
            return Err(CliError::Numerical(format!(
                "selftest: {failures} check(s) failed: {}",
                lines
                    .iter()
                    .filter(|l| l.starts_with("FAIL"))
                    .cloned()
                    .collect::<Vec<_>>()
                    .join("; ")
            )));
        }
        return Ok(lines);
    }
    let started = now();
    let plan = commands::plan(cfg)?;
    let outcome = commands::execute(&plan).map_err(|e| CliError::Numerical(e.to_string()))?;
    let mut lines = outcome.stdout;
    if lines.is_empty() {
        for r in &outcome.reports {
            lines.extend(summary(r));
        }
    }
    if let Some(out) = &cfg.out {
        let paths: Vec<PathBuf> = outcome
            .reports
            .iter()
            .enumerate()
            .map(|(i, r)| {
                if i == 0 {
                    out.clone()
                } else {
                    sibling_path(out, &r.experiment)
                }
            })
            .collect();
        for (path, r) in paths.iter().zip(&outcome.reports) {
            match cfg.format {
                Format::Csv => output::emit_csv(r, path)?,
                Format::Jsonl => output::emit_jsonl(r, &cfg.hash(), cfg.seed, path)?,
            }
        }
        let pairs: Vec<(PathBuf, &_)> = paths.into_iter().zip(&outcome.reports).collect();
        RunManifest::new(cfg, started, &pairs).write(&manifest_path(out))?;
    }
    Ok(lines)
}

fn summary(r: &sausage_core::experiments::ExperimentReport) -> Vec<String> {
    let mut lines = vec![format!("[{}]", r.experiment)];
    for s in &r.statistics {
        match s.stderr {
            Some(se) => lines.push(format!("  {} = {} ± {se:.3e}", s.name, s.value)),
            None => lines.push(format!("  {} = {}", s.name, s.value)),
        }
    }
    for c in &r.checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        let kind = if c.gating { "" } else { " (informational)" };
        lines.push(format!(
            "  {verdict} {}: {} {} {}{kind}",
            c.name, c.observed, c.rule, c.threshold
        ));
    }
    for f in &r.flags {
        lines.push(format!("  flag: {f}"));
    }
    lines
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_env() -> i32 {
    let env_seed = std::env::var(SEED_ENV).ok();
    match run_args(std::env::args_os(), env_seed.as_deref()) {
        Ok(lines) => {
            use std::io::Write as _;
            let mut out = std::io::stdout().lock();
            for l in lines {
                // a closed pipe (e.g. `| head`) ends output quietly
                if writeln!(out, "{l}").is_err() {
                    break;
                }
            }
            0
        }
        Err(e) => {
            eprintln!("sausage-lab: {e}");
            e.exit_code()
        }
    }
}
