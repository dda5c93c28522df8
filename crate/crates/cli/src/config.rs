//! Run configuration: flags, flat config files and their merge.
//!
//! A config file holds `key = value` lines whose keys are the long flag
//! names without dashes. Each line is handed to the same clap parser as
//! `--key=value`, so files and flags share types, ranges and diagnostics.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SEED_ENV: &str = "SAUSAGE_LAB_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Capacity of the unit ball
    Capacity,
    /// Hitting probability of the ball from --point
    Phi,
    /// Green function at --point
    Green,
    /// Second-order rate h(t) at --t-end
    Hfun,
    /// One path skeleton
    Simulate,
    /// Sausage volume of one path at each checkpoint
    Volume,
    /// Intersection of S[0,t] with S[t, t + f t] on one path
    Intersect,
    /// Law of large numbers against the capacity
    Lln,
    /// Variance growth rate sigma^2
    Sigma,
    /// Central limit check at the last checkpoint
    Clt,
    /// Functional CLT covariances
    Fclt,
    /// Intersection moment bound for independent sausages
    Moments,
    /// Fourth central moment growth
    FourthMoment,
    /// Hitting-time self-similarity
    TauScaling,
    /// LIL checkpoint sequence
    LilSeq,
    /// LIL statistic series along long paths
    Lil,
    /// Installation smoke test
    Selftest,
}

impl Command {
    pub fn name(self) -> String {
        self.to_possible_value()
            .expect("no skipped variants")
            .get_name()
            .to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum MethodName {
    #[value(name = "exact1d")]
    Exact1d,
    Grid,
    #[value(name = "hitmiss")]
    HitMiss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum Format {
    Csv,
    Jsonl,
}

/// Every setting as given by one source; `None` means "not given here".
#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct Overrides {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=16))]
    pub dim: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Horizon; also the time for hfun and the base time for fclt
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub t_checkpoints: Option<Vec<f64>>,
    #[arg(long)]
    pub mesh: Option<f64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodName>,
    /// Voxel edge length of the grid estimator
    #[arg(long)]
    pub grid_res: Option<f64>,
    #[arg(long)]
    pub mc_samples: Option<u64>,
    #[arg(long)]
    pub tail_factor: Option<f64>,
    /// Comma-separated point, e.g. --point=4,0,0
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub point: Option<Vec<f64>>,
    /// Moment order for `moments`
    #[arg(long)]
    pub k: Option<u32>,
    /// Horizon of the second sausage for `moments`
    #[arg(long)]
    pub t_tail: Option<f64>,
    /// Time fractions for `fclt`
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    #[arg(long)]
    pub k_max: Option<u32>,
    /// Known sigma^2 for `lil`; estimated from replicas when absent
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Long paths for `lil`
    #[arg(long)]
    pub paths: Option<usize>,
    /// Uncensored hitting times wanted per arm for `tau-scaling`
    #[arg(long)]
    pub target_uncensored: Option<usize>,
    #[arg(long)]
    pub max_replicas: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

impl Overrides {
    /// Field-wise `self` over `lower`.
    pub fn or(self, lower: Overrides) -> Overrides {
        Overrides {
            dim: self.dim.or(lower.dim),
            alpha: self.alpha.or(lower.alpha),
            radius: self.radius.or(lower.radius),
            t_end: self.t_end.or(lower.t_end),
            t_checkpoints: self.t_checkpoints.or(lower.t_checkpoints),
            mesh: self.mesh.or(lower.mesh),
            replicas: self.replicas.or(lower.replicas),
            seed: self.seed.or(lower.seed),
            method: self.method.or(lower.method),
            grid_res: self.grid_res.or(lower.grid_res),
            mc_samples: self.mc_samples.or(lower.mc_samples),
            tail_factor: self.tail_factor.or(lower.tail_factor),
            point: self.point.or(lower.point),
            k: self.k.or(lower.k),
            t_tail: self.t_tail.or(lower.t_tail),
            fractions: self.fractions.or(lower.fractions),
            k_max: self.k_max.or(lower.k_max),
            sigma2: self.sigma2.or(lower.sigma2),
            paths: self.paths.or(lower.paths),
            target_uncensored: self.target_uncensored.or(lower.target_uncensored),
            max_replicas: self.max_replicas.or(lower.max_replicas),
            format: self.format.or(lower.format),
            out: self.out.or(lower.out),
            workers: self.workers.or(lower.workers),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sausage-lab",
    version,
    about = "Stable sausage simulation and verification lab"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Flat key = value file, or a run manifest to replay
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Parser)]
#[command(
    name = "config",
    no_binary_name = true,
    disable_help_flag = true,
    disable_version_flag = true
)]
struct FileArgs {
    #[arg(long, value_enum)]
    command: Option<Command>,
    #[command(flatten)]
    overrides: Overrides,
}

/// Settings read from a config file, plus the command it names, if any.
pub fn parse_config_text(text: &str) -> Result<(Option<Command>, Overrides), CliError> {
    let mut args = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", no + 1)))?;
        args.push(format!("--{}={}", key.trim(), value.trim()));
    }
    let parsed = FileArgs::try_parse_from(args).map_err(|e| CliError::Usage(format!("config: {}", first_line(&e))))?;
    Ok((parsed.command, parsed.overrides))
}

pub(crate) fn first_line(e: &clap::Error) -> String {
    let text = e.to_string();
    let line = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("invalid arguments");
    line.trim_start_matches("error: ").to_string()
}

/// The config file behind `--config`: a manifest (JSON) or a flat file.
pub fn read_config_file(path: &Path) -> Result<(Option<Command>, Overrides), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        let manifest: crate::manifest::RunManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: not a run manifest: {e}", path.display())))?;
        parse_config_text(&manifest.config_text)
    } else {
        parse_config_text(&text)
    }
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub dim: usize,
    pub alpha: f64,
    pub radius: f64,
    pub t_end: f64,
    pub t_checkpoints: Vec<f64>,
    pub mesh: f64,
    pub replicas: usize,
    pub seed: u64,
    pub method: MethodName,
    pub grid_res: f64,
    pub mc_samples: u64,
    pub tail_factor: Option<f64>,
    pub point: Vec<f64>,
    pub k: u32,
    pub t_tail: f64,
    pub fractions: Vec<f64>,
    pub k_max: u32,
    pub sigma2: Option<f64>,
    pub paths: usize,
    pub target_uncensored: usize,
    pub max_replicas: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl RunConfig {
    /// Fills every unset value with its default. `o` is already merged.
    pub fn resolve(command: Command, o: Overrides) -> Result<RunConfig, CliError> {
        let dim = o.dim.unwrap_or(1) as usize;
        let t_end = o
            .t_end
            .or_else(|| o.t_checkpoints.as_ref().and_then(|c| c.last().copied()))
            .unwrap_or(if command == Command::TauScaling { 500.0 } else { 200.0 });
        let t_checkpoints = o.t_checkpoints.unwrap_or_else(|| vec![t_end / 4.0, t_end / 2.0, t_end]);
        let point = o.point.unwrap_or_else(|| {
            let mut p = vec![0.0; dim];
            p[0] = if command == Command::TauScaling { 4.0 } else { 2.0 };
            p
        });
        let replicas = o.replicas.unwrap_or(500);
        Ok(RunConfig {
            command,
            dim,
            alpha: o.alpha.unwrap_or(0.6),
            radius: o.radius.unwrap_or(1.0),
            t_end,
            t_checkpoints,
            mesh: o.mesh.unwrap_or(0.01),
            replicas,
            seed: o.seed.unwrap_or(0),
            method: o.method.unwrap_or(if dim == 1 {
                MethodName::Exact1d
            } else {
                MethodName::Grid
            }),
            grid_res: o.grid_res.unwrap_or(0.05),
            mc_samples: o.mc_samples.unwrap_or(100_000),
            tail_factor: o.tail_factor,
            point,
            k: o.k.unwrap_or(2),
            t_tail: o.t_tail.unwrap_or(200.0),
            fractions: o.fractions.unwrap_or_else(|| vec![0.5, 1.0]),
            k_max: o.k_max.unwrap_or(10),
            sigma2: o.sigma2,
            paths: o.paths.unwrap_or(4),
            target_uncensored: o.target_uncensored.unwrap_or(0),
            max_replicas: o.max_replicas.unwrap_or(replicas.saturating_mul(50)),
            format: o.format.unwrap_or(Format::Csv),
            out: o.out,
            workers: o.workers,
        })
    }

    /// Merges flags over the config file over the seed environment variable.
    pub fn from_cli(cli: Cli, env_seed: Option<&str>) -> Result<RunConfig, CliError> {
        let mut merged = cli.overrides;
        if let Some(path) = &cli.config {
            let (file_command, file) = read_config_file(path)?;
            if let Some(c) = file_command {
                if c != cli.command {
                    return Err(CliError::Usage(format!(
                        "config {} is for `{}`, not `{}`",
                        path.display(),
                        c.name(),
                        cli.command.name()
                    )));
                }
            }
            merged = merged.or(file);
        }
        if merged.seed.is_none() {
            if let Some(raw) = env_seed {
                let seed = raw
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("{SEED_ENV} = {raw:?} is not a u64")))?;
                merged.seed = Some(seed);
            }
        }
        RunConfig::resolve(cli.command, merged)
    }

    fn entries(&self, numeric_only: bool) -> Vec<(&'static str, String)> {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        let mut e = vec![
            ("command", self.command.name()),
            ("dim", self.dim.to_string()),
            ("alpha", format!("{:?}", self.alpha)),
            ("radius", format!("{:?}", self.radius)),
            ("t-end", format!("{:?}", self.t_end)),
            ("t-checkpoints", list(&self.t_checkpoints)),
            ("mesh", format!("{:?}", self.mesh)),
            ("replicas", self.replicas.to_string()),
            ("seed", self.seed.to_string()),
            ("method", value_name(self.method)),
            ("grid-res", format!("{:?}", self.grid_res)),
            ("mc-samples", self.mc_samples.to_string()),
        ];
        if let Some(f) = self.tail_factor {
            e.push(("tail-factor", format!("{f:?}")));
        }
        e.extend([
            ("point", list(&self.point)),
            ("k", self.k.to_string()),
            ("t-tail", format!("{:?}", self.t_tail)),
            ("fractions", list(&self.fractions)),
            ("k-max", self.k_max.to_string()),
        ]);
        if let Some(s) = self.sigma2 {
            e.push(("sigma2", format!("{s:?}")));
        }
        e.extend([
            ("paths", self.paths.to_string()),
            ("target-uncensored", self.target_uncensored.to_string()),
            ("max-replicas", self.max_replicas.to_string()),
            ("format", value_name(self.format)),
        ]);
        if !numeric_only {
            if let Some(out) = &self.out {
                e.push(("out", out.display().to_string()));
            }
            if let Some(w) = self.workers {
                e.push(("workers", w.to_string()));
            }
        }
        e
    }

    /// The flat config text; parsing it back gives the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries(false) {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Hex SHA-256 over the settings that determine the numeric output.
    /// The output path and the worker count are left out.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for (k, v) in self.entries(true) {
            h.update(format!("{k} = {v}\n"));
        }
        format!("{:x}", h.finalize())
    }

    pub fn from_text(text: &str) -> Result<RunConfig, CliError> {
        let (command, o) = parse_config_text(text)?;
        let command = command.ok_or_else(|| CliError::Usage("config text names no command".into()))?;
        RunConfig::resolve(command, o)
    }
}

fn value_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string()
}
