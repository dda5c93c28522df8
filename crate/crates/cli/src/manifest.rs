use std::path::{Path, PathBuf};

use sausage_core::experiments::{Check, ExperimentReport, Statistic};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::write_file;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub experiment: String,
    pub output: String,
    pub passed: bool,
    pub statistics: Vec<Statistic>,
    pub checks: Vec<Check>,
    pub flags: Vec<String>,
}

/// Everything needed to repeat a run. Passing the manifest back through
/// `--config` reproduces the numeric outputs byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_text: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<String>,
    pub reports: Vec<ReportSummary>,
}

impl RunManifest {
    pub fn new(cfg: &RunConfig, started_at: String, outputs: &[(PathBuf, &ExperimentReport)]) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: cfg.command.name(),
            config_text: cfg.to_text(),
            config_hash: cfg.hash(),
            master_seed: cfg.seed,
            started_at,
            finished_at: now(),
            outputs: outputs.iter().map(|(p, _)| p.display().to_string()).collect(),
            reports: outputs
                .iter()
                .map(|(p, r)| ReportSummary {
                    experiment: r.experiment.clone(),
                    output: p.display().to_string(),
                    passed: r.passed(),
                    statistics: r.statistics.clone(),
                    checks: r.checks.clone(),
                    flags: r.flags.clone(),
                })
                .collect(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_file(path, &(text + "\n"))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// Path of a secondary report: `run.csv` becomes `run.sigma.csv`.
pub fn sibling_path(out: &Path, experiment: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}.{experiment}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{experiment}"),
    };
    out.with_file_name(name)
}
