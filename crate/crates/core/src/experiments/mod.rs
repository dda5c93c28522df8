//! Replica orchestration and the statistical experiments built on it.
//!
//! Every replica owns the stream `(master_seed, replica_id)`; replicas run
//! in parallel and are collected in replica-id order, so every aggregate is
//! identical for any worker count.

mod clt;
mod hitting;
mod lil;
mod lln;
mod moments;
mod sigma;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::{estimate_volume, intersection_volume, slice, VolumeMethod};
use crate::process::{simulate_skeleton, ProcessParams};
use crate::rng::RandomStream;

pub use clt::{clt_experiment, fclt_covariance_experiment, CltTolerances};
pub use hitting::{first_entry_time, hitting_frequency, tau_scaling_experiment, HittingEstimate, TauConfig};
pub use lil::{
    gap_bound_holds, intersection_process_experiment, intersection_process_stats, lil_checkpoint_sequence,
    lil_gap_bound, lil_paths_experiment, lil_statistics, path_volumes_at, IntersectionProcessConfig, LilConfig,
    LilSeries,
};
pub use lln::{gap_bound_check, lln_capacity_check};
pub use moments::{fourth_moment_experiment, intersection_moment_experiment, MomentConfig};
pub use sigma::{estimate_sigma, sigma_experiment, SigmaEstimate};

/// Inputs of a replicated volume run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: ProcessParams,
    pub t_checkpoints: Vec<f64>,
    pub mesh: f64,
    pub replicas: usize,
    pub method: VolumeMethod,
    pub master_seed: u64,
    /// When set, each replica also records `λ(S_t ∩ S[t, t + f·t])` and the
    /// same with half the tail, for tail factor `f`.
    pub tail_factor: Option<f64>,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_checkpoints.is_empty() {
            return Err(Error::Empty("checkpoint list"));
        }
        if self.t_checkpoints.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(domain("checkpoints must be positive"));
        }
        if self.t_checkpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain("checkpoints must be strictly increasing"));
        }
        if !(self.mesh > 0.0) || self.mesh > self.t_checkpoints[0] {
            return Err(domain(format!(
                "mesh {} must be positive and no larger than the first checkpoint",
                self.mesh
            )));
        }
        if self.replicas == 0 {
            return Err(domain("at least one replica is required"));
        }
        if let Some(f) = self.tail_factor {
            if !(f > 0.0) {
                return Err(domain("tail factor must be positive"));
            }
        }
        if matches!(self.method, VolumeMethod::Exact1d) && self.params.dim() != 1 {
            return Err(Error::Dimension {
                expected: 1,
                got: self.params.dim(),
            });
        }
        if self.workers == Some(0) {
            return Err(domain("worker count must be positive"));
        }
        Ok(())
    }

    pub fn t_max(&self) -> f64 {
        *self.t_checkpoints.last().expect("validated non-empty")
    }

    pub fn describe(&self) -> Vec<(String, String)> {
        let method = match self.method {
            VolumeMethod::Exact1d => "exact1d".to_string(),
            VolumeMethod::Grid { voxel_edge } => format!("grid({voxel_edge})"),
            VolumeMethod::HitOrMiss { samples } => format!("hitmiss({samples})"),
        };
        let ts: Vec<String> = self.t_checkpoints.iter().map(|t| t.to_string()).collect();
        vec![
            ("dim".into(), self.params.dim().to_string()),
            ("alpha".into(), self.params.alpha().to_string()),
            ("radius".into(), self.params.radius().to_string()),
            ("t_checkpoints".into(), ts.join(",")),
            ("mesh".into(), self.mesh.to_string()),
            ("replicas".into(), self.replicas.to_string()),
            ("method".into(), method),
            ("seed".into(), self.master_seed.to_string()),
        ]
    }
}

/// Volumes of one replica at every checkpoint, all on one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRecord {
    pub replica_id: u64,
    pub master_seed: u64,
    pub stream_id: u64,
    pub volumes: Vec<f64>,
    pub volume_errors: Vec<f64>,
    pub tail_intersections: Vec<f64>,
    pub tail_intersections_half: Vec<f64>,
    pub error: Option<String>,
}

impl ReplicaRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Replica records together with the checkpoints they were taken at.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaSet {
    pub params: ProcessParams,
    pub checkpoints: Vec<f64>,
    pub records: Vec<ReplicaRecord>,
    pub describe: Vec<(String, String)>,
}

impl ReplicaSet {
    /// Wraps externally generated volumes (one row per replica, one column
    /// per checkpoint).
    pub fn from_volumes(params: ProcessParams, checkpoints: Vec<f64>, volumes: Vec<Vec<f64>>) -> Result<Self> {
        if volumes.iter().any(|row| row.len() != checkpoints.len()) {
            return Err(Error::Dimension {
                expected: checkpoints.len(),
                got: volumes
                    .iter()
                    .map(Vec::len)
                    .find(|&l| l != checkpoints.len())
                    .unwrap_or(0),
            });
        }
        let records = volumes
            .into_iter()
            .enumerate()
            .map(|(i, v)| ReplicaRecord {
                replica_id: i as u64,
                master_seed: 0,
                stream_id: i as u64,
                volume_errors: vec![0.0; v.len()],
                volumes: v,
                tail_intersections: Vec::new(),
                tail_intersections_half: Vec::new(),
                error: None,
            })
            .collect();
        Ok(Self {
            params,
            checkpoints,
            records,
            describe: vec![("source".into(), "external".into())],
        })
    }

    /// Records without errors, in replica-id order.
    pub fn ok_records(&self) -> impl Iterator<Item = &ReplicaRecord> {
        self.records.iter().filter(|r| r.is_ok())
    }

    pub fn ok_count(&self) -> usize {
        self.ok_records().count()
    }

    /// Volumes at checkpoint `i` across successful replicas.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.ok_records().map(|r| r.volumes[i]).collect()
    }

    pub fn tail_column(&self, i: usize) -> Vec<f64> {
        self.ok_records()
            .filter_map(|r| r.tail_intersections.get(i).copied())
            .collect()
    }

    pub fn tail_half_column(&self, i: usize) -> Vec<f64> {
        self.ok_records()
            .filter_map(|r| r.tail_intersections_half.get(i).copied())
            .collect()
    }

    /// Index of the checkpoint equal to `t` up to relative rounding.
    pub fn checkpoint_index(&self, t: f64) -> Option<usize> {
        self.checkpoints
            .iter()
            .position(|&c| (c - t).abs() <= 1e-9 * t.abs().max(1.0))
    }
}

/// Runs `f` on a pool with `workers` threads, or on the global pool.
pub fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::Pool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn run_replica(config: &ExperimentConfig, replica_id: u64) -> ReplicaRecord {
    let mut record = ReplicaRecord {
        replica_id,
        master_seed: config.master_seed,
        stream_id: replica_id,
        volumes: Vec::with_capacity(config.t_checkpoints.len()),
        volume_errors: Vec::with_capacity(config.t_checkpoints.len()),
        tail_intersections: Vec::new(),
        tail_intersections_half: Vec::new(),
        error: None,
    };
    if let Err(e) = fill_replica(config, &mut record) {
        record.error = Some(e.to_string());
    }
    record
}

fn fill_replica(config: &ExperimentConfig, record: &mut ReplicaRecord) -> Result<()> {
    let mut stream = RandomStream::new(config.master_seed, record.replica_id);
    let horizon = config.t_max() * (1.0 + config.tail_factor.unwrap_or(0.0));
    let path = simulate_skeleton(&config.params, horizon, config.mesh, &mut stream)?;
    let radius = config.params.radius();
    for (i, &t) in config.t_checkpoints.iter().enumerate() {
        let sausage = slice(&path, 0.0, t, radius)?;
        let est = estimate_volume(&sausage, &config.method, &stream.derive(2 * i as u64))?;
        record.volumes.push(est.value);
        record.volume_errors.push(est.stat_error);
        if let Some(f) = config.tail_factor {
            let tail = slice(&path, t, t + f * t, radius)?;
            let half = slice(&path, t, t + 0.5 * f * t, radius)?;
            let sub = stream.derive(2 * i as u64 + 1);
            record
                .tail_intersections
                .push(intersection_volume(&sausage, &tail, &config.method, &sub)?.value);
            record
                .tail_intersections_half
                .push(intersection_volume(&sausage, &half, &config.method, &sub)?.value);
        }
    }
    Ok(())
}

/// Simulates `config.replicas` independent paths and measures the sausage
/// volume at every checkpoint of each. A failing replica is recorded with
/// its error instead of aborting the batch.
pub fn run_volume_replicas(config: &ExperimentConfig) -> Result<ReplicaSet> {
    config.validate()?;
    let records = in_pool(config.workers, || {
        (0..config.replicas as u64)
            .into_par_iter()
            .map(|id| run_replica(config, id))
            .collect::<Vec<_>>()
    })?;
    Ok(ReplicaSet {
        params: config.params,
        checkpoints: config.t_checkpoints.clone(),
        records,
        describe: config.describe(),
    })
}

/// A single table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub name: String,
    pub value: f64,
    pub stderr: Option<f64>,
}

/// One acceptance rule: `observed <rule> threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub threshold: f64,
    pub rule: String,
    /// Informational checks are reported but do not decide `passed()`.
    pub gating: bool,
}

impl Check {
    pub fn at_most(name: &str, observed: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: observed <= threshold,
            observed,
            threshold,
            rule: "<=".into(),
            gating: true,
        }
    }

    pub fn at_least(name: &str, observed: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: observed >= threshold,
            observed,
            threshold,
            rule: ">=".into(),
            gating: true,
        }
    }

    pub fn informational(mut self) -> Self {
        self.gating = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: Vec<(String, String)>,
    pub statistics: Vec<Statistic>,
    pub table: Table,
    pub checks: Vec<Check>,
    pub flags: Vec<String>,
    pub elapsed_seconds: f64,
}

impl ExperimentReport {
    pub fn new(experiment: &str, config: Vec<(String, String)>, table: Table) -> Self {
        Self {
            experiment: experiment.into(),
            config,
            statistics: Vec::new(),
            table,
            checks: Vec::new(),
            flags: Vec::new(),
            elapsed_seconds: 0.0,
        }
    }

    pub fn stat(&mut self, name: &str, value: f64, stderr: Option<f64>) {
        self.statistics.push(Statistic {
            name: name.into(),
            value,
            stderr,
        });
    }

    pub fn get(&self, name: &str) -> Option<&Statistic> {
        self.statistics.iter().find(|s| s.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).map(|s| s.value)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }

    /// All gating checks passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| c.gating).all(|c| c.passed)
    }

    pub(crate) fn timed(mut self, start: Instant) -> Self {
        self.elapsed_seconds = start.elapsed().as_secs_f64();
        self
    }
}

pub(crate) fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Insufficient(msg()))
    }
}
