use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{in_pool, Cell, Check, ExperimentReport, Table};
use crate::error::{domain, Error, Result};
use crate::potential::{phi, phi_brownian, PotentialContext};
use crate::process::{sample_increment_into, time_grid, PathSkeleton, ProcessParams};
use crate::rng::RandomStream;
use crate::stats::{ks2_critical_1pct, two_sample_ks};

const BATCH: usize = 1024;

/// First skeleton time at which the path lies in the closed ball
/// `B(center, radius)`.
pub fn first_entry_time(path: &PathSkeleton, center: &[f64], radius: f64) -> Option<f64> {
    let r2 = radius * radius;
    path.points()
        .zip(path.times())
        .find(|(p, _)| dist2(p, center) <= r2)
        .map(|(_, &t)| t)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Runs one path from `start` on `time_grid(t_max, mesh)` and stops at the
/// first grid time inside `B(0, radius)`.
fn simulate_entry(
    params: &ProcessParams,
    start: &[f64],
    radius: f64,
    grid: &[f64],
    stream: &mut RandomStream,
) -> Result<Option<f64>> {
    let r2 = radius * radius;
    let mut x = start.to_vec();
    let mut step = vec![0.0; x.len()];
    if x.iter().map(|v| v * v).sum::<f64>() <= r2 {
        return Ok(Some(0.0));
    }
    for w in grid.windows(2) {
        sample_increment_into(params, w[1] - w[0], stream, &mut step)?;
        let mut n2 = 0.0;
        for (xi, s) in x.iter_mut().zip(&step) {
            *xi += s;
            n2 += *xi * *xi;
        }
        if n2 <= r2 {
            return Ok(Some(w[1]));
        }
    }
    Ok(None)
}

fn check_start(params: &ProcessParams, start: &[f64]) -> Result<()> {
    if start.len() != params.dim() {
        return Err(Error::Dimension {
            expected: params.dim(),
            got: start.len(),
        });
    }
    if start.iter().any(|v| !v.is_finite()) {
        return Err(domain("start point must be finite"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingEstimate {
    pub hits: usize,
    pub replicas: usize,
    pub frequency: f64,
    pub stderr: f64,
}

/// Fraction of discretized paths from `start` that enter `B(0, radius)`
/// by time `t_max`. Replica `i` uses the stream `(seed, i)`.
pub fn hitting_frequency(
    params: &ProcessParams,
    start: &[f64],
    radius: f64,
    t_max: f64,
    mesh: f64,
    replicas: usize,
    seed: u64,
) -> Result<HittingEstimate> {
    check_start(params, start)?;
    if replicas == 0 {
        return Err(domain("at least one replica is required"));
    }
    let grid = time_grid(t_max, mesh)?;
    let outcomes = (0..replicas as u64)
        .into_par_iter()
        .map(|i| simulate_entry(params, start, radius, &grid, &mut RandomStream::new(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    let hits = outcomes.iter().filter(|o| o.is_some()).count();
    let p = hits as f64 / replicas as f64;
    Ok(HittingEstimate {
        hits,
        replicas,
        frequency: p,
        stderr: (p * (1.0 - p) / replicas as f64).sqrt(),
    })
}

/// Inputs of the hitting-time scaling comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauConfig {
    pub params: ProcessParams,
    pub start: Vec<f64>,
    pub t_max: f64,
    pub mesh: f64,
    /// Paths per arm before the uncensored target is considered.
    pub replicas: usize,
    /// Keep adding batches until each arm has this many uncensored times.
    pub target_uncensored: usize,
    /// Hard cap on paths per arm.
    pub max_replicas: usize,
    pub master_seed: u64,
    pub workers: Option<usize>,
}

struct Arm {
    start: Vec<f64>,
    radius: f64,
    grid: Vec<f64>,
    scale: f64,
    tag: u64,
    times: Vec<f64>,
    censored: usize,
}

impl Arm {
    fn total(&self) -> usize {
        self.times.len() + self.censored
    }

    fn censoring(&self) -> f64 {
        self.censored as f64 / self.total() as f64
    }
}

/// Compares `τ^x_{B(0,2)}` with `2^α τ^{x/2}_{B(0,1)}`.
///
/// The second arm runs on the grid scaled by `2^{-α}`, so both arms are the
/// same discretized process in law and the comparison isolates the sampler's
/// self-similarity. Times beyond the horizon are censored; the KS distance
/// uses uncensored times only. Heavy censoring (over 50% in either arm) is
/// flagged as inconclusive rather than failed.
pub fn tau_scaling_experiment(cfg: &TauConfig) -> Result<ExperimentReport> {
    let begin = Instant::now();
    let p = &cfg.params;
    check_start(p, &cfg.start)?;
    let norm = cfg.start.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= 2.0 {
        return Err(domain(format!("|x| = {norm} must exceed 2")));
    }
    if cfg.replicas == 0 || cfg.max_replicas < cfg.replicas {
        return Err(domain("need 0 < replicas <= max_replicas"));
    }
    if cfg.workers == Some(0) {
        return Err(domain("worker count must be positive"));
    }
    let c = 2f64.powf(p.alpha());
    let mut arms = [
        Arm {
            start: cfg.start.clone(),
            radius: 2.0,
            grid: time_grid(cfg.t_max, cfg.mesh)?,
            scale: 1.0,
            tag: 0,
            times: Vec::new(),
            censored: 0,
        },
        Arm {
            start: cfg.start.iter().map(|v| v / 2.0).collect(),
            radius: 1.0,
            grid: time_grid(cfg.t_max / c, cfg.mesh / c)?,
            scale: c,
            tag: 1,
            times: Vec::new(),
            censored: 0,
        },
    ];
    let mut done = 0usize;
    while done < cfg.max_replicas {
        let enough = arms.iter().all(|a| a.times.len() >= cfg.target_uncensored);
        if done >= cfg.replicas && enough {
            break;
        }
        let batch = BATCH.min(cfg.max_replicas - done);
        for arm in arms.iter_mut() {
            let outcomes = in_pool(cfg.workers, || {
                (done as u64..(done + batch) as u64)
                    .into_par_iter()
                    .map(|i| {
                        let mut s = RandomStream::new(cfg.master_seed, i).derive(arm.tag);
                        simulate_entry(p, &arm.start, arm.radius, &arm.grid, &mut s)
                    })
                    .collect::<Result<Vec<_>>>()
            })??;
            for o in outcomes {
                match o {
                    Some(t) => arm.times.push(arm.scale * t),
                    None => arm.censored += 1,
                }
            }
        }
        done += batch;
    }

    let mut table = Table::new(&["arm", "tau", "censored"]);
    for arm in &arms {
        for &t in &arm.times {
            table.push(vec![Cell::from(arm.tag), t.into(), Cell::Int(0)]);
        }
        for _ in 0..arm.censored {
            table.push(vec![Cell::from(arm.tag), cfg.t_max.into(), Cell::Int(1)]);
        }
    }
    let describe = vec![
        ("dim".to_string(), p.dim().to_string()),
        ("alpha".into(), p.alpha().to_string()),
        ("start_norm".into(), norm.to_string()),
        ("t_max".into(), cfg.t_max.to_string()),
        ("mesh".into(), cfg.mesh.to_string()),
        ("seed".into(), cfg.master_seed.to_string()),
    ];
    let mut report = ExperimentReport::new("tau-scaling", describe, table);
    let (n1, n2) = (arms[0].times.len(), arms[1].times.len());
    report.stat("paths_per_arm", done as f64, None);
    report.stat("uncensored_large", n1 as f64, None);
    report.stat("uncensored_small", n2 as f64, None);
    report.stat("censoring_large", arms[0].censoring(), None);
    report.stat("censoring_small", arms[1].censoring(), None);

    // Probability of ever hitting: B(0,2) from x equals B(0,1) from x/2.
    let half: Vec<f64> = cfg.start.iter().map(|v| v / 2.0).collect();
    let eventual = if p.alpha() < 2.0 {
        phi(&half, &PotentialContext::new(*p)?)?
    } else {
        phi_brownian(&half, p.dim())?
    };
    report.stat("eventual_hit_probability", eventual, None);
    for (arm, name) in arms.iter().zip(["large", "small"]) {
        let frac = arm.times.len() as f64 / arm.total() as f64 / eventual;
        report.stat(&format!("hit_by_horizon_given_eventual_{name}"), frac, None);
    }

    let worst_censoring = arms[0].censoring().max(arms[1].censoring());
    report
        .checks
        .push(Check::at_most("censoring", worst_censoring, 0.5).informational());
    if worst_censoring > 0.5 {
        report.flags.push("inconclusive".into());
    }
    if n1 == 0 || n2 == 0 {
        report.flags.push("no_uncensored_times".into());
        return Ok(report.timed(begin));
    }
    let ks = two_sample_ks(&arms[0].times, &arms[1].times)?;
    let crit = ks2_critical_1pct(n1, n2);
    report.stat("ks", ks, None);
    report.stat("ks_critical", crit, None);
    report.checks.push(Check::at_most("ks", ks, crit));
    Ok(report.timed(begin))
}
