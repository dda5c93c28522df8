use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{in_pool, require, Cell, Check, ExperimentReport, ReplicaSet, Table};
use crate::error::{domain, Result};
use crate::geometry::{intersection_volume, slice, VolumeMethod};
use crate::potential::h_function;
use crate::process::{simulate_skeleton, ProcessParams};
use crate::rng::RandomStream;
use crate::stats::{central_moment, covariance, mean, variance};

/// Paired-sausage run: `S[0, t]` of one path against `S'[0, t_tail]` of an
/// independent copy, both started at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentConfig {
    pub params: ProcessParams,
    pub t: f64,
    /// Finite stand-in for the infinite horizon of the second path.
    pub t_tail: f64,
    pub pairs: usize,
    pub mesh: f64,
    pub method: VolumeMethod,
    pub master_seed: u64,
    pub k: u32,
    pub workers: Option<usize>,
}

impl MomentConfig {
    fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.k) {
            return Err(domain(format!("moment order k = {} must be 1, 2 or 3", self.k)));
        }
        if !(self.t > 0.0 && self.t_tail > 0.0) {
            return Err(domain("t and t_tail must be positive"));
        }
        if !(self.mesh > 0.0) || self.mesh > self.t.min(self.t_tail / 2.0) {
            return Err(domain(format!("mesh {} is too coarse for the horizons", self.mesh)));
        }
        if self.workers == Some(0) {
            return Err(domain("worker count must be positive"));
        }
        Ok(())
    }
}

/// `2^{k-1} (k!)²`.
fn moment_factor(k: u32) -> f64 {
    let fact: f64 = (1..=k).map(f64::from).product();
    2f64.powi(k as i32 - 1) * fact * fact
}

/// Returns `(λ(S_t ∩ S'_T), λ(S_t ∩ S'_{T/2}))` for pair `id`.
fn pair_intersection(cfg: &MomentConfig, id: u64) -> Result<(f64, f64)> {
    let base = RandomStream::new(cfg.master_seed, id);
    let r = cfg.params.radius();
    let first = simulate_skeleton(&cfg.params, cfg.t, cfg.mesh, &mut base.derive(1))?;
    let second = simulate_skeleton(&cfg.params, cfg.t_tail, cfg.mesh, &mut base.derive(2))?;
    let a = slice(&first, 0.0, cfg.t, r)?;
    let full = slice(&second, 0.0, cfg.t_tail, r)?;
    let half = slice(&second, 0.0, cfg.t_tail / 2.0, r)?;
    let est = base.derive(3);
    Ok((
        intersection_volume(&a, &full, &cfg.method, &est)?.value,
        intersection_volume(&a, &half, &cfg.method, &est)?.value,
    ))
}

/// Checks `E[I^k] ≤ 2^{k-1}(k!)² E[I]^k` for `I = λ(S_t ∩ S'_T)`, with the
/// ratio's standard error propagated by the delta method.
pub fn intersection_moment_experiment(cfg: &MomentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    cfg.validate()?;
    require(cfg.pairs >= 2, || {
        format!("moments need at least 2 pairs, got {}", cfg.pairs)
    })?;
    let results = in_pool(cfg.workers, || {
        (0..cfg.pairs as u64)
            .into_par_iter()
            .map(|id| pair_intersection(cfg, id))
            .collect::<Vec<_>>()
    })?;
    let mut table = Table::new(&["pair_id", "intersection", "intersection_half_tail"]);
    let (mut full, mut half) = (Vec::new(), Vec::new());
    let mut failures = 0usize;
    for (id, r) in results.into_iter().enumerate() {
        match r {
            Ok((f, h)) => {
                table.push(vec![Cell::from(id), f.into(), h.into()]);
                full.push(f);
                half.push(h);
            }
            Err(_) => failures += 1,
        }
    }
    let n = full.len();
    require(n >= 2, || format!("only {n} pairs succeeded"))?;
    let k = cfg.k as i32;
    let powers: Vec<f64> = full.iter().map(|x| x.powi(k)).collect();
    let (mk, m1) = (mean(&powers), mean(&full));
    let factor = moment_factor(cfg.k);
    let nf = n as f64;

    let describe = vec![
        ("dim".to_string(), cfg.params.dim().to_string()),
        ("alpha".into(), cfg.params.alpha().to_string()),
        ("t".into(), cfg.t.to_string()),
        ("t_tail".into(), cfg.t_tail.to_string()),
        ("pairs".into(), cfg.pairs.to_string()),
        ("k".into(), cfg.k.to_string()),
        ("seed".into(), cfg.master_seed.to_string()),
    ];
    let mut report = ExperimentReport::new("moments", describe, table);
    report.stat("factor", factor, None);
    report.stat("moment_1", m1, Some((variance(&full) / nf).sqrt()));
    report.stat("moment_k", mk, Some((variance(&powers) / nf).sqrt()));
    report.stat("moment_1_half_tail", mean(&half), Some((variance(&half) / nf).sqrt()));
    report.stat("failed_pairs", failures as f64, None);
    if let Ok(h) = h_function(cfg.t, cfg.params.dim(), cfg.params.alpha()) {
        report.stat("moment_1_over_h", m1 / h, None);
    }
    if m1 <= 0.0 {
        report.flags.push("degenerate".into());
        return Ok(report.timed(start));
    }
    let ratio = mk / (factor * m1.powi(k));
    let kf = f64::from(cfg.k);
    let rel_var = variance(&powers) / (mk * mk) + kf * kf * variance(&full) / (m1 * m1)
        - 2.0 * kf * covariance(&powers, &full) / (mk * m1);
    let se = ratio * (rel_var.max(0.0) / nf).sqrt();
    report.stat("ratio", ratio, Some(se));
    report.checks.push(Check::at_most("ratio", ratio, 1.0 + 3.0 * se));
    Ok(report.timed(start))
}

/// `m₄(t)/t²` per checkpoint, with `m₄` the fourth central moment of `V_t`
/// across replicas. Gates: the ratio at the largest `t` is at most twice the
/// ratio at the median checkpoint, and the ratios span less than a factor 2.
pub fn fourth_moment_experiment(set: &ReplicaSet) -> Result<ExperimentReport> {
    let start = Instant::now();
    let n = set.ok_count();
    let k = set.checkpoints.len();
    require(n >= 200, || {
        format!("fourth moment needs at least 200 replicas, got {n}")
    })?;
    require(k >= 3, || {
        format!("fourth moment needs at least 3 checkpoints, got {k}")
    })?;
    let mut table = Table::new(&["t", "m4", "ratio"]);
    let mut ratios = Vec::with_capacity(k);
    for (i, &t) in set.checkpoints.iter().enumerate() {
        let m4 = central_moment(&set.column(i), 4);
        ratios.push(m4 / (t * t));
        table.push(vec![t.into(), m4.into(), (m4 / (t * t)).into()]);
    }
    let mut report = ExperimentReport::new("fourth-moment", set.describe.clone(), table);
    let last = ratios[k - 1];
    let median = ratios[k / 2];
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if max == 0.0 { 1.0 } else { max / min };
    report.stat("ratio_final", last, None);
    report.stat("ratio_median", median, None);
    report.stat("spread", spread, None);
    report
        .checks
        .push(Check::at_most("final_over_median", last, 2.0 * median));
    report.checks.push(Check::at_most("spread", spread, 2.0));
    Ok(report.timed(start))
}
