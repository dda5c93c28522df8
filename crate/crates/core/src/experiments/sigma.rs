use serde::{Deserialize, Serialize};

use std::time::Instant;

use super::{require, Check, ExperimentReport, ReplicaSet, Table};
use crate::error::Result;
use crate::potential::h_function;
use crate::stats::{mean, variance};

/// Least-squares slope of `Var(V_t)` on `t` through the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    pub sigma2: f64,
    /// `(t, Var(V_t)/t)` per checkpoint.
    pub ratios: Vec<(f64, f64)>,
    /// 95% half-width from the per-replica influence function.
    pub half_width: f64,
    /// `max_t |Var(V_t) - σ²t| / (√t h(t))`, when `h` is defined.
    pub envelope_constant: Option<f64>,
}

impl SigmaEstimate {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// An estimate with a known value, for feeding synthetic experiments.
    pub fn known(sigma2: f64) -> Self {
        Self {
            sigma2,
            ratios: Vec::new(),
            half_width: 0.0,
            envelope_constant: None,
        }
    }
}

/// `σ² = Σ t Var(V_t) / Σ t²` over the checkpoints of `set`.
pub fn estimate_sigma(set: &ReplicaSet) -> Result<SigmaEstimate> {
    let n = set.ok_count();
    let k = set.checkpoints.len();
    require(k >= 3, || format!("sigma needs at least 3 checkpoints, got {k}"))?;
    require(n >= 100, || format!("sigma needs at least 100 replicas, got {n}"))?;
    let ts = &set.checkpoints;
    let denom: f64 = ts.iter().map(|t| t * t).sum();
    let columns: Vec<Vec<f64>> = (0..k).map(|i| set.column(i)).collect();
    let means: Vec<f64> = columns.iter().map(|c| mean(c)).collect();
    let vars: Vec<f64> = columns.iter().map(|c| variance(c)).collect();
    let sigma2 = ts.iter().zip(&vars).map(|(t, v)| t * v).sum::<f64>() / denom;

    // Influence of replica j on σ²: Σ_t w_t ((V_jt - m_t)² - v_t).
    let influence: Vec<f64> = (0..n)
        .map(|j| {
            (0..k)
                .map(|i| ts[i] / denom * ((columns[i][j] - means[i]).powi(2) - vars[i]))
                .sum()
        })
        .collect();
    let half_width = 1.96 * (variance(&influence) / n as f64).sqrt();

    let (d, alpha) = (set.params.dim(), set.params.alpha());
    let envelope_constant = if set.params.is_transient() {
        let mut worst: f64 = 0.0;
        for (t, v) in ts.iter().zip(&vars) {
            worst = worst.max((v - sigma2 * t).abs() / (t.sqrt() * h_function(*t, d, alpha)?));
        }
        Some(worst)
    } else {
        None
    };
    Ok(SigmaEstimate {
        sigma2,
        ratios: ts.iter().zip(&vars).map(|(t, v)| (*t, v / t)).collect(),
        half_width,
        envelope_constant,
    })
}

/// [`estimate_sigma`] as a report, with the stabilization check
/// `|r(t_k)/r(t_{k-1}) - 1| ≤ tolerance` for `r(t) = Var(V_t)/t` at the last
/// two checkpoints.
pub fn sigma_experiment(set: &ReplicaSet, tolerance: f64) -> Result<(SigmaEstimate, ExperimentReport)> {
    let start = Instant::now();
    let est = estimate_sigma(set)?;
    let mut table = Table::new(&["t", "var_over_t"]);
    for &(t, r) in &est.ratios {
        table.push(vec![t.into(), r.into()]);
    }
    let mut report = ExperimentReport::new("sigma", set.describe.clone(), table);
    report.stat("sigma2", est.sigma2, Some(est.half_width / 1.96));
    report.stat("half_width", est.half_width, None);
    if let Some(c) = est.envelope_constant {
        report.stat("envelope_constant", c, None);
    }
    let k = est.ratios.len();
    let (prev, last) = (est.ratios[k - 2].1, est.ratios[k - 1].1);
    let drift = if prev == 0.0 { 0.0 } else { (last / prev - 1.0).abs() };
    report.stat("variance_drift", drift, None);
    report.checks.push(Check::at_most("variance_drift", drift, tolerance));
    let report = report.timed(start);
    Ok((est, report))
}
