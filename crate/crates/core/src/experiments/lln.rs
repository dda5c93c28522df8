use std::time::Instant;

use super::{require, Cell, Check, ExperimentReport, ReplicaSet, Table};
use crate::error::Result;
use crate::potential::{h_function, process_capacity_for, PotentialContext};
use crate::stats::{mean, variance};

/// Compares `mean(V_t)/t` with the capacity at every checkpoint.
///
/// Gates: the relative gap at the last checkpoint is within `rel_tol`, and
/// `|gap|` does not grow between consecutive checkpoints by more than two
/// standard errors. Whether the estimate sits below capacity is reported
/// without gating.
pub fn lln_capacity_check(set: &ReplicaSet, ctx: &PotentialContext, rel_tol: f64) -> Result<ExperimentReport> {
    let start = Instant::now();
    let n = set.ok_count();
    require(n >= 2, || format!("LLN check needs at least 2 replicas, got {n}"))?;
    let cap = process_capacity_for(ctx.params())?;
    let mut table = Table::new(&["t", "mean_ratio", "stderr", "capacity", "gap"]);
    let mut gaps = Vec::with_capacity(set.checkpoints.len());
    for (i, &t) in set.checkpoints.iter().enumerate() {
        let ratios: Vec<f64> = set.column(i).iter().map(|v| v / t).collect();
        let m = mean(&ratios);
        let se = (variance(&ratios) / n as f64).sqrt();
        gaps.push((m - cap, se));
        table.push(vec![t.into(), m.into(), se.into(), cap.into(), (m - cap).into()]);
    }
    let mut report = ExperimentReport::new("lln", set.describe.clone(), table);
    report.stat("capacity", cap, None);
    let (last_gap, last_se) = *gaps.last().expect("at least one checkpoint");
    report.stat("mean_ratio_final", cap + last_gap, Some(last_se));
    let worst_growth = gaps
        .windows(2)
        .map(|w| w[1].0.abs() - w[0].0.abs() - 2.0 * w[1].1)
        .fold(f64::NEG_INFINITY, f64::max);
    // a single checkpoint makes the monotonicity rule vacuous
    let worst_growth = if worst_growth.is_finite() { worst_growth } else { 0.0 };
    report
        .checks
        .push(Check::at_most("relative_gap_final", last_gap.abs() / cap, rel_tol));
    report.checks.push(Check::at_most("gap_growth", worst_growth, 0.0));
    report
        .checks
        .push(Check::at_most("below_capacity", last_gap - 2.0 * last_se, 0.0).informational());
    Ok(report.timed(start))
}

/// Fits `ĉ(t) = E[λ(S_t ∩ S[t, t+T])] / h(t)` and checks it stays bounded
/// (no increase beyond three combined standard errors). In the regime
/// `1 < d/α < 2` the log-log growth rate of the intersection is also
/// compared with `2 - d/α`.
pub fn gap_bound_check(set: &ReplicaSet, ctx: &PotentialContext) -> Result<ExperimentReport> {
    let start = Instant::now();
    let n = set.ok_count();
    require(n >= 2, || format!("gap bound needs at least 2 replicas, got {n}"))?;
    require(set.tail_column(0).len() == n, || {
        "records carry no tail intersections".into()
    })?;
    let p = ctx.params();
    let (d, alpha) = (p.dim(), p.alpha());
    let mut table = Table::new(&["t", "intersection", "stderr", "half_tail", "h", "c_hat"]);
    let mut fits = Vec::new();
    let mut nested = true;
    for (i, &t) in set.checkpoints.iter().enumerate() {
        let full = set.tail_column(i);
        let half = set.tail_half_column(i);
        nested &= full.iter().zip(&half).all(|(f, h)| h <= f);
        let m = mean(&full);
        let se = (variance(&full) / n as f64).sqrt();
        let h = h_function(t, d, alpha)?;
        fits.push((t, m, se, h));
        table.push(vec![
            t.into(),
            m.into(),
            se.into(),
            Cell::Real(mean(&half)),
            h.into(),
            (m / h).into(),
        ]);
    }
    let mut report = ExperimentReport::new("gap-bound", set.describe.clone(), table);
    let growth = fits
        .windows(2)
        .map(|w| {
            let (c0, s0) = (w[0].1 / w[0].3, w[0].2 / w[0].3);
            let (c1, s1) = (w[1].1 / w[1].3, w[1].2 / w[1].3);
            c1 - c0 - 3.0 * (s0 * s0 + s1 * s1).sqrt()
        })
        .fold(0.0f64, f64::max);
    report.checks.push(Check::at_most("c_hat_growth", growth, 0.0));
    report
        .checks
        .push(Check::at_least("tail_nesting", f64::from(u8::from(nested)), 1.0).informational());
    let ratio = p.ratio();
    if fits.len() >= 2 && ratio < 2.0 {
        let xs: Vec<f64> = fits.iter().map(|f| f.0.ln()).collect();
        let ys: Vec<f64> = fits.iter().map(|f| f.1.ln()).collect();
        let (mx, my) = (mean(&xs), mean(&ys));
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
        report.stat("loglog_slope", slope, None);
        report.stat("expected_slope", 2.0 - ratio, None);
        report
            .checks
            .push(Check::at_most("slope_deviation", (slope - (2.0 - ratio)).abs(), 0.25));
    }
    Ok(report.timed(start))
}
