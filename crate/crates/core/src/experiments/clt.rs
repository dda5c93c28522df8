use std::time::Instant;

use super::{require, Cell, Check, ExperimentReport, ReplicaSet, SigmaEstimate, Table};
use crate::error::{domain, Error, Result};
use crate::potential::{process_capacity_for, PotentialContext};
use crate::stats::{covariance, ks_critical_1pct, ks_statistic, kurtosis, mean, normal_cdf, skewness, variance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CltTolerances {
    pub max_abs_skewness: f64,
    pub max_kurtosis_deviation: f64,
}

impl Default for CltTolerances {
    fn default() -> Self {
        Self {
            max_abs_skewness: 0.3,
            max_kurtosis_deviation: 0.6,
        }
    }
}

/// Standardizes the volumes at the last checkpoint as
/// `(V_t - mean V_t) / (σ̂ √t)` and compares them with N(0, 1).
///
/// The KS distance, skewness and kurtosis of the empirically centered
/// values are gated; the capacity-centered distance is informational.
pub fn clt_experiment(
    set: &ReplicaSet,
    sigma: &SigmaEstimate,
    ctx: &PotentialContext,
    tol: CltTolerances,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let p = ctx.params();
    if !p.clt_regime() {
        return Err(Error::Regime(format!(
            "the central limit regime needs d/alpha > 3/2, got {}",
            p.ratio()
        )));
    }
    let n = set.ok_count();
    require(n >= 2, || format!("CLT needs at least 2 replicas, got {n}"))?;
    let last = set.checkpoints.len() - 1;
    let t = set.checkpoints[last];
    let volumes = set.column(last);
    let ids: Vec<u64> = set.ok_records().map(|r| r.replica_id).collect();
    let centre = mean(&volumes);
    let mut table = Table::new(&["replica_id", "t", "volume", "centered", "standardized"]);

    let degenerate = sigma.sigma2 <= 0.0 || variance(&volumes) == 0.0;
    let scale = sigma.sigma() * t.sqrt();
    let standardized: Vec<f64> = volumes
        .iter()
        .map(|v| if degenerate { 0.0 } else { (v - centre) / scale })
        .collect();
    for ((id, v), z) in ids.iter().zip(&volumes).zip(&standardized) {
        table.push(vec![
            Cell::from(*id),
            t.into(),
            (*v).into(),
            (v - centre).into(),
            (*z).into(),
        ]);
    }
    let mut report = ExperimentReport::new("clt", set.describe.clone(), table);
    report.stat("t", t, None);
    report.stat("sigma2", sigma.sigma2, Some(sigma.half_width / 1.96));
    report.stat("mean_volume", centre, None);
    if degenerate {
        report.flags.push("degenerate".into());
        return Ok(report.timed(start));
    }
    let ks = ks_statistic(&standardized, normal_cdf)?;
    let crit = ks_critical_1pct(n);
    let skew = skewness(&standardized);
    let kurt = kurtosis(&standardized);
    report.stat("ks", ks, None);
    report.stat("ks_critical", crit, None);
    report.stat("skewness", skew, None);
    report.stat("kurtosis", kurt, None);
    let cap = process_capacity_for(p)?;
    let cap_centered: Vec<f64> = volumes.iter().map(|v| (v - t * cap) / scale).collect();
    let ks_cap = ks_statistic(&cap_centered, normal_cdf)?;
    report.stat("ks_capacity_centered", ks_cap, None);

    report.checks.push(Check::at_most("ks", ks, crit));
    report
        .checks
        .push(Check::at_most("abs_skewness", skew.abs(), tol.max_abs_skewness));
    report.checks.push(Check::at_most(
        "kurtosis_deviation",
        (kurt - 3.0).abs(),
        tol.max_kurtosis_deviation,
    ));
    report
        .checks
        .push(Check::at_most("ks_capacity_centered", ks_cap, crit).informational());
    Ok(report.timed(start))
}

/// Empirical covariance of `Y_s = (V_{ns} - mean V_{ns}) / (σ̂ √n)` over the
/// given fractions `s` of `n`, against the Brownian target `min(s, s')`.
pub fn fclt_covariance_experiment(
    set: &ReplicaSet,
    sigma: &SigmaEstimate,
    n: f64,
    fractions: &[f64],
    tolerance: f64,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    if !(sigma.sigma2 > 0.0) {
        return Err(domain("FCLT standardization needs sigma2 > 0"));
    }
    require(!fractions.is_empty(), || "no FCLT times".into())?;
    let replicas = set.ok_count();
    require(replicas >= 2, || {
        format!("FCLT needs at least 2 replicas, got {replicas}")
    })?;
    let scale = sigma.sigma() * n.sqrt();
    let mut ys = Vec::with_capacity(fractions.len());
    for &s in fractions {
        let i = set
            .checkpoint_index(s * n)
            .ok_or_else(|| domain(format!("no checkpoint at t = {}", s * n)))?;
        let col = set.column(i);
        let m = mean(&col);
        ys.push(col.iter().map(|v| (v - m) / scale).collect::<Vec<f64>>());
    }
    let mut table = Table::new(&["s", "u", "covariance", "target"]);
    let mut worst: f64 = 0.0;
    for (a, &s) in fractions.iter().enumerate() {
        for (b, &u) in fractions.iter().enumerate() {
            let c = covariance(&ys[a], &ys[b]);
            let target = s.min(u);
            worst = worst.max((c - target).abs());
            table.push(vec![s.into(), u.into(), c.into(), target.into()]);
        }
    }
    let mut report = ExperimentReport::new("fclt", set.describe.clone(), table);
    report.stat("n", n, None);
    report.stat("sigma2", sigma.sigma2, Some(sigma.half_width / 1.96));
    report.stat("max_deviation", worst, None);
    report.checks.push(Check::at_most("max_deviation", worst, tolerance));
    Ok(report.timed(start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::ProcessParams;
    use crate::rng::RandomStream;

    fn params() -> ProcessParams {
        ProcessParams::unit(1, 0.6).unwrap()
    }

    fn ctx() -> PotentialContext {
        PotentialContext::new(params()).unwrap()
    }

    #[test]
    fn synthetic_normals_pass() {
        let mut rng = RandomStream::new(4, 4);
        let rows: Vec<Vec<f64>> = (0..500).map(|_| vec![rng.standard_normal()]).collect();
        let set = ReplicaSet::from_volumes(params(), vec![1.0], rows).unwrap();
        let r = clt_experiment(&set, &SigmaEstimate::known(1.0), &ctx(), CltTolerances::default()).unwrap();
        assert!(r.value("ks").unwrap() < 0.0729, "{:?}", r.statistics);
        assert_eq!(
            r.table.columns,
            ["replica_id", "t", "volume", "centered", "standardized"]
        );
        assert_eq!(r.table.rows.len(), 500);
    }

    #[test]
    fn constant_inputs_are_degenerate() {
        let set = ReplicaSet::from_volumes(params(), vec![1.0], vec![vec![3.0]; 50]).unwrap();
        let r = clt_experiment(&set, &SigmaEstimate::known(1.0), &ctx(), CltTolerances::default()).unwrap();
        assert!(r.has_flag("degenerate"));
        assert!(r.value("ks").is_none());
    }

    #[test]
    fn regime_gate() {
        let p = ProcessParams::unit(3, 2.0).unwrap();
        let c = PotentialContext::new(p).unwrap();
        let set = ReplicaSet::from_volumes(p, vec![1.0], vec![vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(
            clt_experiment(&set, &SigmaEstimate::known(1.0), &c, CltTolerances::default()),
            Err(Error::Regime(_))
        ));
    }

    #[test]
    fn doubling_sigma_halves_standardized_values() {
        let mut rng = RandomStream::new(5, 5);
        let rows: Vec<Vec<f64>> = (0..200).map(|_| vec![10.0 + rng.standard_normal()]).collect();
        let set = ReplicaSet::from_volumes(params(), vec![4.0], rows).unwrap();
        let a = clt_experiment(&set, &SigmaEstimate::known(1.0), &ctx(), CltTolerances::default()).unwrap();
        let b = clt_experiment(&set, &SigmaEstimate::known(4.0), &ctx(), CltTolerances::default()).unwrap();
        for (ra, rb) in a.table.rows.iter().zip(&b.table.rows) {
            match (&ra[4], &rb[4]) {
                (Cell::Real(x), Cell::Real(y)) => assert!((x - 2.0 * y).abs() < 1e-12),
                _ => unreachable!(),
            }
        }
        // KS against N(0, 1/4) for the halved values equals the original KS.
        let halved: Vec<f64> = b
            .table
            .rows
            .iter()
            .map(|r| match r[4] {
                Cell::Real(z) => z,
                _ => unreachable!(),
            })
            .collect();
        let ks = ks_statistic(&halved, |x| normal_cdf(2.0 * x)).unwrap();
        assert!((ks - a.value("ks").unwrap()).abs() < 1e-12);
    }

    #[test]
    fn brownian_covariance() {
        let mut rng = RandomStream::new(6, 6);
        let rows: Vec<Vec<f64>> = (0..2000)
            .map(|_| {
                let w1 = rng.standard_normal() * 0.5f64.sqrt();
                let w2 = w1 + rng.standard_normal() * 0.5f64.sqrt();
                vec![w1, w2]
            })
            .collect();
        let set = ReplicaSet::from_volumes(params(), vec![0.5, 1.0], rows).unwrap();
        let r = fclt_covariance_experiment(&set, &SigmaEstimate::known(1.0), 1.0, &[0.5, 1.0], 0.1).unwrap();
        assert!(r.passed(), "{:?}", r.table);
        let targets: Vec<f64> = r
            .table
            .rows
            .iter()
            .map(|row| match row[3] {
                Cell::Real(v) => v,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(targets, [0.5, 0.5, 0.5, 1.0]);
    }

    #[test]
    fn single_time_is_a_variance() {
        let mut rng = RandomStream::new(7, 7);
        let rows: Vec<Vec<f64>> = (0..4000).map(|_| vec![0.7f64.sqrt() * rng.standard_normal()]).collect();
        let set = ReplicaSet::from_volumes(params(), vec![0.7], rows).unwrap();
        let r = fclt_covariance_experiment(&set, &SigmaEstimate::known(1.0), 1.0, &[0.7], 0.1).unwrap();
        assert!(r.value("max_deviation").unwrap() < 0.05);
        assert!(fclt_covariance_experiment(&set, &SigmaEstimate::known(0.0), 1.0, &[0.7], 0.1).is_err());
    }
}
