//! Installation smoke test: hand-checkable identities of every module plus
//! agreement of the volume estimators on small inputs.

use std::f64::consts::PI;

use sausage_core::experiments::estimate_sigma;
use sausage_core::experiments::{
    clt_experiment, fourth_moment_experiment, intersection_moment_experiment, lil_checkpoint_sequence,
    lln_capacity_check, run_volume_replicas, CltTolerances, ExperimentConfig, MomentConfig, ReplicaSet, SigmaEstimate,
};
use sausage_core::geometry::{
    build_spatial_index, contains, intersection_volume, merged_intervals, slice, volume_exact_1d, volume_grid,
    volume_hit_or_miss, VolumeMethod,
};
use sausage_core::potential::{
    capacity_unit_ball, green_function, h_function, lil_normalizer_chung, lil_normalizer_khintchine, phi, phi_brownian,
};
use sausage_core::process::{
    empirical_char_function, sample_subordinator_increment, simulate_skeleton, subsample_skeleton, time_grid,
};
use sausage_core::stats::{ks_statistic, mean, normal_cdf, two_sample_ks, variance};
use sausage_core::{Error, PotentialContext, ProcessParams, RandomStream, SausageSkeleton};

use crate::config::RunConfig;
use crate::output::csv_string;

type Outcome = Result<bool, Error>;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn unit(d: usize, alpha: f64) -> Result<ProcessParams, Error> {
    ProcessParams::unit(d, alpha)
}

fn laplace() -> Outcome {
    let n = 200_000;
    let mut s = RandomStream::new(1, 0);
    let xs: Vec<f64> = (0..n)
        .map(|_| sample_subordinator_increment(0.5, 1.0, &mut s).map(|v| (-v).exp()))
        .collect::<Result<_, _>>()?;
    let se = (variance(&xs) / n as f64).sqrt();
    Ok(close(mean(&xs), (-1.0f64).exp(), 3.0 * se))
}

fn gaussian_variance() -> Outcome {
    let p = unit(1, 2.0)?;
    let n = 200_000;
    let mut s = RandomStream::new(2, 0);
    let mut xs = Vec::with_capacity(n);
    let mut x = [0.0];
    for _ in 0..n {
        sausage_core::process::sample_increment_into(&p, 1.0, &mut s, &mut x)?;
        xs.push(x[0]);
    }
    Ok(close(variance(&xs), 2.0, 3.0 * (8.0 / n as f64).sqrt()))
}

fn grids_and_subsampling() -> Outcome {
    let p = unit(2, 1.0)?;
    let sk = simulate_skeleton(&p, 1.0, 0.25, &mut RandomStream::new(3, 0))?;
    let single = time_grid(1.0, 1.0)?;
    let sub = subsample_skeleton(&sk, 2)?;
    Ok(sk.times() == [0.0, 0.25, 0.5, 0.75, 1.0]
        && sk.point(0) == [0.0, 0.0]
        && single == [0.0, 1.0]
        && sub.times() == [0.0, 0.5, 1.0]
        && sub.point(1) == sk.point(2)
        && subsample_skeleton(&sk, 1)?.positions() == sk.positions())
}

fn char_function() -> Outcome {
    let origin = vec![[0.0, 0.0]; 4];
    let at_origin = empirical_char_function(&origin, &[1.0, 2.0])?;
    let pair = [[PI, 0.0], [-PI, 0.0]];
    let flipped = empirical_char_function(&pair, &[1.0, 0.0])?;
    Ok(at_origin.re == 1.0 && at_origin.im == 0.0 && close(flipped.re, -1.0, 1e-15) && close(flipped.im, 0.0, 1e-15))
}

fn potentials() -> Outcome {
    let ctx = PotentialContext::new(unit(3, 1.5)?)?;
    let g1 = green_function(&[0.3, 0.4, 0.0], &ctx)?;
    let g2 = green_function(&[0.6, 0.8, 0.0], &ctx)?;
    Ok(capacity_unit_ball(3, 2.0)? == 1.0
        && capacity_unit_ball(4, 2.0)? == 1.0
        && close(g2 / g1, 2f64.powf(-1.5), 1e-12)
        && phi(&[1.0, 0.0, 0.0], &ctx)? == 1.0
        && phi(&[2.0, 0.0, 0.0], &ctx)? > phi(&[4.0, 0.0, 0.0], &ctx)?
        && phi_brownian(&[1.0, 0.0, 0.0], 3)? == 1.0
        && phi_brownian(&[2.0, 0.0, 0.0], 3)? == 0.5
        && h_function(100.0, 5, 2.0)? == 1.0)
}

fn normalizers() -> Outcome {
    let t = 1e4;
    Ok(lil_normalizer_khintchine(t, 0.0).is_err()
        && lil_normalizer_chung(10.0, 1.0).is_err()
        && close(
            lil_normalizer_khintchine(t, 2.0)?,
            2.0 * lil_normalizer_khintchine(t, 1.0)?,
            1e-12,
        )
        && close(
            lil_normalizer_chung(t, 2.0)?,
            2.0 * lil_normalizer_chung(t, 1.0)?,
            1e-12,
        ))
}

fn spatial_index() -> Outcome {
    let sk = SausageSkeleton::from_points(&[[0.0, 0.0]], 1.0)?;
    let idx = build_spatial_index(&sk);
    let two = SausageSkeleton::from_points(&[[0.1, 0.1], [0.2, 0.2], [5.0, 5.0]], 1.0)?;
    let idx2 = build_spatial_index(&two);
    Ok(idx.occupied_cells() == 1
        && idx2.entries() == 3
        && idx2.cell_members(&[0.1, 0.1]).len() == 2
        && contains(&idx, &sk, &[0.0, 0.0])
        && contains(&idx, &sk, &[1.0, 0.0])
        && !contains(&idx, &sk, &[1.0 + 1e-9, 0.0]))
}

fn intervals() -> Outcome {
    let sk = SausageSkeleton::from_points(&[[0.0], [0.5], [3.0]], 1.0)?;
    let twice = SausageSkeleton::from_points(&[[0.0], [0.0]], 1.0)?;
    let single = SausageSkeleton::from_points(&[[7.0]], 2.5)?;
    Ok(merged_intervals(&sk)? == [(-1.0, 1.5), (2.0, 4.0)]
        && volume_exact_1d(&sk)?.value == 4.5
        && volume_exact_1d(&twice)?.value == 2.0
        && volume_exact_1d(&single)?.value == 5.0)
}

fn single_balls() -> Outcome {
    let disk = SausageSkeleton::from_points(&[[0.0, 0.0]], 1.0)?;
    let ball = SausageSkeleton::from_points(&[[0.0, 0.0, 0.0]], 1.0)?;
    let hm = volume_hit_or_miss(&disk, 1_000_000, &RandomStream::new(4, 0))?;
    Ok(close(volume_grid(&disk, 0.01)?.value, PI, 0.01)
        && close(volume_grid(&ball, 0.02)?.value, 4.0 * PI / 3.0, 0.02)
        && close(hm.value, PI, 3.0 * hm.stat_error))
}

fn intersections() -> Outcome {
    let s = RandomStream::new(5, 0);
    let a = SausageSkeleton::from_points(&[[0.0]], 1.0)?;
    let b = SausageSkeleton::from_points(&[[1.0]], 1.0)?;
    let far = SausageSkeleton::from_points(&[[0.0, 0.0], [0.0, 0.0]], 1.0)?;
    let far2 = SausageSkeleton::from_points(&[[2.5, 0.0]], 1.0)?;
    let p = unit(2, 1.2)?;
    let path = simulate_skeleton(&p, 2.0, 0.1, &mut RandomStream::new(6, 0))?;
    let sk = slice(&path, 0.0, 2.0, 1.0)?;
    let grid = VolumeMethod::Grid { voxel_edge: 0.05 };
    let self_cap = intersection_volume(&sk, &sk, &grid, &s)?.value;
    Ok(intersection_volume(&a, &b, &VolumeMethod::Exact1d, &s)?.value == 1.0
        && intersection_volume(&far, &far2, &VolumeMethod::HitOrMiss { samples: 1000 }, &s)?.value == 0.0
        && self_cap == volume_grid(&sk, 0.05)?.value)
}

fn slices() -> Outcome {
    let p = unit(1, 1.0)?;
    let path = simulate_skeleton(&p, 1.0, 0.25, &mut RandomStream::new(7, 0))?;
    let all = slice(&path, 0.0, 1.0, 1.0)?;
    let last = slice(&path, 1.0, 1.0, 1.0)?;
    let head = slice(&path, 0.0, 0.5, 1.0)?;
    let tail = slice(&path, 0.5, 1.0, 1.0)?;
    let first = slice(&path, 0.0, 0.0, 1.0)?;
    let ball = volume_exact_1d(&first)?.value;
    let cap = intersection_volume(&first, &tail, &VolumeMethod::Exact1d, &RandomStream::new(0, 0))?.value;
    Ok(all.len() == 5
        && last.len() == 1
        && last.center(0) == path.point(4)
        && head.center(head.len() - 1) == tail.center(0)
        && cap <= ball)
}

fn small_config(method: VolumeMethod, dim: usize) -> Result<ExperimentConfig, Error> {
    Ok(ExperimentConfig {
        params: unit(dim, 1.5)?,
        t_checkpoints: vec![1.0, 2.0, 4.0],
        mesh: 0.05,
        replicas: 2,
        method,
        master_seed: 8,
        tail_factor: None,
        workers: None,
    })
}

fn determinism_and_monotonicity() -> Outcome {
    let cfg = small_config(VolumeMethod::Grid { voxel_edge: 0.1 }, 2)?;
    let a = run_volume_replicas(&cfg)?;
    let b = run_volume_replicas(&cfg)?;
    let monotone = a.records.iter().all(|r| r.volumes.windows(2).all(|w| w[0] <= w[1]));
    Ok(a.records == b.records && monotone)
}

fn statistics_degenerate_cases() -> Outcome {
    let p = unit(1, 0.6)?;
    let ctx = PotentialContext::new(p)?;
    let constant = ReplicaSet::from_volumes(p, vec![1.0, 2.0, 3.0], vec![vec![1.0, 2.0, 3.0]; 200])?;
    let single = ReplicaSet::from_volumes(p, vec![5.0], vec![vec![5.0], vec![6.0]])?;
    let clt = clt_experiment(&constant, &SigmaEstimate::known(1.0), &ctx, CltTolerances::default())?;
    let lln = lln_capacity_check(&single, &ctx, 0.1)?;
    let recurrent = ProcessParams::unit(1, 1.5)?;
    Ok(estimate_sigma(&constant)?.sigma2 == 0.0
        && clt.has_flag("degenerate")
        && fourth_moment_experiment(&constant)?.value("ratio_final") == Some(0.0)
        && lln.check("gap_growth").is_some_and(|c| c.passed)
        && PotentialContext::new(recurrent).is_err())
}

fn moment_identity() -> Outcome {
    let r = intersection_moment_experiment(&MomentConfig {
        params: unit(1, 0.6)?,
        t: 2.0,
        t_tail: 4.0,
        pairs: 20,
        mesh: 0.05,
        method: VolumeMethod::Exact1d,
        master_seed: 9,
        k: 1,
        workers: None,
    })?;
    Ok(r.value("ratio").is_some_and(|v| close(v, 1.0, 1e-12)))
}

fn ks_identities() -> Outcome {
    let xs = [0.3, 1.2, -0.7, 2.2];
    let own = |x: f64| xs.iter().filter(|&&v| v <= x).count() as f64 / xs.len() as f64;
    Ok(
        two_sample_ks(&xs, &xs)? == 0.0 && ks_statistic(&[0.0], normal_cdf)? == 0.5 && {
            // a sample against its own empirical CDF: the right-continuous gap is zero
            let d = ks_statistic(&xs, own)?;
            d <= 1.0 / xs.len() as f64
        },
    )
}

fn lil_sequence() -> Outcome {
    Ok(lil_checkpoint_sequence(1)? == [0, 2, 3] && lil_checkpoint_sequence(2)? == [0, 2, 3, 4, 5, 6, 7, 8])
}

fn one_dimensional_consensus() -> Outcome {
    let p = unit(1, 0.8)?;
    for seed in 0..5 {
        let path = simulate_skeleton(&p, 10.0, 0.05, &mut RandomStream::new(seed, 10))?;
        let sk = slice(&path, 0.0, 10.0, 1.0)?;
        let exact = volume_exact_1d(&sk)?.value;
        let comps = merged_intervals(&sk)?.len() as f64;
        let grid = volume_grid(&sk, 0.01)?.value;
        let hm = volume_hit_or_miss(&sk, 20_000, &RandomStream::new(seed, 11))?;
        if !close(grid, exact, 0.02 * comps) || !close(hm.value, exact, 3.0 * hm.stat_error + 1e-12) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn report_schemas() -> Outcome {
    let p = unit(1, 0.6)?;
    let ctx = PotentialContext::new(p)?;
    let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
    let set = ReplicaSet::from_volumes(p, vec![1.0], rows)?;
    let r = clt_experiment(&set, &SigmaEstimate::known(1.0), &ctx, CltTolerances::default())?;
    let csv = csv_string(&r);
    let cfg = RunConfig::from_text("command = lln\ndim = 1\n").map_err(|e| Error::Domain(e.to_string()))?;
    let again = RunConfig::from_text(&cfg.to_text()).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(csv.starts_with("replica_id,t,volume,centered,standardized\n") && csv.lines().count() == 11 && again == cfg)
}

type Check = (&'static str, fn() -> Outcome);

/// Runs every check and returns one line per check and the failure count.
pub fn run() -> (Vec<String>, usize) {
    let checks: [Check; 19] = [
        ("subordinator laplace transform", laplace),
        ("gaussian coordinate variance", gaussian_variance),
        ("time grids and subsampling", grids_and_subsampling),
        ("characteristic function identities", char_function),
        ("capacity, green, phi and h", potentials),
        ("lil normalizers", normalizers),
        ("spatial index", spatial_index),
        ("interval merge", intervals),
        ("single ball volumes", single_balls),
        ("intersections", intersections),
        ("slices", slices),
        ("replica determinism and monotonicity", determinism_and_monotonicity),
        ("degenerate statistics", statistics_degenerate_cases),
        ("first moment ratio", moment_identity),
        ("ks identities", ks_identities),
        ("lil checkpoint sequence", lil_sequence),
        ("one-dimensional estimator consensus", one_dimensional_consensus),
        ("report schema and config round trip", report_schemas),
        ("three-dimensional estimator consensus", three_dimensional_consensus),
    ];
    let mut failures = 0;
    let lines = checks
        .iter()
        .map(|(name, f)| match f() {
            Ok(true) => format!("ok   {name}"),
            Ok(false) => {
                failures += 1;
                format!("FAIL {name}")
            }
            Err(e) => {
                failures += 1;
                format!("FAIL {name}: {e}")
            }
        })
        .collect();
    (lines, failures)
}

fn three_dimensional_consensus() -> Outcome {
    let p = unit(3, 1.5)?;
    let path = simulate_skeleton(&p, 2.0, 0.1, &mut RandomStream::new(12, 0))?;
    let sk = slice(&path, 0.0, 2.0, 1.0)?;
    let grid = volume_grid(&sk, 0.05)?.value;
    let hm = volume_hit_or_miss(&sk, 200_000, &RandomStream::new(12, 1))?;
    Ok(close(grid, hm.value, 3.0 * hm.stat_error + 0.02 * grid))
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_pass() {
        let (lines, failures) = super::run();
        assert_eq!(failures, 0, "{lines:#?}");
    }
}
