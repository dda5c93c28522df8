//! The three volume estimators agree with each other, and volumes behave
//! like Lebesgue measure of a union of balls.

use sausage_core::experiments::{run_volume_replicas, ExperimentConfig};
use sausage_core::geometry::{
    components_1d, estimate_volume, intersection_volume, slice, volume_exact_1d, volume_grid, volume_hit_or_miss,
    VolumeMethod,
};
use sausage_core::process::{simulate_skeleton, subsample_skeleton};
use sausage_core::stats::correlation;
use sausage_core::{ProcessParams, RandomStream, SausageSkeleton};

fn random_1d(seed: u64) -> SausageSkeleton {
    let p = ProcessParams::unit(1, 0.8).unwrap();
    let path = simulate_skeleton(&p, 20.0, 0.05, &mut RandomStream::new(seed, 0)).unwrap();
    slice(&path, 0.0, 20.0, 1.0).unwrap()
}

#[test]
fn one_dimensional_methods_agree() {
    for seed in 0..50 {
        let sk = random_1d(seed);
        let exact = volume_exact_1d(&sk).unwrap().value;
        let edge = 0.01;
        let grid = volume_grid(&sk, edge).unwrap().value;
        let comps = components_1d(&sk).unwrap() as f64;
        assert!(
            (grid - exact).abs() <= 2.0 * edge * comps,
            "seed {seed}: grid {grid} exact {exact}"
        );
        let hm = volume_hit_or_miss(&sk, 20_000, &RandomStream::new(seed, 1)).unwrap();
        assert!(
            (hm.value - exact).abs() <= 3.0 * hm.stat_error + 1e-12,
            "seed {seed}: hit-or-miss {} ± {} exact {exact}",
            hm.value,
            hm.stat_error
        );
    }
}

#[test]
fn three_dimensional_grid_and_hit_or_miss_agree() {
    let p = ProcessParams::unit(3, 1.5).unwrap();
    for seed in 0..5 {
        let path = simulate_skeleton(&p, 5.0, 0.05, &mut RandomStream::new(seed, 0)).unwrap();
        let sk = slice(&path, 0.0, 5.0, 1.0).unwrap();
        let grid = volume_grid(&sk, 0.05).unwrap().value;
        let hm = volume_hit_or_miss(&sk, 200_000, &RandomStream::new(seed, 1)).unwrap();
        // grid error is a boundary effect of relative size about edge/r
        let tol = 3.0 * hm.stat_error + 0.02 * grid;
        assert!(
            (grid - hm.value).abs() <= tol,
            "seed {seed}: grid {grid} hit-or-miss {hm:?}"
        );
    }
}

#[test]
fn single_ball_volumes() {
    let sk = SausageSkeleton::from_points(&[[0.0, 0.0, 0.0]], 1.0).unwrap();
    let ball = 4.0 / 3.0 * std::f64::consts::PI;
    let grid = volume_grid(&sk, 0.02).unwrap().value;
    assert!((grid - ball).abs() < 0.01 * ball, "{grid}");
    let hm = volume_hit_or_miss(&sk, 400_000, &RandomStream::new(1, 1)).unwrap();
    assert!((hm.value - ball).abs() <= 3.0 * hm.stat_error, "{hm:?}");
}

#[test]
fn volume_is_translation_invariant() {
    let p = ProcessParams::unit(2, 1.2).unwrap();
    let path = simulate_skeleton(&p, 10.0, 0.05, &mut RandomStream::new(5, 0)).unwrap();
    let sk = slice(&path, 0.0, 10.0, 1.0).unwrap();
    // shift by whole voxels so the grids line up
    let moved = sk.translated(&[12.5, -7.25]).unwrap();
    let m = VolumeMethod::Grid { voxel_edge: 0.25 / 8.0 };
    let s = RandomStream::new(0, 0);
    assert_eq!(
        estimate_volume(&sk, &m, &s).unwrap().value,
        estimate_volume(&moved, &m, &s).unwrap().value
    );

    let line = random_1d(7);
    let shifted = line.translated(&[3.3]).unwrap();
    let (a, b) = (
        volume_exact_1d(&line).unwrap().value,
        volume_exact_1d(&shifted).unwrap().value,
    );
    assert!((a - b).abs() < 1e-9 * a);
}

#[test]
fn subsampled_path_covers_less() {
    let p = ProcessParams::unit(1, 1.3).unwrap();
    for seed in 0..20 {
        let path = simulate_skeleton(&p, 30.0, 0.01, &mut RandomStream::new(seed, 0)).unwrap();
        let coarse = subsample_skeleton(&path, 10).unwrap();
        let fine = volume_exact_1d(&slice(&path, 0.0, 30.0, 1.0).unwrap()).unwrap().value;
        let thin = volume_exact_1d(&slice(&coarse, 0.0, 30.0, 1.0).unwrap()).unwrap().value;
        assert!(thin <= fine + 1e-12, "seed {seed}: {thin} > {fine}");
    }
}

#[test]
fn inclusion_exclusion() {
    let p = ProcessParams::unit(1, 0.9).unwrap();
    for seed in 0..30 {
        let path = simulate_skeleton(&p, 40.0, 0.02, &mut RandomStream::new(seed, 0)).unwrap();
        let whole = slice(&path, 0.0, 40.0, 1.0).unwrap();
        let head = slice(&path, 0.0, 15.0, 1.0).unwrap();
        let tail = slice(&path, 15.0, 40.0, 1.0).unwrap();
        let s = RandomStream::new(0, 0);
        let v = |sk: &SausageSkeleton| volume_exact_1d(sk).unwrap().value;
        let both = intersection_volume(&head, &tail, &VolumeMethod::Exact1d, &s)
            .unwrap()
            .value;
        assert!(
            (v(&whole) - (v(&head) + v(&tail) - both)).abs() < 1e-9 * v(&whole),
            "seed {seed}"
        );
    }

    let p = ProcessParams::unit(2, 1.5).unwrap();
    let path = simulate_skeleton(&p, 10.0, 0.05, &mut RandomStream::new(3, 0)).unwrap();
    let (whole, head, tail) = (
        slice(&path, 0.0, 10.0, 1.0).unwrap(),
        slice(&path, 0.0, 4.0, 1.0).unwrap(),
        slice(&path, 4.0, 10.0, 1.0).unwrap(),
    );
    let m = VolumeMethod::Grid { voxel_edge: 0.05 };
    let s = RandomStream::new(0, 0);
    let v = |sk: &SausageSkeleton| estimate_volume(sk, &m, &s).unwrap().value;
    let both = intersection_volume(&head, &tail, &m, &s).unwrap().value;
    // the grid counts the same voxel centres on both sides
    assert!((v(&whole) - (v(&head) + v(&tail) - both)).abs() < 1e-9 * v(&whole));
}

fn config(workers: usize, method: VolumeMethod, dim: usize) -> ExperimentConfig {
    ExperimentConfig {
        params: ProcessParams::unit(dim, 1.5).unwrap(),
        t_checkpoints: vec![2.0, 4.0],
        mesh: 0.05,
        replicas: 24,
        method,
        master_seed: 77,
        tail_factor: Some(1.0),
        workers: Some(workers),
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    for (method, dim) in [
        (VolumeMethod::Exact1d, 1),
        (VolumeMethod::Grid { voxel_edge: 0.1 }, 2),
        (VolumeMethod::HitOrMiss { samples: 2000 }, 3),
    ] {
        let one = run_volume_replicas(&config(1, method, dim)).unwrap();
        let many = run_volume_replicas(&config(8, method, dim)).unwrap();
        assert_eq!(one.records, many.records, "{method:?}");
    }
}

#[test]
fn replicas_are_uncorrelated() {
    let cfg = ExperimentConfig {
        params: ProcessParams::unit(1, 0.6).unwrap(),
        t_checkpoints: vec![5.0],
        mesh: 0.01,
        replicas: 4000,
        method: VolumeMethod::Exact1d,
        master_seed: 12,
        tail_factor: None,
        workers: None,
    };
    let v = run_volume_replicas(&cfg).unwrap().column(0);
    let n = v.len() / 2;
    let r = correlation(&v[..n], &v[n..]);
    assert!(r.abs() <= 3.0 / (n as f64).sqrt(), "{r}");
}
