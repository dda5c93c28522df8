//! End-to-end runs of the replicated experiments at small sizes.

use sausage_core::experiments::lil_paths_experiment;
use sausage_core::experiments::{
    clt_experiment, estimate_sigma, gap_bound_check, intersection_process_experiment, lil_checkpoint_sequence,
    lln_capacity_check, run_volume_replicas, CltTolerances, ExperimentConfig, IntersectionProcessConfig, LilConfig,
    ReplicaSet, SigmaEstimate,
};
use sausage_core::geometry::VolumeMethod;
use sausage_core::potential::process_capacity;
use sausage_core::{Error, PotentialContext, ProcessParams};

fn replicas(alpha: f64, checkpoints: Vec<f64>, replicas: usize, tail: Option<f64>, seed: u64) -> ReplicaSet {
    run_volume_replicas(&ExperimentConfig {
        params: ProcessParams::unit(1, alpha).unwrap(),
        t_checkpoints: checkpoints,
        mesh: 0.01,
        replicas,
        method: VolumeMethod::Exact1d,
        master_seed: seed,
        tail_factor: tail,
        workers: None,
    })
    .unwrap()
}

fn ctx(d: usize, alpha: f64) -> PotentialContext {
    PotentialContext::new(ProcessParams::unit(d, alpha).unwrap()).unwrap()
}

#[test]
fn volume_rate_approaches_capacity() {
    let set = replicas(0.6, vec![50.0, 100.0, 200.0], 200, None, 1);
    let r = lln_capacity_check(&set, &ctx(1, 0.6), 0.1).unwrap();
    assert!(r.passed(), "{:?}", r.checks);
    let cap = process_capacity(1, 0.6).unwrap();
    assert_eq!(r.value("capacity"), Some(cap));
}

#[test]
fn tail_intersection_is_bounded_when_h_is_constant() {
    // d/α = 2.5: h ≡ 1 and the mean intersection stays bounded
    let set = replicas(0.4, vec![10.0, 20.0, 40.0], 300, Some(4.0), 2);
    let r = gap_bound_check(&set, &ctx(1, 0.4)).unwrap();
    assert!(r.passed(), "{:?}", r.checks);
    assert!(r.check("slope_deviation").is_none());
}

#[test]
fn tail_intersection_grows_at_the_predicted_rate() {
    // d/α = 5/3: the intersection grows like t^{1/3}
    let set = replicas(0.6, vec![10.0, 20.0, 40.0, 80.0], 300, Some(4.0), 3);
    let r = gap_bound_check(&set, &ctx(1, 0.6)).unwrap();
    assert!(r.passed(), "{:?}", r.checks);
    let slope = r.value("loglog_slope").unwrap();
    assert!((slope - 1.0 / 3.0).abs() <= 0.25, "{slope}");
}

#[test]
fn sigma_then_clt() {
    let set = replicas(0.6, vec![25.0, 50.0, 100.0], 300, None, 4);
    let sigma = estimate_sigma(&set).unwrap();
    assert!(sigma.sigma2 > 0.0 && sigma.half_width < sigma.sigma2, "{sigma:?}");
    assert!(sigma.envelope_constant.is_some());
    let r = clt_experiment(&set, &sigma, &ctx(1, 0.6), CltTolerances::default()).unwrap();
    assert!(r.passed(), "{:?}", r.checks);
    assert_eq!(r.table.rows.len(), set.ok_count());
}

#[test]
fn clt_rejects_the_boundary_regime() {
    let set = ReplicaSet::from_volumes(ProcessParams::unit(3, 2.0).unwrap(), vec![1.0], vec![vec![1.0]; 10]).unwrap();
    let e = clt_experiment(&set, &SigmaEstimate::known(1.0), &ctx(3, 2.0), CltTolerances::default()).unwrap_err();
    assert!(matches!(e, Error::Regime(_)), "{e}");
}

#[test]
fn intersection_process_identity_on_paths() {
    let r = intersection_process_experiment(&IntersectionProcessConfig {
        params: ProcessParams::unit(1, 0.6).unwrap(),
        k_max: 9,
        mesh: 0.01,
        method: VolumeMethod::Exact1d,
        paths: 20,
        master_seed: 5,
        workers: None,
    })
    .unwrap();
    assert!(r.passed(), "{:?}", r.checks);
}

#[test]
fn lil_paths_stay_in_the_envelope() {
    let seq = lil_checkpoint_sequence(10).unwrap();
    assert_eq!(seq[0], 0);
    assert!(seq.windows(2).all(|w| w[0] < w[1]));
    let r = lil_paths_experiment(&LilConfig {
        params: ProcessParams::unit(1, 0.5).unwrap(),
        sigma2: 1.0,
        k_max: 10,
        mesh: 0.01,
        method: VolumeMethod::Exact1d,
        paths: 8,
        master_seed: 6,
        workers: None,
    })
    .unwrap();
    let fraction = r.value("envelope_fraction").unwrap();
    assert!((0.0..=1.0).contains(&fraction));
    assert!(r.value("khintchine_max").unwrap().is_finite());
}

#[test]
fn lil_rejects_small_ratio() {
    let e = lil_paths_experiment(&LilConfig {
        params: ProcessParams::unit(1, 0.6).unwrap(),
        sigma2: 1.0,
        k_max: 10,
        mesh: 0.01,
        method: VolumeMethod::Exact1d,
        paths: 1,
        master_seed: 6,
        workers: None,
    })
    .unwrap_err();
    assert!(matches!(e, Error::Regime(_)), "{e}");
}
