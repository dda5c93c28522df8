//! Distributional checks of the increment sampler against the target law
//! `E exp(i(ξ, X_t)) = exp(-t |ξ|^α)`.

use sausage_core::process::{
    empirical_char_function, sample_increment, sample_increment_into, sample_subordinator_increment, simulate_skeleton,
};
use sausage_core::stats::{correlation, ks2_critical_1pct, mean, two_sample_ks, variance};
use sausage_core::{ProcessParams, RandomStream};

const N: usize = 1_000_000;

fn laplace_mean(rho: f64, dt: f64, lambda: f64, seed: u64) -> (f64, f64) {
    let mut s = RandomStream::new(seed, 0);
    let xs: Vec<f64> = (0..N)
        .map(|_| (-lambda * sample_subordinator_increment(rho, dt, &mut s).unwrap()).exp())
        .collect();
    (mean(&xs), (variance(&xs) / N as f64).sqrt())
}

#[test]
fn subordinator_laplace_transform() {
    let cases = [
        (0.5, 1.0, 1.0, (-1.0f64).exp()),
        (0.5, 4.0, 1.0, (-4.0f64).exp()),
        // exp(-0.5^0.9), evaluated in 30-digit arithmetic
        (0.9, 1.0, 0.5, 0.585_150_189_058_025_5),
    ];
    for (i, (rho, dt, lambda, target)) in cases.into_iter().enumerate() {
        let (m, se) = laplace_mean(rho, dt, lambda, 100 + i as u64);
        assert!(
            (m - target).abs() <= 3.0 * se,
            "rho={rho} dt={dt}: {m} vs {target} (se {se})"
        );
    }
}

fn draws<const D: usize>(params: &ProcessParams, dt: f64, n: usize, seed: u64) -> Vec<[f64; D]> {
    let mut s = RandomStream::new(seed, 1);
    (0..n)
        .map(|_| {
            let mut x = [0.0; D];
            sample_increment_into(params, dt, &mut s, &mut x).unwrap();
            x
        })
        .collect()
}

#[test]
fn gaussian_branch_variance() {
    let p = ProcessParams::unit(1, 2.0).unwrap();
    let xs: Vec<f64> = draws::<1>(&p, 1.0, N, 5).iter().map(|x| x[0]).collect();
    let v = variance(&xs);
    // Var of the sample variance for a normal with variance 2 is 2·2²/(n-1).
    let se = (8.0 / (N as f64 - 1.0)).sqrt();
    assert!((v - 2.0).abs() <= 3.0 * se, "{v}");
}

#[test]
fn char_function_examples() {
    let p = ProcessParams::unit(3, 1.5).unwrap();
    let xs = draws::<3>(&p, 1.0, N, 6);
    let xi = [1.0 / 3f64.sqrt(); 3];
    let e = empirical_char_function(&xs, &xi).unwrap();
    assert!((e.re - (-1.0f64).exp()).abs() <= 3.0 * e.stderr, "{e:?}");

    let p = ProcessParams::unit(2, 1.0).unwrap();
    let xs = draws::<2>(&p, 2.0, N, 7);
    let e = empirical_char_function(&xs, &[0.3, 0.4]).unwrap();
    assert!((e.re - (-1.0f64).exp()).abs() <= 3.0 * e.stderr, "{e:?}");
    assert!(e.im.abs() <= 3.0 * e.stderr);

    let p = ProcessParams::unit(2, 1.2).unwrap();
    let xs = draws::<2>(&p, 1.0, N, 8);
    let e = empirical_char_function(&xs, &[0.6, 0.8]).unwrap();
    assert!((e.modulus() - (-1.0f64).exp()).abs() <= 3.0 * e.stderr, "{e:?}");
}

fn norms(params: &ProcessParams, t: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut s = RandomStream::new(seed, 2);
    (0..n)
        .map(|_| {
            let x = sample_increment(params, t, &mut s).unwrap();
            x.iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .collect()
}

#[test]
fn self_similarity_of_norms() {
    let p = ProcessParams::unit(3, 1.5).unwrap();
    let n = 100_000;
    let at_two = norms(&p, 2.0, n, 9);
    let scaled: Vec<f64> = norms(&p, 1.0, n, 10).iter().map(|r| 2f64.powf(1.0 / 1.5) * r).collect();
    let d = two_sample_ks(&at_two, &scaled).unwrap();
    assert!(d < ks2_critical_1pct(n, n), "{d}");
}

#[test]
fn skeleton_endpoint_scales() {
    // X at the end of a 100-step skeleton over [0, 1] has the law of X_1.
    let p = ProcessParams::unit(2, 1.2).unwrap();
    let n = 20_000;
    let mut s = RandomStream::new(11, 0);
    let ends: Vec<f64> = (0..n)
        .map(|_| {
            let sk = simulate_skeleton(&p, 1.0, 0.01, &mut s).unwrap();
            let e = sk.point(sk.len() - 1);
            e.iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .collect();
    let direct = norms(&p, 1.0, n, 12);
    assert!(two_sample_ks(&ends, &direct).unwrap() < ks2_critical_1pct(n, n));
}

#[test]
fn rotated_projection_has_same_law() {
    let p = ProcessParams::unit(3, 1.5).unwrap();
    let n = 100_000;
    let first: Vec<f64> = draws::<3>(&p, 1.0, n, 13).iter().map(|x| x[0]).collect();
    // (R x)_1 for a fixed rotation R with first row (2, -1, 2)/3
    let rotated: Vec<f64> = draws::<3>(&p, 1.0, n, 14)
        .iter()
        .map(|x| (2.0 * x[0] - x[1] + 2.0 * x[2]) / 3.0)
        .collect();
    assert!(two_sample_ks(&first, &rotated).unwrap() < ks2_critical_1pct(n, n));
}

#[test]
fn disjoint_increments_are_uncorrelated() {
    let p = ProcessParams::unit(2, 1.2).unwrap();
    let n = 200_000;
    let mut s = RandomStream::new(15, 0);
    let (mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let sk = simulate_skeleton(&p, 1.0, 0.5, &mut s).unwrap();
        // bounded transform; the increments themselves have infinite variance
        a.push(sk.point(1)[0].tanh());
        b.push((sk.point(2)[0] - sk.point(1)[0]).tanh());
    }
    assert!(correlation(&a, &b).abs() <= 3.0 / (n as f64).sqrt());
}
