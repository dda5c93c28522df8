//! Sample statistics and Kolmogorov–Smirnov distances.
//!
//! Sums run in slice order so that results depend only on the order of the
//! input, never on how it was produced.

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// `k`-th central moment with the 1/n convention.
pub fn central_moment(xs: &[f64], k: i32) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(k)).sum::<f64>() / xs.len() as f64
}

pub fn skewness(xs: &[f64]) -> f64 {
    let m2 = central_moment(xs, 2);
    central_moment(xs, 3) / m2.powf(1.5)
}

/// Raw (non-excess) kurtosis; 3 for a Gaussian.
pub fn kurtosis(xs: &[f64]) -> f64 {
    let m2 = central_moment(xs, 2);
    central_moment(xs, 4) / (m2 * m2)
}

pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    covariance(xs, ys) / (variance(xs) * variance(ys)).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// One-sample Kolmogorov–Smirnov distance `sup |F_n - F|`, taking both
/// one-sided gaps at every sorted sample point.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Empty("KS sample"));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("two-sample KS input"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic 1% critical value of the one-sample KS distance, `1.63/√n`.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Asymptotic 1% critical value of the two-sample KS distance.
pub fn ks2_critical_1pct(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.63 * ((n + m) / (n * m)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn moments_of_small_sample() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert_relative_eq!(variance(&xs), 5.0 / 3.0);
        assert_relative_eq!(skewness(&xs), 0.0);
        // m2 = 1.25, m4 = (2*5.0625 + 2*0.0625)/4 = 2.5625
        assert_relative_eq!(kurtosis(&xs), 2.5625 / 1.5625);
    }

    #[test]
    fn normal_cdf_values() {
        assert_relative_eq!(normal_cdf(0.0), 0.5);
        assert_relative_eq!(normal_cdf(1.959_963_984_540_054), 0.975, max_relative = 1e-12);
    }

    #[test]
    fn ks_quantile_sample() {
        // Points at the uniform quantiles i/(n+1): gaps are 1/(n+1) at every
        // step for n = 3.
        let s = [0.25, 0.5, 0.75];
        let d = ks_statistic(&s, |x| x.clamp(0.0, 1.0)).unwrap();
        assert_relative_eq!(d, 0.25, max_relative = 1e-15);
    }

    #[test]
    fn ks_single_point_at_median() {
        let d = ks_statistic(&[0.0], normal_cdf).unwrap();
        assert_relative_eq!(d, 0.5);
    }

    #[test]
    fn ks_against_own_ecdf() {
        let s = [3.0, 1.0, 2.0, 5.0];
        let mut sorted = s.to_vec();
        sorted.sort_by(f64::total_cmp);
        let ecdf = |x: f64| sorted.iter().filter(|&&v| v <= x).count() as f64 / 4.0;
        // F_n(x_i) = i/n, so only the left-limit gap 1/n survives.
        assert_relative_eq!(ks_statistic(&s, ecdf).unwrap(), 0.25);
        assert_eq!(two_sample_ks(&s, &s).unwrap(), 0.0);
    }

    #[test]
    fn empty_inputs() {
        assert!(ks_statistic(&[], normal_cdf).is_err());
        assert!(two_sample_ks(&[], &[1.0]).is_err());
    }

    #[test]
    fn critical_values() {
        assert_relative_eq!(ks_critical_1pct(500), 0.072_895, max_relative = 1e-4);
        assert_relative_eq!(ks2_critical_1pct(5000, 5000), 0.032_6, max_relative = 1e-3);
    }

    proptest! {
        #[test]
        fn two_sample_ks_symmetric_and_bounded(
            a in proptest::collection::vec(-10.0f64..10.0, 1..40),
            b in proptest::collection::vec(-10.0f64..10.0, 1..40),
        ) {
            let d1 = two_sample_ks(&a, &b).unwrap();
            let d2 = two_sample_ks(&b, &a).unwrap();
            prop_assert_eq!(d1, d2);
            prop_assert!((0.0..=1.0).contains(&d1));
        }

        #[test]
        fn ks_is_shift_invariant_in_distribution(
            xs in proptest::collection::vec(-5.0f64..5.0, 1..50),
            shift in -3.0f64..3.0,
        ) {
            let a = ks_statistic(&xs, normal_cdf).unwrap();
            let moved: Vec<f64> = xs.iter().map(|x| x + shift).collect();
            let b = ks_statistic(&moved, |x| normal_cdf(x - shift)).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
