//! Small statistics helpers shared by the Monte Carlo harnesses.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for a binomial proportion.
///
/// Returns `(low, high)`. With `trials == 0` the interval is `(0, 1)`.
pub fn wilson_interval(failures: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = failures as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if failures == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if failures == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Pool-adjacent-violators fit: the weighted least-squares non-decreasing
/// sequence closest to `values`.
pub fn isotonic_non_decreasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // (mean, weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w.max(f64::MIN_POSITIVE), 1));
        while blocks.len() > 1 {
            let (m2, w2, c2) = blocks[blocks.len() - 1];
            let (m1, w1, c1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().unwrap();
            *last = ((m1 * w1 + m2 * w2) / (w1 + w2), w1 + w2, c1 + c2);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, _, c)| std::iter::repeat(m).take(c))
        .collect()
}

/// Sample mean and the half-width of its normal-approximation 95% interval.
pub fn mean_ci95(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Z95 * (var / n as f64).sqrt())
}

/// Upper-tail standard normal quantile: returns `z` with `P(Z > z) = tail`.
pub fn normal_upper_quantile(tail: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    -n.inverse_cdf(tail)
}

/// Jarque–Bera normality test. Returns `(statistic, p_value)` using the
/// asymptotic χ²(2) law.
pub fn jarque_bera(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2);
    let jb = n / 6.0 * (skew * skew + 0.25 * (kurt - 3.0).powi(2));
    let chi2 = ChiSquared::new(2.0).expect("two degrees of freedom");
    (jb, 1.0 - chi2.cdf(jb))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_matches_reference_values() {
        // 10 failures out of 100, z = 1.96: (0.0552, 0.1744)
        let (lo, hi) = wilson_interval(10, 100, Z95);
        assert!((lo - 0.05523).abs() < 1e-4, "{lo}");
        assert!((hi - 0.17437).abs() < 1e-4, "{hi}");
        let (lo, hi) = wilson_interval(0, 500, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.01);
    }

    #[test]
    fn pava_pools_violators() {
        let fit = isotonic_non_decreasing(&[0.1, 0.3, 0.2, 0.5], &[1.0; 4]);
        assert_eq!(fit, vec![0.1, 0.25, 0.25, 0.5]);
        let fit = isotonic_non_decreasing(&[0.4, 0.1], &[3.0, 1.0]);
        assert!((fit[0] - 0.325).abs() < 1e-12 && fit[0] == fit[1]);
    }

    #[test]
    fn jarque_bera_separates_normal_from_uniform() {
        use rand::Rng;
        use rand_distr::StandardNormal;
        let mut rng = crate::rng::sim_rng(5);
        let normal: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        assert!(jarque_bera(&normal).1 > 0.001);
        let uniform: Vec<f64> = (0..100_000).map(|_| rng.gen::<f64>()).collect();
        assert!(jarque_bera(&uniform).1 < 1e-6);
    }

    #[test]
    fn normal_quantile_tail() {
        assert!((normal_upper_quantile(0.025) - Z95).abs() < 1e-9);
        // two-sided 1e-10
        let z = normal_upper_quantile(0.5e-10);
        assert!((z - 6.466_951).abs() < 1e-5, "{z}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn series() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
            (1usize..30).prop_flat_map(|n| {
                (
                    proptest::collection::vec(0.0f64..1.0, n),
                    proptest::collection::vec(0.1f64..10.0, n),
                )
            })
        }

        proptest! {
            #[test]
            fn isotonic_is_monotone_and_keeps_the_weighted_mean((v, w) in series()) {
                let fit = isotonic_non_decreasing(&v, &w);
                prop_assert_eq!(fit.len(), v.len());
                prop_assert!(fit.windows(2).all(|p| p[0] <= p[1] + 1e-12));
                let a: f64 = v.iter().zip(&w).map(|(x, w)| x * w).sum();
                let b: f64 = fit.iter().zip(&w).map(|(x, w)| x * w).sum();
                prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
            }

            #[test]
            fn isotonic_leaves_sorted_input_alone((mut v, w) in series()) {
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let fit = isotonic_non_decreasing(&v, &w);
                for (x, y) in v.iter().zip(&fit) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }
}
