//! Goodness-of-fit statistics and small regression helpers.

use crate::math::{kolmogorov_critical, kolmogorov_survival};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
#[allow(unused_imports)]
use num_traits::Float;

pub fn sort_floats(xs: &mut [f64]) {
    xs.sort_unstable_by(f64::total_cmp);
}

/// One-sample two-sided KS statistic. Sorts `xs` in place.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &mut [f64], cdf: F) -> f64 {
    sort_floats(xs);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |acc, (i, &x)| {
        let f = cdf(x);
        let lo = f - i as f64 / n;
        let hi = (i + 1) as f64 / n - f;
        acc.max(lo).max(hi)
    })
}

/// Two-sample KS statistic `sup |F_a - F_b|` for sorted inputs.
pub fn ks_two_sample_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
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
    d
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    sort_floats(&mut a);
    sort_floats(&mut b);
    ks_two_sample_sorted(&a, &b)
}

fn effective_size(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    n * m / (n + m)
}

/// Asymptotic critical value of the two-sample KS statistic at level `alpha`.
pub fn ks_critical_value(n: usize, m: usize, alpha: f64) -> f64 {
    kolmogorov_critical(alpha) / effective_size(n, m).sqrt()
}

/// Asymptotic p-value of a two-sample KS statistic.
pub fn ks_p_value(d: f64, n: usize, m: usize) -> f64 {
    kolmogorov_survival(d * effective_size(n, m).sqrt())
}

/// Outcome of a two-sample KS test at a fixed significance level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub n: usize,
    pub m: usize,
    pub pass: bool,
}

impl KsTest {
    pub fn from_samples(a: &[f64], b: &[f64], alpha: f64) -> Self {
        let statistic = ks_two_sample(a, b);
        Self::from_statistic(statistic, a.len(), b.len(), alpha)
    }

    pub fn from_statistic(statistic: f64, n: usize, m: usize, alpha: f64) -> Self {
        let critical_value = ks_critical_value(n, m, alpha);
        Self {
            statistic,
            critical_value,
            p_value: ks_p_value(statistic, n, m),
            alpha,
            n,
            m,
            pass: statistic < critical_value,
        }
    }
}

/// Wasserstein-1 distance between two empirical laws, `∫ |F_a - F_b| dx`.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    sort_floats(&mut a);
    sort_floats(&mut b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut all: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    sort_floats(&mut all);
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    for w in all.windows(2) {
        while i < a.len() && a[i] <= w[0] {
            i += 1;
        }
        while j < b.len() && b[j] <= w[0] {
            j += 1;
        }
        acc += (i as f64 / na - j as f64 / nb).abs() * (w[1] - w[0]);
    }
    acc
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = (h.floor() as usize).min(n - 2);
    let t = h - i as f64;
    sorted[i] + t * (sorted[i + 1] - sorted[i])
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Ordinary least squares `y = intercept + slope x`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RngStream;
    use alloc::vec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    /// Brute-force oracle: evaluate both ECDFs at every data point.
    fn ks_brute(a: &[f64], b: &[f64]) -> f64 {
        let ecdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
        a.iter()
            .chain(b)
            .map(|&x| (ecdf(a, x) - ecdf(b, x)).abs())
            .fold(0.0, f64::max)
    }

    proptest! {
        #[test]
        fn two_sample_ks_matches_brute_force(
            a in proptest::collection::vec(-5i32..5, 1..40),
            b in proptest::collection::vec(-5i32..5, 1..40),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            prop_assert!((ks_two_sample(&a, &b) - ks_brute(&a, &b)).abs() < 1e-12);
        }

        #[test]
        fn wasserstein_of_shift_is_shift(
            a in proptest::collection::vec(-10.0f64..10.0, 1..50),
            s in -3.0f64..3.0,
        ) {
            let b: Vec<f64> = a.iter().map(|x| x + s).collect();
            prop_assert!((wasserstein1(&a, &b) - s.abs()).abs() < 1e-9);
        }
    }

    #[test]
    fn ks_identical_samples_is_zero() {
        let a = vec![1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&a, &[10.0, 11.0]), 1.0);
    }

    #[test]
    fn ks_null_rejection_rate_is_near_alpha() {
        let stream = RngStream::new(99, 0);
        let mut rejections = 0;
        for r in 0..400 {
            let mut rng = stream.substream(r).rng();
            let a: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..700).map(|_| rng.random::<f64>()).collect();
            if !KsTest::from_samples(&a, &b, 0.05).pass {
                rejections += 1;
            }
        }
        // Binomial(400, 0.05): mean 20, sd 4.4
        assert!((5..=35).contains(&rejections), "{rejections}");
    }

    #[test]
    fn ols_recovers_exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let (a, b) = ols(&x, &y);
        assert_relative_eq!(a, 3.0, epsilon = 1e-12);
        assert_relative_eq!(b, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn quantiles_interpolate() {
        let s = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile_sorted(&s, 0.5), 1.5);
        assert_eq!(quantile_sorted(&s, 1.0), 3.0);
    }
}
