//! Compensated sums, binomial intervals and the Monte Carlo estimator record.

use serde::Serialize;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut s = CompensatedSum::new();
    for v in values {
        s.add(v);
    }
    s.value()
}

/// Sample mean and standard error of the mean (zero for fewer than two values).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Point estimate over non-censored paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorResult {
    pub mean: f64,
    pub std_error: f64,
    pub n_effective: usize,
    pub censored_count: usize,
    pub ci95: (f64, f64),
    /// Bound on the bias from dropping censored paths.
    pub censoring_bias_bound: f64,
}

impl EstimatorResult {
    pub fn from_values(values: &[f64], censored_count: usize, censoring_bias_bound: f64) -> Self {
        let (mean, std_error) = mean_and_se(values);
        Self {
            mean,
            std_error,
            n_effective: values.len(),
            censored_count,
            ci95: (mean - Z95 * std_error, mean + Z95 * std_error),
            censoring_bias_bound,
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci95.1 - self.ci95.0)
    }
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn compensated_sum_beats_naive() {
        let mut vals = vec![1.0];
        vals.extend(std::iter::repeat(1e-16).take(10_000));
        assert_eq!(compensated_sum(vals.iter().copied()), 1.0 + 1e-12);
    }

    #[test]
    fn wilson_known_values() {
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
        let (lo, hi) = wilson_interval(0, 10, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.35);
    }

    #[test]
    fn constant_values_have_zero_error() {
        let r = EstimatorResult::from_values(&[7.0; 50], 0, 0.0);
        assert_eq!(r.mean, 7.0);
        assert_eq!(r.std_error, 0.0);
        assert_eq!(r.ci95, (7.0, 7.0));
    }

    proptest! {
        #[test]
        fn wilson_contains_proportion(n in 1usize..5000, frac in 0.0f64..=1.0) {
            let k = ((n as f64) * frac).floor() as usize;
            let (lo, hi) = wilson_interval(k, n, Z95);
            let p = k as f64 / n as f64;
            prop_assert!(lo <= p + 1e-12 && p <= hi + 1e-12);
        }

        #[test]
        fn sum_is_order_insensitive(mut v in prop::collection::vec(-1e6f64..1e6, 1..200)) {
            let a = compensated_sum(v.iter().copied());
            v.reverse();
            let b = compensated_sum(v.iter().copied());
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }
}
