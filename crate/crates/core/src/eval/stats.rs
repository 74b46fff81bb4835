use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Values closer than this to the hypothesized median count as ties.
pub const TIE_EPSILON: f64 = 1e-9;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("at least two values are needed")]
    TooFew,
    #[error("every value equals the hypothesized median")]
    AllTies,
}

impl StatsError {
    pub fn key(&self) -> &'static str {
        match self {
            StatsError::TooFew => "stats.too-few",
            StatsError::AllTies => "stats.all-ties",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    /// Standard deviation with the n-1 denominator.
    pub sample_std: f64,
}

pub fn cohort_stats(values: &[f64]) -> Result<Stats, StatsError> {
    let n = values.len();
    if n < 2 {
        return Err(StatsError::TooFew);
    }
    // Welford update.
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for (i, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    Ok(Stats { n, mean, sample_std: (m2 / (n - 1) as f64).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTestResult {
    pub hypothesized_median: f64,
    pub n_below: usize,
    pub n_equal: usize,
    pub n_above: usize,
    /// One-sided: P(X >= n_above) for X ~ Binomial(n_below + n_above, 1/2).
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
}

/// Exact upper binomial tail P(X >= k) for X ~ Binomial(n, 1/2).
pub fn binomial_upper_tail_half(n: usize, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if n < 120 {
        let mut c: u128 = 1;
        let mut sum: u128 = 0;
        for i in 0..=n {
            if i >= k {
                sum += c;
            }
            // C(n, i+1) = C(n, i) * (n-i) / (i+1), exact in integers.
            c = c * (n - i) as u128 / (i + 1) as u128;
        }
        return sum as f64 / 2f64.powi(n as i32);
    }
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=n).scan(0.0, |acc, i| {
            *acc += (i as f64).ln();
            Some(*acc)
        }))
        .collect();
    let ln_half_n = n as f64 * 0.5f64.ln();
    (k..=n).map(|i| (ln_fact[n] - ln_fact[i] - ln_fact[n - i] + ln_half_n).exp()).sum::<f64>().min(1.0)
}

/// One-sided sign test of H0 "median = `median`" against "median > `median`".
pub fn sign_test(values: &[f64], median: f64, alpha: f64) -> Result<SignTestResult, StatsError> {
    let (mut below, mut equal, mut above) = (0, 0, 0);
    for &v in values {
        if (v - median).abs() < TIE_EPSILON {
            equal += 1;
        } else if v < median {
            below += 1;
        } else {
            above += 1;
        }
    }
    if below + above == 0 {
        return Err(StatsError::AllTies);
    }
    let p_value = binomial_upper_tail_half(below + above, above);
    Ok(SignTestResult {
        hypothesized_median: median,
        n_below: below,
        n_equal: equal,
        n_above: above,
        p_value,
        alpha,
        reject: p_value < alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{Binomial, DiscreteCDF};

    fn two_pass(values: &[f64]) -> (f64, f64) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (mean, (ss / (n - 1.0)).sqrt())
    }

    /// Counts subsets of size >= k by enumerating every outcome.
    fn enumerate_tail(n: usize, k: usize) -> f64 {
        let hits = (0u32..(1 << n)).filter(|m| m.count_ones() as usize >= k).count();
        hits as f64 / (1u64 << n) as f64
    }

    #[test]
    fn small_cases() {
        let s = cohort_stats(&[0.5, 0.5]).unwrap();
        assert_eq!((s.mean, s.sample_std), (0.5, 0.0));
        assert_eq!(cohort_stats(&[1.0]), Err(StatsError::TooFew));
        let r = sign_test(&[1.0, 1.0, 1.0], 0.0, DEFAULT_ALPHA).unwrap();
        assert_eq!(r.p_value, 0.125);
        assert_eq!(sign_test(&[0.5], 0.5, DEFAULT_ALPHA), Err(StatsError::AllTies));
    }

    #[test]
    fn tail_matches_enumeration() {
        for n in 0..=16 {
            for k in 0..=n + 1 {
                assert_eq!(binomial_upper_tail_half(n, k), enumerate_tail(n, k), "n={n} k={k}");
            }
        }
        assert_eq!(binomial_upper_tail_half(20, 15), 21700.0 / 1048576.0);
    }

    #[test]
    fn tail_matches_statrs_for_large_n() {
        for n in [50usize, 119, 120, 300, 1000] {
            let dist = Binomial::new(0.5, n as u64).unwrap();
            for k in [1, n / 3, n / 2, n / 2 + 7, n] {
                let expected = dist.sf(k as u64 - 1);
                let got = binomial_upper_tail_half(n, k);
                assert!((got - expected).abs() < 1e-9, "n={n} k={k} {got} vs {expected}");
            }
        }
    }

    proptest! {
        #[test]
        fn welford_matches_two_pass(values in prop::collection::vec(0.0f64..1.0, 2..100)) {
            let s = cohort_stats(&values).unwrap();
            let (m, sd) = two_pass(&values);
            prop_assert!((s.mean - m).abs() < 1e-12);
            prop_assert!((s.sample_std - sd).abs() < 1e-12);
        }

        #[test]
        fn sign_counts_partition(values in prop::collection::vec(0.0f64..1.0, 1..60), median in 0.0f64..1.0) {
            if let Ok(r) = sign_test(&values, median, DEFAULT_ALPHA) {
                prop_assert_eq!(r.n_below + r.n_equal + r.n_above, values.len());
                prop_assert!((0.0..=1.0).contains(&r.p_value));
            }
        }
    }
}
