//! Sample statistics shared by the simulation and estimation layers:
//! Kolmogorov–Smirnov distances and basic moments.

use thiserror::Error;

use crate::{ClassifyError, FailureKind};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFiniteSample,
}

impl ClassifyError for StatsError {
    fn failure_kind(&self) -> FailureKind {
        FailureKind::Validation
    }
}

fn checked_sorted(sample: &[f64]) -> Result<Vec<f64>, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFiniteSample);
    }
    let mut s = sample.to_vec();
    s.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(s)
}

/// Two-sample Kolmogorov–Smirnov distance: the sup of the gap between the two
/// empirical CDFs, taken over a merged sweep of both samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let a = checked_sorted(a)?;
    let b = checked_sorted(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
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
    Ok(d)
}

/// One-sample Kolmogorov–Smirnov distance between a sample and a reference
/// CDF given as a callable.
pub fn ks_against_cdf<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64, StatsError> {
    let s = checked_sorted(sample)?;
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    Ok(d)
}

pub fn mean(sample: &[f64]) -> Result<f64, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    Ok(sample.iter().sum::<f64>() / sample.len() as f64)
}

/// Unbiased (n−1) sample variance.
pub fn sample_variance(sample: &[f64]) -> Result<f64, StatsError> {
    if sample.len() < 2 {
        return Err(StatsError::EmptySample);
    }
    let m = mean(sample)?;
    let ss: f64 = sample.iter().map(|v| (v - m) * (v - m)).sum();
    Ok(ss / (sample.len() - 1) as f64)
}

/// Sample autocorrelations at lags 1..=max_lag, with the usual biased
/// (divide-by-n) autocovariance normalization.
pub fn autocorrelations(x: &[f64], max_lag: usize) -> Result<Vec<f64>, StatsError> {
    if x.len() < max_lag + 2 {
        return Err(StatsError::EmptySample);
    }
    let n = x.len();
    let m = mean(x)?;
    let c0: f64 = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return Err(StatsError::NonFiniteSample);
    }
    let mut acf = Vec::with_capacity(max_lag);
    for k in 1..=max_lag {
        let ck: f64 = (k..n).map(|t| (x[t] - m) * (x[t - k] - m)).sum::<f64>() / n as f64;
        acf.push(ck / c0);
    }
    Ok(acf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_identical_samples_is_zero() {
        let a = [0.1, 0.4, 0.4, 0.9];
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn ks_of_disjoint_samples_is_one() {
        let a = [0.0, 1.0, 2.0];
        let b = [5.0, 6.0];
        assert_eq!(ks_two_sample(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn ks_handles_unequal_sizes_and_ties() {
        // ECDFs: F_a jumps 1/2 at 0 and 1; F_b jumps 1/3 at 0, 1, 2.
        // Largest gap is 2/3 - 1/2 at x = 1... check against hand value 1/3 at x in [1,2).
        let a = [0.0, 1.0];
        let b = [0.0, 1.0, 2.0];
        let d = ks_two_sample(&a, &b).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ks_against_cdf_detects_exact_grid() {
        // Sample at uniform quantile midpoints: distance is 1/(2n).
        let n = 10;
        let sample: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_against_cdf(&sample, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((d - 0.05).abs() < 1e-12);
    }

    #[test]
    fn empty_and_non_finite_samples_are_rejected() {
        assert!(matches!(ks_two_sample(&[], &[1.0]), Err(StatsError::EmptySample)));
        assert!(matches!(
            ks_two_sample(&[f64::NAN], &[1.0]),
            Err(StatsError::NonFiniteSample)
        ));
    }

    #[test]
    fn moments_match_hand_values() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&x).unwrap(), 2.5);
        assert!((sample_variance(&x).unwrap() - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn autocorrelation_of_alternating_series_is_negative_at_lag_one() {
        let x: Vec<f64> = (0..64).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let acf = autocorrelations(&x, 2).unwrap();
        assert!(acf[0] < -0.9);
        assert!(acf[1] > 0.9);
    }
}
