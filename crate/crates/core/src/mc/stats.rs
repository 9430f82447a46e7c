//! Sample statistics of margin estimates.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::StatsError;

/// Two-sided normal quantile for `confidence`, rounded to four decimals as
/// in printed tables (1.6449 at 90%).
pub fn z_value(confidence: f64) -> Result<f64, StatsError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::BadConfidence(confidence));
    }
    let z = Normal::standard().inverse_cdf((1.0 + confidence) / 2.0);
    Ok((z * 1e4).round() / 1e4)
}

/// Half-width `d = z √(var / n)` of the normal-approximation interval.
pub fn ci_half_width(variance: f64, n: usize, confidence: f64) -> Result<f64, StatsError> {
    Ok(z_value(confidence)? * (variance / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Statistics {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub confidence: f64,
    pub z: f64,
    pub d: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

/// Mean, unbiased variance, confidence interval and median of `values`.
pub fn describe(values: &[f64], confidence: f64) -> Result<Statistics, StatsError> {
    let z = z_value(confidence)?;
    if values.len() < 2 {
        return Err(StatsError::TooFewSamples {
            needed: 2,
            got: values.len(),
        });
    }
    let n = values.len();
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let variance = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let d = z * (variance / nf).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Statistics {
        n,
        mean,
        variance,
        confidence,
        z,
        d,
        ci_low: mean - d,
        ci_high: mean + d,
        median: quantile_sorted(&sorted, 0.5),
        min: sorted[0],
        max: sorted[n - 1],
    })
}

/// Linear-interpolation quantile (Hyndman–Fan type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ninety_percent_z() {
        assert_eq!(z_value(0.90).unwrap(), 1.6449);
        assert_eq!(z_value(0.95).unwrap(), 1.96);
        assert!(z_value(1.0).is_err());
        assert!(z_value(0.0).is_err());
    }

    #[test]
    fn constant_samples() {
        let s = describe(&[5.0, 5.0, 5.0], 0.9).unwrap();
        assert_eq!((s.mean, s.variance, s.d), (5.0, 0.0, 0.0));
    }

    #[test]
    fn hand_arithmetic() {
        let s = describe(&[1.0, 2.0, 3.0, 4.0], 0.9).unwrap();
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
        let d = 1.6449 * (5.0f64 / 12.0).sqrt();
        assert!((s.d - d).abs() <= 1e-12 * d);
        assert_eq!(s.median, 2.5);
    }

    #[test]
    fn too_few_samples() {
        assert_eq!(
            describe(&[1.0], 0.9),
            Err(StatsError::TooFewSamples { needed: 2, got: 1 })
        );
    }

    #[test]
    fn type7_quantiles() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&x, 0.0), 1.0);
        assert_eq!(quantile_sorted(&x, 0.25), 2.0);
        assert_eq!(quantile_sorted(&x, 0.1), 1.4);
        assert_eq!(quantile_sorted(&x, 1.0), 5.0);
        assert_eq!(quantile_sorted(&[7.0], 0.95), 7.0);
    }

    proptest! {
        #[test]
        fn permutation_invariant(mut xs in prop::collection::vec(-10.0f64..10.0, 2..50), seed in any::<u64>()) {
            let a = describe(&xs, 0.9).unwrap();
            let k = (seed as usize) % xs.len();
            xs.rotate_left(k);
            xs.reverse();
            let b = describe(&xs, 0.9).unwrap();
            prop_assert!((a.mean - b.mean).abs() <= 1e-12);
            prop_assert!((a.variance - b.variance).abs() <= 1e-10);
            prop_assert_eq!(a.median, b.median);
        }

        #[test]
        fn half_width_identity(xs in prop::collection::vec(0.0f64..10.0, 2..200)) {
            let s = describe(&xs, 0.9).unwrap();
            let d = 1.6449 * (s.variance / xs.len() as f64).sqrt();
            prop_assert!((s.d - d).abs() <= 1e-12 * d.max(f64::MIN_POSITIVE));
        }
    }
}
