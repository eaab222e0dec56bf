use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Result};

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, confidence: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return invalid("Wilson interval needs at least one trial");
    }
    if k > n {
        return invalid(format!("{k} successes out of {n} trials"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return invalid(format!("confidence {confidence} outside (0, 1)"));
    }
    let z = Normal::standard().inverse_cdf(0.5 + confidence / 2.0);
    let (k, n) = (k as f64, n as f64);
    let phat = k / n;
    let z2 = z * z;
    let centre = (phat + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
    Ok(((centre - half).max(0.0), (centre + half).min(1.0)))
}

/// 95% Wilson interval.
pub fn wilson95(k: u64, n: u64) -> Result<(f64, f64)> {
    wilson_interval(k, n, 0.95)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_successes_start_at_zero() {
        let (lo, hi) = wilson95(0, 100).unwrap();
        assert_eq!(lo, 0.0);
        // Closed form for k = 0: z²/(n + z²).
        let z2 = 1.959963984540054f64.powi(2);
        assert!((hi - z2 / (100.0 + z2)).abs() < 1e-12);
    }

    #[test]
    fn half_is_symmetric() {
        let (lo, hi) = wilson95(50, 100).unwrap();
        assert!(((lo + hi) / 2.0 - 0.5).abs() < 1e-12);
        assert!((hi - lo - 0.19).abs() < 0.005, "width {}", hi - lo);
    }

    #[test]
    fn rare_events() {
        let (lo, hi) = wilson95(10, 1_000_000).unwrap();
        assert!(lo < 1e-5 && 1e-5 < hi);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(wilson95(0, 0).is_err());
        assert!(wilson95(3, 2).is_err());
        assert!(wilson_interval(1, 2, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn interval_contains_estimate(n in 1u64..100_000, frac in 0.0f64..=1.0) {
            let k = ((n as f64) * frac).floor() as u64;
            let (lo, hi) = wilson95(k, n).unwrap();
            let p = k as f64 / n as f64;
            prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
        }
    }
}
