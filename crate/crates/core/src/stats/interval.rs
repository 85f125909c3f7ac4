use statrs::distribution::{ContinuousCDF, Normal};

/// Wilson score interval for a binomial proportion.
///
/// Panics if `trials == 0`, `successes > trials` or `confidence` is not in
/// `(0, 1)`.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials, "need 0 <= successes <= trials, trials >= 1");
    assert!(confidence > 0.0 && confidence < 1.0, "confidence must lie in (0, 1)");
    let z = Normal::standard().inverse_cdf(0.5 + confidence / 2.0);
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo.min(phat), hi.max(phat))
}
