//! Binomial proportion estimates.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wilson score interval for `successes` out of `trials` at quantile `z`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> Proportion {
    assert!(successes <= trials, "successes exceed trials");
    if trials == 0 {
        return Proportion { successes, trials, p_hat: 0.0, ci_low: 0.0, ci_high: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // Clamp so the interval always brackets p_hat despite rounding at 0 and 1.
    let ci_low = (center - half).max(0.0).min(p);
    let ci_high = (center + half).min(1.0).max(p);
    Proportion { successes, trials, p_hat: p, ci_low, ci_high }
}

pub fn wilson95(successes: u64, trials: u64) -> Proportion {
    wilson(successes, trials, Z95)
}
