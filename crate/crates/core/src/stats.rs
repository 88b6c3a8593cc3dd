//! Proportion estimates, Wald/Wilson confidence intervals and the pooled
//! two-proportion z-test.
//!
//! The standard normal tail is computed from `erfc`, which is evaluated with a
//! positive-term Maclaurin series for `|x| < 2` and a Lentz continued
//! fraction beyond that. Both converge to full double precision on the range
//! that matters for reporting, so reports are reproducible bit-for-bit across
//! platforms that implement IEEE-754 `exp`/`sqrt` identically.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("confidence level must lie strictly between 0 and 1, got {0}")]
    InvalidLevel(f64),
    #[error("proportion requires at least one trial")]
    ZeroTrials,
    #[error("successes ({successes}) exceed trials ({trials})")]
    SuccessesExceedTrials { successes: u64, trials: u64 },
    #[error("pooled proportion is {0}; the z statistic is undefined")]
    DegeneratePool(f64),
    #[error("rate must lie in [0, 1], got {0}")]
    InvalidRate(f64),
}

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const SERIES_CUTOFF: f64 = 2.0;

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < SERIES_CUTOFF {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

/// erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n (2x^2)^n x / (1*3*...*(2n+1)).
/// Every term is positive, so there is no cancellation.
fn erf_series(x: f64) -> f64 {
    let two_x2 = 2.0 * x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0u32;
    loop {
        n += 1;
        term *= two_x2 / f64::from(2 * n + 1);
        sum += term;
        if term <= sum * 1e-17 || n > 200 {
            break;
        }
    }
    2.0 * FRAC_1_SQRT_PI * (-x * x).exp() * sum
}

/// erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))),
/// evaluated with the modified Lentz algorithm.
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..500u32 {
        let a = f64::from(n) / 2.0;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() * FRAC_1_SQRT_PI / f
}

/// Upper tail of the standard normal, `1 - Phi(z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    normal_sf(-z)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Two-sided p-value for a standard normal statistic.
pub fn two_sided_p(z: f64) -> f64 {
    (2.0 * normal_sf(z.abs())).min(1.0)
}

/// Quantile `z` with `normal_sf(z) == tail`, for `tail` in (0, 1).
pub fn normal_upper_quantile(tail: f64) -> f64 {
    debug_assert!(tail > 0.0 && tail < 1.0);
    if tail > 0.5 {
        return -normal_upper_quantile(1.0 - tail);
    }
    // bracket [lo, hi] with sf(lo) >= tail >= sf(hi)
    let (mut lo, mut hi) = (0.0_f64, 40.0_f64);
    let mut z = 1.0;
    for _ in 0..100 {
        let err = normal_sf(z) - tail;
        if err > 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let pdf = normal_pdf(z);
        let mut next = if pdf > 0.0 { z + err / pdf } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - z).abs() < 1e-15 * z.abs().max(1.0) {
            return next;
        }
        z = next;
    }
    z
}

/// Two-sided critical value for a confidence level, e.g. 1.959964 at 0.95.
pub fn critical_value(level: f64) -> Result<f64, StatsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidLevel(level));
    }
    Ok(normal_upper_quantile((1.0 - level) / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum IntervalMethod {
    #[default]
    Wald,
    Wilson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionEstimate {
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub method: IntervalMethod,
}

/// Proportion with a Wald interval `p ± z*·sqrt(p(1-p)/n)`, clamped to [0, 1].
pub fn proportion_ci(successes: u64, trials: u64, level: f64) -> Result<ProportionEstimate, StatsError> {
    proportion_ci_with(successes, trials, level, IntervalMethod::Wald)
}

pub fn proportion_ci_with(
    successes: u64,
    trials: u64,
    level: f64,
    method: IntervalMethod,
) -> Result<ProportionEstimate, StatsError> {
    if trials == 0 {
        return Err(StatsError::ZeroTrials);
    }
    if successes > trials {
        return Err(StatsError::SuccessesExceedTrials { successes, trials });
    }
    let p_hat = successes as f64 / trials as f64;
    let (ci_low, ci_high) = interval(p_hat, trials, level, method)?;
    Ok(ProportionEstimate {
        successes,
        trials,
        p_hat,
        ci_low,
        ci_high,
        level,
        method,
    })
}

/// Interval bounds for an already-rounded rate, as when re-deriving an
/// interval from a reported percentage.
pub fn rate_interval(p_hat: f64, trials: u64, level: f64, method: IntervalMethod) -> Result<(f64, f64), StatsError> {
    if trials == 0 {
        return Err(StatsError::ZeroTrials);
    }
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(StatsError::InvalidRate(p_hat));
    }
    interval(p_hat, trials, level, method)
}

fn interval(p: f64, trials: u64, level: f64, method: IntervalMethod) -> Result<(f64, f64), StatsError> {
    let z = critical_value(level)?;
    let n = trials as f64;
    let (lo, hi) = match method {
        IntervalMethod::Wald => {
            let half = z * (p * (1.0 - p) / n).sqrt();
            (p - half, p + half)
        }
        IntervalMethod::Wilson => {
            let z2 = z * z;
            let denom = 1.0 + z2 / n;
            let centre = (p + z2 / (2.0 * n)) / denom;
            let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
            (centre - half, centre + half)
        }
    };
    Ok((lo.clamp(0.0, p), hi.clamp(p, 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoProportionTest {
    pub x1: u64,
    pub n1: u64,
    pub x2: u64,
    pub n2: u64,
    pub p1: f64,
    pub p2: f64,
    pub pooled_p: f64,
    /// Positive when `p1 > p2`.
    pub z: f64,
    pub p_value: f64,
}

/// Pooled two-proportion z-test with a two-sided p-value.
pub fn two_proportion_z(x1: u64, n1: u64, x2: u64, n2: u64) -> Result<TwoProportionTest, StatsError> {
    if n1 == 0 || n2 == 0 {
        return Err(StatsError::ZeroTrials);
    }
    if x1 > n1 {
        return Err(StatsError::SuccessesExceedTrials {
            successes: x1,
            trials: n1,
        });
    }
    if x2 > n2 {
        return Err(StatsError::SuccessesExceedTrials {
            successes: x2,
            trials: n2,
        });
    }
    let (f1, f2) = (n1 as f64, n2 as f64);
    let p1 = x1 as f64 / f1;
    let p2 = x2 as f64 / f2;
    let pooled_p = (x1 + x2) as f64 / (n1 + n2) as f64;
    if x1 + x2 == 0 || x1 + x2 == n1 + n2 {
        return Err(StatsError::DegeneratePool(pooled_p));
    }
    let se = (pooled_p * (1.0 - pooled_p) * (1.0 / f1 + 1.0 / f2)).sqrt();
    let z = (p1 - p2) / se;
    Ok(TwoProportionTest {
        x1,
        n1,
        x2,
        n2,
        p1,
        p2,
        pooled_p,
        z,
        // Floor at the smallest normal f64 so far tails stay positive.
        p_value: two_sided_p(z).max(f64::MIN_POSITIVE),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // 1 - Phi(z), computed with mpmath at 40 significant digits.
    #[allow(clippy::excessive_precision)]
    const SF_TABLE: &[(f64, f64)] = &[
        (-8.0, 0.9999999999999993779039426),
        (-5.0, 0.9999997133484281208060883),
        (-3.3, 0.9995165758576162224929002),
        (-1.5, 0.933192798731141933995506),
        (-0.5, 0.6914624612740131036377046),
        (0.0, 0.5),
        (0.3, 0.3820885778110473669277264),
        (1.0, 0.1586552539314570514147675),
        (1.959964, 0.02499999909644240199438451),
        (2.25, 0.01222447265504470315262393),
        (3.0, 0.001349898031630094526651815),
        (4.632, 0.000001810750769117220842687446),
        (6.0, 9.865876450376981407008641e-10),
        (8.0, 6.220960574271784123515995e-16),
    ];

    #[test]
    fn sf_matches_high_precision_table() {
        for &(z, want) in SF_TABLE {
            let got = normal_sf(z);
            assert!((got - want).abs() <= 1e-12, "z={z}: {got} vs {want}");
        }
    }

    #[test]
    fn sf_relative_accuracy_in_far_tail() {
        let got = normal_sf(8.0);
        assert!((got / 6.220960574271784e-16 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn erfc_is_continuous_at_series_cutoff() {
        let exact = 0.004677734981047266;
        let below = erfc(SERIES_CUTOFF - 1e-12);
        let above = erfc(SERIES_CUTOFF);
        assert!((above / exact - 1.0).abs() < 1e-13, "{above}");
        assert!((below / exact - 1.0).abs() < 1e-10, "{below}");
    }

    #[test]
    fn critical_value_at_95() {
        let z = critical_value(0.95).unwrap();
        assert!((z - 1.959963984540054).abs() < 1e-12, "{z}");
        assert!((normal_sf(1.959964) - 0.025).abs() < 1e-7);
    }

    #[test]
    fn invalid_level_rejected() {
        assert_eq!(critical_value(1.0), Err(StatsError::InvalidLevel(1.0)));
        assert!(matches!(proportion_ci(1, 2, 0.0), Err(StatsError::InvalidLevel(_))));
    }

    #[test]
    fn zero_trials_rejected() {
        assert_eq!(proportion_ci(0, 0, 0.95), Err(StatsError::ZeroTrials));
    }

    #[test]
    fn degenerate_zero_proportion_clamps() {
        let est = proportion_ci(0, 10, 0.95).unwrap();
        assert_eq!((est.ci_low, est.ci_high), (0.0, 0.0));
    }

    #[test]
    fn interval_from_rounded_rate() {
        let (lo, hi) = rate_interval(0.107, 2649, 0.95, IntervalMethod::Wald).unwrap();
        assert_eq!(format!("{:.1} {:.1}", lo * 100.0, hi * 100.0), "9.5 11.9");
    }

    #[test]
    fn wilson_stays_inside_unit_interval() {
        let est = proportion_ci_with(1, 3, 0.95, IntervalMethod::Wilson).unwrap();
        assert!(est.ci_low > 0.0 && est.ci_high < 1.0);
        assert!(est.ci_low <= est.p_hat && est.p_hat <= est.ci_high);
    }

    #[test]
    fn ztest_reference_value() {
        // statsmodels proportions_ztest([270, 215], [1000, 1000])
        let t = two_proportion_z(270, 1000, 215, 1000).unwrap();
        assert!((t.z - 2.8694621572742265).abs() < 1e-9);
        assert!((t.p_value - 0.004111705307161454).abs() < 1e-9);
    }

    #[test]
    fn ztest_equal_rates() {
        let t = two_proportion_z(30, 100, 30, 100).unwrap();
        assert_eq!(t.z, 0.0);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn ztest_degenerate_pool() {
        assert!(matches!(two_proportion_z(0, 10, 0, 20), Err(StatsError::DegeneratePool(p)) if p == 0.0));
        assert!(matches!(two_proportion_z(10, 10, 20, 20), Err(StatsError::DegeneratePool(p)) if p == 1.0));
    }

    #[test]
    fn z_to_p_reference_points() {
        assert_eq!(format!("{:.3}", two_sided_p(2.250)), "0.024");
        let p = two_sided_p(4.632);
        assert!(p < 1e-4 && (p - 3.6215e-6).abs() < 1e-9);
    }
}
