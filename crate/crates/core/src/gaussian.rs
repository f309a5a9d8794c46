//! Standard-normal primitives: tail probabilities, truncated moments and the
//! conditional second moment used to debias thresholded quadratic statistics.
//!
//! Everything is computed from closed forms in terms of the density `φ` and
//! the upper tail `Φ̄ = 1 − Φ`. Below [`MILLS_SWITCH`] the tail comes from
//! `erfc`; above it the Mills ratio `Φ̄(x)/φ(x)` is evaluated by its continued
//! fraction so that ratios such as `x φ(x) / Φ̄(x)` stay finite long after
//! `Φ̄(x)` itself underflows (around `x ≈ 38.6`).

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// `ln √(2π)`.
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Above this point the Mills ratio is taken from its continued fraction.
pub const MILLS_SWITCH: f64 = 10.0;

/// Depth of the backward continued-fraction evaluation. At `x = 10` the
/// truncation error is far below one ulp.
const MILLS_CF_DEPTH: usize = 80;

/// A nonnegative finite threshold expressed in standard-deviation units.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TruncationLevel(f64);

impl TruncationLevel {
    pub fn new(x: f64) -> Result<Self> {
        if x.is_finite() && x >= 0.0 {
            Ok(Self(x))
        } else {
            Err(Error::invalid(
                "x",
                format!("truncation level must be finite and >= 0, got {x}"),
            ))
        }
    }

    /// `√(2 log(1 + d/s²))`, the threshold of the sparse-zone estimators.
    pub fn sparse_threshold(s: usize, d: usize) -> Self {
        Self(sparse_threshold(s, d))
    }

    /// `2√(2 log(1 + d/m²))`, the threshold used on `ℓ_q` balls.
    pub fn ball_threshold(m: usize, d: usize) -> Self {
        Self(2.0 * sparse_threshold(m, d))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for TruncationLevel {
    type Error = Error;

    fn try_from(x: f64) -> Result<Self> {
        Self::new(x)
    }
}

/// `√(2 log(1 + d/s²))` for `s ≥ 1`.
pub fn sparse_threshold(s: usize, d: usize) -> f64 {
    let ratio = d as f64 / (s as f64 * s as f64);
    (2.0 * ratio.ln_1p()).sqrt()
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn ln_std_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// `Φ̄(x) = P(X > x)` for any real `x`.
pub fn upper_tail(x: f64) -> f64 {
    if x < MILLS_SWITCH {
        0.5 * libm::erfc(x * FRAC_1_SQRT_2)
    } else {
        (ln_std_normal_pdf(x) + mills_ratio(x).ln()).exp()
    }
}

/// `Φ(x) = P(X ≤ x)`.
pub fn cdf(x: f64) -> f64 {
    upper_tail(-x)
}

/// Mills ratio `Φ̄(x)/φ(x)` for `x ≥ 0`.
pub fn mills_ratio(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < MILLS_SWITCH {
        0.5 * libm::erfc(x * FRAC_1_SQRT_2) / std_normal_pdf(x)
    } else {
        // R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...))))
        let mut tail = x;
        for k in (1..=MILLS_CF_DEPTH).rev() {
            tail = x + k as f64 / tail;
        }
        1.0 / tail
    }
}

/// `P(|X| > x)`.
pub fn tail_prob(x: TruncationLevel) -> f64 {
    let x = x.0;
    if x < MILLS_SWITCH {
        libm::erfc(x * FRAC_1_SQRT_2)
    } else {
        ln_tail_prob(TruncationLevel(x)).exp()
    }
}

/// `ln P(|X| > x)`, finite for every finite `x`.
pub fn ln_tail_prob(x: TruncationLevel) -> f64 {
    let x = x.0;
    if x < MILLS_SWITCH {
        libm::erfc(x * FRAC_1_SQRT_2).ln()
    } else {
        std::f64::consts::LN_2 + ln_std_normal_pdf(x) + mills_ratio(x).ln()
    }
}

/// `E[X² 1{|X| > x}] = 2xφ(x) + 2Φ̄(x)`.
pub fn truncated_second_moment(x: TruncationLevel) -> f64 {
    let x = x.0;
    if x < MILLS_SWITCH {
        2.0 * x * std_normal_pdf(x) + libm::erfc(x * FRAC_1_SQRT_2)
    } else {
        ln_truncated_second_moment(TruncationLevel(x)).exp()
    }
}

pub fn ln_truncated_second_moment(x: TruncationLevel) -> f64 {
    let x = x.0;
    std::f64::consts::LN_2 + ln_std_normal_pdf(x) + (x + mills_ratio(x)).ln()
}

/// `E[X⁴ 1{|X| > x}] = 2(x³ + 3x)φ(x) + 6Φ̄(x)`.
pub fn truncated_fourth_moment(x: TruncationLevel) -> f64 {
    let x = x.0;
    if x < MILLS_SWITCH {
        2.0 * (x * x * x + 3.0 * x) * std_normal_pdf(x) + 3.0 * libm::erfc(x * FRAC_1_SQRT_2)
    } else {
        ln_truncated_fourth_moment(TruncationLevel(x)).exp()
    }
}

pub fn ln_truncated_fourth_moment(x: TruncationLevel) -> f64 {
    let x = x.0;
    std::f64::consts::LN_2
        + ln_std_normal_pdf(x)
        + (x * x * x + 3.0 * x + 3.0 * mills_ratio(x)).ln()
}

/// Conditional second moment `E(X² | |X| > x) = 1 + xφ(x)/Φ̄(x)`.
///
/// With `x = √(2 log(1 + d/s²))` this is the debiasing constant `α_s`; with
/// `x = 2√(2 log(1 + d/m²))` it is `α̃_m`. Written through the Mills ratio it
/// never divides two underflowed quantities.
pub fn alpha_constant(x: TruncationLevel) -> f64 {
    let x = x.0;
    if x == 0.0 {
        return 1.0;
    }
    1.0 + x / mills_ratio(x)
}

/// Two-sided bounds on `P(|X| > x)` for `x > 0`:
/// `4e^{−x²/2}/(√(2π)(x + √(x²+4)))` and `4e^{−x²/2}/(√(2π)(x + √(x²+2)))`.
pub fn tail_prob_bounds(x: TruncationLevel) -> (f64, f64) {
    let x = x.0;
    let ln_front = 4f64.ln() - LN_SQRT_2PI - 0.5 * x * x;
    let lower = (ln_front - (x + (x * x + 4.0).sqrt()).ln()).exp();
    let upper = (ln_front - (x + (x * x + 2.0).sqrt()).ln()).exp();
    (lower, upper)
}

/// Upper bound `√(2/π)(x + 2/x)e^{−x²/2}` on the truncated second moment.
pub fn second_moment_bound(x: TruncationLevel) -> f64 {
    let x = x.0;
    (2.0 / PI).sqrt() * (x + 2.0 / x) * (-0.5 * x * x).exp()
}

/// Upper bound `√(2/π)(x³ + 3x + 3/x)e^{−x²/2}` on the truncated fourth
/// moment, from `6Φ̄(x) ≤ 6φ(x)/x`. With `1/x` in place of `3/x` the bound
/// fails for every `x` above about 0.34.
pub fn fourth_moment_bound(x: TruncationLevel) -> f64 {
    let x = x.0;
    (2.0 / PI).sqrt() * (x * x * x + 3.0 * x + 3.0 / x) * (-0.5 * x * x).exp()
}

/// `P(lo ≤ Z ≤ hi)` for standard normal `Z`, evaluated on whichever side of
/// zero keeps the subtraction free of cancellation.
fn interval_prob(lo: f64, hi: f64) -> f64 {
    if lo >= 0.0 {
        upper_tail(lo) - upper_tail(hi)
    } else if hi <= 0.0 {
        upper_tail(-hi) - upper_tail(-lo)
    } else {
        1.0 - upper_tail(hi) - upper_tail(-lo)
    }
}

/// Bias `B(a) = E[y 1{|y| > στ}] − a = −E[y 1{|y| ≤ στ}]` of the hard
/// thresholded observation `y ~ N(a, σ²)`.
pub fn bias_of_thresholded_mean(a: f64, sigma: f64, tau: TruncationLevel) -> Result<f64> {
    crate::error::check_positive("sigma", sigma)?;
    if !a.is_finite() {
        return Err(Error::invalid("a", "must be finite"));
    }
    let shift = a / sigma;
    let lo = -tau.0 - shift;
    let hi = tau.0 - shift;
    let inside = a * interval_prob(lo, hi) + sigma * (std_normal_pdf(lo) - std_normal_pdf(hi));
    Ok(-inside)
}
