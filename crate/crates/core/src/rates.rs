//! Minimax rates: effective sparsity and the `ψ` functions for the linear
//! functional, the quadratic functional and the `ℓ₂` norm, plus the testing
//! separation rate.
//!
//! Comparisons of a sparsity level against `√d` are done in integers
//! (`s² < d`). Logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::model::{below_sqrt, Ball, SparsityClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    Dense,
    Sparse,
    Degenerate,
    VarianceDominated,
    ZeroEstimator,
}

impl Zone {
    pub fn as_str(self) -> &'static str {
        match self {
            Zone::Dense => "dense",
            Zone::Sparse => "sparse",
            Zone::Degenerate => "degenerate",
            Zone::VarianceDominated => "variance_dominated",
            Zone::ZeroEstimator => "zero_estimator",
        }
    }
}

impl std::fmt::Display for Zone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Functional {
    #[serde(rename = "L", alias = "l", alias = "linear")]
    L,
    #[serde(rename = "Q", alias = "q", alias = "quadratic")]
    Q,
    #[serde(rename = "sqrtQ", alias = "norm", alias = "sqrt_q")]
    SqrtQ,
}

impl Functional {
    pub fn as_str(self) -> &'static str {
        match self {
            Functional::L => "L",
            Functional::Q => "Q",
            Functional::SqrtQ => "sqrtQ",
        }
    }

    pub fn evaluate(self, theta: &crate::model::ParameterVector) -> f64 {
        match self {
            Functional::L => theta.linear(),
            Functional::Q => theta.quadratic(),
            Functional::SqrtQ => theta.l2_norm(),
        }
    }
}

impl std::fmt::Display for Functional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A rate evaluation together with the regime that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateValue {
    pub value: f64,
    pub zone: Zone,
    pub functional: Functional,
    /// An order-equivalent form, where one is defined (the `min(·, σ²d)`
    /// form of `ψ^L`, or `σ²d` in the dense zone on `ℓ_q` balls).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equivalent: Option<f64>,
}

impl RateValue {
    fn new(value: f64, zone: Zone, functional: Functional) -> Self {
        Self {
            value,
            zone,
            functional,
            equivalent: None,
        }
    }
}

fn check_s(s: usize, d: usize) -> Result<()> {
    if s >= 1 && s <= d {
        Ok(())
    } else {
        Err(Error::invalid(
            "s",
            format!("need 1 <= s <= d = {d}, got {s}"),
        ))
    }
}

fn check_q_open(q: f64, max: f64, closed: bool) -> Result<()> {
    let ok = q.is_finite() && q > 0.0 && if closed { q <= max } else { q < max };
    if ok {
        Ok(())
    } else {
        let bracket = if closed { ']' } else { ')' };
        Err(Error::invalid(
            "q",
            format!("need q in (0, {max}{bracket}, got {q}"),
        ))
    }
}

/// `log(1 + d/s²)`.
pub fn log_ratio(s: usize, d: usize) -> f64 {
    (d as f64 / (s as f64 * s as f64)).ln_1p()
}

/// Largest `s ∈ [1, d]` with `σ² log(1 + d/s²) ≤ r² s^{−2/q}`, or 0.
///
/// The scan is capped at `d`: the rates only distinguish `m = 0`,
/// `1 ≤ m ≤ √d` and `m > √d`.
pub fn effective_sparsity(r: f64, sigma: f64, q: f64, d: usize) -> Result<usize> {
    check_positive("r", r)?;
    check_positive("sigma", sigma)?;
    check_q_open(q, 2.0, true)?;
    if d == 0 {
        return Err(Error::DimensionTooSmall { d, min: 1 });
    }
    let (s2, r2) = (sigma * sigma, r * r);
    let m = (1..=d)
        .rev()
        .find(|&s| s2 * log_ratio(s, d) <= r2 * (s as f64).powf(-2.0 / q))
        .unwrap_or(0);
    Ok(m)
}

/// `ψ^L_σ(s, d) = σ² s² log(1 + d/s²)` on `B_0(s)`.
pub fn rate_linear_b0(s: usize, d: usize, sigma: f64) -> Result<RateValue> {
    check_s(s, d)?;
    check_positive("sigma", sigma)?;
    let value = sigma * sigma * (s * s) as f64 * log_ratio(s, d);
    let zone = if below_sqrt(s, d) {
        Zone::Sparse
    } else {
        Zone::Dense
    };
    let mut rate = RateValue::new(value, zone, Functional::L);
    rate.equivalent = Some(value.min(sigma * sigma * d as f64));
    Ok(rate)
}

/// `ψ^L_{σ,q}(r, d)` on `B_q(r)`, `0 < q ≤ 1`.
pub fn rate_linear_bq(r: f64, sigma: f64, q: f64, d: usize) -> Result<RateValue> {
    check_q_open(q, 1.0, true)?;
    let m = effective_sparsity(r, sigma, q, d)?;
    if m == 0 {
        return Ok(RateValue::new(r * r, Zone::Degenerate, Functional::L));
    }
    let value = sigma * sigma * (m * m) as f64 * log_ratio(m, d);
    if m * m > d {
        let mut rate = RateValue::new(value, Zone::Dense, Functional::L);
        rate.equivalent = Some(sigma * sigma * d as f64);
        Ok(rate)
    } else {
        Ok(RateValue::new(value, Zone::Sparse, Functional::L))
    }
}

/// `ψ̄_σ(s, d)`: `σ⁴s² log²(1 + d/s²)` if `s < √d`, else `σ⁴d`.
pub fn psi_bar(s: usize, d: usize, sigma: f64) -> f64 {
    let s4 = sigma.powi(4);
    if below_sqrt(s, d) {
        let l = log_ratio(s, d);
        s4 * (s * s) as f64 * l * l
    } else {
        s4 * d as f64
    }
}

/// `ψ_σ(s, d, κ) = max{σ²κ², ψ̄_σ(s, d)}`, the gate of the quadratic estimator.
pub fn psi_sigma(s: usize, d: usize, sigma: f64, kappa: f64) -> f64 {
    (sigma * sigma * kappa * kappa).max(psi_bar(s, d, sigma))
}

/// `ψ^Q_σ(s, d, κ) = min{κ⁴, max{σ²κ², ψ̄_σ(s, d)}}` on `B_2(κ) ∩ B_0(s)`.
pub fn rate_quadratic(s: usize, d: usize, sigma: f64, kappa: f64) -> Result<RateValue> {
    check_s(s, d)?;
    check_positive("sigma", sigma)?;
    check_positive("kappa", kappa)?;
    let k4 = kappa.powi(4);
    let variance = sigma * sigma * kappa * kappa;
    let bar = psi_bar(s, d, sigma);
    let gate = variance.max(bar);
    let zone = if k4 < gate {
        Zone::ZeroEstimator
    } else if variance >= bar {
        Zone::VarianceDominated
    } else if below_sqrt(s, d) {
        Zone::Sparse
    } else {
        Zone::Dense
    };
    Ok(RateValue::new(k4.min(gate), zone, Functional::Q))
}

/// `ψ^Q_{σ,q}(r, d)` on `B_q(r)`, `0 < q < 2`.
pub fn rate_quadratic_bq(r: f64, sigma: f64, q: f64, d: usize) -> Result<RateValue> {
    check_q_open(q, 2.0, false)?;
    let m = effective_sparsity(r, sigma, q, d)?;
    if m == 0 {
        return Ok(RateValue::new(r.powi(4), Zone::Degenerate, Functional::Q));
    }
    let variance = sigma * sigma * r * r;
    let (bar, zone) = if m * m > d {
        (sigma.powi(4) * d as f64, Zone::Dense)
    } else {
        let l = log_ratio(m, d);
        (sigma.powi(4) * (m * m) as f64 * l * l, Zone::Sparse)
    };
    let zone = if variance > bar {
        Zone::VarianceDominated
    } else {
        zone
    };
    Ok(RateValue::new(variance.max(bar), zone, Functional::Q))
}

/// `ψ^{√Q}_σ(s, d)`: `σ² s log(1 + d/s²)` if `s < √d`, else `σ²√d`.
pub fn rate_l2norm(s: usize, d: usize, sigma: f64) -> Result<RateValue> {
    check_s(s, d)?;
    check_positive("sigma", sigma)?;
    let s2 = sigma * sigma;
    Ok(if below_sqrt(s, d) {
        RateValue::new(
            s2 * s as f64 * log_ratio(s, d),
            Zone::Sparse,
            Functional::SqrtQ,
        )
    } else {
        RateValue::new(s2 * (d as f64).sqrt(), Zone::Dense, Functional::SqrtQ)
    })
}

/// `ψ^{√Q}_{σ,q}(r, d)` on `B_q(r)`, `0 < q < 2`.
pub fn rate_l2norm_bq(r: f64, sigma: f64, q: f64, d: usize) -> Result<RateValue> {
    check_q_open(q, 2.0, false)?;
    let m = effective_sparsity(r, sigma, q, d)?;
    let s2 = sigma * sigma;
    Ok(if m == 0 {
        RateValue::new(r * r, Zone::Degenerate, Functional::SqrtQ)
    } else if m * m > d {
        RateValue::new(s2 * (d as f64).sqrt(), Zone::Dense, Functional::SqrtQ)
    } else {
        RateValue::new(
            s2 * m as f64 * log_ratio(m, d),
            Zone::Sparse,
            Functional::SqrtQ,
        )
    })
}

/// Minimax separation rate `λ` for testing `θ = 0` against `class`.
///
/// The value is in separation units (the square root of a `ψ`). For
/// `Θ_{q,u}` it is an `ℓ₂` separation; for `Θ_s` and `Θ_s*` it is the
/// per-coordinate amplitude.
pub fn testing_rate(class: &SparsityClass, sigma: f64, d: usize) -> Result<RateValue> {
    check_positive("sigma", sigma)?;
    let sqrt = |mut r: RateValue| {
        r.value = r.value.sqrt();
        r
    };
    match *class {
        SparsityClass::ThetaQu {
            ball: Ball::L0 { s },
            ..
        } => Ok(sqrt(rate_l2norm(s, d, sigma)?)),
        SparsityClass::ThetaQu {
            ball: Ball::Lq { q, r },
            ..
        } => Ok(sqrt(rate_l2norm_bq(r, sigma, q, d)?)),
        SparsityClass::ThetaS { s, .. } => {
            check_s(s, d)?;
            if s * s > d {
                return Err(Error::UnsupportedRegime(format!(
                    "no testing rate for Theta_s with s = {s} > sqrt(d), d = {d}"
                )));
            }
            let zone = if s * s < d { Zone::Sparse } else { Zone::Dense };
            Ok(RateValue::new(
                sigma * log_ratio(s, d).sqrt(),
                zone,
                Functional::SqrtQ,
            ))
        }
        SparsityClass::ThetaSStar { s, .. } => {
            check_s(s, d)?;
            Ok(if below_sqrt(s, d) {
                RateValue::new(
                    sigma * log_ratio(s, d).sqrt(),
                    Zone::Sparse,
                    Functional::SqrtQ,
                )
            } else {
                RateValue::new(
                    sigma * (d as f64).powf(0.25) / (s as f64).sqrt(),
                    Zone::Dense,
                    Functional::SqrtQ,
                )
            })
        }
        _ => Err(Error::UnsupportedRegime(format!(
            "{class} is not a testing alternative"
        ))),
    }
}
