//! χ² divergences between spiked mixtures and pure noise, and the numeric
//! conclusions of the two-hypothesis lower-bound lemmas.
//!
//! For the uniform prior `μ_ρ` on `s`-sparse vectors with entries `σρ`,
//! `χ²(P_μ, P_0) = E e^{ρ²J} − 1` where `J` is the overlap of two independent
//! supports, a hypergeometric variable. The signed prior `μ̄_ρ` replaces
//! `e^{ρ²}` by `cosh(ρ²)`. Everything is accumulated in log space.

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::model::{ParameterVector, PriorKind, SparsePrior};
use crate::rates::Functional;

/// Largest log-value that still exponentiates to a finite `f64`.
const LN_MAX: f64 = 709.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceResult {
    pub kind: PriorKind,
    pub exact: f64,
    pub bound: f64,
    pub rho: f64,
    pub s: usize,
    pub d: usize,
}

fn check_args(s: usize, d: usize, rho: f64) -> Result<()> {
    if s == 0 || s > d {
        return Err(Error::invalid(
            "s",
            format!("need 1 <= s <= d = {d}, got {s}"),
        ));
    }
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::invalid(
            "rho",
            format!("must be finite and >= 0, got {rho}"),
        ));
    }
    Ok(())
}

/// `ln P(J = j)` for `j_min ≤ j ≤ s`, where `J` is the overlap of two
/// independent uniform `s`-subsets of `{1..d}`. Built by the ratio
/// recurrence `P(j+1)/P(j) = (s−j)²/((j+1)(d−2s+j+1))` from the smallest
/// attainable overlap, which keeps full relative precision for large `d`.
fn ln_overlap_pmf(s: usize, d: usize) -> (usize, Vec<f64>) {
    let j_min = (2 * s).saturating_sub(d);
    let c = s.min(d - s);
    let mut lp: f64 = (0..c).map(|i| (-(c as f64) / (d - i) as f64).ln_1p()).sum();
    let mut out = Vec::with_capacity(s - j_min + 1);
    out.push(lp);
    for j in j_min..s {
        let num = (s - j) as f64;
        lp += 2.0 * num.ln() - ((j + 1) as f64).ln() - ((d + j + 1 - 2 * s) as f64).ln();
        out.push(lp);
    }
    (j_min, out)
}

/// `ln(e^t − 1)` for `t > 0`.
fn ln_expm1(t: f64) -> f64 {
    if t < 30.0 {
        t.exp_m1().ln()
    } else {
        t + (-(-t).exp()).ln_1p()
    }
}

/// `ln(1 + e^a)`.
fn ln1p_exp(a: f64) -> f64 {
    if a < 30.0 {
        a.exp().ln_1p()
    } else {
        a + (-a).exp().ln_1p()
    }
}

/// `ln cosh(u)` for `u ≥ 0`.
fn ln_cosh(u: f64) -> f64 {
    if u < 1.0 {
        // cosh(u) − 1 = 2 sinh²(u/2), exact to rounding for small u
        (2.0 * (0.5 * u).sinh().powi(2)).ln_1p()
    } else {
        u + (-2.0 * u).exp().ln_1p() - std::f64::consts::LN_2
    }
}

/// `ln sinh(v)` for `v > 0`.
fn ln_sinh(v: f64) -> f64 {
    if v < 1.0 {
        v.sinh().ln()
    } else {
        v + (-(-2.0 * v).exp()).ln_1p() - std::f64::consts::LN_2
    }
}

/// `ln b` where `b` is the per-overlap factor: `e^{ρ²}` or `cosh(ρ²)`.
fn ln_base(kind: PriorKind, rho: f64) -> f64 {
    let u = rho * rho;
    match kind {
        PriorKind::UniformPositive => u,
        PriorKind::UniformSigned => ln_cosh(u),
    }
}

fn finish(ln_value: f64, what: &str) -> Result<f64> {
    if ln_value > LN_MAX {
        Err(Error::NumericOverflow(format!(
            "{what}: log of the chi-square divergence is {ln_value:.1}"
        )))
    } else {
        Ok(ln_value.exp())
    }
}

/// `E[b^J] − 1 = Σ_{j ≥ 1} P(J = j)(b^j − 1)`, which keeps every term
/// nonnegative and avoids subtracting 1 from a sum close to 1.
fn chi2_exact(kind: PriorKind, s: usize, d: usize, rho: f64) -> Result<f64> {
    check_args(s, d, rho)?;
    let lb = ln_base(kind, rho);
    if lb == 0.0 {
        return Ok(0.0);
    }
    let (j_min, pmf) = ln_overlap_pmf(s, d);
    let logs: Vec<f64> = (j_min..=s)
        .zip(&pmf)
        .filter(|(j, _)| *j >= 1)
        .map(|(j, lp)| lp + ln_expm1(j as f64 * lb))
        .collect();
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let sum: f64 = logs.iter().map(|l| (l - peak).exp()).sum();
    finish(peak + sum.ln(), "exact chi-square")
}

/// `(1 + (s/d)(b − 1))^s − 1`, with `ln(b − 1)` supplied.
fn chi2_bound(s: usize, d: usize, ln_increment: f64) -> Result<f64> {
    if ln_increment == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let ln_p = (s as f64 / d as f64).ln();
    let ln_one_step = ln1p_exp(ln_p + ln_increment);
    let ln_power = s as f64 * ln_one_step;
    if ln_power > LN_MAX {
        return Err(Error::NumericOverflow(format!(
            "chi-square bound: log of the bound is {ln_power:.1}"
        )));
    }
    Ok(ln_power.exp_m1())
}

/// Exact `χ²(P_{μ_ρ}, P_0)` for the positive uniform prior.
pub fn chi2_exact_uniform_prior(s: usize, d: usize, rho: f64) -> Result<f64> {
    chi2_exact(PriorKind::UniformPositive, s, d, rho)
}

/// Exact `χ²(P_{μ̄_ρ}, P_0)` for the signed prior: `E cosh(ρ²)^J − 1`.
pub fn chi2_exact_signed_prior(s: usize, d: usize, rho: f64) -> Result<f64> {
    chi2_exact(PriorKind::UniformSigned, s, d, rho)
}

/// `(1 − s/d + (s/d)e^{ρ²})^s − 1`.
pub fn chi2_bound_uniform_prior(s: usize, d: usize, rho: f64) -> Result<f64> {
    check_args(s, d, rho)?;
    let u = rho * rho;
    let ln_inc = if u == 0.0 {
        f64::NEG_INFINITY
    } else {
        ln_expm1(u)
    };
    chi2_bound(s, d, ln_inc)
}

/// `(1 − s/d + (s/d)cosh(ρ²))^s − 1`.
pub fn chi2_bound_signed_prior(s: usize, d: usize, rho: f64) -> Result<f64> {
    check_args(s, d, rho)?;
    let u = rho * rho;
    // cosh(u) − 1 = 2 sinh²(u/2)
    let ln_inc = if u == 0.0 {
        f64::NEG_INFINITY
    } else {
        std::f64::consts::LN_2 + 2.0 * ln_sinh(0.5 * u)
    };
    chi2_bound(s, d, ln_inc)
}

/// Exact value and closed-form bound together.
pub fn divergence(kind: PriorKind, s: usize, d: usize, rho: f64) -> Result<DivergenceResult> {
    let (exact, bound) = match kind {
        PriorKind::UniformPositive => (
            chi2_exact_uniform_prior(s, d, rho)?,
            chi2_bound_uniform_prior(s, d, rho)?,
        ),
        PriorKind::UniformSigned => (
            chi2_exact_signed_prior(s, d, rho)?,
            chi2_bound_signed_prior(s, d, rho)?,
        ),
    };
    Ok(DivergenceResult {
        kind,
        exact,
        bound,
        rho,
        s,
        d,
    })
}

/// `K(P_a, P_b) = ‖a − b‖²/(2σ²)`.
pub fn two_point_kl(
    theta_a: &ParameterVector,
    theta_b: &ParameterVector,
    sigma: f64,
) -> Result<f64> {
    check_positive("sigma", sigma)?;
    if theta_a.d() != theta_b.d() {
        return Err(Error::DimensionMismatch {
            left: theta_a.d(),
            right: theta_b.d(),
        });
    }
    let sq: f64 = theta_a
        .as_slice()
        .iter()
        .zip(theta_b.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sq / (2.0 * sigma * sigma))
}

/// Numeric conclusion of the two-point lemma for a spiked prior against 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerCertificate {
    pub functional: Functional,
    /// Half the (constant) value of the functional on the prior's support.
    pub v: f64,
    /// The χ² bound used as `β`.
    pub beta: f64,
    /// `e^{−β}/4`, a lower bound on `inf sup P(|T̂ − T| ≥ v)`.
    pub prob_bound: f64,
    /// `max{1 − √β, 0}`, a lower bound on the total testing error.
    pub testing_bound: f64,
}

pub fn minimax_lower_certificate(
    prior: &SparsePrior,
    functional: Functional,
) -> Result<LowerCertificate> {
    let prior = SparsePrior::new(prior.kind, prior.s, prior.rho, prior.sigma, prior.d)?;
    let (s, sigma, rho) = (prior.s as f64, prior.sigma, prior.rho);
    let v = match functional {
        Functional::L => {
            if prior.kind == PriorKind::UniformSigned {
                return Err(Error::NonConstantFunctional(
                    "L under the signed prior".to_string(),
                ));
            }
            s * sigma * rho / 2.0
        }
        Functional::Q => s * sigma * sigma * rho * rho / 2.0,
        Functional::SqrtQ => sigma * rho * s.sqrt() / 2.0,
    };
    let beta = match prior.kind {
        PriorKind::UniformPositive => chi2_bound_uniform_prior(prior.s, prior.d, rho)?,
        PriorKind::UniformSigned => chi2_bound_signed_prior(prior.s, prior.d, rho)?,
    };
    Ok(LowerCertificate {
        functional,
        v,
        beta,
        prob_bound: 0.25 * (-beta).exp(),
        testing_bound: (1.0 - beta.sqrt()).max(0.0),
    })
}
