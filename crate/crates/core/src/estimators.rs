//! Thresholding estimators of `L(θ)`, `Q(θ)` and `‖θ‖₂`, for known and
//! unknown noise level.
//!
//! Every indicator is a strict inequality `|y_j| > threshold`, and every
//! "`s < √d`" branch test is `s² < d` in integers. Each estimator has a
//! `*_detailed` form returning an [`Estimate`] that also records the active
//! branch and the threshold, which the CLI prints.

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::gaussian::{alpha_constant, sparse_threshold, TruncationLevel};
use crate::model::{below_sqrt, isqrt, ObservationBatch, SparsityClass};
use crate::rates::{effective_sparsity, psi_sigma, Functional};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Sum restricted to coordinates above the threshold.
    Thresholded,
    /// Unthresholded (debiased) sum over all coordinates.
    FullSum,
    /// The zero estimator.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub branch: Branch,
    /// Absolute threshold on `|y_j|`, when the thresholded branch is active.
    pub threshold: Option<f64>,
    /// Noise level actually used (σ, or σ̂ for the data-driven rules).
    pub sigma_used: Option<f64>,
}

impl Estimate {
    fn zero() -> Self {
        Self {
            value: 0.0,
            branch: Branch::Zero,
            threshold: None,
            sigma_used: None,
        }
    }

    fn full(value: f64, sigma: f64) -> Self {
        Self {
            value,
            branch: Branch::FullSum,
            threshold: None,
            sigma_used: Some(sigma),
        }
    }

    fn thresholded(value: f64, threshold: f64, sigma: f64) -> Self {
        Self {
            value,
            branch: Branch::Thresholded,
            threshold: Some(threshold),
            sigma_used: Some(sigma),
        }
    }

    /// `√max{value, 0}`.
    fn positive_sqrt(mut self) -> Self {
        self.value = self.value.max(0.0).sqrt();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLevel {
    Known,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// The rate-optimal rule for the class.
    ExactRate,
    /// Fully data-driven rules thresholding at `σ̂√(2 log d)`.
    AdaptiveLogd,
}

/// Selects one estimator: functional, class, noise knowledge and variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub functional: Functional,
    pub class: SparsityClass,
    pub noise: NoiseLevel,
    pub variant: Variant,
    /// Clip the quadratic estimate at zero.
    #[serde(default)]
    pub positive_part: bool,
}

impl EstimatorSpec {
    pub fn known(functional: Functional, class: SparsityClass) -> Self {
        Self {
            functional,
            class,
            noise: NoiseLevel::Known,
            variant: Variant::ExactRate,
            positive_part: false,
        }
    }

    /// Rejects combinations for which no estimator is defined.
    pub fn validate(&self, d: usize) -> Result<()> {
        self.class.validate(d)?;
        let unsupported = |why: &str| Err(Error::UnsupportedRegime(format!("{why} ({self:?})")));
        use Functional::*;
        use SparsityClass::*;
        match (self.noise, self.variant) {
            (NoiseLevel::Known, Variant::ExactRate) => match (self.functional, self.class) {
                (L, B0 { .. }) | (SqrtQ, B0 { .. }) | (Q, B2B0 { .. }) => Ok(()),
                (L, Bq { q, .. }) if q <= 1.0 => Ok(()),
                (Q | SqrtQ, Bq { q, .. }) if q < 2.0 => Ok(()),
                (Q, B0 { .. }) => {
                    unsupported("the quadratic functional on B0(s) needs a radius kappa")
                }
                _ => unsupported("no known-noise estimator for this functional and class"),
            },
            (NoiseLevel::Known, Variant::AdaptiveLogd) => {
                unsupported("the adaptive rules estimate the noise level")
            }
            (NoiseLevel::Unknown, variant) => {
                if d < 3 {
                    return Err(Error::DimensionTooSmall { d, min: 3 });
                }
                match (self.functional, self.class, variant) {
                    (L, B0 { s }, Variant::ExactRate) if s * s <= d => Ok(()),
                    (L, B0 { .. }, Variant::ExactRate) => {
                        unsupported("the plug-in linear rule needs s <= sqrt(d)")
                    }
                    (L, _, Variant::AdaptiveLogd) => Ok(()),
                    (Q, B2B0 { .. } | B0 { .. }, _) => Ok(()),
                    _ => unsupported("no unknown-noise estimator for this functional and class"),
                }
            }
        }
    }

    /// Applies the selected estimator. `obs.sigma()` is ignored when the noise
    /// level is unknown.
    pub fn apply(&self, obs: &ObservationBatch) -> Result<Estimate> {
        self.validate(obs.d())?;
        use Functional::*;
        use SparsityClass::*;
        let est = match (self.noise, self.variant, self.functional, self.class) {
            (NoiseLevel::Known, _, L, B0 { s }) => linear_b0_detailed(obs, s)?,
            (NoiseLevel::Known, _, L, Bq { q, r }) => linear_bq_detailed(obs, r, q)?,
            (NoiseLevel::Known, _, Q, B2B0 { kappa, s }) => quadratic_b0_detailed(obs, s, kappa)?,
            (NoiseLevel::Known, _, Q, Bq { q, r }) => quadratic_bq_detailed(obs, r, q)?,
            (NoiseLevel::Known, _, SqrtQ, B0 { s }) => l2norm_b0_detailed(obs, s)?,
            (NoiseLevel::Known, _, SqrtQ, Bq { q, r }) => l2norm_bq_detailed(obs, r, q)?,
            (NoiseLevel::Unknown, Variant::ExactRate, L, B0 { s }) => {
                linear_unknown_sigma_detailed(obs.y(), s)?
            }
            (NoiseLevel::Unknown, _, L, _) => linear_adaptive_detailed(obs.y())?,
            (NoiseLevel::Unknown, _, Q, _) => quadratic_unknown_sigma_detailed(obs.y())?,
            _ => unreachable!("rejected by validate"),
        };
        Ok(if self.positive_part && self.functional == Q {
            Estimate {
                value: est.value.max(0.0),
                ..est
            }
        } else {
            est
        })
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

// `Sum` for floats starts from −0.0; adding +0.0 reports an empty sum as 0.
fn thresholded_sum(y: &[f64], cut: f64) -> f64 {
    y.iter().filter(|v| v.abs() > cut).sum::<f64>() + 0.0
}

fn thresholded_centered_squares(y: &[f64], cut: f64, center: f64) -> f64 {
    y.iter()
        .filter(|v| v.abs() > cut)
        .map(|v| v * v - center)
        .sum::<f64>()
        + 0.0
}

fn debiased_sum_of_squares(y: &[f64], sigma: f64) -> f64 {
    let ss: f64 = y.iter().map(|v| v * v).sum();
    ss - y.len() as f64 * sigma * sigma
}

pub fn linear_b0_detailed(obs: &ObservationBatch, s: usize) -> Result<Estimate> {
    let (d, sigma) = (obs.d(), obs.sigma());
    check_s(s, d)?;
    if below_sqrt(s, d) {
        let cut = sigma * sparse_threshold(s, d);
        Ok(Estimate::thresholded(
            thresholded_sum(obs.y(), cut),
            cut,
            sigma,
        ))
    } else {
        Ok(Estimate::full(obs.y().iter().sum(), sigma))
    }
}

/// `L̂`: sum of the observations above `σ√(2 log(1 + d/s²))` if `s < √d`,
/// plain sum otherwise.
pub fn estimate_linear_b0(obs: &ObservationBatch, s: usize) -> Result<f64> {
    linear_b0_detailed(obs, s).map(|e| e.value)
}

pub fn linear_bq_detailed(obs: &ObservationBatch, r: f64, q: f64) -> Result<Estimate> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::invalid("q", format!("need q in (0, 1], got {q}")));
    }
    let (d, sigma) = (obs.d(), obs.sigma());
    let m = effective_sparsity(r, sigma, q, d)?;
    if m == 0 {
        Ok(Estimate::zero())
    } else if m * m > d {
        Ok(Estimate::full(obs.y().iter().sum(), sigma))
    } else {
        let cut = 2.0 * sigma * sparse_threshold(m, d);
        Ok(Estimate::thresholded(
            thresholded_sum(obs.y(), cut),
            cut,
            sigma,
        ))
    }
}

/// `L̂_q` on `B_q(r)`, keyed on the effective sparsity `m`; note the
/// threshold `2σ√(2 log(1 + d/m²))`.
pub fn estimate_linear_bq(obs: &ObservationBatch, r: f64, q: f64) -> Result<f64> {
    linear_bq_detailed(obs, r, q).map(|e| e.value)
}

/// The two non-zero branches shared by `Q̂` and `Q̂•`.
fn quadratic_core(obs: &ObservationBatch, s: usize) -> Estimate {
    let (d, sigma) = (obs.d(), obs.sigma());
    if below_sqrt(s, d) {
        let x = TruncationLevel::sparse_threshold(s, d);
        let alpha = alpha_constant(x);
        let cut = sigma * x.value();
        let value = thresholded_centered_squares(obs.y(), cut, alpha * sigma * sigma);
        Estimate::thresholded(value, cut, sigma)
    } else {
        Estimate::full(debiased_sum_of_squares(obs.y(), sigma), sigma)
    }
}

pub fn quadratic_b0_detailed(obs: &ObservationBatch, s: usize, kappa: f64) -> Result<Estimate> {
    check_s(s, obs.d())?;
    check_positive("kappa", kappa)?;
    if kappa.powi(4) < psi_sigma(s, obs.d(), obs.sigma(), kappa) {
        return Ok(Estimate::zero());
    }
    Ok(quadratic_core(obs, s))
}

/// `Q̂` on `B_2(κ) ∩ B_0(s)`: zero when `κ⁴ < max{σ²κ², ψ̄_σ(s, d)}`,
/// otherwise the `α_s`-debiased thresholded sum of squares (`s < √d`) or
/// `Σy_j² − dσ²`.
pub fn estimate_quadratic_b0(obs: &ObservationBatch, s: usize, kappa: f64) -> Result<f64> {
    quadratic_b0_detailed(obs, s, kappa).map(|e| e.value)
}

/// `Q̂₊ = max{Q̂, 0}`.
pub fn estimate_quadratic_positive_part(
    obs: &ObservationBatch,
    s: usize,
    kappa: f64,
) -> Result<f64> {
    estimate_quadratic_b0(obs, s, kappa).map(|v| v.max(0.0))
}

pub fn quadratic_bq_detailed(obs: &ObservationBatch, r: f64, q: f64) -> Result<Estimate> {
    if !(q > 0.0 && q < 2.0) {
        return Err(Error::invalid("q", format!("need q in (0, 2), got {q}")));
    }
    let (d, sigma) = (obs.d(), obs.sigma());
    let m = effective_sparsity(r, sigma, q, d)?;
    if m == 0 {
        Ok(Estimate::zero())
    } else if m * m > d {
        Ok(Estimate::full(
            debiased_sum_of_squares(obs.y(), sigma),
            sigma,
        ))
    } else {
        let x = TruncationLevel::ball_threshold(m, d);
        let alpha = alpha_constant(x);
        let cut = sigma * x.value();
        let value = thresholded_centered_squares(obs.y(), cut, alpha * sigma * sigma);
        Ok(Estimate::thresholded(value, cut, sigma))
    }
}

/// `Q̂_q` on `B_q(r)` with debiasing constant `α̃_m`.
pub fn estimate_quadratic_bq(obs: &ObservationBatch, r: f64, q: f64) -> Result<f64> {
    quadratic_bq_detailed(obs, r, q).map(|e| e.value)
}

pub fn l2norm_b0_detailed(obs: &ObservationBatch, s: usize) -> Result<Estimate> {
    check_s(s, obs.d())?;
    Ok(quadratic_core(obs, s).positive_sqrt())
}

/// `N̂ = √max{Q̂•, 0}`; `Q̂•` is `Q̂` without the `κ` gate.
pub fn estimate_l2norm_b0(obs: &ObservationBatch, s: usize) -> Result<f64> {
    l2norm_b0_detailed(obs, s).map(|e| e.value)
}

pub fn l2norm_bq_detailed(obs: &ObservationBatch, r: f64, q: f64) -> Result<Estimate> {
    Ok(quadratic_bq_detailed(obs, r, q)?.positive_sqrt())
}

/// `N̂_q = √max{Q̂_q, 0}`.
pub fn estimate_l2norm_bq(obs: &ObservationBatch, r: f64, q: f64) -> Result<f64> {
    l2norm_bq_detailed(obs, r, q).map(|e| e.value)
}

/// `⌊d − √d⌋`, the number of order statistics entering `σ̂`.
pub fn sigma_hat_terms(d: usize) -> usize {
    let root = isqrt(d);
    let ceil = if root * root == d { root } else { root + 1 };
    d - ceil
}

/// `σ̂ = 3 (d⁻¹ Σ_{j ≤ d−√d} y²_(j))^{1/2}`, a deliberate over-estimate of σ
/// built from the smallest squared observations.
pub fn estimate_sigma_hat(y: &[f64]) -> Result<f64> {
    let d = y.len();
    if d < 3 {
        return Err(Error::DimensionTooSmall { d, min: 3 });
    }
    let mut squares: Vec<f64> = y.iter().map(|v| v * v).collect();
    let k = sigma_hat_terms(d);
    if k < d {
        squares.select_nth_unstable_by(k, f64::total_cmp);
    }
    let sum: f64 = squares[..k].iter().sum();
    Ok(3.0 * (sum / d as f64).sqrt())
}

pub fn linear_unknown_sigma_detailed(y: &[f64], s: usize) -> Result<Estimate> {
    let d = y.len();
    check_s(s, d)?;
    if s * s > d {
        return Err(Error::UnsupportedRegime(format!(
            "the plug-in linear rule needs s <= sqrt(d); got s = {s}, d = {d}"
        )));
    }
    let sigma_hat = estimate_sigma_hat(y)?;
    let cut = sigma_hat * sparse_threshold(s, d);
    Ok(Estimate::thresholded(
        thresholded_sum(y, cut),
        cut,
        sigma_hat,
    ))
}

/// `L̃`: `L̂` with `σ̂` plugged into the threshold; requires `s ≤ √d`.
pub fn estimate_linear_unknown_sigma(y: &[f64], s: usize) -> Result<f64> {
    linear_unknown_sigma_detailed(y, s).map(|e| e.value)
}

fn adaptive_cut(y: &[f64]) -> Result<(f64, f64)> {
    let sigma_hat = estimate_sigma_hat(y)?;
    let cut = sigma_hat * (2.0 * (y.len() as f64).ln()).sqrt();
    Ok((cut, sigma_hat))
}

pub fn linear_adaptive_detailed(y: &[f64]) -> Result<Estimate> {
    let (cut, sigma_hat) = adaptive_cut(y)?;
    Ok(Estimate::thresholded(
        thresholded_sum(y, cut),
        cut,
        sigma_hat,
    ))
}

/// `L̃′`: threshold `σ̂√(2 log d)`, free of both `s` and `σ`.
pub fn estimate_linear_adaptive(y: &[f64]) -> Result<f64> {
    linear_adaptive_detailed(y).map(|e| e.value)
}

pub fn quadratic_unknown_sigma_detailed(y: &[f64]) -> Result<Estimate> {
    let (cut, sigma_hat) = adaptive_cut(y)?;
    Ok(Estimate::thresholded(
        thresholded_centered_squares(y, cut, 0.0),
        cut,
        sigma_hat,
    ))
}

/// `Q̃ = Σ y_j² 1{|y_j| > σ̂√(2 log d)}`, with no centering term.
pub fn estimate_quadratic_unknown_sigma(y: &[f64]) -> Result<f64> {
    quadratic_unknown_sigma_detailed(y).map(|e| e.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obs(y: &[f64], sigma: f64) -> ObservationBatch {
        ObservationBatch::new(y.to_vec(), sigma).unwrap()
    }

    #[test]
    fn linear_b0_branches() {
        let y = [1.0, -0.5, 0.25, 2.0];
        // s = 2 = √4: plain sum
        assert_eq!(estimate_linear_b0(&obs(&y, 1.0), 2).unwrap(), 2.75);
        // threshold √(2 ln 5) ≈ 1.794 keeps only the first entry
        let y = [5.0, 0.1, 0.0, -0.2];
        let e = linear_b0_detailed(&obs(&y, 1.0), 1).unwrap();
        assert_eq!(e.value, 5.0);
        assert_eq!(e.branch, Branch::Thresholded);
        assert!((e.threshold.unwrap() - (2.0 * 5f64.ln()).sqrt()).abs() < 1e-15);
        assert_eq!(estimate_linear_b0(&obs(&[0.0; 9], 1.0), 1).unwrap(), 0.0);
        assert!(estimate_linear_b0(&obs(&[0.0; 9], 1.0), 1)
            .unwrap()
            .is_sign_positive());
        assert!(estimate_linear_b0(&obs(&y, 1.0), 0).is_err());
    }

    #[test]
    fn threshold_is_strict() {
        let d = 16;
        let cut = sparse_threshold(1, d);
        let mut y = vec![0.0; d];
        y[3] = cut;
        assert_eq!(estimate_linear_b0(&obs(&y, 1.0), 1).unwrap(), 0.0);
        y[3] = f64::from_bits(cut.to_bits() + 1);
        assert_eq!(estimate_linear_b0(&obs(&y, 1.0), 1).unwrap(), y[3]);
    }

    #[test]
    fn linear_bq_branches() {
        // m = 0 when r² < σ² log(1 + d)
        assert_eq!(
            estimate_linear_bq(&obs(&[9.0; 10], 1.0), 0.5, 0.5).unwrap(),
            0.0
        );
        // vanishing noise gives m = d > √d: plain sum
        let y = [0.1, 0.2, 0.3, 0.4];
        assert!((estimate_linear_bq(&obs(&y, 1e-9), 1.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        // d = 10⁴, r = 10, q = 1 gives m = 3; threshold 2√(2 log(1 + d/9))
        let d = 10_000;
        let cut = 2.0 * sparse_threshold(3, d);
        let mut y = vec![0.0; d];
        y[0] = cut + 0.5;
        y[1] = cut - 0.5;
        let e = linear_bq_detailed(&obs(&y, 1.0), 10.0, 1.0).unwrap();
        assert_eq!(e.branch, Branch::Thresholded);
        assert_eq!(e.value, cut + 0.5);
        assert!(estimate_linear_bq(&obs(&y, 1.0), 10.0, 1.5).is_err());
    }

    #[test]
    fn quadratic_b0_branches() {
        // κ⁴ < ψ_σ: zero
        let e = quadratic_b0_detailed(&obs(&[3.0; 16], 1.0), 2, 1.0).unwrap();
        assert_eq!(e.branch, Branch::Zero);
        // s ≥ √d, y = 0: −dσ²
        let v = estimate_quadratic_b0(&obs(&[0.0; 16], 2.0), 4, 100.0).unwrap();
        assert_eq!(v, -64.0);
        assert_eq!(
            estimate_quadratic_positive_part(&obs(&[0.0; 16], 2.0), 4, 100.0).unwrap(),
            0.0
        );
        // s < √d, nothing above threshold: empty sum
        let v = estimate_quadratic_b0(&obs(&[0.1; 100], 1.0), 2, 100.0).unwrap();
        assert_eq!(v, 0.0);
        // single exceedance: y_k² − α_s σ²
        let mut y = vec![0.0; 100];
        y[7] = 6.0;
        let alpha = alpha_constant(TruncationLevel::sparse_threshold(2, 100));
        let v = estimate_quadratic_b0(&obs(&y, 1.0), 2, 100.0).unwrap();
        assert!((v - (36.0 - alpha)).abs() < 1e-13);
        assert_eq!(
            estimate_quadratic_positive_part(&obs(&y, 1.0), 2, 100.0).unwrap(),
            v
        );
    }

    #[test]
    fn quadratic_bq_branches() {
        assert_eq!(
            estimate_quadratic_bq(&obs(&[5.0; 10], 1.0), 0.5, 1.0).unwrap(),
            0.0
        );
        let y = [1.0, 2.0, 3.0, 4.0];
        let v = estimate_quadratic_bq(&obs(&y, 1e-6), 10.0, 1.0).unwrap();
        assert!((v - (30.0 - 4e-12)).abs() < 1e-12);
        // middle branch with a single exceedance: y_k² − α̃_m σ²
        let (d, r, q) = (10_000, 10.0, 1.0);
        let m = effective_sparsity(r, 1.0, q, d).unwrap();
        assert_eq!(m, 3);
        let x = TruncationLevel::ball_threshold(m, d);
        let mut y = vec![0.0; d];
        y[42] = x.value() + 1.0;
        let v = estimate_quadratic_bq(&obs(&y, 1.0), r, q).unwrap();
        assert!((v - (y[42] * y[42] - alpha_constant(x))).abs() < 1e-12);
        let n = estimate_l2norm_bq(&obs(&y, 1.0), r, q).unwrap();
        assert!((n * n - v).abs() < 1e-12);
    }

    #[test]
    fn l2norm_examples() {
        assert_eq!(estimate_l2norm_b0(&obs(&[0.0; 20], 1.0), 2).unwrap(), 0.0);
        // s ≥ √d with Σy² < dσ²: clipped to zero
        assert_eq!(estimate_l2norm_b0(&obs(&[0.5; 16], 1.0), 4).unwrap(), 0.0);
        let mut y = vec![0.0; 100];
        y[0] = -5.0;
        let alpha = alpha_constant(TruncationLevel::sparse_threshold(1, 100));
        let n = estimate_l2norm_b0(&obs(&y, 1.0), 1).unwrap();
        assert!((n - (25.0 - alpha).max(0.0).sqrt()).abs() < 1e-14);
        assert_eq!(
            estimate_l2norm_bq(&obs(&[1.0; 10], 1.0), 0.5, 1.0).unwrap(),
            0.0
        );
        // Q̂_q = 4 → 2 : dense branch with σ tiny, Σy² = 4
        let n = estimate_l2norm_bq(&obs(&[2.0, 0.0, 0.0, 0.0], 1e-12), 10.0, 1.0).unwrap();
        assert!((n - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sigma_hat_examples() {
        assert!(matches!(
            estimate_sigma_hat(&[1.0, 2.0]),
            Err(Error::DimensionTooSmall { d: 2, min: 3 })
        ));
        assert_eq!(estimate_sigma_hat(&[0.0; 10]).unwrap(), 0.0);
        for d in [3usize, 10, 16, 17, 100, 1024] {
            let t = -1.7;
            let k = sigma_hat_terms(d);
            assert_eq!(k, (d as f64 - (d as f64).sqrt()).floor() as usize);
            let got = estimate_sigma_hat(&vec![t; d]).unwrap();
            let expect = 3.0 * t.abs() * (k as f64 / d as f64).sqrt();
            assert!((got - expect).abs() < 1e-13, "d = {d}");
        }
        // the largest squares are dropped
        let mut y = vec![1.0; 16];
        y[0] = 100.0;
        assert!((estimate_sigma_hat(&y).unwrap() - 3.0 * (12.0f64 / 16.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn unknown_sigma_rules() {
        assert_eq!(estimate_linear_unknown_sigma(&[0.0; 16], 2).unwrap(), 0.0);
        assert!(matches!(
            estimate_linear_unknown_sigma(&[0.0; 16], 5),
            Err(Error::UnsupportedRegime(_))
        ));
        // σ̂ = 0 when the 12 smallest squares vanish: every nonzero entry passes
        let mut y = vec![0.0; 16];
        y[1] = 0.3;
        y[9] = -2.0;
        assert_eq!(estimate_sigma_hat(&y).unwrap(), 0.0);
        assert_eq!(estimate_linear_unknown_sigma(&y, 2).unwrap(), -1.7);
        assert_eq!(estimate_linear_adaptive(&y).unwrap(), -1.7);
        assert!((estimate_quadratic_unknown_sigma(&y).unwrap() - 4.09).abs() < 1e-14);

        // bulk of ±1: σ̂ = 3√(k/d); a spike above σ̂·threshold survives alone
        let d = 100;
        let mut y: Vec<f64> = (0..d)
            .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        y[0] = 50.0;
        let sh = estimate_sigma_hat(&y).unwrap();
        assert!((sh - 3.0 * (90.0f64 / 100.0).sqrt()).abs() < 1e-14);
        assert!(50.0 > sh * sparse_threshold(2, d));
        assert!(1.0 < sh * sparse_threshold(2, d));
        assert_eq!(estimate_linear_unknown_sigma(&y, 2).unwrap(), 50.0);
        assert_eq!(estimate_linear_adaptive(&y).unwrap(), 50.0);
        assert_eq!(estimate_quadratic_unknown_sigma(&y).unwrap(), 2500.0);

        // everything below σ̂√(2 log d)
        let y: Vec<f64> = (0..d).map(|j| 1.0 + (j % 3) as f64 * 0.1).collect();
        assert_eq!(estimate_linear_adaptive(&y).unwrap(), 0.0);
        assert_eq!(estimate_quadratic_unknown_sigma(&y).unwrap(), 0.0);
    }

    #[test]
    fn noiseless_limit() {
        let sigma = 1e-12;
        let d = 400;
        let mut theta = vec![0.0; d];
        for (j, v) in [1.0, -2.5, 3.0, 1.25, -7.0].iter().enumerate() {
            theta[j * 17] = *v;
        }
        let l: f64 = theta.iter().sum();
        let q: f64 = theta.iter().map(|v| v * v).sum();
        let o = obs(&theta, sigma);
        for s in [5usize, 10, 20, 400] {
            assert!((estimate_linear_b0(&o, s).unwrap() - l).abs() < 1e-10);
            let qh = estimate_quadratic_b0(&o, s, 100.0).unwrap();
            assert!((qh - q).abs() < 1e-10, "s = {s}: {qh} vs {q}");
        }
    }

    #[test]
    fn spec_dispatch() {
        let o = obs(&[0.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1.0);
        let bad = EstimatorSpec::known(Functional::Q, SparsityClass::B0 { s: 1 });
        assert!(matches!(bad.apply(&o), Err(Error::UnsupportedRegime(_))));
        let spec = EstimatorSpec::known(Functional::L, SparsityClass::B0 { s: 1 });
        assert_eq!(spec.apply(&o).unwrap().value, 3.0);
        let spec = EstimatorSpec {
            functional: Functional::L,
            class: SparsityClass::B0 { s: 1 },
            noise: NoiseLevel::Unknown,
            variant: Variant::AdaptiveLogd,
            positive_part: false,
        };
        let e = spec.apply(&o).unwrap();
        assert_eq!(e.sigma_used, Some(0.0));
        let spec = EstimatorSpec {
            positive_part: true,
            ..EstimatorSpec::known(Functional::Q, SparsityClass::B2B0 { kappa: 50.0, s: 4 })
        };
        assert!(spec.apply(&obs(&[0.0; 16], 1.0)).unwrap().value >= 0.0);
    }

    fn vectors() -> impl Strategy<Value = (Vec<f64>, f64)> {
        (proptest::collection::vec(-8.0f64..8.0, 3..80), 0.1f64..3.0)
    }

    proptest! {
        #[test]
        fn equivariance((y, sigma) in vectors(), t in 0.1f64..10.0, frac in 0.0f64..1.0, kappa in 0.1f64..20.0) {
            let d = y.len();
            let s = 1 + ((d - 1) as f64 * frac) as usize;
            let o = obs(&y, sigma);
            let neg: Vec<f64> = y.iter().map(|v| -v).collect();
            let scaled: Vec<f64> = y.iter().map(|v| v * t).collect();
            let os = obs(&scaled, sigma * t);
            let l = estimate_linear_b0(&o, s).unwrap();
            prop_assert_eq!(estimate_linear_b0(&obs(&neg, sigma), s).unwrap(), -l);
            let ls = estimate_linear_b0(&os, s).unwrap();
            prop_assert!((ls - t * l).abs() <= 1e-9 * (1.0 + (t * l).abs()));
            let q = estimate_quadratic_b0(&o, s, kappa).unwrap();
            let qs = estimate_quadratic_b0(&os, s, kappa * t).unwrap();
            prop_assert!((qs - t * t * q).abs() <= 1e-9 * (1.0 + (t * t * q).abs() + (t * t * d as f64 * sigma * sigma)));
            let n = estimate_l2norm_b0(&o, s).unwrap();
            let ns = estimate_l2norm_b0(&os, s).unwrap();
            prop_assert!(n >= 0.0);
            prop_assert!((ns - t * n).abs() <= 1e-6 * (1.0 + t * n + t * sigma * (d as f64).sqrt()));
        }

        #[test]
        fn permutation_invariance((y, sigma) in vectors(), seed: u64, frac in 0.0f64..1.0) {
            use rand::seq::SliceRandom;
            let d = y.len();
            let s = 1 + ((d - 1) as f64 * frac) as usize;
            let mut p = y.clone();
            p.shuffle(&mut crate::model::seeded_rng(seed));
            let (o, op) = (obs(&y, sigma), obs(&p, sigma));
            let tol = |a: f64| 1e-10 * (1.0 + a.abs() + d as f64 * sigma * sigma);
            let a = estimate_linear_b0(&o, s).unwrap();
            prop_assert!((a - estimate_linear_b0(&op, s).unwrap()).abs() <= tol(a));
            let a = estimate_l2norm_b0(&o, s).unwrap();
            prop_assert!((a - estimate_l2norm_b0(&op, s).unwrap()).abs() <= tol(a));
            let a = estimate_sigma_hat(&y).unwrap();
            prop_assert!((a - estimate_sigma_hat(&p).unwrap()).abs() <= tol(a));
            let a = estimate_linear_adaptive(&y).unwrap();
            prop_assert!((a - estimate_linear_adaptive(&p).unwrap()).abs() <= tol(a));
            let a = estimate_quadratic_unknown_sigma(&y).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!((a - estimate_quadratic_unknown_sigma(&p).unwrap()).abs() <= tol(a));
        }

        // Moving an entry within its side of the threshold changes L̂ by the
        // move (above) or not at all (below).
        #[test]
        fn threshold_locality(d in 4usize..200, idx in 0usize..200, base in 0.0f64..1.0, shift in 0.0f64..0.99) {
            let idx = idx % d;
            let s = 1;
            let cut = sparse_threshold(s, d);
            let mut y = vec![0.0; d];
            y[idx] = cut + 1.0 + base;
            let before = estimate_linear_b0(&obs(&y, 1.0), s).unwrap();
            y[idx] += shift;
            let after = estimate_linear_b0(&obs(&y, 1.0), s).unwrap();
            prop_assert!((after - before - shift).abs() < 1e-12);
            y[idx] = base * cut * 0.5;
            let b0 = estimate_linear_b0(&obs(&y, 1.0), s).unwrap();
            y[idx] = base * cut * 0.5 + shift * 0.4 * cut;
            let b1 = estimate_linear_b0(&obs(&y, 1.0), s).unwrap();
            prop_assert_eq!(b0, 0.0);
            prop_assert_eq!(b1, 0.0);
        }
    }
}
