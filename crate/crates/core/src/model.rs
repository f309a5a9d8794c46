//! Parameter vectors, sparsity classes, observation generation and the
//! sparse priors used by the lower-bound constructions.
//!
//! # Random number contract
//!
//! All randomness comes from [`SimRng`] (ChaCha8, 64-bit seeds). A stochastic
//! operation either takes a seed or a generator handle. Monte Carlo
//! replication `i` of stream `k` under master seed `m` always uses
//! [`stream_rng`]`(m, k, i)`, which seeds ChaCha from a mix of `(m, k)` and
//! then jumps to ChaCha stream `i`. A replication therefore sees the same
//! numbers no matter which thread runs it.
//!
//! # Witnesses
//!
//! The risk of an estimator is a supremum over a class, which no finite
//! harness can compute. [`worst_case_configs`] returns a fixed, labelled list
//! of class members standing in for that supremum: the equal-spike vectors
//! that support the lower-bound priors, spikes placed at and around the
//! estimator thresholds, boundary-of-ball vectors and the two-point
//! configurations `(κ, 0, …, 0)`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::gaussian::sparse_threshold;

/// Relative slack for the continuous norm constraints in [`membership`]. Exact
/// boundary vectors (`‖θ‖_q = r`) are built in floating point and recomputing
/// their norm may land an ulp outside the ball.
pub const NORM_RTOL: f64 = 1e-12;

pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for replication `index` of logical stream `stream`.
pub fn stream_rng(master: u64, stream: u64, index: u64) -> SimRng {
    let key = splitmix64(master ^ splitmix64(stream.wrapping_add(0x5851_F42D_4C95_7F2D)));
    let mut rng = SimRng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Integer `⌊√n⌋`.
pub fn isqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// `s < √d`, decided in integers.
pub fn below_sqrt(s: usize, d: usize) -> bool {
    s.checked_mul(s).is_some_and(|sq| sq < d)
}

/// The unknown mean `θ ∈ ℝ^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParameterVector {
    theta: Vec<f64>,
}

impl ParameterVector {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::DimensionTooSmall { d: 0, min: 1 });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("theta", "entries must be finite"));
        }
        Ok(Self { theta })
    }

    pub fn zeros(d: usize) -> Result<Self> {
        Self::new(vec![0.0; d])
    }

    /// `count` leading entries equal to `value`, the rest zero.
    pub fn spikes(d: usize, count: usize, value: f64) -> Result<Self> {
        if count > d {
            return Err(Error::invalid(
                "count",
                format!("{count} spikes do not fit in d = {d}"),
            ));
        }
        let mut theta = vec![0.0; d];
        theta[..count].fill(value);
        Self::new(theta)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.theta
    }

    pub fn d(&self) -> usize {
        self.theta.len()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.d()).filter(|&j| self.theta[j] != 0.0).collect()
    }

    /// `‖θ‖₀`.
    pub fn sparsity(&self) -> usize {
        self.theta.iter().filter(|&&t| t != 0.0).count()
    }

    /// `‖θ‖_q` for `q > 0`, scaled by the largest entry to avoid overflow.
    pub fn norm_q(&self, q: f64) -> f64 {
        let scale = self.theta.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let sum: f64 = self.theta.iter().map(|t| (t.abs() / scale).powf(q)).sum();
        scale * sum.powf(1.0 / q)
    }

    pub fn l2_norm(&self) -> f64 {
        self.quadratic().sqrt()
    }

    /// `L(θ) = Σ θ_j`.
    pub fn linear(&self) -> f64 {
        self.theta.iter().sum()
    }

    /// `Q(θ) = Σ θ_j²`.
    pub fn quadratic(&self) -> f64 {
        self.theta.iter().map(|t| t * t).sum()
    }

    pub fn min_nonzero_magnitude(&self) -> Option<f64> {
        self.theta
            .iter()
            .filter(|&&t| t != 0.0)
            .map(|t| t.abs())
            .min_by(|a, b| a.total_cmp(b))
    }

    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::new(self.theta.iter().map(|v| v * t).collect())
    }
}

impl TryFrom<Vec<f64>> for ParameterVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ParameterVector> for Vec<f64> {
    fn from(p: ParameterVector) -> Self {
        p.theta
    }
}

/// One draw `y = θ + σξ` together with the noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBatch {
    y: Vec<f64>,
    sigma: f64,
}

impl ObservationBatch {
    pub fn new(y: Vec<f64>, sigma: f64) -> Result<Self> {
        check_positive("sigma", sigma)?;
        if y.is_empty() {
            return Err(Error::DimensionTooSmall { d: 0, min: 1 });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("y", "entries must be finite"));
        }
        Ok(Self { y, sigma })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn d(&self) -> usize {
        self.y.len()
    }

    pub fn into_parts(self) -> (Vec<f64>, f64) {
        (self.y, self.sigma)
    }
}

/// The ball part of a testing alternative `Θ_{q,u}(δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Ball {
    /// `B_0(s)` (the `q = 0` case).
    L0 { s: usize },
    /// `B_q(r)`.
    Lq { q: f64, r: f64 },
}

/// The parameter classes the estimators and tests are built for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SparsityClass {
    /// `B_0(s) = {‖θ‖₀ ≤ s}`.
    B0 { s: usize },
    /// `B_q(r) = {‖θ‖_q ≤ r}`, `0 < q ≤ 2`.
    Bq { q: f64, r: f64 },
    /// `B_2(κ) ∩ B_0(s)`.
    B2B0 { kappa: f64, s: usize },
    /// `Θ_{q,u}(δ) = {θ ∈ B_q(u) : ‖θ‖₂ ≥ δ}`.
    ThetaQu { ball: Ball, delta: f64 },
    /// `Θ_s(δ)`: exactly `s` nonzero entries, all equal to `δ`.
    ThetaS { s: usize, delta: f64 },
    /// `Θ_s*(δ)`: exactly `s` nonzero entries, all of magnitude at least `δ`.
    ThetaSStar { s: usize, delta: f64 },
}

fn check_sparsity(s: usize, d: usize) -> Result<()> {
    if s >= 1 && s <= d {
        Ok(())
    } else {
        Err(Error::invalid(
            "s",
            format!("need 1 <= s <= d = {d}, got {s}"),
        ))
    }
}

fn check_q(q: f64, max: f64) -> Result<()> {
    if q.is_finite() && q > 0.0 && q <= max {
        Ok(())
    } else {
        Err(Error::invalid("q", format!("need 0 < q <= {max}, got {q}")))
    }
}

impl Ball {
    pub fn validate(&self, d: usize) -> Result<()> {
        match *self {
            Ball::L0 { s } => check_sparsity(s, d),
            Ball::Lq { q, r } => {
                check_q(q, 2.0)?;
                check_positive("r", r)
            }
        }
    }

    pub fn contains(&self, theta: &ParameterVector) -> bool {
        match *self {
            Ball::L0 { s } => theta.sparsity() <= s,
            Ball::Lq { q, r } => theta.norm_q(q) <= r * (1.0 + NORM_RTOL),
        }
    }
}

impl SparsityClass {
    pub fn validate(&self, d: usize) -> Result<()> {
        if d == 0 {
            return Err(Error::DimensionTooSmall { d, min: 1 });
        }
        match *self {
            SparsityClass::B0 { s } => check_sparsity(s, d),
            SparsityClass::Bq { q, r } => {
                check_q(q, 2.0)?;
                check_positive("r", r)
            }
            SparsityClass::B2B0 { kappa, s } => {
                check_positive("kappa", kappa)?;
                check_sparsity(s, d)
            }
            SparsityClass::ThetaQu { ball, delta } => {
                ball.validate(d)?;
                check_positive("delta", delta)
            }
            SparsityClass::ThetaS { s, delta } | SparsityClass::ThetaSStar { s, delta } => {
                check_sparsity(s, d)?;
                check_positive("delta", delta)
            }
        }
    }

    /// Sparsity level for the `ℓ₀`-type classes.
    pub fn sparsity(&self) -> Option<usize> {
        match *self {
            SparsityClass::B0 { s }
            | SparsityClass::B2B0 { s, .. }
            | SparsityClass::ThetaQu {
                ball: Ball::L0 { s },
                ..
            }
            | SparsityClass::ThetaS { s, .. }
            | SparsityClass::ThetaSStar { s, .. } => Some(s),
            _ => None,
        }
    }

    /// Same class with the separation `δ` replaced; `None` for the estimation
    /// classes, which carry no separation.
    pub fn with_delta(&self, delta: f64) -> Option<Self> {
        match *self {
            SparsityClass::ThetaQu { ball, .. } => Some(SparsityClass::ThetaQu { ball, delta }),
            SparsityClass::ThetaS { s, .. } => Some(SparsityClass::ThetaS { s, delta }),
            SparsityClass::ThetaSStar { s, .. } => Some(SparsityClass::ThetaSStar { s, delta }),
            _ => None,
        }
    }

    pub fn is_alternative(&self) -> bool {
        self.with_delta(1.0).is_some()
    }

    /// Short stable tag used in CSV output.
    pub fn tag(&self) -> &'static str {
        match self {
            SparsityClass::B0 { .. } => "B0",
            SparsityClass::Bq { .. } => "Bq",
            SparsityClass::B2B0 { .. } => "B2_cap_B0",
            SparsityClass::ThetaQu { .. } => "Theta_qu",
            SparsityClass::ThetaS { .. } => "Theta_s",
            SparsityClass::ThetaSStar { .. } => "Theta_s_star",
        }
    }
}

impl std::fmt::Display for SparsityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            SparsityClass::B0 { s } => write!(f, "B0(s={s})"),
            SparsityClass::Bq { q, r } => write!(f, "Bq(q={q}, r={r})"),
            SparsityClass::B2B0 { kappa, s } => write!(f, "B2(kappa={kappa}) ∩ B0(s={s})"),
            SparsityClass::ThetaQu {
                ball: Ball::L0 { s },
                delta,
            } => {
                write!(f, "Theta_0,{s}(delta={delta})")
            }
            SparsityClass::ThetaQu {
                ball: Ball::Lq { q, r },
                delta,
            } => {
                write!(f, "Theta_q={q},r={r}(delta={delta})")
            }
            SparsityClass::ThetaS { s, delta } => write!(f, "Theta_s(s={s}, delta={delta})"),
            SparsityClass::ThetaSStar { s, delta } => {
                write!(f, "Theta_s*(s={s}, delta={delta})")
            }
        }
    }
}

/// Exact predicate `θ ∈ class` (norm constraints up to [`NORM_RTOL`]).
pub fn membership(theta: &ParameterVector, class: &SparsityClass) -> bool {
    match *class {
        SparsityClass::B0 { s } => theta.sparsity() <= s,
        SparsityClass::Bq { q, r } => Ball::Lq { q, r }.contains(theta),
        SparsityClass::B2B0 { kappa, s } => {
            theta.sparsity() <= s && theta.l2_norm() <= kappa * (1.0 + NORM_RTOL)
        }
        SparsityClass::ThetaQu { ball, delta } => {
            ball.contains(theta) && theta.l2_norm() >= delta * (1.0 - NORM_RTOL)
        }
        SparsityClass::ThetaS { s, delta } => {
            theta.sparsity() == s && theta.as_slice().iter().all(|&t| t == 0.0 || t == delta)
        }
        SparsityClass::ThetaSStar { s, delta } => {
            theta.sparsity() == s
                && theta
                    .min_nonzero_magnitude()
                    .is_some_and(|m| m >= delta * (1.0 - NORM_RTOL))
        }
    }
}

/// Draw `y = θ + σξ` from a fresh generator seeded with `seed`.
pub fn generate_observation(
    theta: &ParameterVector,
    sigma: f64,
    seed: u64,
) -> Result<ObservationBatch> {
    let mut rng = seeded_rng(seed);
    generate_observation_with(theta, sigma, &mut rng)
}

pub fn generate_observation_with<R: Rng + ?Sized>(
    theta: &ParameterVector,
    sigma: f64,
    rng: &mut R,
) -> Result<ObservationBatch> {
    check_positive("sigma", sigma)?;
    let mut y = Vec::with_capacity(theta.d());
    fill_observation(theta.as_slice(), sigma, rng, &mut y);
    ObservationBatch::new(y, sigma)
}

/// Overwrite `out` with `θ + σξ`; the allocation-free inner loop of the
/// Monte Carlo harness.
pub fn fill_observation<R: Rng + ?Sized>(
    theta: &[f64],
    sigma: f64,
    rng: &mut R,
    out: &mut Vec<f64>,
) {
    out.clear();
    out.extend(theta.iter().map(|&t| {
        let z: f64 = rng.sample(StandardNormal);
        t + sigma * z
    }));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    /// `μ_ρ`: all nonzero coefficients equal to `σρ`.
    UniformPositive,
    /// `μ̄_ρ`: nonzero coefficients independently `±σρ`.
    UniformSigned,
}

/// Uniform prior on `s`-sparse vectors with coefficients of magnitude `σρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsePrior {
    pub kind: PriorKind,
    pub s: usize,
    pub rho: f64,
    pub sigma: f64,
    pub d: usize,
}

impl SparsePrior {
    pub fn new(kind: PriorKind, s: usize, rho: f64, sigma: f64, d: usize) -> Result<Self> {
        check_sparsity(s, d)?;
        check_positive("rho", rho)?;
        check_positive("sigma", sigma)?;
        Ok(Self {
            kind,
            s,
            rho,
            sigma,
            d,
        })
    }

    /// The prior with `ρ = √(log(1 + d/s²))` used for the `B_0(s)` lower bounds.
    pub fn lower_bound_positive(s: usize, d: usize, sigma: f64) -> Result<Self> {
        check_sparsity(s, d)?;
        let rho = (d as f64 / (s as f64 * s as f64)).ln_1p().sqrt();
        Self::new(PriorKind::UniformPositive, s, rho, sigma, d)
    }

    /// Common magnitude `σρ` of the nonzero coefficients.
    pub fn amplitude(&self) -> f64 {
        self.sigma * self.rho
    }
}

pub fn sample_prior(prior: &SparsePrior, seed: u64) -> Result<ParameterVector> {
    let mut rng = seeded_rng(seed);
    sample_prior_with(prior, &mut rng)
}

/// Uniform support by a partial Fisher–Yates shuffle of the indices.
pub fn sample_prior_with<R: Rng + ?Sized>(
    prior: &SparsePrior,
    rng: &mut R,
) -> Result<ParameterVector> {
    let prior = SparsePrior::new(prior.kind, prior.s, prior.rho, prior.sigma, prior.d)?;
    let mut indices: Vec<usize> = (0..prior.d).collect();
    let (chosen, _) = indices.partial_shuffle(rng, prior.s);
    let amp = prior.amplitude();
    let mut theta = vec![0.0; prior.d];
    for &j in chosen.iter() {
        theta[j] = match prior.kind {
            PriorKind::UniformPositive => amp,
            PriorKind::UniformSigned => {
                if rng.random::<bool>() {
                    amp
                } else {
                    -amp
                }
            }
        };
    }
    ParameterVector::new(theta)
}

/// A class member with the name of its construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub label: String,
    pub theta: ParameterVector,
}

impl Witness {
    fn new(label: &str, theta: ParameterVector) -> Self {
        Self {
            label: label.to_string(),
            theta,
        }
    }
}

fn alternating(d: usize, count: usize, value: f64) -> Result<ParameterVector> {
    let mut theta = vec![0.0; d];
    for (j, t) in theta.iter_mut().take(count).enumerate() {
        *t = if j % 2 == 0 { value } else { -value };
    }
    ParameterVector::new(theta)
}

/// Deterministic near-worst-case members of `class` in dimension `d`.
///
/// Every returned vector passes [`membership`]; an empty list means the
/// class itself is empty (e.g. `Θ_{q,r}(δ)` with `δ > r`).
pub fn worst_case_configs(class: &SparsityClass, sigma: f64, d: usize) -> Result<Vec<Witness>> {
    class.validate(d)?;
    check_positive("sigma", sigma)?;
    let mut out = Vec::new();
    match *class {
        SparsityClass::B0 { s } => {
            let x = sparse_threshold(s, d);
            let rho = x / std::f64::consts::SQRT_2;
            out.push(Witness::new("zero", ParameterVector::zeros(d)?));
            out.push(Witness::new(
                "prior_spikes",
                ParameterVector::spikes(d, s, sigma * rho)?,
            ));
            out.push(Witness::new(
                "half_threshold_spikes",
                ParameterVector::spikes(d, s, 0.5 * sigma * x)?,
            ));
            out.push(Witness::new(
                "threshold_spikes",
                ParameterVector::spikes(d, s, sigma * x)?,
            ));
            out.push(Witness::new(
                "strong_spikes",
                ParameterVector::spikes(d, s, 3.0 * sigma * x.max(1.0))?,
            ));
        }
        SparsityClass::B2B0 { kappa, s } => {
            let x = sparse_threshold(s, d);
            let rho = x / std::f64::consts::SQRT_2;
            let cap = kappa / (s as f64).sqrt();
            out.push(Witness::new("zero", ParameterVector::zeros(d)?));
            out.push(Witness::new(
                "two_point",
                ParameterVector::spikes(d, 1, kappa)?,
            ));
            out.push(Witness::new(
                "prior_spikes",
                ParameterVector::spikes(d, s, (sigma * rho).min(cap))?,
            ));
            out.push(Witness::new(
                "threshold_spikes",
                ParameterVector::spikes(d, s, (sigma * x).min(cap))?,
            ));
            out.push(Witness::new(
                "boundary_spikes",
                ParameterVector::spikes(d, s, cap)?,
            ));
        }
        SparsityClass::Bq { q, r } => {
            let m = crate::rates::effective_sparsity(r, sigma, q, d)?;
            out.push(Witness::new("zero", ParameterVector::zeros(d)?));
            out.push(Witness::new(
                "single_spike",
                ParameterVector::spikes(d, 1, r)?,
            ));
            if m >= 1 {
                let k = m.min(d);
                let boundary = r * (k as f64).powf(-1.0 / q);
                out.push(Witness::new(
                    "boundary_spikes",
                    ParameterVector::spikes(d, k, boundary)?,
                ));
                let kp = m.min(isqrt(d)).max(1);
                let cap = r * (kp as f64).powf(-1.0 / q);
                let x = sparse_threshold(kp, d);
                out.push(Witness::new(
                    "prior_spikes",
                    ParameterVector::spikes(
                        d,
                        kp,
                        (sigma * x / std::f64::consts::SQRT_2).min(cap),
                    )?,
                ));
                out.push(Witness::new(
                    "threshold_spikes",
                    ParameterVector::spikes(d, kp, (sigma * x).min(cap))?,
                ));
            }
            out.push(Witness::new(
                "spread",
                ParameterVector::spikes(d, d, r * (d as f64).powf(-1.0 / q))?,
            ));
        }
        SparsityClass::ThetaQu {
            ball: Ball::L0 { s },
            delta,
        } => {
            let amp = delta / (s as f64).sqrt();
            out.push(Witness::new(
                "prior_spikes",
                ParameterVector::spikes(d, s, amp)?,
            ));
            out.push(Witness::new("signed_spikes", alternating(d, s, amp)?));
            out.push(Witness::new(
                "single_spike",
                ParameterVector::spikes(d, 1, delta)?,
            ));
        }
        SparsityClass::ThetaQu {
            ball: Ball::Lq { q, r },
            delta,
        } => {
            if delta <= r * (1.0 + NORM_RTOL) {
                let m = crate::rates::effective_sparsity(r, sigma, q, d)?;
                let mut k = m.clamp(1, d);
                // k equal spikes of size δ/√k have ‖θ‖_q = δ k^{1/q − 1/2}
                while k > 1 && delta * (k as f64).powf(1.0 / q - 0.5) > r * (1.0 + NORM_RTOL) {
                    k -= 1;
                }
                let amp = delta / (k as f64).sqrt();
                out.push(Witness::new(
                    "prior_spikes",
                    ParameterVector::spikes(d, k, amp)?,
                ));
                out.push(Witness::new(
                    "single_spike",
                    ParameterVector::spikes(d, 1, delta)?,
                ));
            }
        }
        SparsityClass::ThetaS { s, delta } => {
            out.push(Witness::new(
                "equal_spikes",
                ParameterVector::spikes(d, s, delta)?,
            ));
        }
        SparsityClass::ThetaSStar { s, delta } => {
            out.push(Witness::new(
                "equal_spikes",
                ParameterVector::spikes(d, s, delta)?,
            ));
            out.push(Witness::new("signed_spikes", alternating(d, s, delta)?));
            let mut theta = vec![0.0; d];
            theta[..s].fill(delta);
            theta[0] = 4.0 * delta;
            out.push(Witness::new("one_large", ParameterVector::new(theta)?));
        }
    }
    debug_assert!(out.iter().all(|w| membership(&w.theta, class)));
    Ok(out)
}
