//! Tests of `θ = 0` against separated sparse alternatives, built on the norm
//! estimators, and their Monte Carlo risk.
//!
//! The test rejects when `N̂ > (A/2)·λ₂`, where `λ₂` is the `ℓ₂` separation
//! scale of the alternative. For `Θ_{q,u}` this is the testing rate itself;
//! for `Θ_s` and `Θ_s*` the rate is a per-coordinate amplitude `λ` and
//! `λ₂ = √s·λ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::estimators::{estimate_l2norm_b0, estimate_l2norm_bq};
use crate::model::{
    fill_observation, membership, stream_rng, worst_case_configs, Ball, ObservationBatch,
    SparsityClass, Witness,
};
use crate::rates::testing_rate;

/// Stream id reserved for the shared noise of the test-risk simulation.
const TEST_STREAM: u64 = 0x7e57;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    /// `Θ_{q,u}`, `Θ_s` or `Θ_s*`; its `delta` is ignored and replaced by
    /// `A` times the testing rate.
    pub alternative: SparsityClass,
    /// The multiplier `A`.
    pub amplitude: f64,
    pub sigma: f64,
    pub d: usize,
}

impl TestSpec {
    pub fn new(alternative: SparsityClass, amplitude: f64, sigma: f64, d: usize) -> Result<Self> {
        let spec = Self {
            alternative,
            amplitude,
            sigma,
            d,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("amplitude", self.amplitude)?;
        check_positive("sigma", self.sigma)?;
        if !self.alternative.is_alternative() {
            return Err(Error::UnsupportedRegime(format!(
                "{} is not a testing alternative",
                self.alternative
            )));
        }
        // validate the ball part with a placeholder separation
        self.alternative.with_delta(1.0).unwrap().validate(self.d)?;
        testing_rate(&self.alternative, self.sigma, self.d).map(|_| ())
    }

    /// The testing rate `λ` in the units of the alternative's `δ`.
    pub fn rate(&self) -> Result<f64> {
        Ok(testing_rate(&self.alternative, self.sigma, self.d)?.value)
    }

    /// `λ₂`, the rate expressed as an `ℓ₂` separation.
    pub fn l2_scale(&self) -> Result<f64> {
        let lambda = self.rate()?;
        Ok(match self.alternative {
            SparsityClass::ThetaS { s, .. } | SparsityClass::ThetaSStar { s, .. } => {
                (s as f64).sqrt() * lambda
            }
            _ => lambda,
        })
    }

    /// Rejection cut `(A/2)·λ₂` on `N̂`.
    pub fn cut(&self) -> Result<f64> {
        Ok(0.5 * self.amplitude * self.l2_scale()?)
    }

    /// The alternative with `δ = A·λ`.
    pub fn separated_class(&self) -> Result<SparsityClass> {
        let delta = self.amplitude * self.rate()?;
        Ok(self
            .alternative
            .with_delta(delta)
            .expect("checked by validate"))
    }

    /// Near-extremal members of the separated alternative.
    pub fn default_witnesses(&self) -> Result<Vec<Witness>> {
        worst_case_configs(&self.separated_class()?, self.sigma, self.d)
    }

    fn norm_estimate(&self, obs: &ObservationBatch) -> Result<f64> {
        match self.alternative {
            SparsityClass::ThetaQu {
                ball: Ball::Lq { q, r },
                ..
            } => estimate_l2norm_bq(obs, r, q),
            other => estimate_l2norm_b0(obs, other.sparsity().expect("l0-type alternative")),
        }
    }
}

/// `Δ = 1{N̂ > (A/2)·λ₂}`.
pub fn test_statistic(obs: &ObservationBatch, spec: &TestSpec) -> Result<bool> {
    spec.validate()?;
    if obs.d() != spec.d {
        return Err(Error::DimensionMismatch {
            left: obs.d(),
            right: spec.d,
        });
    }
    let cut = spec.cut()?;
    Ok(spec.norm_estimate(obs)? > cut)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRiskReport {
    pub type_one: f64,
    /// Per-witness probability of not rejecting, in input order.
    pub type_two: Vec<(String, f64)>,
    pub max_type_two: f64,
    pub total: f64,
    /// `√(p₁(1−p₁)/n + p₂(1−p₂)/n)` for the two terms of the total.
    pub stderr_total: f64,
    pub replications: usize,
    pub seed: u64,
}

/// Simulates `n_reps` draws under `θ = 0` and under each witness, with the
/// same noise vector shared by all hypotheses within a replication.
pub fn evaluate_test_risk(
    spec: &TestSpec,
    witnesses: &[Witness],
    n_reps: usize,
    seed: u64,
) -> Result<TestRiskReport> {
    spec.validate()?;
    if n_reps == 0 {
        return Err(Error::invalid("n_reps", "must be at least 1"));
    }
    let class = spec.separated_class()?;
    for w in witnesses {
        if w.theta.d() != spec.d {
            return Err(Error::DimensionMismatch {
                left: w.theta.d(),
                right: spec.d,
            });
        }
        if !membership(&w.theta, &class) {
            return Err(Error::WitnessOutsideClass {
                label: w.label.clone(),
                class: class.to_string(),
            });
        }
    }
    let cut = spec.cut()?;
    let zero = vec![0.0; spec.d];
    let mut hypotheses: Vec<&[f64]> = vec![&zero];
    hypotheses.extend(witnesses.iter().map(|w| w.theta.as_slice()));

    let per_rep: Vec<Vec<bool>> = (0..n_reps)
        .into_par_iter()
        .map(|rep| -> Result<Vec<bool>> {
            let mut rng = stream_rng(seed, TEST_STREAM, rep as u64);
            let mut noise = Vec::with_capacity(spec.d);
            fill_observation(&zero, 1.0, &mut rng, &mut noise);
            hypotheses
                .iter()
                .map(|theta| {
                    let y = theta
                        .iter()
                        .zip(&noise)
                        .map(|(t, z)| t + spec.sigma * z)
                        .collect();
                    let obs = ObservationBatch::new(y, spec.sigma)?;
                    Ok(spec.norm_estimate(&obs)? > cut)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let n = n_reps as f64;
    let mut rejections = vec![0usize; hypotheses.len()];
    for flags in &per_rep {
        for (count, &flag) in rejections.iter_mut().zip(flags) {
            *count += flag as usize;
        }
    }
    let type_one = rejections[0] as f64 / n;
    let type_two: Vec<(String, f64)> = witnesses
        .iter()
        .zip(&rejections[1..])
        .map(|(w, &c)| (w.label.clone(), 1.0 - c as f64 / n))
        .collect();
    let max_type_two = type_two.iter().map(|(_, p)| *p).fold(0.0, f64::max);
    let var = |p: f64| p * (1.0 - p) / n;
    Ok(TestRiskReport {
        type_one,
        max_type_two,
        total: type_one + max_type_two,
        stderr_total: (var(type_one) + var(max_type_two)).sqrt(),
        type_two,
        replications: n_reps,
        seed,
    })
}

/// `min{1, C_*/A²}`.
pub fn chebyshev_risk_bound(amplitude: f64, c_star: f64) -> Result<f64> {
    check_positive("amplitude", amplitude)?;
    check_positive("c_star", c_star)?;
    Ok((c_star / (amplitude * amplitude)).min(1.0))
}
