//! Monte Carlo risk of the estimators, parameter sweeps, and the comparison
//! of known- and unknown-noise rules.
//!
//! Replication `i` of a configuration draws its noise from
//! `stream_rng(seed, config_stream, i)`, the same stream for every witness,
//! and results are reduced in replication order. Reports therefore do not
//! depend on the number of worker threads.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::estimators::{estimate_sigma_hat, EstimatorSpec, NoiseLevel, Variant};
use crate::model::{
    fill_observation, membership, splitmix64, stream_rng, worst_case_configs, ObservationBatch,
    ParameterVector, SparsityClass, Witness,
};
use crate::rates::{
    rate_l2norm, rate_l2norm_bq, rate_linear_b0, rate_linear_bq, rate_quadratic, rate_quadratic_bq,
    Functional, RateValue, Zone,
};

/// Version of the sweep CSV column layout.
pub const SCHEMA_VERSION: u32 = 1;

fn default_reps() -> usize {
    1000
}

/// One cell of an experiment: a functional, a class, an estimator and a
/// simulation budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Label used in output and mixed into the noise stream.
    #[serde(default)]
    pub id: String,
    pub functional: Functional,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub sigma: f64,
    #[serde(default = "default_noise")]
    pub noise: NoiseLevel,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default)]
    pub positive_part: bool,
    /// Restrict the witness list to these labels; all witnesses when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<Vec<String>>,
    #[serde(default = "default_reps")]
    pub n_reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_noise() -> NoiseLevel {
    NoiseLevel::Known
}

fn default_variant() -> Variant {
    Variant::ExactRate
}

impl ExperimentConfig {
    /// Known-noise configuration on `B_0(s)` (or `B_2(κ) ∩ B_0(s)` for `Q`).
    pub fn sparse(functional: Functional, d: usize, s: usize, sigma: f64) -> Self {
        Self {
            id: String::new(),
            functional,
            d,
            s: Some(s),
            q: None,
            r: None,
            kappa: None,
            sigma,
            noise: NoiseLevel::Known,
            variant: Variant::ExactRate,
            positive_part: false,
            witnesses: None,
            n_reps: default_reps(),
            seed: 0,
            output: None,
        }
    }

    /// The parameter class implied by the supplied fields.
    pub fn class(&self) -> Result<SparsityClass> {
        let class = match (self.s, self.q, self.r, self.kappa) {
            (Some(s), None, None, Some(kappa)) => SparsityClass::B2B0 { kappa, s },
            (Some(s), None, None, None) => SparsityClass::B0 { s },
            (None, Some(q), Some(r), None) => SparsityClass::Bq { q, r },
            _ => {
                return Err(Error::invalid(
                    "class",
                    "give either s (optionally with kappa) or both q and r",
                ))
            }
        };
        class.validate(self.d)?;
        Ok(class)
    }

    pub fn estimator(&self) -> Result<EstimatorSpec> {
        let spec = EstimatorSpec {
            functional: self.functional,
            class: self.class()?,
            noise: self.noise,
            variant: self.variant,
            positive_part: self.positive_part,
        };
        spec.validate(self.d)?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("sigma", self.sigma)?;
        if self.n_reps == 0 {
            return Err(Error::invalid("n_reps", "must be at least 1"));
        }
        self.estimator()?;
        self.reference_rate().map(|_| ())
    }

    /// The rate the empirical risk is divided by: the minimax rate for the
    /// known-noise rules, and the displayed upper bounds for the adaptive ones.
    pub fn reference_rate(&self) -> Result<RateValue> {
        let (d, sigma) = (self.d, self.sigma);
        let class = self.class()?;
        let unknown = self.noise == NoiseLevel::Unknown;
        let log_d = (d as f64).ln();
        let reference = |value: f64| RateValue {
            value,
            zone: Zone::Sparse,
            functional: self.functional,
            equivalent: None,
        };
        match (self.functional, class) {
            (Functional::L, SparsityClass::B0 { s })
                if unknown && self.variant == Variant::AdaptiveLogd =>
            {
                Ok(reference(sigma * sigma * (s * s) as f64 * log_d))
            }
            (Functional::L, SparsityClass::B0 { s }) => rate_linear_b0(s, d, sigma),
            (Functional::L, SparsityClass::Bq { q, r }) if !unknown => {
                rate_linear_bq(r, sigma, q, d)
            }
            (Functional::Q, SparsityClass::B2B0 { kappa, s }) if unknown => {
                let s = s as f64;
                Ok(reference(
                    (sigma * sigma * kappa * kappa).max(sigma.powi(4) * s * s * log_d * log_d),
                ))
            }
            (Functional::Q, SparsityClass::B2B0 { kappa, s }) => rate_quadratic(s, d, sigma, kappa),
            (Functional::Q, SparsityClass::Bq { q, r }) if !unknown => {
                rate_quadratic_bq(r, sigma, q, d)
            }
            (Functional::SqrtQ, SparsityClass::B0 { s }) if !unknown => rate_l2norm(s, d, sigma),
            (Functional::SqrtQ, SparsityClass::Bq { q, r }) if !unknown => {
                rate_l2norm_bq(r, sigma, q, d)
            }
            _ => Err(Error::UnsupportedRegime(format!(
                "no reference rate for {} on {class} with {:?} noise",
                self.functional, self.noise
            ))),
        }
    }

    /// Witnesses from [`worst_case_configs`], filtered by `witnesses`.
    pub fn witness_list(&self) -> Result<Vec<Witness>> {
        let all = worst_case_configs(&self.class()?, self.sigma, self.d)?;
        match &self.witnesses {
            None => Ok(all),
            Some(labels) => {
                for l in labels {
                    if !all.iter().any(|w| &w.label == l) {
                        return Err(Error::invalid(
                            "witnesses",
                            format!("unknown witness `{l}`"),
                        ));
                    }
                }
                Ok(all
                    .into_iter()
                    .filter(|w| labels.contains(&w.label))
                    .collect())
            }
        }
    }

    /// Stream id derived from `id`, so that distinct cells of a sweep use
    /// distinct noise while witnesses within a cell share it.
    pub fn stream(&self) -> u64 {
        // FNV-1a, then mixed
        let h = self.id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
        });
        splitmix64(h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub theta_label: String,
    pub mean_sq_error: f64,
    pub std_error: f64,
    pub rate_value: f64,
    pub ratio: f64,
    pub zone: Zone,
    pub n_reps: usize,
    pub seed: u64,
}

/// Mean and standard error of the mean, reduced in slice order.
fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt() / n.sqrt())
}

fn squared_errors(
    config: &ExperimentConfig,
    estimator: &EstimatorSpec,
    theta: &ParameterVector,
) -> Result<Vec<f64>> {
    let truth = config.functional.evaluate(theta);
    let stream = config.stream();
    (0..config.n_reps)
        .into_par_iter()
        .map_init(Vec::new, |buf, rep| {
            let mut rng = stream_rng(config.seed, stream, rep as u64);
            fill_observation(theta.as_slice(), config.sigma, &mut rng, buf);
            let obs = ObservationBatch::new(std::mem::take(buf), config.sigma)?;
            let value = estimator.apply(&obs)?.value;
            *buf = obs.into_parts().0;
            Ok((value - truth) * (value - truth))
        })
        .collect()
}

/// `E_θ(T̂ − T(θ))²` by simulation, with its standard error and the ratio to
/// the configuration's reference rate.
pub fn monte_carlo_risk(config: &ExperimentConfig, witness: &Witness) -> Result<RiskReport> {
    config.validate()?;
    let class = config.class()?;
    if witness.theta.d() != config.d {
        return Err(Error::DimensionMismatch {
            left: witness.theta.d(),
            right: config.d,
        });
    }
    if !membership(&witness.theta, &class) {
        return Err(Error::WitnessOutsideClass {
            label: witness.label.clone(),
            class: class.to_string(),
        });
    }
    let estimator = config.estimator()?;
    let rate = config.reference_rate()?;
    let errors = squared_errors(config, &estimator, &witness.theta)?;
    let (mse, se) = mean_and_stderr(&errors);
    Ok(RiskReport {
        theta_label: witness.label.clone(),
        mean_sq_error: mse,
        std_error: se,
        rate_value: rate.value,
        ratio: if rate.value > 0.0 {
            mse / rate.value
        } else {
            f64::NAN
        },
        zone: rate.zone,
        n_reps: config.n_reps,
        seed: config.seed,
    })
}

/// One row of a sweep: a (configuration, witness) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub schema_version: u32,
    pub config_id: String,
    pub functional: Functional,
    pub class: String,
    pub d: usize,
    pub s: Option<usize>,
    pub q: Option<f64>,
    pub r: Option<f64>,
    pub kappa: Option<f64>,
    pub sigma: f64,
    pub noise: NoiseLevel,
    pub variant: Variant,
    pub witness: String,
    pub n_reps: usize,
    pub seed: u64,
    pub mean_sq_error: f64,
    pub std_error: f64,
    pub rate_value: f64,
    pub ratio: f64,
    pub zone: Zone,
    /// Largest `ratio` over the witnesses of the same configuration.
    pub config_max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Per-configuration maximum ratio, in grid order.
    pub fn max_ratios(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = Vec::new();
        for row in &self.rows {
            if out
                .last()
                .map(|(id, _)| id != &row.config_id)
                .unwrap_or(true)
            {
                out.push((row.config_id.clone(), row.config_max_ratio));
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        for row in &self.rows {
            wtr.serialize(row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Runs every configuration against each of its witnesses. Configurations
/// without an `id` are labelled by their position in the grid.
pub fn risk_sweep(grid: &[ExperimentConfig]) -> Result<SweepTable> {
    if grid.is_empty() {
        return Err(Error::invalid(
            "grid",
            "must contain at least one configuration",
        ));
    }
    let mut table = SweepTable::default();
    for (k, config) in grid.iter().enumerate() {
        let mut config = config.clone();
        if config.id.is_empty() {
            config.id = format!("cfg{k}");
        }
        let class = config.class()?;
        let witnesses = config.witness_list()?;
        let reports = witnesses
            .iter()
            .map(|w| monte_carlo_risk(&config, w))
            .collect::<Result<Vec<_>>>()?;
        let max_ratio = reports
            .iter()
            .map(|r| r.ratio)
            .fold(f64::NEG_INFINITY, f64::max);
        for rep in reports {
            table.rows.push(SweepRow {
                schema_version: SCHEMA_VERSION,
                config_id: config.id.clone(),
                functional: config.functional,
                class: class.tag().to_string(),
                d: config.d,
                s: config.s,
                q: config.q,
                r: config.r,
                kappa: config.kappa,
                sigma: config.sigma,
                noise: config.noise,
                variant: config.variant,
                witness: rep.theta_label,
                n_reps: rep.n_reps,
                seed: rep.seed,
                mean_sq_error: rep.mean_sq_error,
                std_error: rep.std_error,
                rate_value: rep.rate_value,
                ratio: rep.ratio,
                zone: rep.zone,
                config_max_ratio: max_ratio,
            });
        }
    }
    Ok(table)
}

/// Known-noise `L̂` next to the plug-in `L̃` and the adaptive `L̃′`, all run
/// on the same noise draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownUnknownReport {
    /// `L̂`, ratio to `ψ^L`.
    pub known: RiskReport,
    /// `L̃`, ratio to `ψ^L`.
    pub plug_in: RiskReport,
    /// `L̃′`, ratio to `σ²s² log d`.
    pub adaptive: RiskReport,
}

pub fn compare_known_unknown_sigma(
    config: &ExperimentConfig,
    witness: &Witness,
) -> Result<KnownUnknownReport> {
    let s = match config.class()? {
        SparsityClass::B0 { s } => s,
        other => {
            return Err(Error::UnsupportedRegime(format!(
                "the known/unknown comparison runs on B0(s), got {other}"
            )))
        }
    };
    if s * s > config.d {
        return Err(Error::UnsupportedRegime(format!(
            "the plug-in linear rule needs s <= sqrt(d); got s = {s}, d = {}",
            config.d
        )));
    }
    let with = |noise, variant| ExperimentConfig {
        functional: Functional::L,
        noise,
        variant,
        positive_part: false,
        ..config.clone()
    };
    Ok(KnownUnknownReport {
        known: monte_carlo_risk(&with(NoiseLevel::Known, Variant::ExactRate), witness)?,
        plug_in: monte_carlo_risk(&with(NoiseLevel::Unknown, Variant::ExactRate), witness)?,
        adaptive: monte_carlo_risk(&with(NoiseLevel::Unknown, Variant::AdaptiveLogd), witness)?,
    })
}

/// Behaviour of `σ̂` over repeated draws at a fixed `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaHatReport {
    pub sigma: f64,
    /// Empirical `E σ̂²`.
    pub mean_sq: f64,
    pub std_error: f64,
    pub min: f64,
    pub max: f64,
    /// Replications with `σ̂ ≤ σ`.
    pub count_at_or_below_sigma: usize,
    pub n_reps: usize,
    pub seed: u64,
}

pub fn sigma_hat_study(
    theta: &ParameterVector,
    sigma: f64,
    n_reps: usize,
    seed: u64,
) -> Result<SigmaHatReport> {
    check_positive("sigma", sigma)?;
    if n_reps == 0 {
        return Err(Error::invalid("n_reps", "must be at least 1"));
    }
    if theta.d() < 3 {
        return Err(Error::DimensionTooSmall {
            d: theta.d(),
            min: 3,
        });
    }
    let values: Vec<f64> = (0..n_reps)
        .into_par_iter()
        .map_init(Vec::new, |buf, rep| {
            let mut rng = stream_rng(seed, 0x5167, rep as u64);
            fill_observation(theta.as_slice(), sigma, &mut rng, buf);
            estimate_sigma_hat(buf)
        })
        .collect::<Result<_>>()?;
    let squares: Vec<f64> = values.iter().map(|v| v * v).collect();
    let (mean_sq, std_error) = mean_and_stderr(&squares);
    Ok(SigmaHatReport {
        sigma,
        mean_sq,
        std_error,
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        count_at_or_below_sigma: values.iter().filter(|&&v| v <= sigma).count(),
        n_reps,
        seed,
    })
}
