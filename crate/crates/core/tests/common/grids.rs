//! Experiment grids shared by the calibration example and the acceptance
//! suite. Changing anything here invalidates `fixtures/calibration.json`.

use sparse_functionals::estimators::{NoiseLevel, Variant};
use sparse_functionals::harness::ExperimentConfig;
use sparse_functionals::model::isqrt;
use sparse_functionals::rates::{psi_bar, Functional};

pub const SEED: u64 = 20_240_601;
pub const RISK_REPS: usize = 2000;
pub const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/calibration.json");

fn config(id: String, functional: Functional, d: usize, s: usize, sigma: f64) -> ExperimentConfig {
    ExperimentConfig {
        id,
        n_reps: RISK_REPS,
        seed: SEED,
        ..ExperimentConfig::sparse(functional, d, s, sigma)
    }
}

/// `d ∈ {64, 256, 1024}`, `s ∈ {1, ⌊d^{1/4}⌋, ⌊√d⌋, d}`, `σ ∈ {0.5, 1}`, with
/// `L̂`, `N̂`, and `Q̂` at three radii: below the gate, above it, and in the
/// variance-dominated zone.
pub fn risk_grid() -> Vec<ExperimentConfig> {
    let mut grid = Vec::new();
    for d in [64usize, 256, 1024] {
        for s in [1, isqrt(isqrt(d)), isqrt(d), d] {
            for sigma in [0.5, 1.0] {
                let tag = format!("d={d}/s={s}/sigma={sigma}");
                grid.push(config(format!("L/{tag}"), Functional::L, d, s, sigma));
                grid.push(config(
                    format!("sqrtQ/{tag}"),
                    Functional::SqrtQ,
                    d,
                    s,
                    sigma,
                ));
                let bar = psi_bar(s, d, sigma);
                let radii = [
                    ("gated", 0.5 * bar.powf(0.25)),
                    ("active", 4.0 * bar.powf(0.25)),
                    ("variance", 4.0 * bar.sqrt() / sigma),
                ];
                for (label, kappa) in radii {
                    let mut c = config(format!("Q-{label}/{tag}"), Functional::Q, d, s, sigma);
                    c.kappa = Some(kappa);
                    grid.push(c);
                }
            }
        }
    }
    grid
}

pub const UNKNOWN_D: usize = 1024;
pub const UNKNOWN_S: [usize; 3] = [1, 4, 16];

/// `L̃`, `L̃′` and `Q̃` (with `κ = σ s log d`) at `d = 1024`, `σ = 1`.
pub fn unknown_sigma_grid() -> Vec<ExperimentConfig> {
    let d = UNKNOWN_D;
    let mut grid = Vec::new();
    for s in UNKNOWN_S {
        let mut plug_in = config(format!("Ltilde/s={s}"), Functional::L, d, s, 1.0);
        plug_in.noise = NoiseLevel::Unknown;
        grid.push(plug_in.clone());
        grid.push(ExperimentConfig {
            id: format!("Ltilde_prime/s={s}"),
            variant: Variant::AdaptiveLogd,
            ..plug_in
        });
        let mut q = config(format!("Qtilde/s={s}"), Functional::Q, d, s, 1.0);
        q.noise = NoiseLevel::Unknown;
        q.kappa = Some(s as f64 * (d as f64).ln());
        grid.push(q);
    }
    grid
}

/// `N̂` at `d = 256`, `s = 16`, `σ = 1`; eight times its largest risk ratio is
/// the constant of the Chebyshev envelope for the test risk.
pub fn c_star_config() -> ExperimentConfig {
    config(
        "c_star/sqrtQ/d=256/s=16".into(),
        Functional::SqrtQ,
        256,
        16,
        1.0,
    )
}

/// Chebyshev on both error terms: each is at most `4·ratio/A²`.
pub const C_STAR_FACTOR: f64 = 8.0;
