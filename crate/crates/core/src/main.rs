use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sparse_functionals::estimators::{EstimatorSpec, NoiseLevel, Variant};
use sparse_functionals::harness::{risk_sweep, sigma_hat_study, ExperimentConfig};
use sparse_functionals::io::{load_record, read_vectors_csv};
use sparse_functionals::lower_bounds::{
    chi2_bound_signed_prior, chi2_bound_uniform_prior, chi2_exact_signed_prior,
    chi2_exact_uniform_prior,
};
use sparse_functionals::model::{Ball, ObservationBatch, ParameterVector, SparsityClass};
use sparse_functionals::rates::{
    effective_sparsity, rate_l2norm, rate_l2norm_bq, rate_linear_b0, rate_linear_bq,
    rate_quadratic, rate_quadratic_bq, Functional, RateValue,
};
use sparse_functionals::testing::{evaluate_test_risk, TestSpec};
use sparse_functionals::{Error, Result};

#[derive(Parser)]
#[command(
    name = "sparse-functionals",
    version,
    about = "Rates, estimators and Monte Carlo risk for sparse functionals in the Gaussian sequence model"
)]
struct Cli {
    /// Master seed for every simulation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the minimax rates and zones over a parameter grid.
    Rates(RatesArgs),
    /// Apply an estimator to observations read from a JSON record or CSV file.
    Estimate(EstimateArgs),
    /// Monte Carlo risk of one experiment configuration over its witnesses.
    McRisk(McRiskArgs),
    /// Monte Carlo risk over a grid of configurations.
    RiskSweep(RiskSweepArgs),
    /// Empirical risk curve of the norm-based test over a grid of multipliers A.
    TestPower(TestPowerArgs),
    /// Chi-square divergence of a spiked prior mixture from pure noise.
    Chi2(Chi2Args),
    /// Noise-level estimate of observed vectors, or its behaviour by simulation.
    SigmaHat(SigmaHatArgs),
}

#[derive(Args)]
struct RatesArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    d: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    s: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FunctionalArg {
    #[value(name = "L")]
    L,
    #[value(name = "Q")]
    Q,
    #[value(name = "norm")]
    Norm,
}

impl From<FunctionalArg> for Functional {
    fn from(f: FunctionalArg) -> Self {
        match f {
            FunctionalArg::L => Functional::L,
            FunctionalArg::Q => Functional::Q,
            FunctionalArg::Norm => Functional::SqrtQ,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClassArg {
    B0,
    Bq,
    B2b0,
}

#[derive(Args)]
struct EstimateArgs {
    /// JSON record (`.json`) or one-vector-per-line CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    functional: FunctionalArg,
    #[arg(long, value_enum)]
    class: ClassArg,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Noise level, or `unknown` to use the data-driven rules.
    #[arg(long)]
    sigma: Option<String>,
    /// With unknown noise, threshold at σ̂√(2 log d).
    #[arg(long)]
    adaptive: bool,
    /// Clip the quadratic estimate at zero.
    #[arg(long)]
    positive_part: bool,
}

#[derive(Args)]
struct McRiskArgs {
    /// ExperimentConfig JSON file; `--seed` overrides its seed when given.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct RiskSweepArgs {
    /// JSON array of ExperimentConfig documents.
    #[arg(long)]
    grid: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AltArg {
    ThetaQu,
    ThetaS,
    ThetaSStar,
}

#[derive(Args)]
struct TestPowerArgs {
    #[arg(long, value_enum)]
    alt: AltArg,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    u: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long = "A-grid", alias = "a-grid", value_delimiter = ',', default_values_t = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0])]
    a_grid: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    /// Restrict the alternatives to this witness label.
    #[arg(long)]
    witness: Option<String>,
}

#[derive(Args)]
struct Chi2Args {
    #[arg(long)]
    s: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    rho: f64,
    #[arg(long)]
    signed: bool,
    #[arg(long)]
    exact: bool,
}

#[derive(Args)]
struct SigmaHatArgs {
    /// Observations to estimate from; without it a simulation study runs.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 1024)]
    d: usize,
    /// Number of spikes in the simulated θ.
    #[arg(long, default_value_t = 0)]
    s: usize,
    /// Size of the simulated spikes.
    #[arg(long, default_value_t = 10.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
}

fn open_output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn write_rows<T: Serialize>(out: &mut dyn Write, format: Format, rows: &[T]) -> Result<()> {
    match format {
        Format::Json => write_json(out, &rows),
        Format::Csv => {
            let mut wtr = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(out);
            for row in rows {
                wtr.serialize(row)?;
            }
            wtr.flush()?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct RateRow {
    d: usize,
    s: Option<usize>,
    q: Option<f64>,
    r: Option<f64>,
    kappa: Option<f64>,
    sigma: f64,
    m: Option<usize>,
    functional: Functional,
    class: &'static str,
    value: f64,
    zone: String,
    equivalent: Option<f64>,
}

fn rates(args: &RatesArgs) -> Result<Vec<RateRow>> {
    let sigma = args.sigma;
    let mut rows = Vec::new();
    let row = |d, s, m, class, rate: RateValue| RateRow {
        d,
        s,
        q: if class == "Bq" { args.q } else { None },
        r: if class == "Bq" { args.r } else { None },
        kappa: if class == "B2_cap_B0" {
            args.kappa
        } else {
            None
        },
        sigma,
        m,
        functional: rate.functional,
        class,
        value: rate.value,
        zone: rate.zone.to_string(),
        equivalent: rate.equivalent,
    };
    for &d in &args.d {
        for &s in &args.s {
            if s == 0 || s > d {
                continue;
            }
            rows.push(row(d, Some(s), None, "B0", rate_linear_b0(s, d, sigma)?));
            if let Some(kappa) = args.kappa {
                rows.push(row(
                    d,
                    Some(s),
                    None,
                    "B2_cap_B0",
                    rate_quadratic(s, d, sigma, kappa)?,
                ));
            }
            rows.push(row(d, Some(s), None, "B0", rate_l2norm(s, d, sigma)?));
        }
        if let (Some(q), Some(r)) = (args.q, args.r) {
            let m = Some(effective_sparsity(r, sigma, q, d)?);
            if q <= 1.0 {
                rows.push(row(d, None, m, "Bq", rate_linear_bq(r, sigma, q, d)?));
            }
            if q < 2.0 {
                rows.push(row(d, None, m, "Bq", rate_quadratic_bq(r, sigma, q, d)?));
                rows.push(row(d, None, m, "Bq", rate_l2norm_bq(r, sigma, q, d)?));
            }
        }
    }
    Ok(rows)
}

/// Observations from a JSON record or CSV. An explicit `sigma` wins over the
/// record's; `None` means the noise level is unknown to the estimator.
fn read_observations(
    path: &Path,
    sigma: Option<f64>,
    known: bool,
) -> Result<Vec<ObservationBatch>> {
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    // the estimators ignore σ when it is unknown; any positive placeholder works
    let fallback = if known { sigma } else { Some(1.0) };
    if is_json {
        let mut record = load_record(path)?;
        if sigma.is_some() {
            record.sigma = sigma;
        }
        Ok(vec![record.observation(fallback)?])
    } else {
        let sigma = fallback.ok_or_else(|| Error::invalid("sigma", "required with CSV input"))?;
        read_vectors_csv(File::open(path)?)?
            .into_iter()
            .map(|y| ObservationBatch::new(y, sigma))
            .collect()
    }
}

fn estimate(args: &EstimateArgs) -> Result<Vec<serde_json::Value>> {
    let class = match args.class {
        ClassArg::B0 => SparsityClass::B0 {
            s: args
                .s
                .ok_or_else(|| Error::invalid("s", "required for b0"))?,
        },
        ClassArg::B2b0 => SparsityClass::B2B0 {
            kappa: args
                .kappa
                .ok_or_else(|| Error::invalid("kappa", "required for b2b0"))?,
            s: args
                .s
                .ok_or_else(|| Error::invalid("s", "required for b2b0"))?,
        },
        ClassArg::Bq => SparsityClass::Bq {
            q: args
                .q
                .ok_or_else(|| Error::invalid("q", "required for bq"))?,
            r: args
                .r
                .ok_or_else(|| Error::invalid("r", "required for bq"))?,
        },
    };
    let (noise, sigma) = match args.sigma.as_deref() {
        Some("unknown") => (NoiseLevel::Unknown, None),
        Some(v) => (
            NoiseLevel::Known,
            Some(
                v.parse::<f64>()
                    .map_err(|e| Error::invalid("sigma", e.to_string()))?,
            ),
        ),
        None => (NoiseLevel::Known, None),
    };
    if args.adaptive && noise == NoiseLevel::Known {
        return Err(Error::invalid("adaptive", "requires --sigma unknown"));
    }
    let spec = EstimatorSpec {
        functional: args.functional.into(),
        class,
        noise,
        variant: if args.adaptive {
            Variant::AdaptiveLogd
        } else {
            Variant::ExactRate
        },
        positive_part: args.positive_part,
    };
    let mut out = Vec::new();
    for obs in read_observations(&args.input, sigma, noise == NoiseLevel::Known)? {
        let e = spec.apply(&obs)?;
        out.push(serde_json::json!({
            "functional": spec.functional,
            "class": class.tag(),
            "value": e.value,
            "branch": e.branch,
            "threshold": e.threshold,
            "sigma_used": e.sigma_used,
            "d": obs.d(),
        }));
    }
    Ok(out)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(io::BufReader::new(File::open(
        path,
    )?))?)
}

fn test_power(args: &TestPowerArgs, seed: u64) -> Result<Vec<TestPowerRow>> {
    let need_s = || {
        args.s
            .ok_or_else(|| Error::invalid("s", "required for this alternative"))
    };
    let alternative = match args.alt {
        AltArg::ThetaQu => {
            let ball = match (args.s, args.q, args.u) {
                (Some(s), None, None) => Ball::L0 { s },
                (None, Some(q), Some(r)) => Ball::Lq { q, r },
                _ => return Err(Error::invalid("alt", "theta-qu needs --s, or --q and --u")),
            };
            SparsityClass::ThetaQu { ball, delta: 1.0 }
        }
        AltArg::ThetaS => SparsityClass::ThetaS {
            s: need_s()?,
            delta: 1.0,
        },
        AltArg::ThetaSStar => SparsityClass::ThetaSStar {
            s: need_s()?,
            delta: 1.0,
        },
    };
    let mut rows = Vec::new();
    for &a in &args.a_grid {
        let spec = TestSpec::new(alternative, a, args.sigma, args.d)?;
        let mut witnesses = spec.default_witnesses()?;
        if let Some(label) = &args.witness {
            witnesses.retain(|w| &w.label == label);
        }
        let r = evaluate_test_risk(&spec, &witnesses, args.reps, seed)?;
        rows.push(TestPowerRow {
            a,
            type_one: r.type_one,
            max_type_two: r.max_type_two,
            total: r.total,
            stderr_total: r.stderr_total,
        });
    }
    Ok(rows)
}

#[derive(Serialize)]
struct TestPowerRow {
    #[serde(rename = "A")]
    a: f64,
    type_one: f64,
    max_type_two: f64,
    total: f64,
    stderr_total: f64,
}

#[derive(Serialize)]
struct Chi2Output {
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<f64>,
    bound: f64,
    rho: f64,
    s: usize,
    d: usize,
}

fn run(cli: Cli) -> Result<()> {
    let mut out = open_output(&cli.out)?;
    match &cli.command {
        Command::Rates(args) => write_rows(&mut *out, cli.format, &rates(args)?)?,
        Command::Estimate(args) => {
            let mut values = estimate(args)?;
            if values.len() == 1 {
                write_json(&mut *out, &values.remove(0))?;
            } else {
                write_json(&mut *out, &values)?;
            }
        }
        Command::McRisk(args) => {
            let mut config: ExperimentConfig = read_json(&args.config)?;
            if cli.seed != 0 {
                config.seed = cli.seed;
            }
            let table = risk_sweep(std::slice::from_ref(&config))?;
            if cli.out.is_none() && config.output.is_some() {
                out = open_output(&config.output)?;
            }
            write_rows(&mut *out, cli.format, &table.rows)?;
        }
        Command::RiskSweep(args) => {
            let mut grid: Vec<ExperimentConfig> = read_json(&args.grid)?;
            if cli.seed != 0 {
                for c in &mut grid {
                    c.seed = cli.seed;
                }
            }
            write_rows(&mut *out, cli.format, &risk_sweep(&grid)?.rows)?;
        }
        Command::TestPower(args) => {
            write_rows(&mut *out, cli.format, &test_power(args, cli.seed)?)?;
        }
        Command::Chi2(args) => {
            let (bound, exact) = if args.signed {
                (
                    chi2_bound_signed_prior(args.s, args.d, args.rho)?,
                    args.exact
                        .then(|| chi2_exact_signed_prior(args.s, args.d, args.rho))
                        .transpose()?,
                )
            } else {
                (
                    chi2_bound_uniform_prior(args.s, args.d, args.rho)?,
                    args.exact
                        .then(|| chi2_exact_uniform_prior(args.s, args.d, args.rho))
                        .transpose()?,
                )
            };
            write_json(
                &mut *out,
                &Chi2Output {
                    exact,
                    bound,
                    rho: args.rho,
                    s: args.s,
                    d: args.d,
                },
            )?;
        }
        Command::SigmaHat(args) => match &args.input {
            Some(path) => {
                let values = read_observations(path, None, false)?
                    .iter()
                    .map(|obs| sparse_functionals::estimators::estimate_sigma_hat(obs.y()))
                    .collect::<Result<Vec<f64>>>()?;
                write_json(&mut *out, &serde_json::json!({ "sigma_hat": values }))?;
            }
            None => {
                let theta = ParameterVector::spikes(args.d, args.s, args.amplitude)?;
                let report = sigma_hat_study(&theta, args.sigma, args.reps, cli.seed)?;
                match cli.format {
                    Format::Json => write_json(&mut *out, &report)?,
                    Format::Csv => {
                        write_rows(&mut *out, cli.format, std::slice::from_ref(&report))?
                    }
                }
            }
        },
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
