//! `zibr` command line: maximum-likelihood zero-inflated Beta mixed models
//! for longitudinal proportion data.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use zibr::cli::{self, parse_config_file, RunConfig};
use zibr::saem::StepSchedule;

#[derive(Parser)]
#[command(name = "zibr", version, about = "Zero-inflated Beta mixed models by stochastic approximation EM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model to a long-format CSV and write estimates, standard
    /// errors, log-likelihood and the iteration trace
    Fit(CommonArgs),
    /// Generate a synthetic treatment/control dataset
    Simulate(CommonArgs),
    /// Likelihood-ratio test of a reduced model against the full model
    Lrt(CommonArgs),
    /// Fit and report Wald tests for every parameter
    Wald(CommonArgs),
    /// Monte Carlo study harness (estimation accuracy, type-I error, power)
    Bench(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Long-format CSV input: subject,time,y,<covariates>
    input: Option<PathBuf>,

    /// Key=value config file; flags override file entries
    #[arg(long)]
    config: Option<PathBuf>,

    /// Exploration-phase iterations (stepsize 1)
    #[arg(long)]
    k1: Option<usize>,

    /// Decreasing-stepsize iterations
    #[arg(long)]
    k2: Option<usize>,

    /// Number of Markov chains
    #[arg(long)]
    chains: Option<usize>,

    /// Importance-sampling draws per individual
    #[arg(long = "is-samples")]
    is_samples: Option<usize>,

    /// Importance-sampling proposal degrees of freedom
    #[arg(long = "is-df")]
    is_df: Option<f64>,

    /// Master seed (required; there is no wall-clock default)
    #[arg(long)]
    seed: Option<u64>,

    /// Comma-separated logistic-part covariate columns
    #[arg(long = "x-cols", value_delimiter = ',')]
    x_cols: Option<Vec<String>>,

    /// Comma-separated Beta-part covariate columns
    #[arg(long = "z-cols", value_delimiter = ',')]
    z_cols: Option<Vec<String>>,

    /// Reduced-model covariates for lrt, e.g. "x=;z=" or "x=treat;z="
    #[arg(long)]
    reduced: Option<String>,

    /// Study scenario: setting1|setting2|appendixa|lrt_null|wald_null|power_grid
    #[arg(long)]
    scenario: Option<String>,

    /// Replicates per study
    #[arg(long)]
    replicates: Option<usize>,

    /// MCAR dropout fraction in (0, 1)
    #[arg(long)]
    dropout: Option<f64>,

    /// Re-interpolate dropped datasets back to the balanced design
    #[arg(long)]
    interpolate: bool,

    /// Output directory for all artifacts
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (sub, args) = match &cli.command {
        Command::Fit(a) => (cli::Subcommand::Fit, a),
        Command::Simulate(a) => (cli::Subcommand::Simulate, a),
        Command::Lrt(a) => (cli::Subcommand::Lrt, a),
        Command::Wald(a) => (cli::Subcommand::Wald, a),
        Command::Bench(a) => (cli::Subcommand::Bench, a),
    };
    match build_config(sub, args).and_then(|config| cli::run(&config)) {
        Ok(written) => {
            for path in written {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error kind={} message=\"{}\"", error_kind(&e), e);
            ExitCode::FAILURE
        }
    }
}

fn error_kind(e: &zibr::Error) -> &'static str {
    use zibr::Error::*;
    match e {
        DimensionMismatch(_) => "dimension",
        Domain(_) => "domain",
        Validation(_) => "validation",
        Csv { .. } => "csv",
        Numerical(_) => "numerical",
        WeightUnderflow { .. } => "weight_underflow",
        Io(_) => "io",
    }
}

fn build_config(sub: cli::Subcommand, args: &CommonArgs) -> zibr::Result<RunConfig> {
    let file = match &args.config {
        Some(path) => parse_config_file(path)?,
        None => Default::default(),
    };
    let get = |key: &str| file.get(key).map(String::as_str);
    let parse_err =
        |key: &str| zibr::Error::Validation(format!("config value for '{key}' does not parse"));

    macro_rules! merged {
        ($flag:expr, $key:literal, $ty:ty) => {
            match (&$flag, get($key)) {
                (Some(v), _) => Some(v.clone()),
                (None, Some(s)) => {
                    Some(s.parse::<$ty>().map_err(|_| parse_err($key))?)
                }
                (None, None) => None,
            }
        };
    }

    let seed = merged!(args.seed, "seed", u64)
        .ok_or_else(|| zibr::Error::Validation("--seed is required".into()))?;
    let out = match (&args.out, get("out")) {
        (Some(p), _) => p.clone(),
        (None, Some(s)) => PathBuf::from(s),
        (None, None) => {
            return Err(zibr::Error::Validation("--out is required".into()));
        }
    };

    let mut config = RunConfig::new(sub, seed, out);
    config.input = match (&args.input, get("input")) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(s)) => Some(PathBuf::from(s)),
        (None, None) => None,
    };
    if let Some(k1) = merged!(args.k1, "k1", usize) {
        config.schedule = StepSchedule { k1, ..config.schedule };
    }
    if let Some(k2) = merged!(args.k2, "k2", usize) {
        config.schedule = StepSchedule { k2, ..config.schedule };
    }
    if let Some(chains) = merged!(args.chains, "chains", usize) {
        config.chains = chains;
    }
    if let Some(k) = merged!(args.is_samples, "is_samples", usize) {
        config.is_samples = k;
    }
    if let Some(nu) = merged!(args.is_df, "is_df", f64) {
        config.is_df = nu;
    }
    config.x_cols = match (&args.x_cols, get("x_cols")) {
        (Some(v), _) => v.clone(),
        (None, Some(s)) if !s.is_empty() => s.split(',').map(str::to_string).collect(),
        _ => vec![],
    };
    config.z_cols = match (&args.z_cols, get("z_cols")) {
        (Some(v), _) => v.clone(),
        (None, Some(s)) if !s.is_empty() => s.split(',').map(str::to_string).collect(),
        _ => vec![],
    };
    config.reduced = merged!(args.reduced, "reduced", String);
    config.scenario = merged!(args.scenario, "scenario", String);
    config.replicates = merged!(args.replicates, "replicates", usize);
    config.dropout = merged!(args.dropout, "dropout", f64);
    config.interpolate = args.interpolate
        || get("interpolate").map(|s| s == "true").unwrap_or(false);
    Ok(config)
}
