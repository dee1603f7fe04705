//! Command-line entry points: long-format CSV ingestion, configuration
//! merging, and the fit / simulate / lrt / wald / bench subcommands with
//! their output artifacts.
//!
//! Data files are long format with a header, one row per observation:
//! `subject,time,y,<covariate columns>`. Missing observations are absent
//! rows, never sentinels, so unbalanced designs need no special handling.
//! Lines starting with `#` are ignored. Every artifact written by `run`
//! embeds the crate version, the seed and a hash of the effective
//! configuration, and `manifest.txt` doubles as a config file that replays
//! the run bit-identically.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec;
use crate::inference::{self, TestMethod, TestResult};
use crate::loglik::{loglik_is, IsConfig};
use crate::model::{Dataset, Individual, Observation};
use crate::saem::{default_init, fit, FitResult, StepSchedule};
use crate::sampler::McmcConfig;
use crate::simulate::{generate, SimConfig};
use crate::study::{run_study, write_report, Scenario, StudySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Fit,
    Simulate,
    Lrt,
    Wald,
    Bench,
}

impl std::fmt::Display for Subcommand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Subcommand::Fit => "fit",
            Subcommand::Simulate => "simulate",
            Subcommand::Lrt => "lrt",
            Subcommand::Wald => "wald",
            Subcommand::Bench => "bench",
        })
    }
}

/// Effective configuration of one invocation, after merging config file and
/// flags. The seed is mandatory: there is no wall-clock default.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub schedule: StepSchedule,
    pub chains: usize,
    pub mcmc: McmcConfig,
    pub is_samples: usize,
    pub is_df: f64,
    pub seed: u64,
    pub x_cols: Vec<String>,
    pub z_cols: Vec<String>,
    /// Reduced-model covariate spec for `lrt`, e.g. `x=;z=` or `x=treat;z=`.
    pub reduced: Option<String>,
    pub scenario: Option<String>,
    pub replicates: Option<usize>,
    pub dropout: Option<f64>,
    pub interpolate: bool,
}

impl RunConfig {
    pub fn new(subcommand: Subcommand, seed: u64, out: PathBuf) -> Self {
        RunConfig {
            subcommand,
            input: None,
            out,
            schedule: StepSchedule { k1: 750, k2: 250 },
            chains: 5,
            mcmc: McmcConfig::default(),
            is_samples: 500,
            is_df: 5.0,
            seed,
            x_cols: vec![],
            z_cols: vec![],
            reduced: None,
            scenario: None,
            replicates: None,
            dropout: None,
            interpolate: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schedule.k1 == 0 || self.schedule.k2 == 0 {
            return Err(Error::Validation("k1 and k2 must both be >= 1".into()));
        }
        if self.chains == 0 {
            return Err(Error::Validation("chains must be >= 1".into()));
        }
        if self.is_samples == 0 || !(self.is_df > 0.0) {
            return Err(Error::Validation("is-samples must be >= 1 and is-df > 0".into()));
        }
        self.mcmc.validate()?;
        if let Some(f) = self.dropout {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Validation("dropout must be in (0, 1)".into()));
            }
        }
        match self.subcommand {
            Subcommand::Fit | Subcommand::Lrt | Subcommand::Wald => {
                if self.input.is_none() {
                    return Err(Error::Validation(format!(
                        "{} requires an input CSV path",
                        self.subcommand
                    )));
                }
                if self.subcommand == Subcommand::Lrt && self.reduced.is_none() {
                    return Err(Error::Validation(
                        "lrt requires --reduced (e.g. \"x=;z=\" for the no-covariate null)"
                            .into(),
                    ));
                }
            }
            Subcommand::Simulate | Subcommand::Bench => {}
        }
        Ok(())
    }

    /// Manifest body (without the hash line).
    fn manifest_body(&self) -> String {
        let mut s = self.hashed_body();
        let _ = writeln!(s, "out={}", self.out.display());
        s
    }

    /// The portion of the configuration that determines the outputs; the
    /// output directory is excluded so a replay into a fresh directory is
    /// bit-identical.
    fn hashed_body(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "version={}", crate::VERSION);
        let _ = writeln!(s, "command={}", self.subcommand);
        let _ = writeln!(s, "seed={}", self.seed);
        if let Some(input) = &self.input {
            let _ = writeln!(s, "input={}", input.display());
        }
        let _ = writeln!(s, "k1={}", self.schedule.k1);
        let _ = writeln!(s, "k2={}", self.schedule.k2);
        let _ = writeln!(s, "chains={}", self.chains);
        let _ = writeln!(s, "n_kernels={}", self.mcmc.n_kernels_per_sstep);
        let _ = writeln!(s, "rw_scale_a={}", self.mcmc.rw_scale_a);
        let _ = writeln!(s, "rw_scale_b={}", self.mcmc.rw_scale_b);
        let _ = writeln!(s, "adapt={}", self.mcmc.adapt);
        let _ = writeln!(s, "target_acceptance={}", self.mcmc.target_acceptance);
        let _ = writeln!(s, "is_samples={}", self.is_samples);
        let _ = writeln!(s, "is_df={}", self.is_df);
        let _ = writeln!(s, "x_cols={}", self.x_cols.join(","));
        let _ = writeln!(s, "z_cols={}", self.z_cols.join(","));
        if let Some(reduced) = &self.reduced {
            let _ = writeln!(s, "reduced={reduced}");
        }
        if let Some(scenario) = &self.scenario {
            let _ = writeln!(s, "scenario={scenario}");
        }
        if let Some(replicates) = self.replicates {
            let _ = writeln!(s, "replicates={replicates}");
        }
        if let Some(dropout) = self.dropout {
            let _ = writeln!(s, "dropout={dropout}");
        }
        let _ = writeln!(s, "interpolate={}", self.interpolate);
        s
    }

    /// Hex SHA-256 of the output-determining configuration.
    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.hashed_body().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn stamp(&self) -> String {
        format!(
            "# version={} seed={} config_hash={}\n",
            crate::VERSION,
            self.seed,
            self.config_hash()
        )
    }
}

/// Parse a `key=value` config file (the manifest format). Unknown keys are
/// rejected so typos surface instead of silently using defaults.
pub fn parse_config_file(path: &Path) -> Result<HashMap<String, String>> {
    const KNOWN: &[&str] = &[
        "version",
        "command",
        "seed",
        "input",
        "out",
        "k1",
        "k2",
        "chains",
        "n_kernels",
        "rw_scale_a",
        "rw_scale_b",
        "adapt",
        "target_acceptance",
        "is_samples",
        "is_df",
        "x_cols",
        "z_cols",
        "reduced",
        "scenario",
        "replicates",
        "dropout",
        "interpolate",
        "config_hash",
    ];
    let text = std::fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Csv {
                line: lineno + 1,
                message: format!("expected key=value, got '{line}'"),
            });
        };
        if !KNOWN.contains(&key) {
            return Err(Error::Csv {
                line: lineno + 1,
                message: format!("unknown config key '{key}'"),
            });
        }
        map.insert(key.to_string(), value.to_string());
    }
    Ok(map)
}

// ---------------------------------------------------------------------------
// CSV ingestion / emission
// ---------------------------------------------------------------------------

/// Parse a long-format CSV into a dataset, selecting the logistic and Beta
/// covariates by column name. Rows are grouped by subject (order of first
/// appearance) and sorted by time within subject.
pub fn ingest_csv(path: &Path, x_cols: &[String], z_cols: &[String]) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    ingest_csv_str(&text, x_cols, z_cols)
}

pub fn ingest_csv_str(text: &str, x_cols: &[String], z_cols: &[String]) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let (header_line, header) = loop {
        match lines.next() {
            Some((i, l)) if l.trim_start().starts_with('#') || l.trim().is_empty() => {
                let _ = i;
                continue;
            }
            Some((i, l)) => break (i + 1, l),
            None => return Err(Error::Csv { line: 1, message: "empty file".into() }),
        }
    };
    let columns: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    let col_index = |name: &str, what: &str| -> Result<usize> {
        columns.iter().position(|c| *c == name).ok_or_else(|| Error::Csv {
            line: header_line,
            message: format!("missing {what} column '{name}'"),
        })
    };
    let subject_idx = col_index("subject", "required")?;
    let time_idx = col_index("time", "required")?;
    let y_idx = col_index("y", "required")?;
    let x_idx: Vec<usize> =
        x_cols.iter().map(|c| col_index(c, "covariate")).collect::<Result<_>>()?;
    let z_idx: Vec<usize> =
        z_cols.iter().map(|c| col_index(c, "covariate")).collect::<Result<_>>()?;

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<Observation>> = HashMap::new();
    let mut seen: std::collections::HashSet<(String, u64)> = std::collections::HashSet::new();

    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim_start().starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::Csv {
                line: line_no,
                message: format!("expected {} fields, got {}", columns.len(), fields.len()),
            });
        }
        let parse = |idx: usize| -> Result<f64> {
            fields[idx].parse::<f64>().map_err(|_| Error::Csv {
                line: line_no,
                message: format!(
                    "non-numeric value '{}' in column '{}'",
                    fields[idx], columns[idx]
                ),
            })
        };
        let subject = fields[subject_idx].to_string();
        let time = parse(time_idx)?;
        let y = parse(y_idx)?;
        if !(0.0..1.0).contains(&y) {
            let hint = if y == 1.0 { " (rescale outcomes by (n-1)/n before ingestion)" } else { "" };
            return Err(Error::Csv {
                line: line_no,
                message: format!("y = {y} outside [0, 1){hint}"),
            });
        }
        if !seen.insert((subject.clone(), time.to_bits())) {
            return Err(Error::Csv {
                line: line_no,
                message: format!("duplicate (subject, time) = ({subject}, {time})"),
            });
        }
        let x: Vec<f64> = x_idx.iter().map(|&idx| parse(idx)).collect::<Result<_>>()?;
        let z: Vec<f64> = z_idx.iter().map(|&idx| parse(idx)).collect::<Result<_>>()?;
        if !groups.contains_key(&subject) {
            order.push(subject.clone());
        }
        groups.entry(subject).or_default().push(Observation { time, y, x, z });
    }

    if order.is_empty() {
        return Err(Error::Csv { line: header_line, message: "no data rows".into() });
    }
    let individuals = order
        .into_iter()
        .map(|id| {
            let mut observations = groups.remove(&id).unwrap();
            observations.sort_by(|a, b| a.time.total_cmp(&b.time));
            Individual { id, observations }
        })
        .collect();
    Dataset::new(individuals, x_cols.len(), z_cols.len())
}

/// Serialize a dataset to the canonical long format. Covariate columns are
/// the x names followed by any z names not already present; a column shared
/// by both parts is written once.
pub fn emit_csv(data: &Dataset, x_cols: &[String], z_cols: &[String]) -> Result<String> {
    if x_cols.len() != data.p || z_cols.len() != data.r {
        return Err(Error::DimensionMismatch(
            "column name lists must match the dataset's covariate dimensions".into(),
        ));
    }
    let mut cov_cols: Vec<&String> = x_cols.iter().collect();
    for c in z_cols {
        if !cov_cols.contains(&c) {
            cov_cols.push(c);
        }
    }
    let mut s = String::from("subject,time,y");
    for c in &cov_cols {
        s.push(',');
        s.push_str(c);
    }
    s.push('\n');
    for ind in &data.individuals {
        for obs in &ind.observations {
            let _ = write!(s, "{},{},{}", ind.id, obs.time, obs.y);
            for c in &cov_cols {
                let v = if let Some(j) = x_cols.iter().position(|x| x == *c) {
                    obs.x[j]
                } else {
                    let j = z_cols.iter().position(|z| z == *c).unwrap();
                    obs.z[j]
                };
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// Subcommand dispatch
// ---------------------------------------------------------------------------

/// Execute one subcommand, writing all artifacts into `config.out`; returns
/// the paths written.
pub fn run(config: &RunConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    std::fs::create_dir_all(&config.out)?;
    let mut written = Vec::new();
    match config.subcommand {
        Subcommand::Fit => run_fit(config, &mut written)?,
        Subcommand::Simulate => run_simulate(config, &mut written)?,
        Subcommand::Lrt => run_lrt(config, &mut written)?,
        Subcommand::Wald => run_wald(config, &mut written)?,
        Subcommand::Bench => run_bench(config, &mut written)?,
    }
    written.push(write_artifact(config, "manifest.txt", {
        let mut body = config.manifest_body();
        let _ = writeln!(body, "config_hash={}", config.config_hash());
        body
    })?);
    Ok(written)
}

fn write_artifact(config: &RunConfig, name: &str, contents: String) -> Result<PathBuf> {
    let path = config.out.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

/// Stream tag derived from a covariate-column spec: identical model formulas
/// share fitting and importance-sampling streams, different formulas get
/// independent ones.
fn formula_tag(x_cols: &[String], z_cols: &[String]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(x_cols.join(",").as_bytes());
    hasher.update(b";");
    hasher.update(z_cols.join(",").as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

fn fit_model(
    config: &RunConfig,
    data: &Dataset,
    x_cols: &[String],
    z_cols: &[String],
) -> Result<(FitResult, f64, f64)> {
    let tag = formula_tag(x_cols, z_cols);
    let fit_seed = exec::stream_seed(config.seed, &[100, tag]);
    let init = default_init(data);
    let mut result = fit(data, &init, &config.schedule, config.chains, &config.mcmc, fit_seed)?;
    let is_config = IsConfig {
        k_samples: config.is_samples,
        nu: config.is_df,
        seed: exec::stream_seed(config.seed, &[200, tag]),
    };
    let (ll, mc_se) = loglik_is(&result.params, data, &result.conditional_moments, &is_config)?;
    result.loglik = Some((ll, mc_se));
    Ok((result, ll, mc_se))
}

fn estimates_table(config: &RunConfig, result: &FitResult) -> String {
    let mut s = config.stamp();
    s.push_str("parameter,estimate,se,wald_p\n");
    let values = result.params.to_vec();
    for (j, name) in result.param_names.iter().enumerate() {
        let (se, p) = match &result.std_errors {
            Some(se) if se[j] > 0.0 => {
                let w = inference::wald(values[j], se[j]);
                match w {
                    Ok(t) => (se[j].to_string(), t.p_value.to_string()),
                    Err(_) => (se[j].to_string(), String::new()),
                }
            }
            _ => (String::new(), String::new()),
        };
        let _ = writeln!(s, "{name},{},{se},{p}", values[j]);
    }
    s
}

fn trace_table(config: &RunConfig, result: &FitResult) -> String {
    let mut s = config.stamp();
    s.push_str("iteration,");
    s.push_str(&result.param_names.join(","));
    s.push('\n');
    for (q, params) in result.trace.iter().enumerate() {
        let _ = write!(s, "{}", q + 1);
        for v in params.to_vec() {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

fn loglik_file(config: &RunConfig, ll: f64, mc_se: f64) -> String {
    let mut s = config.stamp();
    let _ = writeln!(s, "loglik={ll}");
    let _ = writeln!(s, "mc_se={mc_se}");
    let _ = writeln!(s, "is_samples={}", config.is_samples);
    let _ = writeln!(s, "is_df={}", config.is_df);
    s
}

fn run_fit(config: &RunConfig, written: &mut Vec<PathBuf>) -> Result<()> {
    let data = ingest_csv(config.input.as_ref().unwrap(), &config.x_cols, &config.z_cols)?;
    let (result, ll, mc_se) = fit_model(config, &data, &config.x_cols, &config.z_cols)?;
    written.push(write_artifact(config, "estimates.csv", estimates_table(config, &result))?);
    written.push(write_artifact(config, "loglik.txt", loglik_file(config, ll, mc_se))?);
    written.push(write_artifact(config, "trace.csv", trace_table(config, &result))?);
    Ok(())
}

fn run_simulate(config: &RunConfig, written: &mut Vec<PathBuf>) -> Result<()> {
    let scenario = match &config.scenario {
        Some(s) => Scenario::parse(s)?,
        None => Scenario::Setting2,
    };
    let spec = StudySpec::for_scenario(scenario, config.seed);
    let data = generate(&SimConfig {
        params: spec.params.clone(),
        n_individuals: spec.n_individuals,
        t_per_individual: spec.t_per_individual,
        seed: config.seed,
    })?;
    let cols = vec!["treatment".to_string()];
    let mut contents = config.stamp();
    contents.push_str(&emit_csv(&data, &cols, &cols)?);
    written.push(write_artifact(config, "dataset.csv", contents)?);
    Ok(())
}

/// Parse a reduced-model spec of the form `x=a,b;z=c` (empty lists allowed).
fn parse_reduced(spec: &str) -> Result<(Vec<String>, Vec<String>)> {
    let mut x = None;
    let mut z = None;
    for part in spec.split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let Some((key, cols)) = part.split_once('=') else {
            return Err(Error::Validation(format!(
                "reduced spec part '{part}' is not of the form x=... or z=..."
            )));
        };
        let list: Vec<String> = if cols.trim().is_empty() {
            vec![]
        } else {
            cols.split(',').map(|c| c.trim().to_string()).collect()
        };
        match key.trim() {
            "x" => x = Some(list),
            "z" => z = Some(list),
            other => {
                return Err(Error::Validation(format!("unknown reduced-spec key '{other}'")))
            }
        }
    }
    match (x, z) {
        (Some(x), Some(z)) => Ok((x, z)),
        _ => Err(Error::Validation(
            "reduced spec must define both x= and z= (possibly empty)".into(),
        )),
    }
}

fn run_lrt(config: &RunConfig, written: &mut Vec<PathBuf>) -> Result<()> {
    let input = config.input.as_ref().unwrap();
    let (red_x, red_z) = parse_reduced(config.reduced.as_ref().unwrap())?;
    for c in red_x.iter().chain(&red_z) {
        if !config.x_cols.contains(c) && !config.z_cols.contains(c) {
            return Err(Error::Validation(format!(
                "reduced-model column '{c}' is not among the full model's columns"
            )));
        }
    }
    let full_data = ingest_csv(input, &config.x_cols, &config.z_cols)?;
    let reduced_data = ingest_csv(input, &red_x, &red_z)?;
    let (_, ll_full, _) = fit_model(config, &full_data, &config.x_cols, &config.z_cols)?;
    let (_, ll_reduced, _) = fit_model(config, &reduced_data, &red_x, &red_z)?;
    let df = (config.x_cols.len() + config.z_cols.len()) - (red_x.len() + red_z.len());

    let test: TestResult = if df == 0 {
        // Identical formulas share every stream, so the log-likelihoods are
        // equal and the test is degenerate.
        TestResult {
            statistic: (2.0 * (ll_full - ll_reduced)).max(0.0),
            df: 0,
            p_value: 1.0,
            method: TestMethod::Lrt,
            negative_clamped: false,
        }
    } else {
        inference::lrt(ll_full, ll_reduced, df)?
    };

    let mut s = config.stamp();
    let _ = writeln!(s, "statistic={}", test.statistic);
    let _ = writeln!(s, "df={}", test.df);
    let _ = writeln!(s, "p_value={}", test.p_value);
    let _ = writeln!(s, "loglik_full={ll_full}");
    let _ = writeln!(s, "loglik_reduced={ll_reduced}");
    let _ = writeln!(s, "negative_clamped={}", test.negative_clamped);
    written.push(write_artifact(config, "lrt.txt", s)?);
    Ok(())
}

fn run_wald(config: &RunConfig, written: &mut Vec<PathBuf>) -> Result<()> {
    let data = ingest_csv(config.input.as_ref().unwrap(), &config.x_cols, &config.z_cols)?;
    let (result, _, _) = fit_model(config, &data, &config.x_cols, &config.z_cols)?;
    let se = result.std_errors.as_ref().ok_or_else(|| {
        Error::Numerical(
            result
                .diagnostics
                .se_failure
                .clone()
                .unwrap_or_else(|| "standard errors unavailable".into()),
        )
    })?;
    let mut s = config.stamp();
    s.push_str("parameter,estimate,se,statistic,p_value\n");
    let values = result.params.to_vec();
    for (j, name) in result.param_names.iter().enumerate() {
        let t = inference::wald(values[j], se[j])?;
        let _ = writeln!(s, "{name},{},{},{},{}", values[j], se[j], t.statistic, t.p_value);
    }
    written.push(write_artifact(config, "wald.csv", s)?);
    written.push(write_artifact(config, "estimates.csv", estimates_table(config, &result))?);
    Ok(())
}

fn run_bench(config: &RunConfig, written: &mut Vec<PathBuf>) -> Result<()> {
    let scenario = match &config.scenario {
        Some(s) => Scenario::parse(s)?,
        None => return Err(Error::Validation("bench requires --scenario".into())),
    };
    let mut spec = StudySpec::for_scenario(scenario, config.seed);
    spec.schedule = config.schedule;
    spec.chains = config.chains;
    spec.mcmc = config.mcmc.clone();
    spec.is_samples = config.is_samples;
    spec.is_df = config.is_df;
    if let Some(r) = config.replicates {
        spec.replicates = r;
    }
    if config.dropout.is_some() {
        spec.dropout = config.dropout;
    }
    spec.interpolate = config.interpolate;
    let report = run_study(&spec)?;
    written.extend(write_report(&report, &config.out)?);
    Ok(())
}
