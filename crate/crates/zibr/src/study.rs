//! Monte Carlo study harness: replicate generation, fitting, accuracy
//! metrics (bias, MAE, RMSE), type-I-error studies for the likelihood-ratio
//! and Wald tests, and power curves over a grid of presence intercepts.
//!
//! Replicate `k` of a study depends only on `(master seed, k)`, so studies
//! are resumable, partitionable and reproducible; failed replicates are
//! recorded and excluded, and a study aborts when more than 5% of its
//! replicates fail.
//!
//! Variance components are reported on the standard-deviation scale
//! (`sigma1`, `sigma2`), the scale used in the simulation-study tables.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::exec::{self, domain};
use crate::inference;
use crate::loglik::{loglik_is, IsConfig};
use crate::model::{Dataset, Individual, Observation, ZibrParams};
use crate::saem::{default_init, fit, FitResult, StepSchedule};
use crate::sampler::McmcConfig;
use crate::simulate::{generate, interpolate, mcar_dropout, SimConfig};

/// Largest tolerated fraction of failed replicates.
const MAX_FAILURE_FRACTION: f64 = 0.05;
const TEST_LEVEL: f64 = 0.05;
const HISTOGRAM_BINS: usize = 30;

/// Study scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Balanced estimation accuracy, high-variance configuration.
    Setting1,
    /// Balanced estimation accuracy, moderate-variance configuration.
    Setting2,
    /// Setting 2 with 20% MCAR dropout (optionally re-interpolated).
    AppendixA,
    /// Null-model likelihood-ratio type-I error.
    LrtNull,
    /// Null-model Wald type-I error (fixed and random effects).
    WaldNull,
    /// Likelihood-ratio power over a grid of presence intercepts.
    PowerGrid,
}

impl Scenario {
    pub fn parse(s: &str) -> Result<Scenario> {
        match s.to_ascii_lowercase().as_str() {
            "setting1" => Ok(Scenario::Setting1),
            "setting2" => Ok(Scenario::Setting2),
            "appendixa" | "appendix_a" => Ok(Scenario::AppendixA),
            "lrt_null" | "lrtnull" => Ok(Scenario::LrtNull),
            "wald_null" | "waldnull" => Ok(Scenario::WaldNull),
            "power_grid" | "powergrid" => Ok(Scenario::PowerGrid),
            other => Err(Error::Validation(format!(
                "unknown scenario '{other}'; expected setting1|setting2|appendixa|lrt_null|wald_null|power_grid"
            ))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scenario::Setting1 => "setting1",
            Scenario::Setting2 => "setting2",
            Scenario::AppendixA => "appendixa",
            Scenario::LrtNull => "lrt_null",
            Scenario::WaldNull => "wald_null",
            Scenario::PowerGrid => "power_grid",
        };
        f.write_str(s)
    }
}

/// Full specification of one study.
#[derive(Debug, Clone)]
pub struct StudySpec {
    pub scenario: Scenario,
    pub replicates: usize,
    pub n_individuals: usize,
    pub t_per_individual: usize,
    /// True data-generating parameters (ignored by `PowerGrid`, which builds
    /// them per grid point from `power_setting`).
    pub params: ZibrParams,
    /// MCAR dropout fraction applied to each replicate, if any.
    pub dropout: Option<f64>,
    /// Re-interpolate dropped datasets back to the balanced design.
    pub interpolate: bool,
    pub schedule: StepSchedule,
    pub chains: usize,
    pub mcmc: McmcConfig,
    pub is_samples: usize,
    pub is_df: f64,
    /// Presence-intercept grid of the power study.
    pub alpha0_grid: Vec<f64>,
    /// Power-study configuration (1..=4): (α₁, β₀, β₁) =
    /// (0.5, 0.5, 0.5), (−0.5, 0.5, 0.5), (0, 0.5, 0.5), (0.5, 0, 0).
    pub power_setting: u8,
    /// Worker budget for the replicate pool; 0 uses the global default.
    pub workers: usize,
    pub seed: u64,
}

impl StudySpec {
    /// Scenario defaults at the paper's design points; the schedule defaults
    /// to (750, 250) with 5 chains (10 for the Wald study).
    pub fn for_scenario(scenario: Scenario, seed: u64) -> StudySpec {
        let setting2 = ZibrParams::scalar(6.4, -0.5, -0.5, 0.5, 0.5, 0.49, 0.25);
        let null = ZibrParams::scalar(6.4, -0.5, 0.5, 0.0, 0.0, 0.49, 0.25);
        let mut spec = StudySpec {
            scenario,
            replicates: 200,
            n_individuals: 100,
            t_per_individual: 10,
            params: setting2.clone(),
            dropout: None,
            interpolate: false,
            schedule: StepSchedule { k1: 750, k2: 250 },
            chains: 5,
            mcmc: McmcConfig::default(),
            is_samples: 500,
            is_df: 5.0,
            alpha0_grid: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
            power_setting: 1,
            workers: 0,
            seed,
        };
        match scenario {
            Scenario::Setting1 => {
                spec.params =
                    ZibrParams::scalar(6.4, -0.5, -0.5, 0.5, 0.5, 3.2 * 3.2, 2.6 * 2.6);
            }
            Scenario::Setting2 => {}
            Scenario::AppendixA => {
                spec.dropout = Some(0.2);
            }
            Scenario::LrtNull => {
                spec.params = null;
            }
            Scenario::WaldNull => {
                spec.params = null;
                spec.chains = 10;
            }
            Scenario::PowerGrid => {
                spec.n_individuals = 50;
                spec.replicates = 100;
            }
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Validation("a study needs at least one replicate".into()));
        }
        self.params.validate()?;
        self.mcmc.validate()?;
        if self.scenario == Scenario::PowerGrid {
            if self.alpha0_grid.is_empty() {
                return Err(Error::Validation("power grid must be nonempty".into()));
            }
            if !(1..=4).contains(&self.power_setting) {
                return Err(Error::Validation("power_setting must be 1..=4".into()));
            }
        }
        if let Some(f) = self.dropout {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Validation("dropout fraction must be in (0, 1)".into()));
            }
        }
        Ok(())
    }

    /// Key=value echo embedded in reports; parses back through the CLI config
    /// loader for one-command replay.
    pub fn echo(&self) -> String {
        let p = &self.params;
        format!(
            "scenario={}\nreplicates={}\nn={}\nt={}\nphi={}\na={}\nb={}\nalpha={}\nbeta={}\n\
             sigma1_sq={}\nsigma2_sq={}\ndropout={}\ninterpolate={}\nk1={}\nk2={}\nchains={}\n\
             is_samples={}\nis_df={}\npower_setting={}\nalpha0_grid={}\nseed={}",
            self.scenario,
            self.replicates,
            self.n_individuals,
            self.t_per_individual,
            p.phi,
            p.a,
            p.b,
            p.alpha.first().copied().unwrap_or(0.0),
            p.beta.first().copied().unwrap_or(0.0),
            p.sigma1_sq,
            p.sigma2_sq,
            self.dropout.map_or("none".to_string(), |f| f.to_string()),
            self.interpolate,
            self.schedule.k1,
            self.schedule.k2,
            self.chains,
            self.is_samples,
            self.is_df,
            self.power_setting,
            self.alpha0_grid.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"),
            self.seed
        )
    }
}

/// Accuracy summary of one parameter across replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub parameter: String,
    pub true_value: f64,
    pub bias: f64,
    pub mae: f64,
    pub rmse: f64,
}

/// bias = mean − true, MAE = mean |error|, RMSE = √mean error².
pub fn metrics(parameter: &str, estimates: &[f64], true_value: f64) -> Result<MetricsRow> {
    if estimates.is_empty() {
        return Err(Error::Validation("metrics needs at least one estimate".into()));
    }
    let n = estimates.len() as f64;
    let bias = estimates.iter().sum::<f64>() / n - true_value;
    let mae = estimates.iter().map(|e| (e - true_value).abs()).sum::<f64>() / n;
    let rmse =
        (estimates.iter().map(|e| (e - true_value).powi(2)).sum::<f64>() / n).sqrt();
    Ok(MetricsRow { parameter: parameter.to_string(), true_value, bias, mae, rmse })
}

/// Outcome of one replicate; `error` is set when the replicate failed.
#[derive(Debug, Clone)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    /// (name, estimate) pairs on the reporting scale, estimation scenarios.
    pub estimates: Vec<(String, f64)>,
    /// Reported standard error of the intercept mean `a`, when available.
    pub se_a: Option<f64>,
    pub lrt_p: Option<f64>,
    /// Wald p-values per tested parameter, `WaldNull` scenario.
    pub wald_p: Vec<(String, f64)>,
    pub error: Option<String>,
}

/// Histogram bin of the estimate density output.
#[derive(Debug, Clone)]
pub struct HistogramRow {
    pub parameter: String,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
    pub density: f64,
}

/// Aggregated study result.
#[derive(Debug, Clone)]
pub struct StudyReport {
    pub scenario: Scenario,
    pub version: String,
    pub seed: u64,
    pub spec_echo: String,
    pub n_replicates: usize,
    pub n_failed: usize,
    pub metrics: Vec<MetricsRow>,
    /// (test name, rejection rate at the 5% level) for the test scenarios.
    pub rejection_rates: Vec<(String, f64)>,
    /// (alpha0, rejection rate) rows of the power study.
    pub power: Vec<(f64, f64)>,
    pub replicates: Vec<ReplicateOutcome>,
    pub histograms: Vec<HistogramRow>,
}

/// Reporting-scale names for scalar-covariate studies.
fn report_names() -> [&'static str; 7] {
    ["a", "b", "alpha", "beta", "sigma1", "sigma2", "phi"]
}

fn report_values(params: &ZibrParams) -> [f64; 7] {
    [
        params.a,
        params.b,
        params.alpha.first().copied().unwrap_or(f64::NAN),
        params.beta.first().copied().unwrap_or(f64::NAN),
        params.sigma1_sq.sqrt(),
        params.sigma2_sq.sqrt(),
        params.phi,
    ]
}

fn strip_covariates(data: &Dataset) -> Dataset {
    let individuals = data
        .individuals
        .iter()
        .map(|ind| Individual {
            id: ind.id.clone(),
            observations: ind
                .observations
                .iter()
                .map(|o| Observation { time: o.time, y: o.y, x: vec![], z: vec![] })
                .collect(),
        })
        .collect();
    Dataset { individuals, p: 0, r: 0 }
}

fn replicate_dataset(spec: &StudySpec, params: &ZibrParams, k: usize) -> Result<Dataset> {
    let gen_seed = exec::stream_seed(spec.seed, &[domain::REPLICATE, k as u64, 0]);
    let mut data = generate(&SimConfig {
        params: params.clone(),
        n_individuals: spec.n_individuals,
        t_per_individual: spec.t_per_individual,
        seed: gen_seed,
    })?;
    if let Some(fraction) = spec.dropout {
        let drop_seed = exec::stream_seed(spec.seed, &[domain::REPLICATE, k as u64, 1]);
        data = mcar_dropout(&data, fraction, drop_seed)?;
        if spec.interpolate {
            data = interpolate(&data, spec.t_per_individual)?;
        }
    }
    Ok(data)
}

fn fit_replicate(spec: &StudySpec, data: &Dataset, k: usize, tag: u64) -> Result<FitResult> {
    let fit_seed = exec::stream_seed(spec.seed, &[domain::REPLICATE, k as u64, 10 + tag]);
    let init = default_init(data);
    fit(data, &init, &spec.schedule, spec.chains, &spec.mcmc, fit_seed)
}

fn lrt_replicate(spec: &StudySpec, params: &ZibrParams, k: usize) -> Result<f64> {
    let data = replicate_dataset(spec, params, k)?;
    let full = fit_replicate(spec, &data, k, 0)?;
    let reduced_data = strip_covariates(&data);
    let reduced = fit_replicate(spec, &reduced_data, k, 1)?;

    let is_full = IsConfig {
        k_samples: spec.is_samples,
        nu: spec.is_df,
        seed: exec::stream_seed(spec.seed, &[domain::REPLICATE, k as u64, 20]),
    };
    let is_reduced = IsConfig {
        k_samples: spec.is_samples,
        nu: spec.is_df,
        seed: exec::stream_seed(spec.seed, &[domain::REPLICATE, k as u64, 21]),
    };
    let (ll_full, _) = loglik_is(&full.params, &data, &full.conditional_moments, &is_full)?;
    let (ll_reduced, _) =
        loglik_is(&reduced.params, &reduced_data, &reduced.conditional_moments, &is_reduced)?;
    let df = data.p + data.r;
    Ok(inference::lrt(ll_full, ll_reduced, df)?.p_value)
}

fn run_replicate(spec: &StudySpec, k: usize) -> ReplicateOutcome {
    let mut outcome = ReplicateOutcome {
        replicate: k,
        estimates: vec![],
        se_a: None,
        lrt_p: None,
        wald_p: vec![],
        error: None,
    };
    let attempt = || -> Result<ReplicateOutcome> {
        let mut out = outcome.clone();
        match spec.scenario {
            Scenario::Setting1 | Scenario::Setting2 | Scenario::AppendixA => {
                let data = replicate_dataset(spec, &spec.params, k)?;
                let res = fit_replicate(spec, &data, k, 0)?;
                out.se_a = res.std_errors.as_ref().map(|se| se[0]);
                out.estimates = report_names()
                    .iter()
                    .zip(report_values(&res.params))
                    .map(|(n, v)| (n.to_string(), v))
                    .collect();
            }
            Scenario::LrtNull => {
                out.lrt_p = Some(lrt_replicate(spec, &spec.params, k)?);
            }
            Scenario::WaldNull => {
                let data = replicate_dataset(spec, &spec.params, k)?;
                let res = fit_replicate(spec, &data, k, 0)?;
                let se = res.std_errors.as_ref().ok_or_else(|| {
                    Error::Numerical(
                        res.diagnostics
                            .se_failure
                            .clone()
                            .unwrap_or_else(|| "standard errors unavailable".into()),
                    )
                })?;
                // Manifest order: a, b, alpha_1, beta_1 at indices 0, 1, 2, 2+p.
                let tested = [
                    ("a", res.params.a, se[0]),
                    ("b", res.params.b, se[1]),
                    ("alpha", res.params.alpha[0], se[2]),
                    ("beta", res.params.beta[0], se[2 + data.p]),
                ];
                for (name, est, s) in tested {
                    out.wald_p.push((name.to_string(), inference::wald(est, s)?.p_value));
                }
                out.estimates = report_names()
                    .iter()
                    .zip(report_values(&res.params))
                    .map(|(n, v)| (n.to_string(), v))
                    .collect();
            }
            Scenario::PowerGrid => {
                return Err(Error::Validation(
                    "power grid replicates run through power_curve".into(),
                ));
            }
        }
        Ok(out)
    };
    match attempt() {
        Ok(out) => out,
        Err(e) => {
            outcome.error = Some(e.to_string());
            outcome
        }
    }
}

/// Data-generating parameters of the power study at presence intercept
/// `alpha0` under power setting 1..=4.
pub fn power_params(power_setting: u8, alpha0: f64) -> Result<ZibrParams> {
    let (alpha1, beta0, beta1) = match power_setting {
        1 => (0.5, 0.5, 0.5),
        2 => (-0.5, 0.5, 0.5),
        3 => (0.0, 0.5, 0.5),
        4 => (0.5, 0.0, 0.0),
        other => {
            return Err(Error::Validation(format!("power_setting must be 1..=4, got {other}")))
        }
    };
    Ok(ZibrParams::scalar(6.4, alpha0, beta0, alpha1, beta1, 0.49, 0.25))
}

/// Rejection rate of the level-0.05 likelihood-ratio test of no covariate
/// effect, per grid point.
pub fn power_curve(spec: &StudySpec) -> Result<Vec<(f64, f64)>> {
    spec.validate()?;
    if spec.alpha0_grid.is_empty() {
        return Err(Error::Validation("power grid must be nonempty".into()));
    }
    let mut curve = Vec::with_capacity(spec.alpha0_grid.len());
    let mut failures = 0usize;
    let total = spec.alpha0_grid.len() * spec.replicates;
    for (g, &alpha0) in spec.alpha0_grid.iter().enumerate() {
        let params = power_params(spec.power_setting, alpha0)?;
        // Give each grid point its own replicate seed block.
        let mut point_spec = spec.clone();
        point_spec.seed = exec::stream_seed(spec.seed, &[domain::REPLICATE, 1000 + g as u64]);
        let results = exec::map_indexed(spec.replicates, |k| {
            lrt_replicate(&point_spec, &params, k).map_err(|e| e.to_string())
        });
        let mut rejected = 0usize;
        let mut ok = 0usize;
        for r in results {
            match r {
                Ok(p) => {
                    ok += 1;
                    if p < TEST_LEVEL {
                        rejected += 1;
                    }
                }
                Err(_) => failures += 1,
            }
        }
        if ok == 0 {
            return Err(Error::Numerical(format!(
                "every replicate failed at grid point alpha0 = {alpha0}"
            )));
        }
        curve.push((alpha0, rejected as f64 / ok as f64));
    }
    if failures as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::Numerical(format!(
            "{failures} of {total} power replicates failed"
        )));
    }
    Ok(curve)
}

/// Run a study to completion and aggregate its report.
pub fn run_study(spec: &StudySpec) -> Result<StudyReport> {
    spec.validate()?;
    let runner = || -> Result<StudyReport> {
        let mut report = StudyReport {
            scenario: spec.scenario,
            version: crate::VERSION.to_string(),
            seed: spec.seed,
            spec_echo: spec.echo(),
            n_replicates: spec.replicates,
            n_failed: 0,
            metrics: vec![],
            rejection_rates: vec![],
            power: vec![],
            replicates: vec![],
            histograms: vec![],
        };

        if spec.scenario == Scenario::PowerGrid {
            report.power = power_curve(spec)?;
            return Ok(report);
        }

        let outcomes = exec::map_indexed(spec.replicates, |k| run_replicate(spec, k));
        report.n_failed = outcomes.iter().filter(|o| o.error.is_some()).count();
        if report.n_failed as f64 > MAX_FAILURE_FRACTION * spec.replicates as f64 {
            let first = outcomes.iter().find_map(|o| o.error.clone()).unwrap_or_default();
            return Err(Error::Numerical(format!(
                "{} of {} replicates failed (first: {first})",
                report.n_failed, spec.replicates
            )));
        }

        match spec.scenario {
            Scenario::Setting1 | Scenario::Setting2 | Scenario::AppendixA | Scenario::WaldNull => {
                let truth = report_values(&spec.params);
                for (j, name) in report_names().iter().enumerate() {
                    let estimates: Vec<f64> = outcomes
                        .iter()
                        .filter(|o| o.error.is_none())
                        .map(|o| o.estimates[j].1)
                        .collect();
                    report.metrics.push(metrics(name, &estimates, truth[j])?);
                    report.histograms.extend(histogram(name, &estimates));
                }
                if spec.scenario == Scenario::WaldNull {
                    for name in ["a", "b", "alpha", "beta"] {
                        let ps: Vec<f64> = outcomes
                            .iter()
                            .filter(|o| o.error.is_none())
                            .map(|o| {
                                o.wald_p
                                    .iter()
                                    .find(|(n, _)| n == name)
                                    .map(|(_, p)| *p)
                                    .unwrap_or(1.0)
                            })
                            .collect();
                        let rate =
                            ps.iter().filter(|&&p| p < TEST_LEVEL).count() as f64 / ps.len() as f64;
                        report.rejection_rates.push((format!("wald_{name}"), rate));
                    }
                }
            }
            Scenario::LrtNull => {
                let ps: Vec<f64> = outcomes
                    .iter()
                    .filter(|o| o.error.is_none())
                    .filter_map(|o| o.lrt_p)
                    .collect();
                let rate = ps.iter().filter(|&&p| p < TEST_LEVEL).count() as f64 / ps.len() as f64;
                report.rejection_rates.push(("lrt".to_string(), rate));
            }
            Scenario::PowerGrid => unreachable!(),
        }
        report.replicates = outcomes;
        Ok(report)
    };

    run_with_workers(spec.workers, runner)
}

#[cfg(feature = "parallel")]
fn run_with_workers<T>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    if workers == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Validation(format!("worker pool: {e}")))?;
    pool.install(f)
}

#[cfg(not(feature = "parallel"))]
fn run_with_workers<T>(_workers: usize, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f()
}

fn histogram(parameter: &str, estimates: &[f64]) -> Vec<HistogramRow> {
    if estimates.is_empty() {
        return vec![];
    }
    let lo = estimates.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = estimates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / HISTOGRAM_BINS as f64).max(1e-12);
    let mut counts = vec![0usize; HISTOGRAM_BINS];
    for &e in estimates {
        let bin = (((e - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
        counts[bin] += 1;
    }
    let n = estimates.len() as f64;
    counts
        .iter()
        .enumerate()
        .map(|(b, &count)| HistogramRow {
            parameter: parameter.to_string(),
            bin_lo: lo + b as f64 * width,
            bin_hi: lo + (b + 1) as f64 * width,
            count,
            density: count as f64 / (n * width),
        })
        .collect()
}

/// Write the report artifacts (`metrics.csv`, `estimates.csv`,
/// `histograms.csv`, `rejections.csv`, `power.csv`, `summary.txt`) into
/// `dir`; files irrelevant to the scenario are omitted. Returns the paths
/// written.
pub fn write_report(report: &StudyReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let stamp = format!(
        "# version={} seed={} scenario={}\n",
        report.version, report.seed, report.scenario
    );

    if !report.metrics.is_empty() {
        let mut s = stamp.clone();
        s.push_str("parameter,true_value,bias,mae,rmse\n");
        for m in &report.metrics {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                m.parameter, m.true_value, m.bias, m.mae, m.rmse
            ));
        }
        written.push(write_file(dir, "metrics.csv", &s)?);
    }

    if report.replicates.iter().any(|o| !o.estimates.is_empty()) {
        let names = report_names();
        let mut s = stamp.clone();
        s.push_str("replicate,");
        s.push_str(&names.join(","));
        s.push('\n');
        for o in &report.replicates {
            if o.error.is_some() || o.estimates.is_empty() {
                continue;
            }
            s.push_str(&o.replicate.to_string());
            for (_, v) in &o.estimates {
                s.push(',');
                s.push_str(&v.to_string());
            }
            s.push('\n');
        }
        written.push(write_file(dir, "estimates.csv", &s)?);
    }

    if !report.histograms.is_empty() {
        let mut s = stamp.clone();
        s.push_str("parameter,bin_lo,bin_hi,count,density\n");
        for h in &report.histograms {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                h.parameter, h.bin_lo, h.bin_hi, h.count, h.density
            ));
        }
        written.push(write_file(dir, "histograms.csv", &s)?);
    }

    if !report.rejection_rates.is_empty() {
        let mut s = stamp.clone();
        s.push_str("test,rejection_rate\n");
        for (name, rate) in &report.rejection_rates {
            s.push_str(&format!("{name},{rate}\n"));
        }
        written.push(write_file(dir, "rejections.csv", &s)?);
    }

    if !report.power.is_empty() {
        let mut s = stamp.clone();
        s.push_str("alpha0,rejection_rate\n");
        for (a0, rate) in &report.power {
            s.push_str(&format!("{a0},{rate}\n"));
        }
        written.push(write_file(dir, "power.csv", &s)?);
    }

    let mut summary = String::new();
    summary.push_str(&format!("version={}\n", report.version));
    summary.push_str(&format!("n_failed={}\n", report.n_failed));
    summary.push_str(&report.spec_echo);
    summary.push('\n');
    written.push(write_file(dir, "summary.txt", &summary)?);
    Ok(written)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}
