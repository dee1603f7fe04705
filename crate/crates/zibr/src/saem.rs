//! The outer SAEM loop: step schedule, simulation-step orchestration across
//! chains, stochastic-approximation updates of the Gaussian summary
//! statistics, the two-part maximization step with damping, Fisher
//! information accumulation, and trace recording.
//!
//! One iteration runs
//! 1. an S-step per chain (Metropolis–Hastings draws of the intercepts),
//! 2. an SA-step moving the summaries F₁ = Σᵢ φᵢ and F₂ = Σᵢ φᵢφᵢᵀ toward
//!    their chain averages with stepsize γ_q,
//! 3. the closed-form Gaussian M-step μ = F₁/N, G = F₂/N − F₁F₁ᵀ/N² with the
//!    off-diagonal of G discarded (the intercepts are independent), and
//! 4. numerical maximizations for (β, φ) and α followed by the damped update
//!    θ ← θ + γ_q(θ̃ − θ).
//!
//! γ_q = 1 for the first `k1` iterations (the exploration phase, identical to
//! Monte Carlo EM) and 1/(q − k1) afterwards. During the second phase the
//! per-individual means and variances of the sampled intercepts are
//! accumulated; they later center the importance-sampling proposal for the
//! observed-data log-likelihood.

use crate::error::{Error, Result};
use crate::exec;
use crate::fim::{self, FimAccumulator};
use crate::model::{Dataset, RandomEffects, ZibrParams};
use crate::optimizer;
use crate::prepared::Prepared;
use crate::sampler::{
    adapt_scales, sstep_prepared, AcceptanceCounters, ChainState, McmcConfig, SamplerStream,
};

const VARIANCE_FLOOR: f64 = 1e-10;
const PHI_FLOOR: f64 = 1e-8;

/// Stepsize schedule: γ_q = 1 for q ≤ k1, then 1/(q − k1) up to k1 + k2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepSchedule {
    pub k1: usize,
    pub k2: usize,
}

impl StepSchedule {
    pub fn new(k1: usize, k2: usize) -> Result<Self> {
        if k1 == 0 || k2 == 0 {
            return Err(Error::Validation(format!(
                "schedule phases must both be positive, got ({k1}, {k2})"
            )));
        }
        Ok(StepSchedule { k1, k2 })
    }

    pub fn total(&self) -> usize {
        self.k1 + self.k2
    }

    /// Stepsize at iteration `q` (1-based).
    pub fn gamma(&self, q: usize) -> f64 {
        debug_assert!(q >= 1 && q <= self.total());
        if q <= self.k1 {
            1.0
        } else {
            1.0 / (q - self.k1) as f64
        }
    }
}

/// Per-individual conditional mean and variance of the sampled intercepts,
/// taken over the chains and the decreasing-stepsize phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndividualMoments {
    pub mean: [f64; 2],
    pub variance: [f64; 2],
}

#[derive(Debug, Clone)]
pub(crate) struct MomentAccumulator {
    count: u64,
    sum: Vec<[f64; 2]>,
    sumsq: Vec<[f64; 2]>,
}

impl MomentAccumulator {
    fn new(n: usize) -> Self {
        MomentAccumulator { count: 0, sum: vec![[0.0; 2]; n], sumsq: vec![[0.0; 2]; n] }
    }

    fn add(&mut self, effects: &RandomEffects) {
        self.count += 1;
        for (i, v) in effects.values.iter().enumerate() {
            for c in 0..2 {
                self.sum[i][c] += v[c];
                self.sumsq[i][c] += v[c] * v[c];
            }
        }
    }

    fn moments(&self) -> Option<Vec<IndividualMoments>> {
        if self.count == 0 {
            return None;
        }
        let n = self.count as f64;
        Some(
            self.sum
                .iter()
                .zip(&self.sumsq)
                .map(|(s, sq)| {
                    let mean = [s[0] / n, s[1] / n];
                    let variance = [
                        (sq[0] / n - mean[0] * mean[0]).max(0.0),
                        (sq[1] / n - mean[1] * mean[1]).max(0.0),
                    ];
                    IndividualMoments { mean, variance }
                })
                .collect(),
        )
    }
}

/// Mutable state of the SAEM iteration.
#[derive(Debug, Clone)]
pub struct SaemState {
    /// Stochastic approximation of Σᵢ φᵢ.
    pub f1: [f64; 2],
    /// Stochastic approximation of Σᵢ φᵢφᵢᵀ.
    pub f2: [[f64; 2]; 2],
    pub params: ZibrParams,
    /// Completed iterations (equals `trace.len()`).
    pub iteration: usize,
    pub chains: Vec<ChainState>,
    pub trace: Vec<ZibrParams>,
    pub fim: FimAccumulator,
    pub(crate) cond_acc: MomentAccumulator,
}

impl SaemState {
    pub fn new(init: ZibrParams, m: usize, n: usize) -> Self {
        let chains: Vec<ChainState> =
            (0..m).map(|_| ChainState::new(n, [init.a, init.b])).collect();
        // F1 and F2 start from the initial effects, as the algorithm's
        // initialization prescribes; gamma_1 = 1 overwrites them anyway.
        let (f1, f2) = chain_sums(&chains[0].effects);
        let names = init.names();
        SaemState {
            f1,
            f2,
            params: init,
            iteration: 0,
            chains,
            trace: Vec::new(),
            fim: FimAccumulator::new(names),
            cond_acc: MomentAccumulator::new(n),
        }
    }

    pub fn n_individuals(&self) -> usize {
        self.cond_acc.sum.len()
    }
}

/// Σᵢ φᵢ and Σᵢ φᵢφᵢᵀ for one chain's current effects.
pub fn chain_sums(effects: &RandomEffects) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut s1 = [0.0; 2];
    let mut s2 = [[0.0; 2]; 2];
    for v in &effects.values {
        for i in 0..2 {
            s1[i] += v[i];
            for j in 0..2 {
                s2[i][j] += v[i] * v[j];
            }
        }
    }
    (s1, s2)
}

/// Stochastic-approximation update: F ← F + γ(mean over chains of Σᵢ s(φᵢ) − F).
pub fn sa_update(
    state: &mut SaemState,
    chain_sums: &[([f64; 2], [[f64; 2]; 2])],
    gamma: f64,
) {
    debug_assert!(!chain_sums.is_empty());
    let m = chain_sums.len() as f64;
    let mut mean1 = [0.0; 2];
    let mut mean2 = [[0.0; 2]; 2];
    for (s1, s2) in chain_sums {
        for i in 0..2 {
            mean1[i] += s1[i] / m;
            for j in 0..2 {
                mean2[i][j] += s2[i][j] / m;
            }
        }
    }
    for i in 0..2 {
        state.f1[i] += gamma * (mean1[i] - state.f1[i]);
        for j in 0..2 {
            state.f2[i][j] += gamma * (mean2[i][j] - state.f2[i][j]);
        }
    }
}

/// Closed-form Gaussian M-step output.
#[derive(Debug, Clone, Copy)]
pub struct GaussianMStep {
    pub mu: [f64; 2],
    /// Diagonal of G with the off-diagonal discarded; entries floored at
    /// 1e-10 when the update turned non-positive.
    pub g_diag: [f64; 2],
    pub floored: [bool; 2],
}

/// μ = F₁/N and G = F₂/N − F₁F₁ᵀ/N², off-diagonal discarded.
pub fn mstep_gaussian(state: &SaemState) -> GaussianMStep {
    let n = state.n_individuals() as f64;
    let mu = [state.f1[0] / n, state.f1[1] / n];
    let mut g_diag = [0.0; 2];
    let mut floored = [false; 2];
    for c in 0..2 {
        let raw = state.f2[c][c] / n - state.f1[c] * state.f1[c] / (n * n);
        if raw <= 0.0 {
            g_diag[c] = VARIANCE_FLOOR;
            floored[c] = true;
        } else {
            g_diag[c] = raw;
        }
    }
    GaussianMStep { mu, g_diag, floored }
}

/// Damped parameter update θ ← θ + γ(θ̃ − θ) for the non-Gaussian block.
#[derive(Debug, Clone)]
pub struct DampedUpdate {
    pub phi: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub phi_floored: bool,
}

pub fn damped_update(
    old: (f64, &[f64], &[f64]),
    inner: (f64, &[f64], &[f64]),
    gamma: f64,
) -> DampedUpdate {
    let (phi_old, alpha_old, beta_old) = old;
    let (phi_new, alpha_new, beta_new) = inner;
    debug_assert_eq!(alpha_old.len(), alpha_new.len());
    debug_assert_eq!(beta_old.len(), beta_new.len());
    let mut phi = phi_old + gamma * (phi_new - phi_old);
    let phi_floored = phi <= 0.0;
    if phi_floored {
        phi = PHI_FLOOR;
    }
    DampedUpdate {
        phi,
        alpha: alpha_old.iter().zip(alpha_new).map(|(o, n)| o + gamma * (n - o)).collect(),
        beta: beta_old.iter().zip(beta_new).map(|(o, n)| o + gamma * (n - o)).collect(),
        phi_floored,
    }
}

/// Per-individual conditional moments accumulated over the decreasing-step
/// phase; errors when that phase has not run.
pub fn conditional_moments(state: &SaemState) -> Result<Vec<IndividualMoments>> {
    state.cond_acc.moments().ok_or_else(|| {
        Error::Validation(
            "conditional moments are undefined before the decreasing-step phase has run".into(),
        )
    })
}

/// Run-level diagnostics.
#[derive(Debug, Clone)]
pub struct FitDiagnostics {
    /// Acceptance counts pooled over all chains and iterations.
    pub acceptance: AcceptanceCounters,
    pub final_rw_scale_a: f64,
    pub final_rw_scale_b: f64,
    /// Iterations at which a variance update hit the floor.
    pub variance_floor_hits: usize,
    pub phi_floor_hits: usize,
    /// Iterations at which the Beta-part maximization stopped early.
    pub beta_nonconverged: usize,
    /// Iterations at which the logistic maximization flagged separation.
    pub separation_flags: usize,
    /// Why standard errors are absent, when they are.
    pub se_failure: Option<String>,
}

/// Configuration echo stored with every fit.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub schedule: StepSchedule,
    pub chains: usize,
    pub mcmc: McmcConfig,
}

/// Result of a SAEM fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ZibrParams,
    /// Names matching `std_errors` and the trace column order.
    pub param_names: Vec<String>,
    /// Standard errors from the Louis accumulator; absent when −H was not
    /// positive definite (see `diagnostics.se_failure`).
    pub std_errors: Option<Vec<f64>>,
    /// Observed-data log-likelihood and its Monte Carlo standard error;
    /// attached by the caller after importance sampling.
    pub loglik: Option<(f64, f64)>,
    pub trace: Vec<ZibrParams>,
    pub conditional_moments: Vec<IndividualMoments>,
    pub diagnostics: FitDiagnostics,
    pub seed: u64,
    pub options: FitOptions,
}

/// Data-driven starting point: presence-rate logit for `a`, mean positive
/// logit for `b`, zero covariate effects, variances 0.25 and a
/// method-of-moments dispersion from the positive outcomes.
pub fn default_init(data: &Dataset) -> ZibrParams {
    let mut n_total = 0usize;
    let mut n_pos = 0usize;
    let mut logits = Vec::new();
    let mut ys = Vec::new();
    for ind in &data.individuals {
        for obs in &ind.observations {
            n_total += 1;
            if obs.y > 0.0 {
                n_pos += 1;
                logits.push((obs.y / (1.0 - obs.y)).ln());
                ys.push(obs.y);
            }
        }
    }
    let rate = (n_pos as f64 + 0.5) / (n_total as f64 + 1.0);
    let a = (rate / (1.0 - rate)).ln().clamp(-5.0, 5.0);
    let b = if logits.is_empty() {
        0.0
    } else {
        (logits.iter().sum::<f64>() / logits.len() as f64).clamp(-5.0, 5.0)
    };
    let phi = if ys.len() >= 2 {
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let var =
            ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (ys.len() as f64 - 1.0);
        if var > 1e-12 {
            (mean * (1.0 - mean) / var - 1.0).clamp(0.5, 1e4)
        } else {
            4.0
        }
    } else {
        4.0
    };
    ZibrParams {
        phi,
        a,
        b,
        alpha: vec![0.0; data.p],
        beta: vec![0.0; data.r],
        sigma1_sq: 0.25,
        sigma2_sq: 0.25,
    }
}

/// Maximum-likelihood fit of the zero-inflated Beta mixed model by SAEM with
/// `m` Markov chains. Deterministic given `(data, init, schedule, m, mcmc,
/// seed)`.
pub fn fit(
    data: &Dataset,
    init: &ZibrParams,
    schedule: &StepSchedule,
    m: usize,
    mcmc: &McmcConfig,
    seed: u64,
) -> Result<FitResult> {
    init.validate()?;
    mcmc.validate()?;
    if m == 0 {
        return Err(Error::Validation("at least one chain is required".into()));
    }
    if schedule.k1 == 0 || schedule.k2 == 0 {
        return Err(Error::Validation("schedule phases must both be positive".into()));
    }
    if init.alpha.len() != data.p || init.beta.len() != data.r {
        return Err(Error::DimensionMismatch(format!(
            "init has (p, r) = ({}, {}), dataset has ({}, {})",
            init.alpha.len(),
            init.beta.len(),
            data.p,
            data.r
        )));
    }
    if !(init.sigma1_sq > 0.0 && init.sigma2_sq > 0.0) {
        return Err(Error::Domain("initial variances must be positive".into()));
    }

    let prep = Prepared::new(data);
    let n = data.n_individuals();
    let mut state = SaemState::new(init.clone(), m, n);
    let mut mcmc_cur = mcmc.clone();
    let mut diagnostics = FitDiagnostics {
        acceptance: AcceptanceCounters::default(),
        final_rw_scale_a: mcmc.rw_scale_a,
        final_rw_scale_b: mcmc.rw_scale_b,
        variance_floor_hits: 0,
        phi_floor_hits: 0,
        beta_nonconverged: 0,
        separation_flags: 0,
        se_failure: None,
    };

    for q in 1..=schedule.total() {
        let gamma = schedule.gamma(q);

        // --- S-step: advance every chain independently.
        let params = state.params.clone();
        let chains_in = std::mem::take(&mut state.chains);
        let advanced = exec::map_indexed(m, |l| {
            let mut chain = chains_in[l].clone();
            let stream = SamplerStream { seed, chain: l as u64, iteration: q as u64 };
            sstep_prepared(&mut chain, &params, &prep, &mcmc_cur, &stream);
            chain
        });
        state.chains = advanced;

        let mut pooled = AcceptanceCounters::default();
        for chain in &state.chains {
            pooled.merge(&chain.counters);
        }
        diagnostics.acceptance.merge(&pooled);
        if mcmc_cur.adapt && q <= schedule.k1 {
            mcmc_cur = adapt_scales(&pooled, &mcmc_cur);
        }

        // --- SA-step on the Gaussian summaries.
        let sums: Vec<_> = state.chains.iter().map(|c| chain_sums(&c.effects)).collect();
        sa_update(&mut state, &sums, gamma);

        // --- M-step, closed form for the Gaussian block.
        let gauss = mstep_gaussian(&state);
        state.params.a = gauss.mu[0];
        state.params.b = gauss.mu[1];
        state.params.sigma1_sq = gauss.g_diag[0];
        state.params.sigma2_sq = gauss.g_diag[1];
        diagnostics.variance_floor_hits += gauss.floored.iter().filter(|&&f| f).count();

        // --- Numerical maximizations, warm-started at the current values.
        let effects: Vec<RandomEffects> =
            state.chains.iter().map(|c| c.effects.clone()).collect();
        let beta_res = optimizer::maximize_beta_prepared(
            &prep,
            &effects,
            &state.params.beta,
            state.params.phi,
        );
        if !beta_res.converged {
            diagnostics.beta_nonconverged += 1;
        }
        let alpha_res =
            optimizer::maximize_logistic_prepared(&prep, &effects, &state.params.alpha);
        if alpha_res.separation {
            diagnostics.separation_flags += 1;
        }

        let (beta_tilde, phi_tilde) = beta_res.argmax.split_at(prep.r);
        let update = damped_update(
            (state.params.phi, &state.params.alpha, &state.params.beta),
            (phi_tilde[0], &alpha_res.argmax, beta_tilde),
            gamma,
        );
        if update.phi_floored {
            diagnostics.phi_floor_hits += 1;
        }
        state.params.phi = update.phi;
        state.params.alpha = update.alpha;
        state.params.beta = update.beta;

        // --- Louis accumulator at the updated parameters.
        let scores_hessians = exec::map_indexed(m, |l| {
            fim::score_and_hessian_prepared(&state.params, &prep, &state.chains[l].effects)
        });
        let (scores, hessians): (Vec<_>, Vec<_>) = scores_hessians.into_iter().unzip();
        fim::fim_update_chains(&mut state.fim, &scores, &hessians, gamma);

        // --- Conditional-moment accumulation over the decreasing-step phase.
        if q > schedule.k1 {
            for chain in &state.chains {
                state.cond_acc.add(&chain.effects);
            }
        }

        state.iteration = q;
        state.trace.push(state.params.clone());

        if state.params.to_vec().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite parameter at iteration {q}: {:?} (f1 = {:?}, f2 = {:?})",
                state.params, state.f1, state.f2
            )));
        }
    }

    diagnostics.final_rw_scale_a = mcmc_cur.rw_scale_a;
    diagnostics.final_rw_scale_b = mcmc_cur.rw_scale_b;

    let std_errors = match fim::standard_errors(&state.fim) {
        Ok(se) => Some(se),
        Err(e) => {
            diagnostics.se_failure = Some(e.to_string());
            None
        }
    };
    let conditional_moments = conditional_moments(&state)?;

    Ok(FitResult {
        param_names: state.params.names(),
        params: state.params,
        std_errors,
        loglik: None,
        trace: state.trace,
        conditional_moments,
        diagnostics,
        seed,
        options: FitOptions { schedule: *schedule, chains: m, mcmc: mcmc.clone() },
    })
}
