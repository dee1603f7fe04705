//! Metropolis–Hastings sampler for the conditional distribution of the random
//! intercepts p(φ_i | y_i; θ) — the simulation step of SAEM.
//!
//! One sweep cycles three kernels per individual:
//! 1. an independence proposal from the prior N((a, b), diag(σ₁², σ₂²)),
//! 2. a random walk on `a_i` (touches only the logistic part), and
//! 3. a random walk on `b_i` (touches only the Beta part).
//!
//! Individuals are conditionally independent, so each advances on its own
//! counter-based RNG stream; results do not depend on scheduling. Random-walk
//! scales adapt toward a target acceptance rate during the burn-in phase only
//! (see [`adapt_scales`]).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec::{self, domain};
use crate::model::{Dataset, RandomEffects, ZibrParams};
use crate::prepared::Prepared;
use crate::special::{lgamma, log_sigmoid, sigmoid};

/// Kernel indices into the acceptance counters.
pub const KERNEL_PRIOR: usize = 0;
pub const KERNEL_RW_A: usize = 1;
pub const KERNEL_RW_B: usize = 2;

/// Sampler configuration.
#[derive(Debug, Clone)]
pub struct McmcConfig {
    /// MH sweeps (three-kernel cycles) per individual per S-step.
    pub n_kernels_per_sstep: usize,
    /// Random-walk standard deviation for `a_i`.
    pub rw_scale_a: f64,
    /// Random-walk standard deviation for `b_i`.
    pub rw_scale_b: f64,
    /// Adapt the random-walk scales during burn-in.
    pub adapt: bool,
    /// Target acceptance rate for the random-walk kernels.
    pub target_acceptance: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            n_kernels_per_sstep: 5,
            rw_scale_a: 0.5,
            rw_scale_b: 0.5,
            adapt: true,
            target_acceptance: 0.4,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_kernels_per_sstep == 0 {
            return Err(Error::Validation("n_kernels_per_sstep must be >= 1".into()));
        }
        if !(self.rw_scale_a > 0.0 && self.rw_scale_b > 0.0) {
            return Err(Error::Validation("random-walk scales must be > 0".into()));
        }
        if !(self.target_acceptance >= 0.2 && self.target_acceptance <= 0.6) {
            return Err(Error::Validation(format!(
                "target_acceptance must lie in [0.2, 0.6], got {}",
                self.target_acceptance
            )));
        }
        Ok(())
    }
}

/// Accepted/proposed counts per kernel, in [`KERNEL_PRIOR`], [`KERNEL_RW_A`],
/// [`KERNEL_RW_B`] order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AcceptanceCounters {
    pub accepted: [u64; 3],
    pub proposed: [u64; 3],
}

impl AcceptanceCounters {
    pub fn merge(&mut self, other: &AcceptanceCounters) {
        for k in 0..3 {
            self.accepted[k] += other.accepted[k];
            self.proposed[k] += other.proposed[k];
        }
    }

    pub fn rate(&self, kernel: usize) -> Option<f64> {
        if self.proposed[kernel] == 0 {
            None
        } else {
            Some(self.accepted[kernel] as f64 / self.proposed[kernel] as f64)
        }
    }
}

/// State of one Markov chain: current intercepts, cached per-individual
/// conditional log-densities (split into the logistic and Beta parts so each
/// kernel recomputes only the part it perturbs), and acceptance counters for
/// the most recent S-step.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub effects: RandomEffects,
    pub counters: AcceptanceCounters,
    pub(crate) logistic_ll: Vec<f64>,
    pub(crate) beta_ll: Vec<f64>,
}

impl ChainState {
    pub fn new(n: usize, init: [f64; 2]) -> Self {
        ChainState {
            effects: RandomEffects::constant(n, init),
            counters: AcceptanceCounters::default(),
            logistic_ll: vec![0.0; n],
            beta_ll: vec![0.0; n],
        }
    }

    /// Cached conditional log-density of individual `i`'s observations given
    /// its current intercepts (no prior term).
    pub fn cached_loglik(&self, i: usize) -> f64 {
        self.logistic_ll[i] + self.beta_ll[i]
    }
}

/// Identifies the RNG streams of one S-step: individual `i` draws from the
/// stream derived as `stream_rng(seed, [SSTEP, chain, iteration, i])`, so
/// chains and individuals are independent and scheduling cannot change the
/// result.
#[derive(Debug, Clone, Copy)]
pub struct SamplerStream {
    pub seed: u64,
    pub chain: u64,
    pub iteration: u64,
}

impl SamplerStream {
    pub fn individual_rng(&self, i: usize) -> ChaCha8Rng {
        exec::stream_rng(self.seed, &[domain::SSTEP, self.chain, self.iteration, i as u64])
    }
}

/// Advance one chain by `config.n_kernels_per_sstep` MH sweeps per individual.
pub fn sstep(
    state: &mut ChainState,
    params: &ZibrParams,
    data: &Dataset,
    config: &McmcConfig,
    stream: &SamplerStream,
) -> Result<()> {
    config.validate()?;
    params.validate()?;
    if state.effects.len() != data.n_individuals() {
        return Err(Error::DimensionMismatch(format!(
            "chain has {} individuals, dataset has {}",
            state.effects.len(),
            data.n_individuals()
        )));
    }
    let prep = Prepared::new(data);
    sstep_prepared(state, params, &prep, config, stream);
    Ok(())
}

pub(crate) fn sstep_prepared(
    state: &mut ChainState,
    params: &ZibrParams,
    prep: &Prepared,
    config: &McmcConfig,
    stream: &SamplerStream,
) {
    let (lx, lz) = prep.linear_predictors(params);
    let lgamma_phi = lgamma(params.phi);
    let ctx = KernelContext {
        prep,
        lx: &lx,
        lz: &lz,
        phi: params.phi,
        lgamma_phi,
        a: params.a,
        b: params.b,
        v1: params.sigma1_sq,
        v2: params.sigma2_sq,
        config,
    };

    let mut counters = AcceptanceCounters::default();
    for i in 0..prep.n {
        let mut rng = stream.individual_rng(i);
        let (effect, log_ll, beta_ll) =
            advance_individual(&ctx, i, state.effects.values[i], &mut counters, &mut rng);
        state.effects.values[i] = effect;
        state.logistic_ll[i] = log_ll;
        state.beta_ll[i] = beta_ll;
    }
    state.counters = counters;

    // Cache-consistency check on one rotating individual per call.
    #[cfg(debug_assertions)]
    {
        let i = (stream.iteration as usize) % prep.n;
        let [ai, bi] = state.effects.values[i];
        let fresh = ctx.logistic_ll(i, ai) + ctx.beta_ll(i, bi);
        debug_assert!(
            (fresh - state.cached_loglik(i)).abs() < 1e-8,
            "stale cached loglik for individual {i}"
        );
    }
}

struct KernelContext<'a> {
    prep: &'a Prepared,
    lx: &'a [f64],
    lz: &'a [f64],
    phi: f64,
    lgamma_phi: f64,
    a: f64,
    b: f64,
    v1: f64,
    v2: f64,
    config: &'a McmcConfig,
}

impl KernelContext<'_> {
    /// Presence-part log-likelihood of individual `i` at intercept `a_i`.
    fn logistic_ll(&self, i: usize, a_i: f64) -> f64 {
        let mut ll = 0.0;
        for k in self.prep.obs_range(i) {
            let eta = a_i + self.lx[k];
            ll += if self.prep.positive[k] { log_sigmoid(eta) } else { log_sigmoid(-eta) };
        }
        ll
    }

    /// Beta-part log-likelihood of individual `i` at intercept `b_i`.
    fn beta_ll(&self, i: usize, b_i: f64) -> f64 {
        let mut ll = 0.0;
        for k in self.prep.obs_range(i) {
            if !self.prep.positive[k] {
                continue;
            }
            let u = sigmoid(b_i + self.lz[k]);
            let sa = u * self.phi;
            let sb = (1.0 - u) * self.phi;
            ll += self.lgamma_phi - lgamma(sa) - lgamma(sb)
                + (sa - 1.0) * self.prep.ln_y[k]
                + (sb - 1.0) * self.prep.ln_1my[k];
        }
        ll
    }
}

fn advance_individual(
    ctx: &KernelContext<'_>,
    i: usize,
    start: [f64; 2],
    counters: &mut AcceptanceCounters,
    rng: &mut ChaCha8Rng,
) -> ([f64; 2], f64, f64) {
    let [mut ai, mut bi] = start;
    let mut log_ll = ctx.logistic_ll(i, ai);
    let mut beta_ll = ctx.beta_ll(i, bi);
    let sd1 = ctx.v1.sqrt();
    let sd2 = ctx.v2.sqrt();

    for _ in 0..ctx.config.n_kernels_per_sstep {
        // Kernel 1: independence proposal from the prior. The prior terms
        // cancel against the proposal density.
        let cand_a = ctx.a + sd1 * rng.sample::<f64, _>(StandardNormal);
        let cand_b = ctx.b + sd2 * rng.sample::<f64, _>(StandardNormal);
        let cand_log = ctx.logistic_ll(i, cand_a);
        let cand_beta = ctx.beta_ll(i, cand_b);
        counters.proposed[KERNEL_PRIOR] += 1;
        if accept(cand_log + cand_beta - log_ll - beta_ll, rng) {
            ai = cand_a;
            bi = cand_b;
            log_ll = cand_log;
            beta_ll = cand_beta;
            counters.accepted[KERNEL_PRIOR] += 1;
        }

        // Kernel 2: random walk on a_i; only the logistic part changes.
        let cand_a = ai + ctx.config.rw_scale_a * rng.sample::<f64, _>(StandardNormal);
        let cand_log = ctx.logistic_ll(i, cand_a);
        let log_alpha = cand_log - log_ll + prior_log_ratio(cand_a, ai, ctx.a, ctx.v1);
        counters.proposed[KERNEL_RW_A] += 1;
        if accept(log_alpha, rng) {
            ai = cand_a;
            log_ll = cand_log;
            counters.accepted[KERNEL_RW_A] += 1;
        }

        // Kernel 3: random walk on b_i; only the Beta part changes.
        let cand_b = bi + ctx.config.rw_scale_b * rng.sample::<f64, _>(StandardNormal);
        let cand_beta = ctx.beta_ll(i, cand_b);
        let log_alpha = cand_beta - beta_ll + prior_log_ratio(cand_b, bi, ctx.b, ctx.v2);
        counters.proposed[KERNEL_RW_B] += 1;
        if accept(log_alpha, rng) {
            bi = cand_b;
            beta_ll = cand_beta;
            counters.accepted[KERNEL_RW_B] += 1;
        }
    }
    ([ai, bi], log_ll, beta_ll)
}

/// log N(new; mean, var) − log N(old; mean, var), with the degenerate-variance
/// convention that only a no-move proposal is accepted.
fn prior_log_ratio(new: f64, old: f64, mean: f64, var: f64) -> f64 {
    if var > 0.0 {
        let dn = new - mean;
        let do_ = old - mean;
        (do_ * do_ - dn * dn) / (2.0 * var)
    } else if new == old {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

/// MH accept decision; a proposal with non-finite log-ratio (outside the
/// domain) is rejected, a ratio ≥ 1 is accepted without drawing.
pub(crate) fn accept(log_alpha: f64, rng: &mut ChaCha8Rng) -> bool {
    if log_alpha.is_nan() {
        return false;
    }
    log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha
}

/// Robbins–Monro adjustment of the random-walk scales toward the target
/// acceptance rate: `s ← s · exp(gain · (rate − target))`. Intended for the
/// burn-in phase only; the caller freezes the configuration afterwards.
pub fn adapt_scales(counters: &AcceptanceCounters, config: &McmcConfig) -> McmcConfig {
    const GAIN: f64 = 0.5;
    let mut out = config.clone();
    if let Some(rate) = counters.rate(KERNEL_RW_A) {
        out.rw_scale_a =
            (config.rw_scale_a * (GAIN * (rate - config.target_acceptance)).exp()).clamp(1e-3, 1e3);
    }
    if let Some(rate) = counters.rate(KERNEL_RW_B) {
        out.rw_scale_b =
            (config.rw_scale_b * (GAIN * (rate - config.target_acceptance)).exp()).clamp(1e-3, 1e3);
    }
    out
}
