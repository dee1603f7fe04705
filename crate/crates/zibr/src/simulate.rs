//! Synthetic data generation under the zero-inflated Beta mixed model, MCAR
//! dropout, and the linear-interpolation baseline used to rebalance dropped
//! designs.
//!
//! The covariate scheme mirrors a treatment/control study: a single binary
//! covariate X equal to 0 for the first half of the individuals and 1 for the
//! second half, used in both model parts (Z = X).

use rand::seq::index::sample as index_sample;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec::{self, domain};
use crate::model::{Dataset, Individual, Observation, ZibrParams};
use crate::special::sigmoid;

/// Positive outcomes are clamped into this closed range so generated data
/// always satisfies the dataset invariants (`0 < y < 1` when present).
const Y_EPS: f64 = 1e-12;

/// Configuration of one synthetic dataset.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// True parameters; `alpha` and `beta` must be scalar for the
    /// treatment/control design.
    pub params: ZibrParams,
    pub n_individuals: usize,
    pub t_per_individual: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.params.alpha.len() != 1 || self.params.beta.len() != 1 {
            return Err(Error::Validation(
                "the treatment/control design uses scalar alpha and beta".into(),
            ));
        }
        if self.n_individuals == 0 || !self.n_individuals.is_multiple_of(2) {
            return Err(Error::Validation(format!(
                "n_individuals must be even and positive for the half/half split, got {}",
                self.n_individuals
            )));
        }
        if self.t_per_individual == 0 {
            return Err(Error::Validation("t_per_individual must be >= 1".into()));
        }
        Ok(())
    }
}

/// Draw one dataset: a_i ~ N(a, σ₁²), b_i ~ N(b, σ₂²), then per time point a
/// Bernoulli presence indicator and, when present, a Beta abundance.
pub fn generate(config: &SimConfig) -> Result<Dataset> {
    config.validate()?;
    let p = &config.params;
    let n = config.n_individuals;
    let sd1 = p.sigma1_sq.sqrt();
    let sd2 = p.sigma2_sq.sqrt();
    let mut individuals = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = exec::stream_rng(config.seed, &[domain::GENERATE, i as u64]);
        let a_i = p.a + sd1 * rng.sample::<f64, _>(StandardNormal);
        let b_i = p.b + sd2 * rng.sample::<f64, _>(StandardNormal);
        let x = if i < n / 2 { 0.0 } else { 1.0 };
        let eta_p = a_i + p.alpha[0] * x;
        let eta_u = b_i + p.beta[0] * x;
        let prob = sigmoid(eta_p);
        let u = sigmoid(eta_u);
        let mut observations = Vec::with_capacity(config.t_per_individual);
        for t in 1..=config.t_per_individual {
            let present = rng.random::<f64>() < prob;
            let y = if present {
                let beta = Beta::new(u * p.phi, (1.0 - u) * p.phi).map_err(|e| {
                    Error::Domain(format!("invalid Beta parameters at u={u}, phi={}: {e}", p.phi))
                })?;
                beta.sample(&mut rng).clamp(Y_EPS, 1.0 - Y_EPS)
            } else {
                0.0
            };
            observations.push(Observation { time: t as f64, y, x: vec![x], z: vec![x] });
        }
        individuals.push(Individual { id: (i + 1).to_string(), observations });
    }
    Dataset::new(individuals, 1, 1)
}

/// Remove `floor(fraction · total)` observations completely at random,
/// redrawing the removal set (up to an attempt cap) whenever an individual
/// would lose all of its observations.
pub fn mcar_dropout(data: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Validation(format!("dropout fraction must be in (0, 1), got {fraction}")));
    }
    let total = data.n_observations();
    let n = data.n_individuals();
    let k = (fraction * total as f64).floor() as usize;
    if k == 0 {
        return Ok(data.clone());
    }
    if k > total - n {
        return Err(Error::Validation(format!(
            "removing {k} of {total} observations cannot leave every one of {n} individuals \
             with at least one observation"
        )));
    }

    // Global observation index -> individual.
    let mut owner = Vec::with_capacity(total);
    for (i, ind) in data.individuals.iter().enumerate() {
        owner.extend(std::iter::repeat_n(i, ind.observations.len()));
    }

    let mut rng = exec::stream_rng(seed, &[domain::DROPOUT]);
    let mut kept_count = vec![0usize; n];
    let mut drop = vec![false; total];
    let mut ok = false;
    for _attempt in 0..1000 {
        drop.fill(false);
        for idx in index_sample(&mut rng, total, k) {
            drop[idx] = true;
        }
        for c in kept_count.iter_mut() {
            *c = 0;
        }
        for (idx, &d) in drop.iter().enumerate() {
            if !d {
                kept_count[owner[idx]] += 1;
            }
        }
        if kept_count.iter().all(|&c| c >= 1) {
            ok = true;
            break;
        }
    }
    if !ok {
        return Err(Error::Validation(
            "could not draw an MCAR removal set keeping every individual non-empty".into(),
        ));
    }

    let mut individuals = Vec::with_capacity(n);
    let mut idx = 0;
    for ind in &data.individuals {
        let mut observations = Vec::new();
        for obs in &ind.observations {
            if !drop[idx] {
                observations.push(obs.clone());
            }
            idx += 1;
        }
        individuals.push(Individual { id: ind.id.clone(), observations });
    }
    Dataset::new(individuals, data.p, data.r)
}

/// Rebalance a dropped dataset back to `original_t` observations per
/// individual: interior gaps are filled by linear interpolation between the
/// flanking observed outcomes, trailing gaps carry the last observation
/// forward, and leading gaps are filled backward with the first observed
/// value. Covariates are restored from the individual's design (they are
/// time-constant in the treatment/control scheme).
pub fn interpolate(data: &Dataset, original_t: usize) -> Result<Dataset> {
    if original_t == 0 {
        return Err(Error::Validation("original_t must be >= 1".into()));
    }
    let mut individuals = Vec::with_capacity(data.n_individuals());
    for ind in &data.individuals {
        if ind.observations.is_empty() {
            return Err(Error::Validation(format!(
                "individual {} has no observations to interpolate from",
                ind.id
            )));
        }
        let mut observed: Vec<Option<&Observation>> = vec![None; original_t];
        for obs in &ind.observations {
            let t = obs.time;
            if t.fract() != 0.0 || t < 1.0 || t > original_t as f64 {
                return Err(Error::Validation(format!(
                    "individual {}: time {} is not on the balanced design grid 1..={original_t}",
                    ind.id, t
                )));
            }
            observed[t as usize - 1] = Some(obs);
        }
        let design_x = ind.observations[0].x.clone();
        let design_z = ind.observations[0].z.clone();
        let known: Vec<usize> =
            (0..original_t).filter(|&t| observed[t].is_some()).collect();

        let mut observations = Vec::with_capacity(original_t);
        for t in 0..original_t {
            if let Some(obs) = observed[t] {
                observations.push(obs.clone());
                continue;
            }
            let lower = known.iter().rev().find(|&&k| k < t).copied();
            let upper = known.iter().find(|&&k| k > t).copied();
            let y = match (lower, upper) {
                (Some(lo), Some(hi)) => {
                    let y_lo = observed[lo].unwrap().y;
                    let y_hi = observed[hi].unwrap().y;
                    y_lo + (t - lo) as f64 / (hi - lo) as f64 * (y_hi - y_lo)
                }
                (Some(lo), None) => observed[lo].unwrap().y,
                (None, Some(hi)) => observed[hi].unwrap().y,
                (None, None) => unreachable!("individual has at least one observation"),
            };
            observations.push(Observation {
                time: (t + 1) as f64,
                y,
                x: design_x.clone(),
                z: design_z.clone(),
            });
        }
        individuals.push(Individual { id: ind.id.clone(), observations });
    }
    Dataset::new(individuals, data.p, data.r)
}
