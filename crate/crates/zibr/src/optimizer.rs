//! Inner maximizations of the SAEM M-step: the joint (β, φ) maximization of
//! the Beta-part conditional log-likelihood and the α maximization of the
//! logistic-part log-likelihood, both averaged over the Monte Carlo chains'
//! intercept draws.
//!
//! The Beta part is optimized over (β, log φ) by Newton steps with analytic
//! digamma/trigamma gradients and Hessians, a backtracking line search, and a
//! steepest-ascent fallback when a step is not an ascent direction. The
//! logistic part is plain Newton–Raphson with the intercept draws as offsets.

use crate::error::{Error, Result};
use crate::linalg::{chol_solve, cholesky};
use crate::model::{dot, Dataset, RandomEffects};
use crate::prepared::Prepared;
use crate::special::{digamma, lgamma, log_sigmoid, sigmoid, trigamma};

const GRAD_TOL: f64 = 1e-7;
const MAX_ITER: usize = 100;
const ARMIJO: f64 = 1e-4;
/// A Newton step this small (relative to the iterate) cannot move the
/// objective at double precision; stop rather than thrash the line search.
const STEP_FLOOR: f64 = 1e-10;
/// log φ is kept inside this bound; a diverging dispersion (a degenerate
/// Beta concentrating on a point) then surfaces as `converged = false`.
const LAMBDA_BOUND: f64 = 30.0;
/// Coefficient magnitude at which the logistic part is declared separated.
const SEPARATION_BOUND: f64 = 1e3;
/// Probability tolerance of the perfect-fit separation check: when every
/// observation's fitted probability sits this close to its label, the score
/// vanished because the likelihood is flat toward infinity, not because an
/// interior maximizer was reached.
const SATURATION_PROB: f64 = 1e-4;

/// Outcome of an inner maximization.
#[derive(Debug, Clone)]
pub struct OptimResult {
    /// For the Beta part: `[β…, φ]` with φ on the natural scale. For the
    /// logistic part: `α`.
    pub argmax: Vec<f64>,
    pub objective_value: f64,
    pub n_iterations: usize,
    pub converged: bool,
    /// Infinity norm of the gradient at the returned iterate (on the internal
    /// optimization scale, i.e. log φ for the dispersion).
    pub gradient_norm: f64,
    /// Logistic part only: perfect separation was detected and the iterate
    /// clamped.
    pub separation: bool,
}

/// Maximize the Beta-part objective over (β, φ), averaging over the given
/// chains' intercept draws; φ is optimized on the log scale.
pub fn maximize_beta_part(
    data: &Dataset,
    effects: &[RandomEffects],
    beta_init: &[f64],
    phi_init: f64,
) -> Result<OptimResult> {
    let prep = Prepared::new(data);
    validate_effects(&prep, effects)?;
    if beta_init.len() != prep.r {
        return Err(Error::DimensionMismatch(format!(
            "beta_init has length {}, dataset has r = {}",
            beta_init.len(),
            prep.r
        )));
    }
    if !(phi_init > 0.0) {
        return Err(Error::Domain(format!("phi_init must be > 0, got {phi_init}")));
    }
    Ok(maximize_beta_prepared(&prep, effects, beta_init, phi_init))
}

/// Maximize the logistic-part objective over α with the chains' `a_i` draws
/// as offsets.
pub fn maximize_logistic_part(
    data: &Dataset,
    effects: &[RandomEffects],
    alpha_init: &[f64],
) -> Result<OptimResult> {
    let prep = Prepared::new(data);
    validate_effects(&prep, effects)?;
    if alpha_init.len() != prep.p {
        return Err(Error::DimensionMismatch(format!(
            "alpha_init has length {}, dataset has p = {}",
            alpha_init.len(),
            prep.p
        )));
    }
    Ok(maximize_logistic_prepared(&prep, effects, alpha_init))
}

/// Beta-part objective with its analytic gradient and Hessian at
/// `(beta, log phi)`, exposed for diagnostics and derivative checks. The
/// parameter order is `[β…, log φ]`.
pub fn beta_objective(
    data: &Dataset,
    effects: &[RandomEffects],
    beta: &[f64],
    phi: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let prep = Prepared::new(data);
    validate_effects(&prep, effects)?;
    if beta.len() != prep.r || !(phi > 0.0) {
        return Err(Error::DimensionMismatch("beta length or phi out of range".into()));
    }
    Ok(BetaObjective::new(&prep, effects).value_grad_hess(beta, phi.ln()))
}

/// Logistic-part objective with its analytic gradient and Hessian at `alpha`.
pub fn logistic_objective(
    data: &Dataset,
    effects: &[RandomEffects],
    alpha: &[f64],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let prep = Prepared::new(data);
    validate_effects(&prep, effects)?;
    if alpha.len() != prep.p {
        return Err(Error::DimensionMismatch("alpha length mismatch".into()));
    }
    Ok(LogisticObjective::new(&prep, effects).value_grad_hess(alpha))
}

fn validate_effects(prep: &Prepared, effects: &[RandomEffects]) -> Result<()> {
    if effects.is_empty() {
        return Err(Error::Validation("at least one chain of effects is required".into()));
    }
    if effects.iter().any(|e| e.len() != prep.n) {
        return Err(Error::DimensionMismatch(
            "every effects set must have one row per individual".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Beta part
// ---------------------------------------------------------------------------

pub(crate) struct BetaObjective<'a> {
    prep: &'a Prepared,
    effects: &'a [RandomEffects],
    /// 1 / (chains × positive observations): the objective is a Monte Carlo
    /// mean, which keeps the gradient tolerance meaningful at any data size.
    norm: f64,
}

impl<'a> BetaObjective<'a> {
    pub(crate) fn new(prep: &'a Prepared, effects: &'a [RandomEffects]) -> Self {
        let n_pos = prep.positive.iter().filter(|&&p| p).count().max(1);
        let norm = 1.0 / (effects.len() as f64 * n_pos as f64);
        BetaObjective { prep, effects, norm }
    }

    fn has_positive(&self) -> bool {
        self.prep.positive.iter().any(|&p| p)
    }

    /// Objective at (β, λ): mean Beta log density over chains and positive
    /// observations, with φ = e^λ.
    pub(crate) fn value(&self, beta: &[f64], lambda: f64) -> f64 {
        let phi = lambda.exp();
        let lg_phi = lgamma(phi);
        let mut total = 0.0;
        for chain in self.effects {
            for i in 0..self.prep.n {
                let b_i = chain.values[i][1];
                for k in self.prep.obs_range(i) {
                    if !self.prep.positive[k] {
                        continue;
                    }
                    let u = sigmoid(b_i + dot(self.prep.z_row(k), beta));
                    let sa = u * phi;
                    let sb = (1.0 - u) * phi;
                    total += lg_phi - lgamma(sa) - lgamma(sb)
                        + (sa - 1.0) * self.prep.ln_y[k]
                        + (sb - 1.0) * self.prep.ln_1my[k];
                }
            }
        }
        total * self.norm
    }

    /// Objective, gradient and Hessian at (β, λ); the parameter vector is
    /// `[β…, λ]` of dimension r + 1.
    pub(crate) fn value_grad_hess(&self, beta: &[f64], lambda: f64) -> (f64, Vec<f64>, Vec<f64>) {
        let r = self.prep.r;
        let d = r + 1;
        let phi = lambda.exp();
        let lg_phi = lgamma(phi);
        let psi_phi = digamma(phi);
        let psi1_phi = trigamma(phi);
        let mut f = 0.0;
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d * d];

        for chain in self.effects {
            for i in 0..self.prep.n {
                let b_i = chain.values[i][1];
                for k in self.prep.obs_range(i) {
                    if !self.prep.positive[k] {
                        continue;
                    }
                    let z = self.prep.z_row(k);
                    let u = sigmoid(b_i + dot(z, beta));
                    let du = u * (1.0 - u);
                    let sa = u * phi;
                    let sb = (1.0 - u) * phi;
                    let (ln_y, ln_1my) = (self.prep.ln_y[k], self.prep.ln_1my[k]);
                    let psi_a = digamma(sa);
                    let psi_b = digamma(sb);
                    let psi1_a = trigamma(sa);
                    let psi1_b = trigamma(sb);

                    f += lg_phi - lgamma(sa) - lgamma(sb)
                        + (sa - 1.0) * ln_y
                        + (sb - 1.0) * ln_1my;

                    let dg_du_core = psi_b - psi_a + ln_y - ln_1my;
                    let dg_du = phi * dg_du_core;
                    let dg_dphi = psi_phi - u * psi_a - (1.0 - u) * psi_b
                        + u * ln_y
                        + (1.0 - u) * ln_1my;
                    let d2g_du2 = -phi * phi * (psi1_a + psi1_b);
                    let d2g_dudphi =
                        dg_du_core + phi * ((1.0 - u) * psi1_b - u * psi1_a);
                    let d2g_dphi2 =
                        psi1_phi - u * u * psi1_a - (1.0 - u) * (1.0 - u) * psi1_b;

                    // Chain rule through u = sigmoid(eta) and phi = exp(lambda).
                    let geta = dg_du * du;
                    let heta = d2g_du2 * du * du + dg_du * du * (1.0 - 2.0 * u);
                    let cross = phi * d2g_dudphi * du;
                    for a_idx in 0..r {
                        g[a_idx] += geta * z[a_idx];
                        for b_idx in 0..=a_idx {
                            h[a_idx * d + b_idx] += heta * z[a_idx] * z[b_idx];
                        }
                        h[r * d + a_idx] += cross * z[a_idx];
                    }
                    g[r] += phi * dg_dphi;
                    h[r * d + r] += phi * phi * d2g_dphi2 + phi * dg_dphi;
                }
            }
        }

        f *= self.norm;
        for v in g.iter_mut() {
            *v *= self.norm;
        }
        for v in h.iter_mut() {
            *v *= self.norm;
        }
        // Mirror the lower triangle.
        for a_idx in 0..d {
            for b_idx in a_idx + 1..d {
                h[a_idx * d + b_idx] = h[b_idx * d + a_idx];
            }
        }
        (f, g, h)
    }
}

pub(crate) fn maximize_beta_prepared(
    prep: &Prepared,
    effects: &[RandomEffects],
    beta_init: &[f64],
    phi_init: f64,
) -> OptimResult {
    let obj = BetaObjective::new(prep, effects);
    if !obj.has_positive() {
        // Empty positive-part sum: the objective is identically zero.
        let mut argmax = beta_init.to_vec();
        argmax.push(phi_init);
        return OptimResult {
            argmax,
            objective_value: 0.0,
            n_iterations: 0,
            converged: true,
            gradient_norm: 0.0,
            separation: false,
        };
    }

    let r = prep.r;
    let d = r + 1;
    let mut v: Vec<f64> = beta_init.to_vec();
    v.push(phi_init.ln());
    let eval = |v: &[f64]| obj.value_grad_hess(&v[..r], v[r]);
    let value = |v: &[f64]| obj.value(&v[..r], v[r]);

    let (mut f, mut g, mut h) = eval(&v);
    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=MAX_ITER {
        iterations = iter;
        if inf_norm(&g) < GRAD_TOL {
            converged = true;
            break;
        }
        let dir = ascent_direction(&g, &h, d);
        if inf_norm(&dir) < STEP_FLOOR * (1.0 + inf_norm(&v)) {
            break;
        }
        let Some((cand, _)) = line_search(&v, &dir, &g, f, value, |v| {
            v[r] = v[r].clamp(-LAMBDA_BOUND, LAMBDA_BOUND);
        }) else {
            break;
        };
        v = cand;
        let (f2, g2, h2) = eval(&v);
        f = f2;
        g = g2;
        h = h2;
    }
    if inf_norm(&g) < GRAD_TOL {
        converged = true;
    }

    let mut argmax = v[..r].to_vec();
    argmax.push(v[r].exp());
    OptimResult {
        argmax,
        objective_value: f,
        n_iterations: iterations,
        converged,
        gradient_norm: inf_norm(&g),
        separation: false,
    }
}

// ---------------------------------------------------------------------------
// Logistic part
// ---------------------------------------------------------------------------

pub(crate) struct LogisticObjective<'a> {
    prep: &'a Prepared,
    effects: &'a [RandomEffects],
    norm: f64,
}

impl<'a> LogisticObjective<'a> {
    pub(crate) fn new(prep: &'a Prepared, effects: &'a [RandomEffects]) -> Self {
        let norm = 1.0 / (effects.len() as f64 * prep.n_obs().max(1) as f64);
        LogisticObjective { prep, effects, norm }
    }

    pub(crate) fn value(&self, alpha: &[f64]) -> f64 {
        let mut total = 0.0;
        for chain in self.effects {
            for i in 0..self.prep.n {
                let a_i = chain.values[i][0];
                for k in self.prep.obs_range(i) {
                    let eta = a_i + dot(self.prep.x_row(k), alpha);
                    total +=
                        if self.prep.positive[k] { log_sigmoid(eta) } else { log_sigmoid(-eta) };
                }
            }
        }
        total * self.norm
    }

    /// True when every observation's fitted probability lies within
    /// `SATURATION_PROB` of its presence label under every chain's offsets.
    fn perfectly_fitted(&self, alpha: &[f64]) -> bool {
        for chain in self.effects {
            for i in 0..self.prep.n {
                let a_i = chain.values[i][0];
                for k in self.prep.obs_range(i) {
                    let prob = sigmoid(a_i + dot(self.prep.x_row(k), alpha));
                    let gap = if self.prep.positive[k] { 1.0 - prob } else { prob };
                    if gap > SATURATION_PROB {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub(crate) fn value_grad_hess(&self, alpha: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let p = self.prep.p;
        let mut f = 0.0;
        let mut g = vec![0.0; p];
        let mut h = vec![0.0; p * p];
        for chain in self.effects {
            for i in 0..self.prep.n {
                let a_i = chain.values[i][0];
                for k in self.prep.obs_range(i) {
                    let x = self.prep.x_row(k);
                    let eta = a_i + dot(x, alpha);
                    let prob = sigmoid(eta);
                    let w = if self.prep.positive[k] { 1.0 } else { 0.0 };
                    f += if self.prep.positive[k] { log_sigmoid(eta) } else { log_sigmoid(-eta) };
                    let resid = w - prob;
                    let wgt = prob * (1.0 - prob);
                    for a_idx in 0..p {
                        g[a_idx] += resid * x[a_idx];
                        for b_idx in 0..=a_idx {
                            h[a_idx * p + b_idx] -= wgt * x[a_idx] * x[b_idx];
                        }
                    }
                }
            }
        }
        f *= self.norm;
        for v in g.iter_mut() {
            *v *= self.norm;
        }
        for v in h.iter_mut() {
            *v *= self.norm;
        }
        for a_idx in 0..p {
            for b_idx in a_idx + 1..p {
                h[a_idx * p + b_idx] = h[b_idx * p + a_idx];
            }
        }
        (f, g, h)
    }
}

pub(crate) fn maximize_logistic_prepared(
    prep: &Prepared,
    effects: &[RandomEffects],
    alpha_init: &[f64],
) -> OptimResult {
    let obj = LogisticObjective::new(prep, effects);
    let p = prep.p;
    if p == 0 {
        return OptimResult {
            argmax: vec![],
            objective_value: obj.value(&[]),
            n_iterations: 0,
            converged: true,
            gradient_norm: 0.0,
            separation: false,
        };
    }

    let mut v = alpha_init.to_vec();
    let (mut f, mut g, mut h) = obj.value_grad_hess(&v);
    let mut converged = false;
    let mut separation = false;
    let mut iterations = 0;
    for iter in 1..=MAX_ITER {
        iterations = iter;
        if inf_norm(&g) < GRAD_TOL {
            converged = true;
            break;
        }
        let dir = ascent_direction(&g, &h, p);
        if inf_norm(&dir) < STEP_FLOOR * (1.0 + inf_norm(&v)) {
            break;
        }
        let Some((cand, _)) = line_search(&v, &dir, &g, f, |v| obj.value(v), |_| {}) else {
            break;
        };
        v = cand;
        if inf_norm(&v) > SEPARATION_BOUND {
            for c in v.iter_mut() {
                *c = c.clamp(-SEPARATION_BOUND, SEPARATION_BOUND);
            }
            separation = true;
            let (f2, g2, _) = obj.value_grad_hess(&v);
            f = f2;
            g = g2;
            break;
        }
        let (f2, g2, h2) = obj.value_grad_hess(&v);
        f = f2;
        g = g2;
        h = h2;
    }
    if !separation && inf_norm(&g) < GRAD_TOL {
        converged = true;
    }
    // A "converged" perfect fit is separation in disguise.
    if converged && obj.perfectly_fitted(&v) {
        separation = true;
        converged = false;
    }

    OptimResult {
        argmax: v,
        objective_value: f,
        n_iterations: iterations,
        converged: converged && !separation,
        gradient_norm: inf_norm(&g),
        separation,
    }
}

// ---------------------------------------------------------------------------
// Shared Newton machinery
// ---------------------------------------------------------------------------

/// Newton direction (−H)⁻¹ g when −H is positive definite and the step is an
/// ascent direction; the raw gradient otherwise.
fn ascent_direction(g: &[f64], h: &[f64], d: usize) -> Vec<f64> {
    let neg_h: Vec<f64> = h.iter().map(|&x| -x).collect();
    if let Ok(l) = cholesky(&neg_h, d) {
        let dir = chol_solve(&l, d, g);
        if dot(&dir, g) > 0.0 && dir.iter().all(|x| x.is_finite()) {
            return dir;
        }
    }
    g.to_vec()
}

/// Backtracking line search enforcing the Armijo condition; returns the
/// accepted point and its objective, or None when no step improves.
fn line_search(
    v: &[f64],
    dir: &[f64],
    g: &[f64],
    f0: f64,
    value: impl Fn(&[f64]) -> f64,
    clamp: impl Fn(&mut [f64]),
) -> Option<(Vec<f64>, f64)> {
    let slope = dot(g, dir);
    let mut t = 1.0;
    for _ in 0..60 {
        let mut cand: Vec<f64> = v.iter().zip(dir).map(|(x, d)| x + t * d).collect();
        clamp(&mut cand);
        let f_cand = value(&cand);
        if f_cand.is_finite() && f_cand >= f0 + ARMIJO * t * slope {
            return Some((cand, f_cand));
        }
        t *= 0.5;
    }
    None
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Individual, Observation, ZibrParams};
    use crate::simulate::{generate, SimConfig};
    use rand::Rng;

    fn setting2() -> ZibrParams {
        ZibrParams::scalar(6.4, -0.5, -0.5, 0.5, 0.5, 0.49, 0.25)
    }

    fn test_data(n: usize, t: usize, seed: u64) -> (Dataset, Vec<RandomEffects>) {
        let data = generate(&SimConfig {
            params: setting2(),
            n_individuals: n,
            t_per_individual: t,
            seed,
        })
        .unwrap();
        let mut rng = crate::exec::stream_rng(seed, &[42]);
        let effects: Vec<RandomEffects> = (0..3)
            .map(|_| RandomEffects {
                values: (0..n)
                    .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                    .collect(),
            })
            .collect();
        (data, effects)
    }

    #[test]
    fn all_zero_outcomes_short_circuit() {
        let observations = (0..4)
            .map(|t| Observation { time: t as f64, y: 0.0, x: vec![1.0], z: vec![1.0] })
            .collect();
        let data =
            Dataset::new(vec![Individual { id: "1".into(), observations }], 1, 1).unwrap();
        let effects = vec![RandomEffects::constant(1, [0.0, 0.0])];
        let res = maximize_beta_part(&data, &effects, &[0.3], 2.5).unwrap();
        assert!(res.converged);
        assert_eq!(res.n_iterations, 0);
        assert_eq!(res.gradient_norm, 0.0);
        assert_eq!(res.objective_value, 0.0);
        assert_eq!(res.argmax, vec![0.3, 2.5]);
    }

    #[test]
    fn beta_gradient_matches_finite_differences() {
        let (data, effects) = test_data(8, 5, 21);
        let prep = Prepared::new(&data);
        let obj = BetaObjective::new(&prep, &effects);
        let mut rng = crate::exec::stream_rng(3, &[1]);
        for _ in 0..20 {
            let beta = vec![rng.random_range(-1.0..1.0)];
            let lambda: f64 = rng.random_range(-0.5..2.5);
            let (_, g, h) = obj.value_grad_hess(&beta, lambda);
            let step = 1e-6;
            for j in 0..2 {
                let perturb = |s: f64| {
                    let mut b = beta.clone();
                    let mut l = lambda;
                    if j == 0 {
                        b[0] += s;
                    } else {
                        l += s;
                    }
                    (b, l)
                };
                let (bp, lp) = perturb(step);
                let (bm, lm) = perturb(-step);
                let fd = (obj.value(&bp, lp) - obj.value(&bm, lm)) / (2.0 * step);
                assert!(
                    (g[j] - fd).abs() <= 1e-5 * (1.0 + fd.abs()),
                    "grad[{j}] = {}, fd = {fd}",
                    g[j]
                );
                // Hessian column against finite differences of the gradient.
                let (_, gp, _) = obj.value_grad_hess(&bp, lp);
                let (_, gm, _) = obj.value_grad_hess(&bm, lm);
                for k in 0..2 {
                    let fd_h = (gp[k] - gm[k]) / (2.0 * step);
                    assert!(
                        (h[j * 2 + k] - fd_h).abs() <= 1e-4 * (1.0 + fd_h.abs()),
                        "hess[{j},{k}] = {}, fd = {fd_h}",
                        h[j * 2 + k]
                    );
                }
            }
        }
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let (data, effects) = test_data(8, 5, 22);
        let prep = Prepared::new(&data);
        let obj = LogisticObjective::new(&prep, &effects);
        let mut rng = crate::exec::stream_rng(5, &[1]);
        for _ in 0..20 {
            let alpha = vec![rng.random_range(-1.5..1.5)];
            let (_, g, h) = obj.value_grad_hess(&alpha);
            let step = 1e-6;
            let fd = (obj.value(&[alpha[0] + step]) - obj.value(&[alpha[0] - step]))
                / (2.0 * step);
            assert!((g[0] - fd).abs() <= 1e-5 * (1.0 + fd.abs()));
            let (_, gp, _) = obj.value_grad_hess(&[alpha[0] + step]);
            let (_, gm, _) = obj.value_grad_hess(&[alpha[0] - step]);
            let fd_h = (gp[0] - gm[0]) / (2.0 * step);
            assert!((h[0] - fd_h).abs() <= 1e-4 * (1.0 + fd_h.abs()));
        }
    }

    #[test]
    fn profile_dispersion_matches_grid_oracle() {
        // Single observation y = 0.3 with no Beta covariates and b_i = 0
        // fixes u = 1/2; the stationary dispersion solves
        // psi(phi) - psi(phi/2) = -0.5 ln(y(1-y)).
        let observations =
            vec![Observation { time: 1.0, y: 0.3, x: vec![], z: vec![] }];
        let data =
            Dataset::new(vec![Individual { id: "1".into(), observations }], 0, 0).unwrap();
        let effects = vec![RandomEffects::constant(1, [0.0, 0.0])];
        let res = maximize_beta_part(&data, &effects, &[], 2.0).unwrap();
        assert!(res.converged);
        let phi_hat = *res.argmax.last().unwrap();

        // 1-D grid-search oracle.
        let prep = Prepared::new(&data);
        let obj = BetaObjective::new(&prep, &effects);
        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut phi = 0.5f64;
        while phi < 50.0 {
            let v = obj.value(&[], phi.ln());
            if v > best.0 {
                best = (v, phi);
            }
            phi += 1e-3;
        }
        assert!((phi_hat - best.1).abs() < 1e-3, "newton {phi_hat} vs grid {}", best.1);
        // High-precision root of the stationarity condition.
        assert!((phi_hat - 6.192_801_893_030_298_966_9).abs() < 1e-4);
        let stat = digamma(phi_hat) - digamma(phi_hat / 2.0) + 0.5 * (0.3f64 * 0.7).ln();
        assert!(stat.abs() < 1e-6, "stationarity residual {stat}");
    }

    #[test]
    fn degenerate_midpoint_outcome_reports_nonconvergence() {
        // y = 0.5 at u = 1/2 pushes phi to infinity; the optimizer must stop
        // with converged = false and return its best iterate.
        let observations =
            vec![Observation { time: 1.0, y: 0.5, x: vec![], z: vec![] }];
        let data =
            Dataset::new(vec![Individual { id: "1".into(), observations }], 0, 0).unwrap();
        let effects = vec![RandomEffects::constant(1, [0.0, 0.0])];
        let res = maximize_beta_part(&data, &effects, &[], 2.0).unwrap();
        assert!(!res.converged);
        assert!(res.argmax[0] > 100.0, "phi should have grown, got {}", res.argmax[0]);
        assert!(res.objective_value.is_finite());
    }

    #[test]
    fn balanced_intercept_only_logistic_gives_zero() {
        let mut observations = Vec::new();
        for t in 0..4 {
            observations.push(Observation {
                time: t as f64,
                y: if t % 2 == 0 { 0.0 } else { 0.4 },
                x: vec![1.0],
                z: vec![1.0],
            });
        }
        let data =
            Dataset::new(vec![Individual { id: "1".into(), observations }], 1, 1).unwrap();
        let effects = vec![RandomEffects::constant(1, [0.0, 0.0])];
        let res = maximize_logistic_part(&data, &effects, &[0.8]).unwrap();
        assert!(res.converged);
        assert!(res.argmax[0].abs() < 1e-7, "alpha = {}", res.argmax[0]);
    }

    #[test]
    fn separation_is_flagged() {
        let observations = (0..6)
            .map(|t| Observation { time: t as f64, y: 0.2, x: vec![1.0], z: vec![1.0] })
            .collect();
        let data =
            Dataset::new(vec![Individual { id: "1".into(), observations }], 1, 1).unwrap();
        let effects = vec![RandomEffects::constant(1, [0.0, 0.0])];
        let res = maximize_logistic_part(&data, &effects, &[0.0]).unwrap();
        assert!(res.separation);
        assert!(!res.converged);
        assert!(res.argmax[0].abs() <= SEPARATION_BOUND);
    }

    #[test]
    fn beta_argmax_invariant_to_individual_permutation() {
        let (data, effects) = test_data(6, 4, 31);
        let res1 = maximize_beta_part(&data, &effects, &[0.0], 3.0).unwrap();

        let perm: Vec<usize> = vec![3, 0, 5, 1, 4, 2];
        let permuted = Dataset::new(
            perm.iter().map(|&i| data.individuals[i].clone()).collect(),
            1,
            1,
        )
        .unwrap();
        let permuted_effects: Vec<RandomEffects> = effects
            .iter()
            .map(|e| RandomEffects { values: perm.iter().map(|&i| e.values[i]).collect() })
            .collect();
        let res2 = maximize_beta_part(&permuted, &permuted_effects, &[0.0], 3.0).unwrap();
        for (a, b) in res1.argmax.iter().zip(&res2.argmax) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn different_initializations_agree() {
        let (data, effects) = test_data(20, 6, 33);
        let r1 = maximize_beta_part(&data, &effects, &[0.0], 1.0).unwrap();
        let r2 = maximize_beta_part(&data, &effects, &[1.0], 12.0).unwrap();
        assert!(r1.converged && r2.converged);
        for (a, b) in r1.argmax.iter().zip(&r2.argmax) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
        let l1 = maximize_logistic_part(&data, &effects, &[0.0]).unwrap();
        let l2 = maximize_logistic_part(&data, &effects, &[-1.5]).unwrap();
        assert!((l1.argmax[0] - l2.argmax[0]).abs() < 1e-5);
    }
}
