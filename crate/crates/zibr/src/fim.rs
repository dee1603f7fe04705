//! Stochastic approximation of the observed Fisher information through
//! Louis's missing-information identity, and standard errors from its
//! inverse.
//!
//! The accumulator tracks D (running score), G (running curvature plus score
//! outer product) and H = G − DDᵀ, which converges to the second derivative
//! of the observed-data log-likelihood; −H⁻¹ then approximates the covariance
//! of the estimator. The parameter ordering is fixed by the manifest
//! (a, b, α…, β…, σ₁², σ₂², φ) — all on natural scales, variances included.

use crate::error::{Error, Result};
use crate::linalg::{chol_inverse, cholesky};
use crate::model::{dot, Dataset, RandomEffects, ZibrParams};
use crate::prepared::Prepared;
use crate::special::{digamma, sigmoid, trigamma};

/// Running Louis-identity accumulator.
#[derive(Debug, Clone)]
pub struct FimAccumulator {
    /// Parameter names fixing the row/column order for all consumers.
    pub names: Vec<String>,
    /// Running mean of the complete-data score.
    pub d: Vec<f64>,
    /// Running mean of (∂²ℓ + score scoreᵀ), row-major.
    pub g: Vec<f64>,
    /// H = G − DDᵀ, row-major.
    pub h: Vec<f64>,
}

impl FimAccumulator {
    pub fn new(names: Vec<String>) -> Self {
        let dim = names.len();
        FimAccumulator { names, d: vec![0.0; dim], g: vec![0.0; dim * dim], h: vec![0.0; dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    fn refresh_h(&mut self) {
        let dim = self.dim();
        for i in 0..dim {
            for j in 0..dim {
                self.h[i * dim + j] = self.g[i * dim + j] - self.d[i] * self.d[j];
            }
        }
    }
}

/// One stochastic-approximation update from a single (score, hessian) draw:
/// D ← D + γ(s − D), G ← G + γ(∂²ℓ + ssᵀ − G), H = G − DDᵀ.
pub fn fim_update(acc: &mut FimAccumulator, score: &[f64], hessian: &[f64], gamma: f64) {
    fim_update_chains(acc, &[score.to_vec()], &[hessian.to_vec()], gamma);
}

/// Multi-chain update: D moves toward the chain-averaged score and G toward
/// the chain average of (∂²ℓ_l + s_l s_lᵀ). Averaging the outer products per
/// chain (rather than forming the outer product of the averaged score) keeps
/// the missing-information term at full strength for any number of chains.
pub fn fim_update_chains(
    acc: &mut FimAccumulator,
    scores: &[Vec<f64>],
    hessians: &[Vec<f64>],
    gamma: f64,
) {
    let dim = acc.dim();
    debug_assert!(!scores.is_empty() && scores.len() == hessians.len());
    debug_assert!(scores.iter().all(|s| s.len() == dim));
    debug_assert!(hessians.iter().all(|h| h.len() == dim * dim));
    let m = scores.len() as f64;

    let mut mean_score = vec![0.0; dim];
    let mut mean_curv = vec![0.0; dim * dim];
    for (s, h) in scores.iter().zip(hessians) {
        for i in 0..dim {
            mean_score[i] += s[i] / m;
            for j in 0..dim {
                mean_curv[i * dim + j] += (h[i * dim + j] + s[i] * s[j]) / m;
            }
        }
    }
    for i in 0..dim {
        acc.d[i] += gamma * (mean_score[i] - acc.d[i]);
        for j in 0..dim {
            let idx = i * dim + j;
            acc.g[idx] += gamma * (mean_curv[idx] - acc.g[idx]);
        }
    }
    acc.refresh_h();
}

/// Standard errors √diag((−H)⁻¹) in manifest order, or a diagnostic error
/// when −H is not positive definite.
pub fn standard_errors(acc: &FimAccumulator) -> Result<Vec<f64>> {
    let dim = acc.dim();
    let neg_h: Vec<f64> = acc.h.iter().map(|&x| -x).collect();
    match cholesky(&neg_h, dim) {
        Ok(l) => {
            let inv = chol_inverse(&l, dim);
            Ok((0..dim).map(|i| inv[i * dim + i].sqrt()).collect())
        }
        Err((idx, pivot)) => Err(Error::Numerical(format!(
            "-H is not positive definite: pivot {pivot:.3e} at parameter '{}'",
            acc.names[idx]
        ))),
    }
}

/// Analytic score and Hessian of the complete-data log-likelihood at
/// (θ, effects), in manifest order; the Hessian is row-major `dim × dim`.
pub fn score_and_hessian(
    params: &ZibrParams,
    data: &Dataset,
    effects: &RandomEffects,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if effects.len() != data.n_individuals() {
        return Err(Error::DimensionMismatch(format!(
            "effects has {} rows for {} individuals",
            effects.len(),
            data.n_individuals()
        )));
    }
    if !(params.sigma1_sq > 0.0 && params.sigma2_sq > 0.0) {
        return Err(Error::Domain("score needs positive variances".into()));
    }
    let prep = Prepared::new(data);
    Ok(score_and_hessian_prepared(params, &prep, effects))
}

pub(crate) fn score_and_hessian_prepared(
    params: &ZibrParams,
    prep: &Prepared,
    effects: &RandomEffects,
) -> (Vec<f64>, Vec<f64>) {
    let p = prep.p;
    let r = prep.r;
    let dim = 5 + p + r;
    let (ia, ib) = (0usize, 1usize);
    let ialpha = 2;
    let ibeta = 2 + p;
    let iv1 = 2 + p + r;
    let iv2 = iv1 + 1;
    let iphi = iv1 + 2;

    let mut s = vec![0.0; dim];
    let mut h = vec![0.0; dim * dim];
    let phi = params.phi;
    let psi_phi = digamma(phi);
    let psi1_phi = trigamma(phi);
    let (v1, v2) = (params.sigma1_sq, params.sigma2_sq);

    for i in 0..prep.n {
        let [a_i, b_i] = effects.values[i];

        // Normal prior blocks.
        let da = a_i - params.a;
        s[ia] += da / v1;
        s[iv1] += -0.5 / v1 + da * da / (2.0 * v1 * v1);
        h[ia * dim + ia] -= 1.0 / v1;
        h[ia * dim + iv1] -= da / (v1 * v1);
        h[iv1 * dim + iv1] += 0.5 / (v1 * v1) - da * da / (v1 * v1 * v1);

        let db = b_i - params.b;
        s[ib] += db / v2;
        s[iv2] += -0.5 / v2 + db * db / (2.0 * v2 * v2);
        h[ib * dim + ib] -= 1.0 / v2;
        h[ib * dim + iv2] -= db / (v2 * v2);
        h[iv2 * dim + iv2] += 0.5 / (v2 * v2) - db * db / (v2 * v2 * v2);

        for k in prep.obs_range(i) {
            // Logistic block (α only; a_i is data here).
            let x = prep.x_row(k);
            let eta = a_i + dot(x, &params.alpha);
            let prob = sigmoid(eta);
            let w = if prep.positive[k] { 1.0 } else { 0.0 };
            let wgt = prob * (1.0 - prob);
            for ja in 0..p {
                s[ialpha + ja] += (w - prob) * x[ja];
                for jb in 0..p {
                    h[(ialpha + ja) * dim + (ialpha + jb)] -= wgt * x[ja] * x[jb];
                }
            }

            if !prep.positive[k] {
                continue;
            }

            // Beta block (β, φ).
            let z = prep.z_row(k);
            let u = sigmoid(b_i + dot(z, &params.beta));
            let du = u * (1.0 - u);
            let sa = u * phi;
            let sb = (1.0 - u) * phi;
            let (ln_y, ln_1my) = (prep.ln_y[k], prep.ln_1my[k]);
            let psi_a = digamma(sa);
            let psi_b = digamma(sb);
            let psi1_a = trigamma(sa);
            let psi1_b = trigamma(sb);

            let dg_du_core = psi_b - psi_a + ln_y - ln_1my;
            let dg_du = phi * dg_du_core;
            let dg_dphi =
                psi_phi - u * psi_a - (1.0 - u) * psi_b + u * ln_y + (1.0 - u) * ln_1my;
            let d2g_du2 = -phi * phi * (psi1_a + psi1_b);
            let d2g_dudphi = dg_du_core + phi * ((1.0 - u) * psi1_b - u * psi1_a);
            let d2g_dphi2 = psi1_phi - u * u * psi1_a - (1.0 - u) * (1.0 - u) * psi1_b;

            let geta = dg_du * du;
            let heta = d2g_du2 * du * du + dg_du * du * (1.0 - 2.0 * u);
            let cross = d2g_dudphi * du;
            for ja in 0..r {
                s[ibeta + ja] += geta * z[ja];
                for jb in 0..r {
                    h[(ibeta + ja) * dim + (ibeta + jb)] += heta * z[ja] * z[jb];
                }
                h[(ibeta + ja) * dim + iphi] += cross * z[ja];
            }
            s[iphi] += dg_dphi;
            h[iphi * dim + iphi] += d2g_dphi2;
        }
    }

    // Cross-block terms were accumulated in the upper triangle only.
    for i in 0..dim {
        for j in i + 1..dim {
            h[j * dim + i] = h[i * dim + j];
        }
    }
    (s, h)
}
