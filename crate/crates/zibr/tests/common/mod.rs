#![allow(dead_code)] // each test target uses a subset

//! Shared test oracles: Gauss–Hermite quadrature of the observed-data
//! likelihood, independent of every estimation path in the crate.

use zibr::model::{observation_loglik_given_effects, Dataset, Individual, Observation, ZibrParams};
use zibr::special::{logsumexp, normal_logpdf};

/// Nodes and weights of n-point Gauss–Hermite quadrature for weight e^{-x²}
/// (Newton iteration on the orthonormal Hermite recurrence).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = std::f64::consts::PI.powf(-0.25);
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / j as f64).sqrt() * p2 - ((j as f64 - 1.0) / j as f64).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

/// Observed-data log-likelihood by adaptive tensor Gauss–Hermite quadrature:
/// for each individual the integrand is re-centered on its conditional mode
/// with scales from the local curvature, then integrated on an
/// `n_points × n_points` tensor grid.
pub fn loglik_quadrature(params: &ZibrParams, data: &Dataset, n_points: usize) -> f64 {
    let (nodes, weights) = gauss_hermite(n_points);
    let mut total = 0.0;
    for ind in &data.individuals {
        total += individual_log_marginal(params, ind, &nodes, &weights);
    }
    total
}

fn individual_log_marginal(
    params: &ZibrParams,
    ind: &Individual,
    nodes: &[f64],
    weights: &[f64],
) -> f64 {
    if ind.observations.is_empty() {
        return 0.0;
    }
    let g = |a: f64, b: f64| -> f64 {
        observation_loglik_given_effects(params, &ind.observations, a, b).unwrap()
            + normal_logpdf(a, params.a, params.sigma1_sq)
            + normal_logpdf(b, params.b, params.sigma2_sq)
    };

    // Newton ascent to the conditional mode with finite-difference
    // derivatives; the integrand is smooth and unimodal here.
    let (mut ca, mut cb) = (params.a, params.b);
    let h = 1e-5;
    for _ in 0..200 {
        let ga = (g(ca + h, cb) - g(ca - h, cb)) / (2.0 * h);
        let gb = (g(ca, cb + h) - g(ca, cb - h)) / (2.0 * h);
        let haa = (g(ca + h, cb) - 2.0 * g(ca, cb) + g(ca - h, cb)) / (h * h);
        let hbb = (g(ca, cb + h) - 2.0 * g(ca, cb) + g(ca, cb - h)) / (h * h);
        let (da, db) = (-ga / haa.min(-1e-8), -gb / hbb.min(-1e-8));
        ca += da.clamp(-1.0, 1.0);
        cb += db.clamp(-1.0, 1.0);
        if da.abs() < 1e-10 && db.abs() < 1e-10 {
            break;
        }
    }
    let haa = (g(ca + h, cb) - 2.0 * g(ca, cb) + g(ca - h, cb)) / (h * h);
    let hbb = (g(ca, cb + h) - 2.0 * g(ca, cb) + g(ca, cb - h)) / (h * h);
    let sa = (-1.0 / haa.min(-1e-8)).sqrt();
    let sb = (-1.0 / hbb.min(-1e-8)).sqrt();

    // p(y) = 2 sa sb Σ_ij w_i w_j exp(g(ca + √2 sa x_i, cb + √2 sb x_j) + x_i² + x_j²)
    let root2 = std::f64::consts::SQRT_2;
    let mut terms = Vec::with_capacity(nodes.len() * nodes.len());
    for (i, &xi) in nodes.iter().enumerate() {
        for (j, &xj) in nodes.iter().enumerate() {
            let val = g(ca + root2 * sa * xi, cb + root2 * sb * xj);
            terms.push(weights[i].ln() + weights[j].ln() + val + xi * xi + xj * xj);
        }
    }
    (2.0 * sa * sb).ln() + logsumexp(&terms)
}

/// Fixed 3-individual, 2-observation dataset used by the small-instance
/// likelihood oracle checks.
pub fn tiny_instance() -> (ZibrParams, Dataset) {
    let params = ZibrParams::scalar(6.4, -0.5, -0.5, 0.5, 0.5, 0.49, 0.25);
    let mk = |id: &str, x: f64, ys: [f64; 2]| Individual {
        id: id.to_string(),
        observations: ys
            .iter()
            .enumerate()
            .map(|(t, &y)| Observation { time: t as f64 + 1.0, y, x: vec![x], z: vec![x] })
            .collect(),
    };
    let data = Dataset::new(
        vec![
            mk("1", 0.0, [0.0, 0.22]),
            mk("2", 1.0, [0.41, 0.07]),
            mk("3", 1.0, [0.0, 0.0]),
        ],
        1,
        1,
    )
    .unwrap();
    (params, data)
}

/// Conditional means and variances of the random intercepts at fixed
/// parameters, estimated by running the Metropolis–Hastings sampler itself:
/// the importance-sampling proposal the estimator would use after a fit, but
/// computed at exactly the evaluation point.
pub fn sampler_conditional_moments(
    params: &ZibrParams,
    data: &Dataset,
    warmup: u64,
    collect: u64,
    seed: u64,
) -> Vec<zibr::saem::IndividualMoments> {
    use zibr::sampler::{sstep, ChainState, McmcConfig, SamplerStream};
    let n = data.n_individuals();
    let config = McmcConfig::default();
    let mut state = ChainState::new(n, [params.a, params.b]);
    let mut sum = vec![[0.0f64; 2]; n];
    let mut sumsq = vec![[0.0f64; 2]; n];
    for q in 0..warmup + collect {
        let stream = SamplerStream { seed, chain: 0, iteration: q };
        sstep(&mut state, params, data, &config, &stream).unwrap();
        if q >= warmup {
            for (i, v) in state.effects.values.iter().enumerate() {
                for c in 0..2 {
                    sum[i][c] += v[c];
                    sumsq[i][c] += v[c] * v[c];
                }
            }
        }
    }
    let m = collect as f64;
    (0..n)
        .map(|i| zibr::saem::IndividualMoments {
            mean: [sum[i][0] / m, sum[i][1] / m],
            variance: [
                (sumsq[i][0] / m - (sum[i][0] / m).powi(2)).max(0.0),
                (sumsq[i][1] / m - (sum[i][1] / m).powi(2)).max(0.0),
            ],
        })
        .collect()
}

/// Spearman rank correlation (no tie correction; inputs here are untied).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = pos as f64;
        }
        r
    };
    let rx = rank(x);
    let ry = rank(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx.sqrt() * vy.sqrt())
}
