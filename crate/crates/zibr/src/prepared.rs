//! Flattened, read-only view of a [`Dataset`](crate::model::Dataset) used by
//! the sampler, the inner maximizations and the information-matrix pass.
//! Logs of the outcomes are precomputed once so the Metropolis kernels only
//! pay for the terms that actually change.

use crate::model::{Dataset, ZibrParams};

pub(crate) struct Prepared {
    pub n: usize,
    pub p: usize,
    pub r: usize,
    /// Observation offsets per individual; observations of individual `i`
    /// occupy `obs_start[i]..obs_start[i + 1]`.
    pub obs_start: Vec<usize>,
    pub positive: Vec<bool>,
    pub ln_y: Vec<f64>,
    pub ln_1my: Vec<f64>,
    /// Row-major covariates, strides `p` and `r`.
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

impl Prepared {
    pub fn new(data: &Dataset) -> Self {
        let n = data.n_individuals();
        let total = data.n_observations();
        let mut obs_start = Vec::with_capacity(n + 1);
        let mut positive = Vec::with_capacity(total);
        let mut ln_y = Vec::with_capacity(total);
        let mut ln_1my = Vec::with_capacity(total);
        let mut x = Vec::with_capacity(total * data.p);
        let mut z = Vec::with_capacity(total * data.r);
        let mut offset = 0;
        for ind in &data.individuals {
            obs_start.push(offset);
            for obs in &ind.observations {
                positive.push(obs.y > 0.0);
                if obs.y > 0.0 {
                    ln_y.push(obs.y.ln());
                    ln_1my.push((-obs.y).ln_1p());
                } else {
                    ln_y.push(f64::NEG_INFINITY);
                    ln_1my.push(0.0);
                }
                x.extend_from_slice(&obs.x);
                z.extend_from_slice(&obs.z);
            }
            offset += ind.observations.len();
        }
        obs_start.push(offset);
        Prepared { n, p: data.p, r: data.r, obs_start, positive, ln_y, ln_1my, x, z }
    }

    pub fn n_obs(&self) -> usize {
        self.positive.len()
    }

    pub fn obs_range(&self, i: usize) -> std::ops::Range<usize> {
        self.obs_start[i]..self.obs_start[i + 1]
    }

    pub fn x_row(&self, k: usize) -> &[f64] {
        &self.x[k * self.p..(k + 1) * self.p]
    }

    pub fn z_row(&self, k: usize) -> &[f64] {
        &self.z[k * self.r..(k + 1) * self.r]
    }

    /// Fixed-effect linear predictors xᵀα and zᵀβ for every observation;
    /// recomputed once per iteration so the kernels touch only the intercepts.
    pub fn linear_predictors(&self, params: &ZibrParams) -> (Vec<f64>, Vec<f64>) {
        let total = self.n_obs();
        let mut lx = vec![0.0; total];
        let mut lz = vec![0.0; total];
        for k in 0..total {
            lx[k] = crate::model::dot(self.x_row(k), &params.alpha);
            lz[k] = crate::model::dot(self.z_row(k), &params.beta);
        }
        (lx, lz)
    }
}
