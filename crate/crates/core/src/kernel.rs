//! Parent-to-child distribution transition and diagonal Gaussian likelihood.

use crate::error::{Error, ParamError};
use crate::model::NodeDistribution;
use crate::sampling::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub p: f64,
    pub q: f64,
    pub sigma_min: f64,
}

impl KernelParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.p.is_nan() || self.p <= 0.0 {
            return Err(ParamError::P(self.p));
        }
        if self.q.is_nan() || self.q <= 0.0 {
            return Err(ParamError::Q(self.q));
        }
        if self.sigma_min.is_nan() || self.sigma_min < 0.0 {
            return Err(ParamError::SigmaBounds {
                min: self.sigma_min,
                max: f64::NAN,
            });
        }
        Ok(())
    }
}

/// Draws a child distribution from `parent`.
///
/// Per dimension, in order: the child mean from `Gauss(parent mean, parent
/// sigma)`, then a ratio from `Beta(p, q)`; the child sigma is
/// `parent sigma * ratio` clamped below at `sigma_min`.
///
/// Panics if the kernel shapes are not positive; validate them first.
pub fn derive_child(
    parent: &NodeDistribution,
    kernel: &KernelParams,
    rng: &mut RandomSource,
) -> NodeDistribution {
    let d = parent.dim();
    let mut means = Vec::with_capacity(d);
    let mut sigmas = Vec::with_capacity(d);
    for (&mu, &sigma) in parent.means.iter().zip(&parent.sigmas) {
        let child_mean = rng
            .gaussian(mu, sigma)
            .expect("parent sigma is non-negative");
        let ratio = rng
            .beta(kernel.p, kernel.q)
            .expect("kernel shapes validated");
        means.push(child_mean);
        sigmas.push((sigma * ratio).max(kernel.sigma_min));
    }
    NodeDistribution { means, sigmas }
}

/// `d` independent Gaussian draws from a node distribution.
pub fn draw_point(dist: &NodeDistribution, rng: &mut RandomSource) -> Vec<f64> {
    dist.means
        .iter()
        .zip(&dist.sigmas)
        .map(|(&mu, &sigma)| rng.gaussian(mu, sigma).expect("node sigma is non-negative"))
        .collect()
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// A node distribution with its log-density constants precomputed.
///
/// [`log_likelihood`] goes through this type as well, so both paths produce
/// bit-identical values.
#[derive(Debug, Clone)]
pub struct PreparedDistribution {
    means: Vec<f64>,
    inv_sigmas: Vec<f64>,
    log_norm: f64,
}

impl PreparedDistribution {
    pub fn new(dist: &NodeDistribution) -> Self {
        let log_norm = -dist
            .sigmas
            .iter()
            .map(|s| s.ln() + HALF_LN_2PI)
            .sum::<f64>();
        PreparedDistribution {
            means: dist.means.clone(),
            inv_sigmas: dist.sigmas.iter().map(|s| 1.0 / s).collect(),
            log_norm,
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn inv_sigmas(&self) -> &[f64] {
        &self.inv_sigmas
    }

    /// `-sum(ln sigma + ln(2 pi) / 2)`.
    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// Log-density; the caller guarantees matching dimension.
    #[inline]
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut quad = 0.0;
        for ((&xi, &mu), &inv) in x.iter().zip(&self.means).zip(&self.inv_sigmas) {
            let z = (xi - mu) * inv;
            quad += z * z;
        }
        self.log_norm - 0.5 * quad
    }
}

/// Sum over dimensions of the log Gaussian density of `x`.
pub fn log_likelihood(x: &[f64], dist: &NodeDistribution) -> Result<f64, Error> {
    if x.len() != dist.dim() {
        return Err(Error::DimensionMismatch {
            expected: dist.dim(),
            found: x.len(),
        });
    }
    Ok(PreparedDistribution::new(dist).log_density(x))
}
