//! Seeded random source and the exact samplers the generator needs.
//!
//! The bit generator is ChaCha8 (`rand_chacha::ChaCha8Rng`). A 64-bit seed
//! is expanded into the 256-bit ChaCha key with four successive SplitMix64
//! outputs, written little-endian. Child streams for parallel replicates are
//! derived from the parent seed alone:
//!
//! ```text
//! child_seed(seed, index) = splitmix(splitmix(seed) ^ index)
//! ```
//!
//! where `splitmix(x)` is the first SplitMix64 output from state `x`. Forking
//! never consumes draws from the parent, so replicate `i` sees the same
//! stream no matter how many replicates run or in which order.
//!
//! Every sampler is written out here rather than delegated, so the exact
//! sequence of uniform draws each one consumes is fixed:
//!
//! * uniform on (0,1): top 53 bits of one `u64`; an exact zero is redrawn.
//! * standard normal: Marsaglia polar method, second variate discarded.
//! * Beta(1, b): inverse CDF `1 - (1 - u)^(1/b)`, one uniform per draw.
//! * Gamma(k): Marsaglia–Tsang squeeze, with the `U^(1/k)` boost for `k < 1`.
//! * Beta(p, q): `G_p / (G_p + G_q)`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::ParamError;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Smallest value strictly above zero that a stick may take.
const STICK_FLOOR: f64 = f64::MIN_POSITIVE;
/// Largest double strictly below one.
const STICK_CEIL: f64 = 1.0 - f64::EPSILON / 2.0;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn splitmix_once(x: u64) -> u64 {
    let mut s = x;
    splitmix64(&mut s)
}

/// Derives the seed of child stream `index` from a parent seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix_once(splitmix_once(seed) ^ index)
}

/// Deterministic, single-owner random stream.
#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        let mut state = seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        RandomSource {
            seed,
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// Independent child stream `index`; see the module docs for the rule.
    pub fn fork(&self, index: u64) -> Self {
        RandomSource::new(derive_seed(self.seed, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on [0, 1) with 53 bits of resolution.
    fn unit_closed_open(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw strictly inside (0, 1).
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.unit_closed_open();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        loop {
            let u = 2.0 * self.unit_closed_open() - 1.0;
            let v = 2.0 * self.unit_closed_open() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                return u * (-2.0 * s.ln() / s).sqrt();
            }
        }
    }

    /// Gaussian draw; `sigma == 0` returns `mean` exactly.
    pub fn gaussian(&mut self, mean: f64, sigma: f64) -> Result<f64, ParamError> {
        if sigma.is_nan() || sigma < 0.0 {
            return Err(ParamError::NegativeSigma(sigma));
        }
        if sigma == 0.0 {
            return Ok(mean);
        }
        Ok(mean + sigma * self.standard_normal())
    }

    /// Beta(1, b) by inverse CDF.
    ///
    /// Results that round onto an endpoint are pulled to the nearest double
    /// inside the open interval, so the stick-rescaling divisions stay finite.
    pub fn beta_one(&mut self, b: f64) -> Result<f64, ParamError> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(ParamError::BetaShape(b));
        }
        let u = self.uniform_open();
        // 1 - (1-u)^(1/b), written to keep precision near zero.
        let x = -((-u).ln_1p() / b).exp_m1();
        Ok(x.clamp(STICK_FLOOR, STICK_CEIL))
    }

    /// Gamma(shape, 1) by Marsaglia–Tsang.
    pub fn gamma(&mut self, shape: f64) -> Result<f64, ParamError> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(ParamError::BetaShape(shape));
        }
        Ok(self.gamma_unchecked(shape))
    }

    fn gamma_unchecked(&mut self, shape: f64) -> f64 {
        if shape < 1.0 {
            let g = self.gamma_unchecked(shape + 1.0);
            let u = self.uniform_open();
            return g * u.powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.standard_normal();
            let v = 1.0 + c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = self.uniform_open();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return d * v;
            }
            if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    /// Beta(p, q) as a ratio of gamma variates; redrawn if the ratio lands
    /// on an endpoint.
    pub fn beta(&mut self, p: f64, q: f64) -> Result<f64, ParamError> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(ParamError::BetaShape(p));
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(ParamError::BetaShape(q));
        }
        loop {
            let gp = self.gamma_unchecked(p);
            let gq = self.gamma_unchecked(q);
            let x = gp / (gp + gq);
            if x > 0.0 && x < 1.0 {
                return Ok(x);
            }
        }
    }
}
