//! Uniform, normal, gamma and positive-stable variate generation.
//!
//! Every sampler here draws only `f64` values from the open unit interval,
//! one `u64` per value, so the rng consumption of each variate is fixed by
//! the algorithm and documented on the sampler.

use rand::distr::Open01;
use rand::Rng;
use std::f64::consts::PI;

use super::normal::normal_quantile_unchecked;
use crate::error::{domain, Error, Result};

/// One draw from U(0, 1), endpoints excluded.
#[inline]
pub fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

/// Standard normal by inversion: consumes exactly one uniform.
#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    normal_quantile_unchecked(open_uniform(rng))
}

/// Gamma(shape, rate) sampler (Marsaglia–Tsang).
///
/// rng contract: every acceptance attempt consumes exactly two uniforms
/// (the first is mapped to a normal by inversion, the second is the
/// acceptance test), including attempts rejected because `1 + c·z ≤ 0`.
/// For `shape < 1` the variate is boosted from `shape + 1` and one further
/// uniform is consumed after the accepted attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSampler {
    shape: f64,
    rate: f64,
    d: f64,
    c: f64,
}

impl GammaSampler {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma shape must be > 0, got {shape}"
            )));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma rate must be > 0, got {rate}"
            )));
        }
        let d = if shape < 1.0 { shape + 1.0 } else { shape } - 1.0 / 3.0;
        Ok(Self {
            shape,
            rate,
            d,
            c: 1.0 / (9.0 * d).sqrt(),
        })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (d, c) = (self.d, self.c);
        let g = loop {
            let z = standard_normal(rng);
            let u = open_uniform(rng);
            let t = 1.0 + c * z;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            if u.ln() < 0.5 * z * z + d - d * v + d * v.ln() {
                break d * v;
            }
        };
        let g = if self.shape < 1.0 {
            g * open_uniform(rng).powf(1.0 / self.shape)
        } else {
            g
        };
        g / self.rate
    }
}

pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    Ok(GammaSampler::new(shape, rate)?.sample(rng))
}

/// Totally skewed positive stable law with Laplace transform
/// E[exp(−tV)] = exp(−t^(1/θ)), i.e. S(1/θ, 1, cos(π/(2θ))^θ, 0; 1) in
/// Nolan's 1-parametrisation. This is the mixing law of the Gumbel copula.
///
/// Chambers–Mallows–Stuck construction; rng contract: exactly two uniforms
/// per variate (angle first, then the exponential).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositiveStableSampler {
    theta: f64,
    alpha: f64,
    /// Nolan-1 scale of the target law.
    scale: f64,
    /// Scale of the standard CMS variate S(α, 1, 1, 0; 1).
    cms_scale: f64,
    /// Angular shift B = arctan(tan(πα/2)) / α.
    shift: f64,
}

/// Scale c = cos(π/(2θ))^θ of the Gumbel mixing law.
pub fn stable_scale(theta: f64) -> f64 {
    (0.5 * PI / theta).cos().powf(theta)
}

impl PositiveStableSampler {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta.is_finite() && theta > 1.0) {
            return Err(domain("theta", theta, "(1, inf)"));
        }
        let alpha = 1.0 / theta;
        let tan = (0.5 * PI * alpha).tan();
        Ok(Self {
            theta,
            alpha,
            scale: stable_scale(theta),
            cms_scale: (1.0 + tan * tan).powf(0.5 / alpha),
            shift: tan.atan() / alpha,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let angle = PI * (open_uniform(rng) - 0.5);
        let w = -open_uniform(rng).ln();
        let a = self.alpha;
        let shifted = a * (angle + self.shift);
        let x = self.cms_scale * shifted.sin() / angle.cos().powf(1.0 / a)
            * ((angle - shifted).cos() / w).powf((1.0 - a) / a);
        self.scale * x
    }
}

pub fn sample_positive_stable<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> Result<f64> {
    Ok(PositiveStableSampler::new(theta)?.sample(rng))
}
