use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use super::normal::{normal_cdf, normal_ln_pdf, normal_quantile_unchecked, normal_sf};
use crate::error::{domain, Error, Result};

/// A one-dimensional loss marginal with a differentiable density.
///
/// Parameters are validated by [`MarginalDistribution::validate`]; the
/// constructors call it, and config loading calls it after deserialisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MarginalDistribution {
    Normal {
        mu: f64,
        sigma: f64,
    },
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    Exponential {
        rate: f64,
    },
    /// Shape/rate parametrisation, density ∝ x^(shape−1) e^(−rate·x).
    Gamma {
        shape: f64,
        rate: f64,
    },
    /// Generalised Pareto with tail index `xi > 0` and scale `beta`.
    Gpd {
        xi: f64,
        beta: f64,
    },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite and > 0, got {v}"
        )))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite, got {v}"
        )))
    }
}

impl MarginalDistribution {
    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        let m = Self::Normal { mu, sigma };
        m.validate().map(|_| m)
    }

    pub fn log_normal(mu: f64, sigma: f64) -> Result<Self> {
        let m = Self::LogNormal { mu, sigma };
        m.validate().map(|_| m)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        let m = Self::Exponential { rate };
        m.validate().map(|_| m)
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        let m = Self::Gamma { shape, rate };
        m.validate().map(|_| m)
    }

    pub fn gpd(xi: f64, beta: f64) -> Result<Self> {
        let m = Self::Gpd { xi, beta };
        m.validate().map(|_| m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Normal { mu, sigma } | Self::LogNormal { mu, sigma } => {
                finite("mu", mu)?;
                positive("sigma", sigma)
            }
            Self::Exponential { rate } => positive("rate", rate),
            Self::Gamma { shape, rate } => {
                positive("shape", shape)?;
                positive("rate", rate)
            }
            Self::Gpd { xi, beta } => {
                positive("xi", xi)?;
                positive("beta", beta)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Normal { .. } => "normal",
            Self::LogNormal { .. } => "lognormal",
            Self::Exponential { .. } => "exponential",
            Self::Gamma { .. } => "gamma",
            Self::Gpd { .. } => "gpd",
        }
    }

    /// Lower end of the support (−∞ for the normal).
    pub fn support_lower(&self) -> f64 {
        match self {
            Self::Normal { .. } => f64::NEG_INFINITY,
            _ => 0.0,
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        match self {
            Self::Normal { .. } => x.is_finite(),
            Self::LogNormal { .. } | Self::Gamma { .. } => x.is_finite() && x > 0.0,
            Self::Exponential { .. } | Self::Gpd { .. } => x.is_finite() && x >= 0.0,
        }
    }

    /// Log-density; −∞ outside the support.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !self.in_support(x) {
            return f64::NEG_INFINITY;
        }
        match *self {
            Self::Normal { mu, sigma } => normal_ln_pdf((x - mu) / sigma) - sigma.ln(),
            Self::LogNormal { mu, sigma } => {
                let lx = x.ln();
                normal_ln_pdf((lx - mu) / sigma) - sigma.ln() - lx
            }
            Self::Exponential { rate } => rate.ln() - rate * x,
            Self::Gamma { shape, rate } => {
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
            }
            Self::Gpd { xi, beta } => -beta.ln() - (1.0 / xi + 1.0) * (xi * x / beta).ln_1p(),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// Score p′(x)/p(x).
    pub fn score(&self, x: f64) -> Result<f64> {
        if !self.in_support(x) {
            return Err(domain("x", x, "support of the marginal"));
        }
        Ok(match *self {
            Self::Normal { mu, sigma } => -(x - mu) / (sigma * sigma),
            Self::LogNormal { mu, sigma } => -((x.ln() - mu) / (sigma * sigma) + 1.0) / x,
            Self::Exponential { rate } => -rate,
            Self::Gamma { shape, rate } => (shape - 1.0) / x - rate,
            Self::Gpd { xi, beta } => -(1.0 + xi) / (beta + xi * x),
        })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match *self {
            Self::Normal { mu, sigma } => normal_cdf((x - mu) / sigma),
            Self::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    normal_cdf((x.ln() - mu) / sigma)
                }
            }
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Self::Gamma { shape, rate } => {
                if x <= 0.0 {
                    0.0
                } else if x.is_infinite() {
                    1.0
                } else {
                    gamma_lr(shape, rate * x)
                }
            }
            Self::Gpd { xi, beta } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-(xi * x / beta).ln_1p() / xi).exp_m1()
                }
            }
        }
    }

    /// Survival function 1 − F(x), computed without cancellation in the right tail.
    pub fn sf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match *self {
            Self::Normal { mu, sigma } => normal_sf((x - mu) / sigma),
            Self::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    1.0
                } else {
                    normal_sf((x.ln() - mu) / sigma)
                }
            }
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            Self::Gamma { shape, rate } => {
                if x <= 0.0 {
                    1.0
                } else if x.is_infinite() {
                    0.0
                } else {
                    gamma_ur(shape, rate * x)
                }
            }
            Self::Gpd { xi, beta } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-(xi * x / beta).ln_1p() / xi).exp()
                }
            }
        }
    }

    /// F⁻¹(u). `u = 0` is accepted when the support has a finite left end.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        let lower_ok = self.support_lower().is_finite();
        let valid = (u > 0.0 || (u == 0.0 && lower_ok)) && u < 1.0;
        if !valid {
            return Err(domain(
                "probability",
                u,
                "[0, 1) (0 excluded for unbounded support)",
            ));
        }
        Ok(self.quantile_unchecked(u, 1.0 - u))
    }

    /// F⁻¹(1 − q), evaluated from the upper-tail probability `q` directly so
    /// that right-tail quantiles keep full precision.
    pub fn quantile_upper(&self, q: f64) -> Result<f64> {
        let lower_ok = self.support_lower().is_finite();
        let valid = q > 0.0 && (q < 1.0 || (q == 1.0 && lower_ok));
        if !valid {
            return Err(domain("upper probability", q, "(0, 1]"));
        }
        Ok(self.quantile_unchecked(1.0 - q, q))
    }

    /// Quantile from the pair (u, q) with u + q = 1; whichever of the two is
    /// smaller carries the precision.
    pub(crate) fn quantile_unchecked(&self, u: f64, q: f64) -> f64 {
        let z = || {
            if u <= q {
                normal_quantile_unchecked(u)
            } else {
                -normal_quantile_unchecked(q)
            }
        };
        match *self {
            Self::Normal { mu, sigma } => mu + sigma * z(),
            Self::LogNormal { mu, sigma } => (mu + sigma * z()).exp(),
            Self::Exponential { rate } => {
                if u <= q {
                    -(-u).ln_1p() / rate
                } else {
                    -q.ln() / rate
                }
            }
            Self::Gamma { shape, rate } => inverse_regularized_gamma(shape, u, q) / rate,
            Self::Gpd { xi, beta } => {
                // (1 - u)^(-xi) - 1
                let ln_q = if u <= q { (-u).ln_1p() } else { q.ln() };
                beta / xi * (-xi * ln_q).exp_m1()
            }
        }
    }
}

/// Solves P(a, x) = p (equivalently Q(a, x) = q) for x.
///
/// Initial guess and Halley iteration follow the classic `invgammp` scheme;
/// the residual is formed from whichever of p and q is smaller.
fn inverse_regularized_gamma(a: f64, p: f64, q: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if q <= 0.0 {
        return f64::INFINITY;
    }
    let gln = ln_gamma(a);
    let a1 = a - 1.0;
    let lna1 = if a > 1.0 { a1.ln() } else { 0.0 };
    let afac = if a > 1.0 {
        (a1 * (lna1 - 1.0) - gln).exp()
    } else {
        0.0
    };

    let mut x = if a > 1.0 {
        let pp = if p < 0.5 { p } else { q };
        let t = (-2.0 * pp.ln()).sqrt();
        let mut z = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
        if p < 0.5 {
            z = -z;
        }
        (a * (1.0 - 1.0 / (9.0 * a) - z / (3.0 * a.sqrt())).powi(3)).max(1e-3)
    } else {
        let t = 1.0 - a * (0.253 + a * 0.12);
        if p < t {
            (p / t).powf(1.0 / a)
        } else {
            1.0 - ((q) / (1.0 - t)).ln()
        }
    };

    for _ in 0..100 {
        if x <= 0.0 {
            return 0.0;
        }
        let err = if p <= q {
            gamma_lr(a, x) - p
        } else {
            q - gamma_ur(a, x)
        };
        let dens = if a > 1.0 {
            afac * (-(x - a1) + a1 * (x.ln() - lna1)).exp()
        } else {
            (-x + a1 * x.ln() - gln).exp()
        };
        if dens == 0.0 || !dens.is_finite() {
            break;
        }
        let u = err / dens;
        let step = u / (1.0 - 0.5 * (u * (a1 / x - 1.0)).min(1.0));
        x -= step;
        if x <= 0.0 {
            x = 0.5 * (x + step);
        }
        if step.abs() <= 1e-15 * x {
            break;
        }
    }
    x
}
