use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DriverSpace, Model, WeightFailure};
use crate::distributions::{
    open_uniform, GammaSampler, MarginalDistribution, PositiveStableSampler,
};
use crate::error::{domain, Error, Result};

/// Archimedean generator ψ together with the law of its mixing variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "lowercase")]
pub enum Generator {
    /// ψ(t) = (1 + t)^(−1/θ), mixing 𝒱 ~ Gamma(1/θ, 1).
    Clayton { theta: f64 },
    /// ψ(t) = exp(−t^(1/θ)), mixing 𝒱 positive stable with index 1/θ.
    Gumbel { theta: f64 },
}

impl Generator {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Clayton { theta } if theta.is_finite() && theta > 0.0 => Ok(()),
            Self::Gumbel { theta } if theta.is_finite() && theta > 1.0 => Ok(()),
            Self::Clayton { theta } => Err(domain("clayton theta", theta, "(0, inf)")),
            Self::Gumbel { theta } => Err(domain("gumbel theta", theta, "(1, inf)")),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Clayton { .. } => "clayton",
            Self::Gumbel { .. } => "gumbel",
        }
    }

    pub fn theta(&self) -> f64 {
        match *self {
            Self::Clayton { theta } | Self::Gumbel { theta } => theta,
        }
    }

    pub fn psi(&self, t: f64) -> f64 {
        match *self {
            Self::Clayton { theta } => (-t.ln_1p() / theta).exp(),
            Self::Gumbel { theta } => (-t.powf(1.0 / theta)).exp(),
        }
    }

    /// 1 − ψ(t) without cancellation for small t.
    pub fn one_minus_psi(&self, t: f64) -> f64 {
        match *self {
            Self::Clayton { theta } => -(-t.ln_1p() / theta).exp_m1(),
            Self::Gumbel { theta } => -(-t.powf(1.0 / theta)).exp_m1(),
        }
    }

    pub fn psi_d1(&self, t: f64) -> f64 {
        match *self {
            Self::Clayton { theta } => -(1.0 / theta) * (1.0 + t).powf(-1.0 / theta - 1.0),
            Self::Gumbel { theta } => {
                let a = 1.0 / theta;
                -a * t.powf(a - 1.0) * self.psi(t)
            }
        }
    }

    pub fn psi_d2(&self, t: f64) -> f64 {
        match *self {
            Self::Clayton { theta } => {
                let a = 1.0 / theta;
                a * (a + 1.0) * (1.0 + t).powf(-a - 2.0)
            }
            Self::Gumbel { theta } => {
                let a = 1.0 / theta;
                (a * a * t.powf(2.0 * a - 2.0) - a * (a - 1.0) * t.powf(a - 2.0)) * self.psi(t)
            }
        }
    }

    /// c(t) = (log ψ)′(t).
    pub fn log_derivative(&self, t: f64) -> f64 {
        match *self {
            Self::Clayton { theta } => -1.0 / (theta * (1.0 + t)),
            Self::Gumbel { theta } => -(1.0 / theta) * t.powf(1.0 / theta - 1.0),
        }
    }

    /// c′(t).
    pub fn log_derivative_d1(&self, t: f64) -> f64 {
        match *self {
            Self::Clayton { theta } => 1.0 / (theta * (1.0 + t) * (1.0 + t)),
            Self::Gumbel { theta } => {
                let a = 1.0 / theta;
                -a * (a - 1.0) * t.powf(a - 2.0)
            }
        }
    }

    /// γⱼ from the generator-specific closed forms, with φⱼ = −ln uⱼ / 𝒱.
    pub fn gamma(&self, mixing: f64, u: f64) -> Result<f64> {
        let phi = -u.ln() / mixing;
        if !(phi > 0.0) || !phi.is_finite() {
            return Err(domain("phi_j(u)", phi, "(0, inf)"));
        }
        Ok(match *self {
            Self::Clayton { theta } => (-theta * (mixing - u.ln()) + theta + 1.0) / self.psi(phi),
            Self::Gumbel { theta } => {
                let a = 1.0 / theta;
                (-theta * mixing * phi.powf(1.0 - a) + (theta - 1.0) * phi.powf(-a) + 1.0)
                    / self.psi(phi)
            }
        })
    }

    /// γⱼ = 𝒱/ψ′(φ) + ψ″(φ)/ψ′(φ)², straight from the generator derivatives.
    pub fn gamma_generic(&self, mixing: f64, phi: f64) -> f64 {
        let d1 = self.psi_d1(phi);
        mixing / d1 + self.psi_d2(phi) / (d1 * d1)
    }

    /// γⱼ = (𝒱/c + c′/c² + 1) / ψ, the log-derivative form.
    pub fn gamma_log_form(&self, mixing: f64, phi: f64) -> f64 {
        let c = self.log_derivative(phi);
        (mixing / c + self.log_derivative_d1(phi) / (c * c) + 1.0) / self.psi(phi)
    }

    fn mixing_sampler(&self) -> Result<MixingSampler> {
        Ok(match *self {
            Self::Clayton { theta } => MixingSampler::Gamma(GammaSampler::new(1.0 / theta, 1.0)?),
            Self::Gumbel { theta } => MixingSampler::Stable(PositiveStableSampler::new(theta)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum MixingSampler {
    Gamma(GammaSampler),
    Stable(PositiveStableSampler),
}

impl MixingSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gamma(g) => g.sample(rng),
            Self::Stable(s) => s.sample(rng),
        }
    }
}

/// Losses with Archimedean (or survival Archimedean) copula dependence,
/// sampled by Marshall–Olkin: 𝒱 first, then U₁..U_d, 𝒰ᵢ = ψ(−ln Uᵢ / 𝒱).
#[derive(Debug, Clone, PartialEq)]
pub struct ArchimedeanCopulaModel {
    generator: Generator,
    survival: bool,
    marginals: Vec<MarginalDistribution>,
    mixing: MixingSampler,
}

impl ArchimedeanCopulaModel {
    pub fn new(
        generator: Generator,
        survival: bool,
        marginals: Vec<MarginalDistribution>,
    ) -> Result<Self> {
        generator.validate()?;
        if marginals.len() < 2 {
            return Err(Error::Model(format!(
                "copula model needs d >= 2 marginals, got {}",
                marginals.len()
            )));
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(Self {
            generator,
            survival,
            marginals,
            mixing: generator.mixing_sampler()?,
        })
    }

    pub fn generator(&self) -> Generator {
        self.generator
    }

    pub fn survival(&self) -> bool {
        self.survival
    }

    pub fn marginals(&self) -> &[MarginalDistribution] {
        &self.marginals
    }

    pub fn sample_mixing<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.mixing.sample(rng)
    }

    /// Pseudo-observations 𝒰ᵢ = ψ(−ln uᵢ / 𝒱), before any survival flip.
    pub fn pseudo_observations(&self, drivers: &[f64], mixing: f64) -> Vec<f64> {
        drivers
            .iter()
            .map(|&u| self.generator.psi(-u.ln() / mixing))
            .collect()
    }

    /// Copula-only factor γⱼ at the given driver row.
    pub fn archimedean_gamma(&self, j: usize, drivers: &[f64], mixing: f64) -> Result<f64> {
        self.generator.gamma(mixing, drivers[j])
    }

    /// Same quantity from ψ, ψ′, ψ″ directly.
    pub fn archimedean_gamma_generic(&self, j: usize, drivers: &[f64], mixing: f64) -> Result<f64> {
        let phi = -drivers[j].ln() / mixing;
        if !(phi > 0.0) || !phi.is_finite() {
            return Err(domain("phi_j(u)", phi, "(0, inf)"));
        }
        Ok(self.generator.gamma_generic(mixing, phi))
    }

    /// Weight with γⱼ supplied by the caller; shared by the production and
    /// the generic-γ paths.
    pub fn weight_with<F>(
        &self,
        asset: usize,
        losses: &[f64],
        gamma: F,
    ) -> Result<f64, WeightFailure>
    where
        F: Fn(usize) -> Result<f64>,
    {
        let sign = if self.survival { 1.0 } else { -1.0 };
        let mut w = 0.0;
        for (j, (m, &x)) in self.marginals.iter().zip(losses).enumerate() {
            if j == asset {
                continue;
            }
            let g = gamma(j).map_err(|_| WeightFailure::NonFinite)?;
            let s = m.score(x).map_err(|_| WeightFailure::NonFinite)?;
            w += m.pdf(x) * g + sign * s;
        }
        if w.is_finite() {
            Ok(w)
        } else {
            Err(WeightFailure::NonFinite)
        }
    }
}

impl Model for ArchimedeanCopulaModel {
    fn dim(&self) -> usize {
        self.marginals.len()
    }

    /// d uniforms plus the one feeding the mixing variable.
    fn driver_dim(&self) -> usize {
        self.marginals.len() + 1
    }

    fn driver_width(&self) -> usize {
        self.marginals.len()
    }

    fn space(&self) -> DriverSpace {
        DriverSpace::Uniform
    }

    fn draw_drivers<R: Rng + ?Sized>(&self, rng: &mut R, drivers: &mut [f64]) -> Option<f64> {
        let v = self.mixing.sample(rng);
        for u in drivers.iter_mut() {
            *u = open_uniform(rng);
        }
        Some(v)
    }

    fn losses_at(&self, drivers: &[f64], mixing: Option<f64>, out: &mut [f64]) {
        let v = mixing.unwrap_or(f64::NAN);
        for ((x, m), &u) in out.iter_mut().zip(&self.marginals).zip(drivers) {
            let t = -u.ln() / v;
            let (p, q) = (self.generator.psi(t), self.generator.one_minus_psi(t));
            *x = if self.survival {
                m.quantile_unchecked(q, p)
            } else {
                m.quantile_unchecked(p, q)
            };
        }
    }

    /// πᵢ = Σ_{j≠i} pⱼ(Xⱼ) γⱼ ∓ pⱼ′(Xⱼ)/pⱼ(Xⱼ): minus for the copula, plus
    /// for its survival copula.
    fn weight_at(
        &self,
        asset: usize,
        drivers: &[f64],
        mixing: Option<f64>,
        losses: &[f64],
    ) -> Result<f64, WeightFailure> {
        let v = mixing.ok_or(WeightFailure::Singular("missing mixing value"))?;
        self.weight_with(asset, losses, |j| self.generator.gamma(v, drivers[j]))
    }

    /// αⱼ(u) = ∓ uⱼ/(d−1) · 𝒱/ψ′(φⱼ) · pⱼ(Xⱼ) for j ≠ i; zero at i and at the
    /// mixing coordinate (which is therefore not stored).
    fn structural_field(
        &self,
        asset: usize,
        drivers: &[f64],
        mixing: Option<f64>,
    ) -> Result<Vec<f64>, WeightFailure> {
        let v = mixing.ok_or(WeightFailure::Singular("missing mixing value"))?;
        let d = self.dim();
        let mut x = vec![0.0; d];
        self.losses_at(drivers, mixing, &mut x);
        let sign = if self.survival { 1.0 } else { -1.0 };
        let field: Vec<f64> = (0..d)
            .map(|j| {
                if j == asset {
                    return 0.0;
                }
                let phi = -drivers[j].ln() / v;
                sign * drivers[j] / (d - 1) as f64 * v / self.generator.psi_d1(phi)
                    * self.marginals[j].pdf(x[j])
            })
            .collect();
        if field.iter().all(|f| f.is_finite()) {
            Ok(field)
        } else {
            Err(WeightFailure::NonFinite)
        }
    }
}
