use rand::Rng;

use super::{DriverSpace, Model, WeightFailure};
use crate::distributions::{open_uniform, MarginalDistribution};
use crate::error::{Error, Result};

/// Independent losses Xⱼ = Fⱼ⁻¹(Uⱼ) driven by d i.i.d. uniforms.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentModel {
    marginals: Vec<MarginalDistribution>,
}

impl IndependentModel {
    pub fn new(marginals: Vec<MarginalDistribution>) -> Result<Self> {
        if marginals.len() < 2 {
            return Err(Error::Model(format!(
                "independent model needs d >= 2 marginals, got {}",
                marginals.len()
            )));
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(Self { marginals })
    }

    pub fn marginals(&self) -> &[MarginalDistribution] {
        &self.marginals
    }
}

impl Model for IndependentModel {
    fn dim(&self) -> usize {
        self.marginals.len()
    }

    fn driver_dim(&self) -> usize {
        self.marginals.len()
    }

    fn driver_width(&self) -> usize {
        self.marginals.len()
    }

    fn space(&self) -> DriverSpace {
        DriverSpace::Uniform
    }

    fn draw_drivers<R: Rng + ?Sized>(&self, rng: &mut R, drivers: &mut [f64]) -> Option<f64> {
        for u in drivers.iter_mut() {
            *u = open_uniform(rng);
        }
        None
    }

    fn losses_at(&self, drivers: &[f64], _mixing: Option<f64>, out: &mut [f64]) {
        for ((x, m), &u) in out.iter_mut().zip(&self.marginals).zip(drivers) {
            *x = m.quantile_unchecked(u, 1.0 - u);
        }
    }

    /// πᵢ = −Σ_{j≠i} pⱼ′(Xⱼ)/pⱼ(Xⱼ), evaluated at the losses.
    fn weight_at(
        &self,
        asset: usize,
        _drivers: &[f64],
        _mixing: Option<f64>,
        losses: &[f64],
    ) -> Result<f64, WeightFailure> {
        let mut w = 0.0;
        for (j, (m, &x)) in self.marginals.iter().zip(losses).enumerate() {
            if j != asset {
                w -= m.score(x).map_err(|_| WeightFailure::NonFinite)?;
            }
        }
        if w.is_finite() {
            Ok(w)
        } else {
            Err(WeightFailure::NonFinite)
        }
    }

    /// fᵢ,ⱼ = 1 / ((d−1) φⱼ′(uⱼ)) = pⱼ(Xⱼ) / (d−1) for j ≠ i.
    fn structural_field(
        &self,
        asset: usize,
        drivers: &[f64],
        mixing: Option<f64>,
    ) -> Result<Vec<f64>, WeightFailure> {
        let d = self.dim();
        let mut x = vec![0.0; d];
        self.losses_at(drivers, mixing, &mut x);
        let scale = 1.0 / (d - 1) as f64;
        Ok(self
            .marginals
            .iter()
            .zip(&x)
            .enumerate()
            .map(|(j, (m, &xj))| if j == asset { 0.0 } else { m.pdf(xj) * scale })
            .collect())
    }
}
