//! Loss-model families: each owns its driver dimension, the map from drivers
//! to losses, the sampler, and the per-asset Malliavin weight.

mod archimedean;
mod batch;
mod elliptical;
mod gaussian;
mod independent;
pub mod structural;

use rand::Rng;

pub use archimedean::{ArchimedeanCopulaModel, Generator};
pub use batch::{DrawBatch, DriverSpace};
pub use elliptical::{EllipticalModel, RadialFunction};
pub use gaussian::{gaussian_closed_form, gaussian_min_norm_f, ClosedForm, GaussianLinearModel};
pub use independent::IndependentModel;

use crate::error::{Error, Result};

/// Why a weight could not be evaluated for one draw. Such draws are excluded
/// from both sides of the Malliavin ratio and counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightFailure {
    NonFinite,
    Singular(&'static str),
}

impl std::fmt::Display for WeightFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NonFinite => f.write_str("non-finite weight"),
            Self::Singular(why) => write!(f, "singular weight ({why})"),
        }
    }
}

/// Interface shared by the model families.
pub trait Model {
    /// Number of assets d.
    fn dim(&self) -> usize;
    /// Number k of i.i.d. driver variables.
    fn driver_dim(&self) -> usize;
    /// Number of driver coordinates stored per draw.
    fn driver_width(&self) -> usize;
    fn space(&self) -> DriverSpace;
    /// Fills one driver row and returns the mixing value, if any.
    fn draw_drivers<R: Rng + ?Sized>(&self, rng: &mut R, drivers: &mut [f64]) -> Option<f64>;
    /// Losses g(drivers).
    fn losses_at(&self, drivers: &[f64], mixing: Option<f64>, out: &mut [f64]);
    /// Malliavin weight πᵢ at one draw.
    fn weight_at(
        &self,
        asset: usize,
        drivers: &[f64],
        mixing: Option<f64>,
        losses: &[f64],
    ) -> Result<f64, WeightFailure>;
    /// The vector field fᵢ over the stored driver coordinates, satisfying
    /// ∇gᵢ·fᵢ = 0 and Σ_{j≠i} ∇gⱼ·fᵢ = 1.
    fn structural_field(
        &self,
        asset: usize,
        drivers: &[f64],
        mixing: Option<f64>,
    ) -> Result<Vec<f64>, WeightFailure>;
}

/// Any of the supported loss models.
#[derive(Debug, Clone, PartialEq)]
pub enum LossModel {
    Independent(IndependentModel),
    GaussianLinear(GaussianLinearModel),
    Elliptical(EllipticalModel),
    Archimedean(ArchimedeanCopulaModel),
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            LossModel::Independent($m) => $e,
            LossModel::GaussianLinear($m) => $e,
            LossModel::Elliptical($m) => $e,
            LossModel::Archimedean($m) => $e,
        }
    };
}

impl LossModel {
    /// Default identifier used in output files.
    pub fn tag(&self) -> String {
        match self {
            Self::Independent(m) => {
                let first = m.marginals()[0].name();
                if m.marginals().iter().all(|x| x.name() == first) {
                    format!("independent-{first}")
                } else {
                    "independent".into()
                }
            }
            Self::GaussianLinear(_) => "gaussian".into(),
            Self::Elliptical(_) => "elliptical".into(),
            Self::Archimedean(m) => {
                let g = m.generator().name();
                if m.survival() {
                    format!("survival-{g}")
                } else {
                    g.into()
                }
            }
        }
    }

    pub fn as_gaussian(&self) -> Option<&GaussianLinearModel> {
        match self {
            Self::GaussianLinear(g) => Some(g),
            _ => None,
        }
    }

    /// Draws `n` rows. Rows whose losses come out non-finite (possible only
    /// through floating-point underflow in the copula map) are redrawn.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DrawBatch> {
        dispatch!(self, m => sample_model(m, &self.tag(), n, rng))
    }

    pub fn malliavin_weight(
        &self,
        asset: usize,
        batch: &DrawBatch,
        row: usize,
    ) -> Result<f64, WeightFailure> {
        self.weight_at(
            asset,
            batch.drivers(row),
            batch.mixing(row),
            batch.losses(row),
        )
    }
}

impl Model for LossModel {
    fn dim(&self) -> usize {
        dispatch!(self, m => m.dim())
    }

    fn driver_dim(&self) -> usize {
        dispatch!(self, m => m.driver_dim())
    }

    fn driver_width(&self) -> usize {
        dispatch!(self, m => m.driver_width())
    }

    fn space(&self) -> DriverSpace {
        dispatch!(self, m => m.space())
    }

    fn draw_drivers<R: Rng + ?Sized>(&self, rng: &mut R, drivers: &mut [f64]) -> Option<f64> {
        dispatch!(self, m => m.draw_drivers(rng, drivers))
    }

    fn losses_at(&self, drivers: &[f64], mixing: Option<f64>, out: &mut [f64]) {
        dispatch!(self, m => m.losses_at(drivers, mixing, out))
    }

    fn weight_at(
        &self,
        asset: usize,
        drivers: &[f64],
        mixing: Option<f64>,
        losses: &[f64],
    ) -> Result<f64, WeightFailure> {
        dispatch!(self, m => m.weight_at(asset, drivers, mixing, losses))
    }

    fn structural_field(
        &self,
        asset: usize,
        drivers: &[f64],
        mixing: Option<f64>,
    ) -> Result<Vec<f64>, WeightFailure> {
        dispatch!(self, m => m.structural_field(asset, drivers, mixing))
    }
}

fn sample_model<M: Model, R: Rng + ?Sized>(
    model: &M,
    tag: &str,
    n: usize,
    rng: &mut R,
) -> Result<DrawBatch> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be >= 1".into()));
    }
    let (d, w) = (model.dim(), model.driver_width());
    let mut drivers = vec![0.0; n * w];
    let mut losses = vec![0.0; n * d];
    let mut mixing = Vec::new();
    for (drow, xrow) in drivers.chunks_exact_mut(w).zip(losses.chunks_exact_mut(d)) {
        loop {
            let v = model.draw_drivers(rng, drow);
            model.losses_at(drow, v, xrow);
            if xrow.iter().all(|x| x.is_finite()) {
                if let Some(v) = v {
                    mixing.push(v);
                }
                break;
            }
        }
    }
    let mixing = (!mixing.is_empty()).then_some(mixing);
    Ok(DrawBatch::from_parts(
        tag,
        model.space(),
        d,
        w,
        drivers,
        mixing,
        losses,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::MarginalDistribution;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn independent_medians() {
        let m = IndependentModel::new(vec![MarginalDistribution::log_normal(0.0, 1.0).unwrap(); 2])
            .unwrap();
        let mut x = [0.0; 2];
        m.losses_at(&[0.5, 0.5], None, &mut x);
        assert_eq!(x, [1.0, 1.0]);
    }

    #[test]
    fn lognormal_weight_example() {
        let margs = [0.5, 1.0, 2.0].map(|s| MarginalDistribution::log_normal(0.0, s).unwrap());
        let m = IndependentModel::new(margs.to_vec()).unwrap();
        let w = m.weight_at(0, &[0.5; 3], None, &[1.0; 3]).unwrap();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_identity_weight_is_second_driver() {
        let m = GaussianLinearModel::new(vec![0.0; 2], crate::linalg::Matrix::identity(2)).unwrap();
        let z = [0.3, -1.7];
        assert!((m.weight_at(0, &z, None, &[0.3, -1.7]).unwrap() + 1.7).abs() < 1e-15);
    }

    #[test]
    fn sample_is_reproducible_and_recomputable() {
        let model = LossModel::Archimedean(
            ArchimedeanCopulaModel::new(
                Generator::Gumbel { theta: 1.7 },
                false,
                vec![MarginalDistribution::gpd(0.3, 1.0).unwrap(); 3],
            )
            .unwrap(),
        );
        let a = model
            .sample(500, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap();
        let b = model
            .sample(500, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.checksum(), b.checksum());
        let mut x = [0.0; 3];
        for r in 0..a.len() {
            model.losses_at(a.drivers(r), a.mixing(r), &mut x);
            assert_eq!(&x, a.losses(r));
        }
        assert_eq!(a.model_tag(), "gumbel");
    }

    #[test]
    fn zero_rows_rejected() {
        let model = LossModel::GaussianLinear(
            GaussianLinearModel::new(vec![0.0; 2], crate::linalg::Matrix::identity(2)).unwrap(),
        );
        assert!(model.sample(0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
