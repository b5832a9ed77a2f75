use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DriverSpace, Model, WeightFailure};
use crate::distributions::standard_normal;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};

/// Radial map R = φ(Z_{d+1}); must be positive with non-vanishing derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RadialFunction {
    /// φ(z) = scale · exp(rate · z)
    Exp { scale: f64, rate: f64 },
    /// φ(z) = scale · ln(1 + eᶻ)
    Softplus { scale: f64 },
}

impl Default for RadialFunction {
    fn default() -> Self {
        Self::Exp {
            scale: 1.0,
            rate: 1.0,
        }
    }
}

impl RadialFunction {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Exp { scale, rate } => {
                scale.is_finite() && scale > 0.0 && rate.is_finite() && rate != 0.0
            }
            Self::Softplus { scale } => scale.is_finite() && scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid radial function {self:?}"
            )))
        }
    }

    pub fn value(&self, z: f64) -> f64 {
        match *self {
            Self::Exp { scale, rate } => scale * (rate * z).exp(),
            Self::Softplus { scale } => {
                scale
                    * if z > 0.0 {
                        z + (-z).exp().ln_1p()
                    } else {
                        z.exp().ln_1p()
                    }
            }
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            Self::Exp { scale, rate } => scale * rate * (rate * z).exp(),
            Self::Softplus { scale } => scale / (1.0 + (-z).exp()),
        }
    }
}

/// X = μ + φ(Z_{d+1}) · L Z / ‖Z‖, driven by d+1 standard normals.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticalModel {
    mu: Vec<f64>,
    l: Matrix,
    radial: RadialFunction,
    total_row: Vec<f64>,
}

/// Relative size below which ℓᵢ·z is treated as zero.
const SINGULAR_DOT: f64 = 1e-10;

impl EllipticalModel {
    pub fn new(mu: Vec<f64>, l: Matrix, radial: RadialFunction) -> Result<Self> {
        let d = l.nrows();
        if d < 2 {
            return Err(Error::Model("elliptical model needs d >= 2".into()));
        }
        if l.ncols() != d {
            return Err(Error::Model(format!(
                "L must be square, got {d}x{}",
                l.ncols()
            )));
        }
        if mu.len() != d || mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::Model(format!("mu must be {d} finite values")));
        }
        if !l.is_lower_triangular() || (0..d).any(|r| l.get(r, r) == 0.0) {
            return Err(Error::Model(
                "L must be lower-triangular with full rank".into(),
            ));
        }
        radial.validate()?;
        // same rank condition as the Gaussian family: ℓᵢ not parallel to 𝓛 − ℓᵢ
        for i in 0..d {
            super::gaussian::gaussian_min_norm_f(&l, i)?;
        }
        let total_row = l.row_sum();
        Ok(Self {
            mu,
            l,
            radial,
            total_row,
        })
    }

    pub fn radial(&self) -> RadialFunction {
        self.radial
    }

    pub fn l(&self) -> &Matrix {
        &self.l
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// E(z) = 𝓛 − (𝓛·z / ℓᵢ·z) ℓᵢ.
    pub fn e_vector(&self, asset: usize, z: &[f64]) -> Result<Vec<f64>, WeightFailure> {
        let li = self.l.row(asset);
        let a = dot(li, z);
        if !(a.abs() > SINGULAR_DOT * norm(li) * norm(z)) {
            return Err(WeightFailure::Singular("l_i . z = 0"));
        }
        let ratio = dot(&self.total_row, z) / a;
        Ok(self
            .total_row
            .iter()
            .zip(li)
            .map(|(t, l)| t - ratio * l)
            .collect())
    }

    /// The pair (f, f_{d+1}) solving the two-row system for asset `i` at
    /// driver point (z, z_last).
    pub fn elliptical_f(
        &self,
        asset: usize,
        z: &[f64],
        z_last: f64,
    ) -> Result<(Vec<f64>, f64), WeightFailure> {
        let li = self.l.row(asset);
        let e = self.e_vector(asset, z)?;
        let e2 = dot(&e, &e);
        let dphi = self.radial.derivative(z_last);
        if !(e2 > 0.0) {
            return Err(WeightFailure::Singular("E(z) = 0"));
        }
        if dphi == 0.0 || !dphi.is_finite() {
            return Err(WeightFailure::Singular("radial derivative vanishes"));
        }
        let zn = norm(z);
        let a = dot(li, z);
        let scale = zn / (self.radial.value(z_last) * e2);
        let f: Vec<f64> = e.iter().map(|v| scale * v).collect();
        let li_e = dot(&self.total_row, li) - dot(&self.total_row, z) / a * dot(li, li);
        let f_last = -zn * li_e / (dphi * a * e2);
        if f.iter().all(|v| v.is_finite()) && f_last.is_finite() {
            Ok((f, f_last))
        } else {
            Err(WeightFailure::NonFinite)
        }
    }

    fn field_component(&self, asset: usize, point: &[f64], m: usize) -> Result<f64, WeightFailure> {
        let d = self.dim();
        let (f, f_last) = self.elliptical_f(asset, &point[..d], point[d])?;
        Ok(if m == d { f_last } else { f[m] })
    }
}

impl Model for EllipticalModel {
    fn dim(&self) -> usize {
        self.mu.len()
    }

    fn driver_dim(&self) -> usize {
        self.mu.len() + 1
    }

    fn driver_width(&self) -> usize {
        self.mu.len() + 1
    }

    fn space(&self) -> DriverSpace {
        DriverSpace::Gaussian
    }

    fn draw_drivers<R: Rng + ?Sized>(&self, rng: &mut R, drivers: &mut [f64]) -> Option<f64> {
        for z in drivers.iter_mut() {
            *z = standard_normal(rng);
        }
        None
    }

    fn losses_at(&self, drivers: &[f64], _mixing: Option<f64>, out: &mut [f64]) {
        let d = self.dim();
        let z = &drivers[..d];
        let r = self.radial.value(drivers[d]) / norm(z);
        self.l.mul_vec_into(z, out);
        for (x, m) in out.iter_mut().zip(&self.mu) {
            *x = m + r * *x;
        }
    }

    /// πᵢ = fᵢ · (z, z_{d+1}) − Tr(∇fᵢ), trace by central differences with
    /// step 1e-5 · max(1, |coordinate|).
    fn weight_at(
        &self,
        asset: usize,
        drivers: &[f64],
        _mixing: Option<f64>,
        _losses: &[f64],
    ) -> Result<f64, WeightFailure> {
        let d = self.dim();
        let (f, f_last) = self.elliptical_f(asset, &drivers[..d], drivers[d])?;
        let drift = dot(&f, &drivers[..d]) + f_last * drivers[d];
        let mut point = drivers.to_vec();
        let mut trace = 0.0;
        for m in 0..=d {
            let x0 = drivers[m];
            let h = 1e-5 * x0.abs().max(1.0);
            point[m] = x0 + h;
            let up = self.field_component(asset, &point, m)?;
            point[m] = x0 - h;
            let down = self.field_component(asset, &point, m)?;
            point[m] = x0;
            trace += (up - down) / (2.0 * h);
        }
        let w = drift - trace;
        if w.is_finite() {
            Ok(w)
        } else {
            Err(WeightFailure::NonFinite)
        }
    }

    fn structural_field(
        &self,
        asset: usize,
        drivers: &[f64],
        _mixing: Option<f64>,
    ) -> Result<Vec<f64>, WeightFailure> {
        let d = self.dim();
        let (mut f, f_last) = self.elliptical_f(asset, &drivers[..d], drivers[d])?;
        f.push(f_last);
        Ok(f)
    }
}
