use rand::Rng;

use super::{DriverSpace, Model, WeightFailure};
use crate::distributions::{normal_quantile, standard_normal};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// X = μ + L Z with Z a k-dimensional standard normal, L lower-triangular d×k.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLinearModel {
    mu: Vec<f64>,
    l: Matrix,
    fields: Vec<Vec<f64>>,
}

/// Exact VaR and per-asset Euler contributions of a Gaussian portfolio.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForm {
    pub allocations: Vec<f64>,
    pub var: f64,
}

/// Minimum-norm fᵢ solving [ℓᵢ; 𝓛 − ℓᵢ] fᵢ = (0, 1)ᵀ.
///
/// fᵢ = Aᵀ (A Aᵀ)⁻¹ (0, 1)ᵀ with A the 2×k matrix above.
pub fn gaussian_min_norm_f(l: &Matrix, asset: usize) -> Result<Vec<f64>> {
    if asset >= l.nrows() {
        return Err(Error::InvalidParameter(format!(
            "asset index {asset} out of range for {} rows",
            l.nrows()
        )));
    }
    let li = l.row(asset);
    let rest: Vec<f64> = l.row_sum().iter().zip(li).map(|(s, a)| s - a).collect();
    let a11 = dot(li, li);
    let a12 = dot(li, &rest);
    let a22 = dot(&rest, &rest);
    let det = a11 * a22 - a12 * a12;
    if !(det > 1e-12 * a11 * a22) {
        return Err(Error::Model(format!(
            "asset {asset}: row and sum of the other rows are parallel (rank of A < 2)"
        )));
    }
    // (A Aᵀ)⁻¹ (0, 1)ᵀ = (−a12, a11) / det
    let (c0, c1) = (-a12 / det, a11 / det);
    Ok(li.iter().zip(&rest).map(|(a, b)| c0 * a + c1 * b).collect())
}

/// Closed-form Gaussian VaR contributions for exposures λ and covariance LLᵀ:
/// 𝒞ᵢ = Φ⁻¹(α) λᵢ (Σλ)ᵢ / √(λᵀΣλ), VaR = Φ⁻¹(α) √(λᵀΣλ).
pub fn gaussian_closed_form(l: &Matrix, exposures: &[f64], alpha: f64) -> Result<ClosedForm> {
    if exposures.len() != l.nrows() {
        return Err(Error::InvalidParameter(format!(
            "{} exposures for {} assets",
            exposures.len(),
            l.nrows()
        )));
    }
    if exposures.iter().all(|&e| e == 0.0) || exposures.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidParameter(
            "exposures must be finite and not all zero".into(),
        ));
    }
    let z = normal_quantile(alpha)?;
    let sigma = l.gram();
    let mut sl = vec![0.0; exposures.len()];
    sigma.mul_vec_into(exposures, &mut sl);
    let quad = dot(exposures, &sl);
    if !(quad > 0.0) {
        return Err(Error::Model(format!(
            "portfolio variance λᵀΣλ = {quad} is not positive"
        )));
    }
    let sd = quad.sqrt();
    Ok(ClosedForm {
        allocations: exposures
            .iter()
            .zip(&sl)
            .map(|(e, s)| z * e * s / sd)
            .collect(),
        var: z * sd,
    })
}

impl GaussianLinearModel {
    pub fn new(mu: Vec<f64>, l: Matrix) -> Result<Self> {
        let d = l.nrows();
        if d < 2 {
            return Err(Error::Model("gaussian model needs d >= 2".into()));
        }
        if mu.len() != d {
            return Err(Error::Model(format!(
                "mu has length {}, L has {d} rows",
                mu.len()
            )));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::Model("mu must be finite".into()));
        }
        if l.ncols() < d {
            return Err(Error::Model(format!("L is {d}x{}; need k >= d", l.ncols())));
        }
        if !l.is_lower_triangular() {
            return Err(Error::Model("L must be lower-triangular".into()));
        }
        if (0..d).any(|r| l.get(r, r) == 0.0) {
            return Err(Error::Model(
                "L must have full rank (zero on the diagonal)".into(),
            ));
        }
        let fields = (0..d)
            .map(|i| gaussian_min_norm_f(&l, i))
            .collect::<Result<_>>()?;
        Ok(Self { mu, l, fields })
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn l(&self) -> &Matrix {
        &self.l
    }

    /// The constant field fᵢ used by the weight.
    pub fn field(&self, asset: usize) -> &[f64] {
        &self.fields[asset]
    }

    /// Closed form with unit exposures, shifted by μ.
    pub fn closed_form(&self, alpha: f64) -> Result<ClosedForm> {
        let ones = vec![1.0; self.mu.len()];
        let mut cf = gaussian_closed_form(&self.l, &ones, alpha)?;
        for (a, m) in cf.allocations.iter_mut().zip(&self.mu) {
            *a += m;
        }
        cf.var += self.mu.iter().sum::<f64>();
        Ok(cf)
    }
}

impl Model for GaussianLinearModel {
    fn dim(&self) -> usize {
        self.mu.len()
    }

    fn driver_dim(&self) -> usize {
        self.l.ncols()
    }

    fn driver_width(&self) -> usize {
        self.l.ncols()
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
        self.l.mul_vec_into(drivers, out);
        for (x, m) in out.iter_mut().zip(&self.mu) {
            *x += m;
        }
    }

    /// πᵢ = fᵢ · Z (fᵢ is constant, so the trace term vanishes).
    fn weight_at(
        &self,
        asset: usize,
        drivers: &[f64],
        _mixing: Option<f64>,
        _losses: &[f64],
    ) -> Result<f64, WeightFailure> {
        let w = dot(&self.fields[asset], drivers);
        if w.is_finite() {
            Ok(w)
        } else {
            Err(WeightFailure::NonFinite)
        }
    }

    fn structural_field(
        &self,
        asset: usize,
        _drivers: &[f64],
        _mixing: Option<f64>,
    ) -> Result<Vec<f64>, WeightFailure> {
        Ok(self.fields[asset].clone())
    }
}
