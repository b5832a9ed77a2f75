//! Finite-difference verification of the field condition
//! ∇gᵢ·fᵢ = 0, Σ_{j≠i} ∇gⱼ·fᵢ = 1.

use super::{DriverSpace, Model, WeightFailure};

/// Residuals of the two-row condition at one driver point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralResidual {
    /// ∇gᵢ · fᵢ (should be 0).
    pub own: f64,
    /// Σ_{j≠i} ∇gⱼ · fᵢ − 1 (should be 0).
    pub others: f64,
}

impl StructuralResidual {
    pub fn max_abs(&self) -> f64 {
        self.own.abs().max(self.others.abs())
    }
}

fn step(space: DriverSpace, x: f64) -> f64 {
    match space {
        DriverSpace::Gaussian => 1e-3 * x.abs().max(1.0),
        DriverSpace::Uniform => 1e-3 * x.min(1.0 - x),
    }
}

/// Jacobian ∂gⱼ/∂(driver m) by the five-point stencil, returned row-major
/// d × width. The mixing value is held fixed.
pub fn jacobian<M: Model + ?Sized>(model: &M, drivers: &[f64], mixing: Option<f64>) -> Vec<f64> {
    let (d, w) = (model.dim(), drivers.len());
    let mut jac = vec![0.0; d * w];
    let mut point = drivers.to_vec();
    let mut vals = [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]];
    for m in 0..w {
        let x0 = drivers[m];
        let h = step(model.space(), x0);
        for (k, off) in [-2.0, -1.0, 1.0, 2.0].into_iter().enumerate() {
            point[m] = x0 + off * h;
            model.losses_at(&point, mixing, &mut vals[k]);
        }
        point[m] = x0;
        for j in 0..d {
            jac[j * w + m] =
                (vals[0][j] - 8.0 * vals[1][j] + 8.0 * vals[2][j] - vals[3][j]) / (12.0 * h);
        }
    }
    jac
}

pub fn structural_residual<M: Model + ?Sized>(
    model: &M,
    asset: usize,
    drivers: &[f64],
    mixing: Option<f64>,
) -> Result<StructuralResidual, WeightFailure> {
    let field = model.structural_field(asset, drivers, mixing)?;
    let jac = jacobian(model, drivers, mixing);
    let w = drivers.len();
    let mut own = 0.0;
    let mut others = 0.0;
    for j in 0..model.dim() {
        let row = &jac[j * w..(j + 1) * w];
        let v: f64 = row.iter().zip(&field).map(|(a, b)| a * b).sum();
        if j == asset {
            own += v;
        } else {
            others += v;
        }
    }
    Ok(StructuralResidual {
        own,
        others: others - 1.0,
    })
}
