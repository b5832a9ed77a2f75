//! Numerical self-checks for a configured model: the field condition by
//! finite differences, and for copula models the γ identities and the
//! mixing-variable Laplace transform.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::models::structural::structural_residual;
use crate::models::{ArchimedeanCopulaModel, LossModel, Model};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub points: usize,
    /// Bound on the structural residual.
    pub tolerance: f64,
    /// Relative bound for the two γ paths.
    pub gamma_tolerance: f64,
    /// Draws used for the Laplace-transform check.
    pub laplace_draws: usize,
    /// Allowed deviation in standard errors.
    pub z_bound: f64,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            points: 1000,
            tolerance: 1e-6,
            gamma_tolerance: 1e-10,
            laplace_draws: 100_000,
            z_bound: 3.0,
            seed: 12_345,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    /// Largest observed error (or |z| for statistical checks).
    pub worst: f64,
    pub bound: f64,
    /// Where the worst value occurred.
    pub detail: String,
    /// Points skipped because the field is singular there.
    pub skipped: usize,
}

impl fmt::Display for CheckItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "ok  " } else { "FAIL" };
        write!(
            f,
            "{mark} {:<28} worst {:.3e} (bound {:.1e})",
            self.name, self.worst, self.bound
        )?;
        if self.skipped > 0 {
            write!(f, ", {} singular points skipped", self.skipped)?;
        }
        if !self.passed {
            write!(f, "\n     at {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|c| c.name == name)
    }
}

fn fmt_point(asset: usize, drivers: &[f64], mixing: Option<f64>) -> String {
    let mut s = format!("asset {} drivers {drivers:?}", asset + 1);
    if let Some(v) = mixing {
        s.push_str(&format!(" mixing {v}"));
    }
    s
}

/// Max over random driver points and all assets of the field-condition
/// residual.
pub fn check_structural(model: &LossModel, opts: &CheckOptions) -> CheckItem {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut drivers = vec![0.0; model.driver_width()];
    let mut worst = 0.0_f64;
    let mut detail = String::new();
    let mut skipped = 0;
    for _ in 0..opts.points {
        let mixing = model.draw_drivers(&mut rng, &mut drivers);
        for asset in 0..model.dim() {
            match structural_residual(model, asset, &drivers, mixing) {
                Ok(r) => {
                    let e = r.max_abs();
                    if !(e <= worst) {
                        worst = if e.is_nan() { f64::INFINITY } else { e };
                        detail = fmt_point(asset, &drivers, mixing);
                    }
                }
                Err(_) => skipped += 1,
            }
        }
    }
    CheckItem {
        name: "structural identity".into(),
        passed: worst < opts.tolerance,
        worst,
        bound: opts.tolerance,
        detail,
        skipped,
    }
}

/// Relative disagreement between the specialized γ and the generic
/// 𝒱/ψ′ + ψ″/ψ′² form. The two generic terms can nearly cancel, so the
/// error is measured against the size of the terms, not of their sum.
pub fn check_gamma(model: &ArchimedeanCopulaModel, opts: &CheckOptions) -> CheckItem {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5EED);
    let g = model.generator();
    let mut drivers = vec![0.0; model.driver_width()];
    let mut worst = 0.0_f64;
    let mut detail = String::new();
    let mut skipped = 0;
    for _ in 0..opts.points {
        let v = model
            .draw_drivers(&mut rng, &mut drivers)
            .unwrap_or(f64::NAN);
        for j in 0..model.dim() {
            let (Ok(a), Ok(b)) = (
                model.archimedean_gamma(j, &drivers, v),
                model.archimedean_gamma_generic(j, &drivers, v),
            ) else {
                skipped += 1;
                continue;
            };
            let phi = -drivers[j].ln() / v;
            let d1 = g.psi_d1(phi);
            let scale = (v / d1).abs() + (g.psi_d2(phi) / (d1 * d1)).abs();
            let e = (a - b).abs() / scale.max(f64::MIN_POSITIVE);
            if !(e <= worst) {
                worst = if e.is_nan() { f64::INFINITY } else { e };
                detail = format!("j {} drivers {drivers:?} mixing {v}: {a} vs {b}", j + 1);
            }
        }
    }
    CheckItem {
        name: "gamma generic vs closed form".into(),
        passed: worst < opts.gamma_tolerance,
        worst,
        bound: opts.gamma_tolerance,
        detail,
        skipped,
    }
}

/// E[exp(−t𝒱)] against ψ(t) for each t, as z-scores.
pub fn check_laplace(model: &ArchimedeanCopulaModel, ts: &[f64], opts: &CheckOptions) -> CheckItem {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x01A9_1ACE);
    let n = opts.laplace_draws.max(2);
    let draws: Vec<f64> = (0..n).map(|_| model.sample_mixing(&mut rng)).collect();
    let mut worst = 0.0_f64;
    let mut detail = String::new();
    for &t in ts {
        let vals: Vec<f64> = draws.iter().map(|v| (-t * v).exp()).collect();
        let nf = n as f64;
        let mean = vals.iter().sum::<f64>() / nf;
        let var = vals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
        let se = (var / nf).sqrt();
        let expect = model.generator().psi(t);
        let z = (mean - expect).abs() / se;
        if !(z <= worst) {
            worst = if z.is_nan() { f64::INFINITY } else { z };
            detail = format!("t {t}: mean {mean} vs psi {expect} (se {se:.2e})");
        }
    }
    CheckItem {
        name: "mixing Laplace transform".into(),
        passed: worst < opts.z_bound,
        worst,
        bound: opts.z_bound,
        detail,
        skipped: 0,
    }
}

/// All checks that apply to the model.
pub fn run_checks(model: &LossModel, opts: &CheckOptions) -> CheckReport {
    let mut items = vec![check_structural(model, opts)];
    if let LossModel::Archimedean(m) = model {
        items.push(check_gamma(m, opts));
        items.push(check_laplace(m, &[0.5, 1.0, 2.0], opts));
    }
    CheckReport { items }
}
