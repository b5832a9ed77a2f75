//! Euler Value-at-Risk contributions 𝒞ᵢ = E[Xᵢ | X = VaR_α(X)] by Monte
//! Carlo.
//!
//! Two estimators run on the same draws: the δ-band average over
//! X ∈ [VaR_{α−δ}, VaR_{α+δ}], and a Malliavin-weight ratio
//! E[Xᵢ πᵢ | X ≥ VaR_α] / E[πᵢ | X ≥ VaR_α] that only conditions on
//! positive-probability tail events.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod config;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod linalg;
pub mod models;
pub mod selfcheck;

pub use error::{Error, Result};
