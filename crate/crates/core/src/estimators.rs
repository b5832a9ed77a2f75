//! Empirical VaR and the allocation estimators evaluated on a [`DrawBatch`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::models::{DrawBatch, LossModel};

pub use crate::models::{gaussian_closed_form, ClosedForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Delta,
    Malliavin,
    ClosedForm,
    TailMean,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Delta => "delta",
            Self::Malliavin => "malliavin",
            Self::ClosedForm => "closed_form",
            Self::TailMean => "tail_mean",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether an estimate exists. Undefined estimates are ordinary results: a
/// small band or a short sample can leave the conditioning set empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimateStatus {
    Defined,
    /// No draw fell in the conditioning set.
    EmptyConditioningSet,
    /// |Σ π| < 1e-12 · Σ |π|.
    IllConditioned {
        denominator: f64,
        abs_sum: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationEstimate {
    pub asset: usize,
    pub kind: EstimatorKind,
    pub value: Option<f64>,
    pub status: EstimateStatus,
    /// Draws that entered the estimate (N*).
    pub tail_count: usize,
    /// Tail draws dropped because their weight could not be evaluated.
    pub excluded: usize,
    /// The weights were constant over the tail, so the ratio is the plain
    /// tail mean.
    pub degenerate_weight: bool,
}

impl AllocationEstimate {
    pub fn is_defined(&self) -> bool {
        self.value.is_some()
    }
}

/// Rank ⌈αN⌉ (1-based), clamped to [1, N]. A few ulps of slack keep
/// products such as 0.99·100 from rounding up past the integer.
fn order_rank(alpha: f64, n: usize) -> usize {
    let t = alpha * n as f64;
    let k = (t - 4.0 * f64::EPSILON * t).ceil() as usize;
    k.clamp(1, n)
}

fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(domain("alpha", alpha, "(0, 1)"))
    }
}

/// The ⌈αN⌉-th smallest value of `xs`.
pub fn empirical_quantile(xs: &[f64], alpha: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Empty("empirical_quantile needs at least one value"));
    }
    check_level(alpha)?;
    let mut v = xs.to_vec();
    let k = order_rank(alpha, v.len());
    let (_, x, _) = v.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*x)
}

/// Several quantiles of the same sample, sorting once.
pub fn empirical_quantiles(xs: &[f64], alphas: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::Empty("empirical_quantiles needs at least one value"));
    }
    for &a in alphas {
        check_level(a)?;
    }
    let mut v = xs.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    Ok(alphas
        .iter()
        .map(|&a| v[order_rank(a, v.len()) - 1])
        .collect())
}

/// Outcome of Σ yπ / Σ π.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioOutcome {
    pub value: Option<f64>,
    pub status: EstimateStatus,
    pub degenerate_weight: bool,
}

/// True when the sample standard deviation of the weights is below
/// 1e-12 times their mean magnitude. Needs at least two weights.
pub fn weights_are_constant(weights: &[f64]) -> bool {
    let n = weights.len();
    if n < 2 {
        return false;
    }
    let nf = n as f64;
    let mean = weights.iter().sum::<f64>() / nf;
    let mean_abs = weights.iter().map(|w| w.abs()).sum::<f64>() / nf;
    let var = weights.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / (nf - 1.0);
    var.sqrt() <= 1e-12 * mean_abs
}

/// Weighted ratio estimator. Constant weights collapse to the plain mean of
/// `values`, which is returned exactly in that case.
pub fn weighted_ratio(values: &[f64], weights: &[f64]) -> RatioOutcome {
    assert_eq!(values.len(), weights.len());
    if values.is_empty() {
        return RatioOutcome {
            value: None,
            status: EstimateStatus::EmptyConditioningSet,
            degenerate_weight: false,
        };
    }
    if weights_are_constant(weights) {
        return RatioOutcome {
            value: Some(values.iter().sum::<f64>() / values.len() as f64),
            status: EstimateStatus::Defined,
            degenerate_weight: true,
        };
    }
    let denominator: f64 = weights.iter().sum();
    let abs_sum: f64 = weights.iter().map(|w| w.abs()).sum();
    if !(denominator.abs() >= 1e-12 * abs_sum) || abs_sum == 0.0 {
        return RatioOutcome {
            value: None,
            status: EstimateStatus::IllConditioned {
                denominator,
                abs_sum,
            },
            degenerate_weight: false,
        };
    }
    let numerator: f64 = values.iter().zip(weights).map(|(y, w)| y * w).sum();
    RatioOutcome {
        value: Some(numerator / denominator),
        status: EstimateStatus::Defined,
        degenerate_weight: false,
    }
}

fn check_asset(batch: &DrawBatch, asset: usize) -> Result<()> {
    if asset < batch.dim() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "asset {asset} out of range for d = {}",
            batch.dim()
        )))
    }
}

fn mean_estimate(
    kind: EstimatorKind,
    asset: usize,
    values: impl Iterator<Item = f64>,
) -> AllocationEstimate {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    AllocationEstimate {
        asset,
        kind,
        value: (count > 0).then(|| sum / count as f64),
        status: if count > 0 {
            EstimateStatus::Defined
        } else {
            EstimateStatus::EmptyConditioningSet
        },
        tail_count: count,
        excluded: 0,
        degenerate_weight: false,
    }
}

/// Mean of Xᵢ over draws whose portfolio loss lies in `[var_lo, var_hi]`.
pub fn delta_allocation(
    batch: &DrawBatch,
    asset: usize,
    var_lo: f64,
    var_hi: f64,
) -> Result<AllocationEstimate> {
    check_asset(batch, asset)?;
    if !(var_lo <= var_hi) {
        return Err(Error::InvalidParameter(format!(
            "band [{var_lo}, {var_hi}] is empty or not a number"
        )));
    }
    let rows = (0..batch.len()).filter(|&r| {
        let x = batch.total(r);
        x >= var_lo && x <= var_hi
    });
    Ok(mean_estimate(
        EstimatorKind::Delta,
        asset,
        rows.map(|r| batch.loss(r, asset)),
    ))
}

/// Mean of Xᵢ over draws with portfolio loss ≥ `var` (the ES-type allocation).
pub fn tail_mean(batch: &DrawBatch, asset: usize, var: f64) -> Result<AllocationEstimate> {
    check_asset(batch, asset)?;
    let rows = (0..batch.len()).filter(|&r| batch.total(r) >= var);
    Ok(mean_estimate(
        EstimatorKind::TailMean,
        asset,
        rows.map(|r| batch.loss(r, asset)),
    ))
}

/// Tail losses of asset `i` and their Malliavin weights over X ≥ `var`;
/// the third field counts draws whose weight failed.
pub fn tail_weights(
    batch: &DrawBatch,
    model: &LossModel,
    asset: usize,
    var: f64,
) -> (Vec<f64>, Vec<f64>, usize) {
    let mut values = Vec::new();
    let mut weights = Vec::new();
    let mut excluded = 0;
    for r in 0..batch.len() {
        if batch.total(r) < var {
            continue;
        }
        match model.malliavin_weight(asset, batch, r) {
            Ok(w) => {
                values.push(batch.loss(r, asset));
                weights.push(w);
            }
            Err(_) => excluded += 1,
        }
    }
    (values, weights, excluded)
}

/// Σ Xᵢπᵢ / Σ πᵢ over draws with portfolio loss ≥ `var`.
pub fn malliavin_allocation(
    batch: &DrawBatch,
    model: &LossModel,
    asset: usize,
    var: f64,
) -> Result<AllocationEstimate> {
    check_asset(batch, asset)?;
    if batch.model_tag() != model.tag() {
        return Err(Error::InvalidParameter(format!(
            "batch from '{}' evaluated with model '{}'",
            batch.model_tag(),
            model.tag()
        )));
    }
    let (values, weights, excluded) = tail_weights(batch, model, asset, var);
    let r = weighted_ratio(&values, &weights);
    Ok(AllocationEstimate {
        asset,
        kind: EstimatorKind::Malliavin,
        value: r.value,
        status: r.status,
        tail_count: values.len(),
        excluded,
        degenerate_weight: r.degenerate_weight,
    })
}
