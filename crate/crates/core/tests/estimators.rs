mod common;

use common::*;
use proptest::prelude::*;
use varcontrib::distributions::{normal_quantile, MarginalDistribution};
use varcontrib::estimators::{
    delta_allocation, empirical_quantile, malliavin_allocation, tail_mean, weighted_ratio,
    EstimateStatus,
};
use varcontrib::linalg::Matrix;
use varcontrib::models::{DrawBatch, GaussianLinearModel, IndependentModel, LossModel};

fn paper_gaussian() -> LossModel {
    let l = Matrix::from_rows(&[
        vec![1.0, 0.0, 0.0],
        vec![0.5, 0.7, 0.0],
        vec![1.0, 0.8, 1.1],
    ])
    .unwrap();
    LossModel::GaussianLinear(GaussianLinearModel::new(vec![0.0; 3], l).unwrap())
}

#[test]
fn ratio_examples() {
    assert_eq!(weighted_ratio(&[2.0, 4.0], &[1.0, 1.0]).value, Some(3.0));
    assert_eq!(weighted_ratio(&[2.0, 4.0], &[1.0, 3.0]).value, Some(3.5));
    assert_eq!(weighted_ratio(&[2.0, 4.0], &[-3.0, -9.0]).value, Some(3.5));
    let r = weighted_ratio(&[2.0, 4.0], &[1.0, -1.0]);
    assert_eq!(r.value, None);
    assert!(matches!(r.status, EstimateStatus::IllConditioned { .. }));
    assert_eq!(
        weighted_ratio(&[], &[]).status,
        EstimateStatus::EmptyConditioningSet
    );
}

proptest! {
    #[test]
    fn ratio_is_invariant_under_weight_scaling(
        pairs in prop::collection::vec((-50.0f64..50.0, 0.1f64..10.0), 2..60),
        c in prop::sample::select(vec![-1.0, 2.0, -0.5, 8.0, -3.0, 0.1, 1e6]),
    ) {
        let (ys, ws): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let scaled: Vec<f64> = ws.iter().map(|w| c * w).collect();
        let a = weighted_ratio(&ys, &ws).value.unwrap();
        let b = weighted_ratio(&ys, &scaled).value.unwrap();
        let exact = c.abs().log2().fract() == 0.0;
        if exact {
            prop_assert_eq!(a, b);
        } else {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn whole_tail_band_equals_tail_mean(seed in 0u64..1000, alpha in 0.5f64..0.99) {
        let model = paper_gaussian();
        let batch = model.sample(500, &mut rng(seed)).unwrap();
        let var = empirical_quantile(batch.totals(), alpha).unwrap();
        for i in 0..3 {
            let d = delta_allocation(&batch, i, var, f64::INFINITY).unwrap();
            let t = tail_mean(&batch, i, var).unwrap();
            prop_assert_eq!(d.value, t.value);
            prop_assert_eq!(d.tail_count, t.tail_count);
        }
    }

    #[test]
    fn quantile_is_an_order_statistic(xs in prop::collection::vec(-1e3f64..1e3, 1..200), alpha in 0.001f64..0.999) {
        let q = empirical_quantile(&xs, alpha).unwrap();
        let below = xs.iter().filter(|&&x| x <= q).count();
        let k = (alpha * xs.len() as f64).ceil() as usize;
        prop_assert!(xs.contains(&q));
        prop_assert!(below >= k.max(1));
        prop_assert!(xs.iter().filter(|&&x| x < q).count() < k.max(1));
    }
}

#[test]
fn constant_weights_reduce_to_tail_mean() {
    let m = [1.0, 2.0, 0.5].map(|r| MarginalDistribution::exponential(r).unwrap());
    let model = LossModel::Independent(IndependentModel::new(m.to_vec()).unwrap());
    let batch = model.sample(20_000, &mut rng(31)).unwrap();
    let var = empirical_quantile(batch.totals(), 0.95).unwrap();
    for i in 0..3 {
        let mal = malliavin_allocation(&batch, &model, i, var).unwrap();
        assert!(mal.degenerate_weight);
        assert_eq!(mal.value, tail_mean(&batch, i, var).unwrap().value);
    }
}

#[test]
fn batch_must_come_from_the_model() {
    let model = paper_gaussian();
    let batch = DrawBatch::from_losses("other", &[vec![1.0, 2.0, 3.0]]);
    assert!(malliavin_allocation(&batch, &model, 0, 0.0).is_err());
    assert!(tail_mean(&batch, 3, 0.0).is_err());
}

#[test]
fn median_band_allocations_vanish() {
    let model = paper_gaussian();
    let batch = model.sample(200_000, &mut rng(32)).unwrap();
    let lo = empirical_quantile(batch.totals(), 0.5 - 1e-2).unwrap();
    let hi = empirical_quantile(batch.totals(), 0.5 + 1e-2).unwrap();
    for i in 0..3 {
        let e = delta_allocation(&batch, i, lo, hi).unwrap();
        let ys: Vec<f64> = (0..batch.len())
            .filter(|&r| (lo..=hi).contains(&batch.total(r)))
            .map(|r| batch.loss(r, i))
            .collect();
        let (_, se) = mean_se(&ys);
        assert!(
            e.value.unwrap().abs() < 4.0 * se,
            "asset {i}: {:?}",
            e.value
        );
    }
}

#[test]
fn tail_mean_exceeds_var_allocation_and_matches_expected_shortfall() {
    let model = paper_gaussian();
    let g = model.as_gaussian().unwrap();
    let alpha = 0.99;
    let cf = g.closed_form(alpha).unwrap();
    // ES allocation: E[Xᵢ | X ≥ VaR] = (Σλ)ᵢ/σ · E[Z | Z ≥ z_α], the
    // conditional mean obtained by quadrature.
    let z = normal_quantile(alpha).unwrap();
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let tail_z = simpson(|t| t * pdf(t), z, 12.0, 20_000) / (1.0 - alpha);
    let batch = model.sample(100_000, &mut rng(33)).unwrap();
    for i in 0..3 {
        let es = cf.allocations[i] / z * tail_z;
        let t = tail_mean(&batch, i, cf.var).unwrap();
        let ys: Vec<f64> = (0..batch.len())
            .filter(|&r| batch.total(r) >= cf.var)
            .map(|r| batch.loss(r, i))
            .collect();
        let (_, se) = mean_se(&ys);
        let v = t.value.unwrap();
        assert!(v > cf.allocations[i], "asset {i}: {v}");
        assert!((v - es).abs() < 4.0 * se, "asset {i}: {v} vs {es}");
    }
}
