mod common;

use common::*;
use rand::Rng;
use varcontrib::distributions::{
    normal_quantile, sample_gamma, sample_positive_stable, GammaSampler, MarginalDistribution,
    PositiveStableSampler,
};

fn marginals() -> Vec<MarginalDistribution> {
    vec![
        MarginalDistribution::normal(0.3, 2.0).unwrap(),
        MarginalDistribution::log_normal(0.1, 0.8).unwrap(),
        MarginalDistribution::exponential(1.7).unwrap(),
        MarginalDistribution::gamma(2.5, 1.5).unwrap(),
        MarginalDistribution::gpd(0.3, 1.0).unwrap(),
    ]
}

#[test]
fn normal_quantile_matches_quadrature_oracle() {
    for p in [
        0.5, 0.6, 0.75, 0.9, 0.95, 0.975, 0.99, 0.999, 0.25, 0.01, 0.001,
    ] {
        let oracle = bisect(|x| normal_cdf_quadrature(x) - p, -8.0, 8.0);
        let q = normal_quantile(p).unwrap();
        assert!((q - oracle).abs() < 1e-9, "p={p}: {q} vs {oracle}");
    }
    assert!((normal_quantile(0.99).unwrap() - 2.326348).abs() < 5e-7);
    assert!((normal_quantile(0.975).unwrap() - 1.959964).abs() < 5e-7);
}

#[test]
fn score_matches_log_density_difference() {
    let mut rng = rng(1);
    for m in marginals() {
        for _ in 0..1000 {
            let x = m.quantile(rng.random_range(0.01..0.99)).unwrap();
            let h = 1e-6 * x.abs().max(1.0);
            let fd = (m.ln_pdf(x + h) - m.ln_pdf(x - h)) / (2.0 * h);
            let s = m.score(x).unwrap();
            assert!((s - fd).abs() < 1e-5, "{m:?} at {x}: {s} vs {fd}");
        }
    }
}

#[test]
fn quantile_inverts_cdf() {
    let mut rng = rng(2);
    for m in marginals() {
        for _ in 0..1000 {
            let x = m.quantile(rng.random_range(1e-4..1.0 - 1e-4)).unwrap();
            let back = m.quantile(m.cdf(x)).unwrap();
            assert!(
                (back - x).abs() <= 1e-9 * x.abs().max(1e-300),
                "{m:?}: {x} -> {back}"
            );
            let upper = m.quantile_upper(m.sf(x)).unwrap();
            assert!((upper - x).abs() <= 1e-9 * x.abs(), "{m:?}: {x} -> {upper}");
        }
    }
}

#[test]
fn density_positive_and_quantile_monotone() {
    for m in marginals() {
        let mut prev = f64::NEG_INFINITY;
        for k in 1..1000 {
            let x = m.quantile(k as f64 / 1000.0).unwrap();
            assert!(x > prev);
            assert!(m.pdf(x) > 0.0);
            prev = x;
        }
    }
}

#[test]
fn gamma_sampler_moments() {
    let mut rng = rng(3);
    let xs: Vec<f64> = (0..100_000)
        .map(|_| sample_gamma(0.5, 1.0, &mut rng).unwrap())
        .collect();
    assert!((mean(&xs) - 0.5).abs() < 0.01);
    let g = GammaSampler::new(3.0, 2.0).unwrap();
    let xs: Vec<f64> = (0..100_000).map(|_| g.sample(&mut rng)).collect();
    let (m, se) = mean_se(&xs);
    assert!((m - 1.5).abs() < 4.0 * se);
}

#[test]
fn gamma_shape_one_is_exponential() {
    let mut rng = rng(4);
    let xs: Vec<f64> = (0..100_000)
        .map(|_| sample_gamma(1.0, 2.0, &mut rng).unwrap())
        .collect();
    let d = ks_distance(&xs, |x| 1.0 - (-2.0 * x).exp());
    assert!(d < 1.63 / (xs.len() as f64).sqrt(), "KS {d}");
}

fn laplace_z(xs: &[f64], t: f64, expect: f64) -> f64 {
    let vals: Vec<f64> = xs.iter().map(|v| (-t * v).exp()).collect();
    let (m, se) = mean_se(&vals);
    (m - expect).abs() / se
}

#[test]
fn gamma_laplace_transform_is_clayton_generator() {
    for theta in [0.5_f64, 2.0, 5.0] {
        let mut rng = rng(5);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_gamma(1.0 / theta, 1.0, &mut rng).unwrap())
            .collect();
        for t in [0.5_f64, 1.0, 2.0] {
            let psi = (1.0 + t).powf(-1.0 / theta);
            let z = laplace_z(&xs, t, psi);
            assert!(z < 3.0, "theta {theta} t {t}: z {z}");
        }
    }
    let mut rng = rng(6);
    let xs: Vec<f64> = (0..100_000)
        .map(|_| sample_gamma(0.5, 1.0, &mut rng).unwrap())
        .collect();
    let lt = mean(&xs.iter().map(|v| (-v).exp()).collect::<Vec<_>>());
    // E[e^{-V}] = 2^{-1/2} for V ~ Gamma(1/2).
    assert!((lt - 0.5_f64.sqrt()).abs() < 0.01);
}

#[test]
fn stable_laplace_transform_is_gumbel_generator() {
    for theta in [1.25, 2.0, 4.0] {
        let s = PositiveStableSampler::new(theta).unwrap();
        let mut rng = rng(7);
        let xs: Vec<f64> = (0..100_000).map(|_| s.sample(&mut rng)).collect();
        assert!(xs.iter().all(|&v| v > 0.0));
        for t in [0.5_f64, 1.0, 2.0] {
            let psi = (-f64::powf(t, 1.0 / theta)).exp();
            let z = laplace_z(&xs, t, psi);
            assert!(z < 3.0, "theta {theta} t {t}: z {z}");
        }
    }
    let mut rng = rng(8);
    let xs: Vec<f64> = (0..100_000)
        .map(|_| sample_positive_stable(2.0, &mut rng).unwrap())
        .collect();
    let lt = mean(&xs.iter().map(|v| (-v).exp()).collect::<Vec<_>>());
    assert!((lt - (-1.0f64).exp()).abs() < 0.01);
}

#[test]
fn stable_half_index_is_levy() {
    // With E[e^{-tV}] = e^{-√t}, V is Lévy with P(V ≤ x) = erfc(1 / (2√x)).
    let s = PositiveStableSampler::new(2.0).unwrap();
    let mut rng = rng(9);
    let xs: Vec<f64> = (0..100_000).map(|_| s.sample(&mut rng)).collect();
    let d = ks_distance(&xs, |x| libm::erfc(0.5 / x.sqrt()));
    assert!(d < 0.01, "KS {d}");
}
