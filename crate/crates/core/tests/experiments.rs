mod common;

use std::collections::HashSet;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varcontrib::config::Config;
use varcontrib::estimators::{delta_allocation, malliavin_allocation};
use varcontrib::experiments::{
    derive_seed, run_grid, run_grid_detailed, to_csv, write_csv, ExperimentConfig, CSV_HEADER,
};

const LOGNORMAL: &str = r#"{
    "model": {"family": "independent", "marginals": [
        {"kind": "lognormal", "mu": 0, "sigma": 0.5},
        {"kind": "lognormal", "mu": 0, "sigma": 1},
        {"kind": "lognormal", "mu": 0, "sigma": 2}]},
    "estimation": {"alphas": [0.9, 0.99], "deltas": [1e-3, 1e-4], "sample_sizes": [500, 2000],
                   "replicates": 6, "base_seed": 99, "n_pre": 50000}
}"#;

fn small_config() -> ExperimentConfig {
    Config::from_json(LOGNORMAL)
        .unwrap()
        .experiment_config()
        .unwrap()
}

#[test]
fn replicate_seeds_never_collide() {
    let seeds: HashSet<u64> = (0..1u64 << 16)
        .map(|r| derive_seed(7, 0, 0, 0, r))
        .collect();
    assert_eq!(seeds.len(), 1 << 16);
    let mut grid = HashSet::new();
    for a in 0..16 {
        for d in 0..16 {
            for n in 0..16 {
                for r in 0..16 {
                    assert!(grid.insert(derive_seed(7, a, d, n, r)));
                }
            }
        }
    }
}

#[test]
fn derived_streams_look_uniform() {
    for r in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(1, 0, 0, 0, r));
        let u: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let m = mean(&u);
        let var = u.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 9999.0;
        assert!((m - 0.5).abs() < 0.02);
        assert!((var - 1.0 / 12.0).abs() < 0.005);
    }
}

#[test]
fn grid_is_bitwise_reproducible() {
    let cfg = small_config();
    let a = to_csv(&run_grid(&cfg).unwrap());
    let b = to_csv(&run_grid(&cfg).unwrap());
    assert_eq!(a, b);
    assert!(a.starts_with(CSV_HEADER));
    assert_eq!(a.lines().count(), 1 + 2 * 2 * 2 * 3 * 2);
}

#[test]
fn both_estimators_see_the_same_batch() {
    let cfg = small_config();
    let run = run_grid_detailed(&cfg).unwrap();
    for rec in run.records.iter().step_by(5) {
        let batch = cfg
            .model
            .sample(cfg.sample_sizes[rec.n_idx], &mut rng(rec.seed))
            .unwrap();
        assert_eq!(batch.checksum(), rec.checksum);
        let lv = &run.var_levels[rec.alpha_idx];
        let (lo, hi) = lv.bands[rec.delta_idx];
        for (slot, &i) in cfg.assets.iter().enumerate() {
            assert_eq!(
                delta_allocation(&batch, i, lo, hi).unwrap(),
                rec.delta[slot]
            );
            assert_eq!(
                malliavin_allocation(&batch, &cfg.model, i, lv.var).unwrap(),
                rec.malliavin[slot]
            );
        }
    }
}

#[test]
fn rows_respect_invariants() {
    let cfg = small_config();
    for r in run_grid(&cfg).unwrap() {
        assert!(r.undefined <= cfg.replicates);
        if r.undefined < cfg.replicates {
            assert!(r.variance >= 0.0 && r.mean.is_finite());
        }
    }
}

#[test]
fn failed_write_leaves_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing").join("out.csv");
    assert!(write_csv(&path, &[]).is_err());
    assert!(!path.exists());
    let ok = dir.path().join("out.csv");
    write_csv(&ok, &[]).unwrap();
    assert_eq!(
        std::fs::read_to_string(ok).unwrap(),
        format!("{CSV_HEADER}\n")
    );
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn paper_grid_flag_replaces_grids() {
    let cfg = small_config().with_paper_grid();
    assert_eq!(cfg.alphas, vec![0.5, 0.9, 0.99]);
    assert_eq!(cfg.deltas, vec![1e-3, 1e-4, 1e-5, 1e-6]);
    assert_eq!(
        cfg.sample_sizes,
        vec![10_000, 31_622, 100_000, 316_227, 1_000_000]
    );
    assert_eq!(cfg.replicates, 6);
    assert!(cfg.validate().unwrap().is_empty());
}
