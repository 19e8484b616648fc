mod common;

use std::collections::BTreeMap;

use common::{gaussian_design, kkt_violation, normal_equations, rng, ten_of_five_hundred};
use nalgebra::DMatrix;
use newsaffect::themes::lasso::{lambda_grid, lambda_max, lasso, lasso_path, LassoParams, SparseDesign};
use newsaffect::themes::{train_area_classifiers, ClassifierParams};
use proptest::prelude::*;
use rand::Rng;

const KKT_TOL: f64 = 1e-6;

fn planted(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let x = gaussian_design(n, p, &mut r);
    let y = (0..n)
        .map(|i| 0.5 + 2.0 * x[(i, 0)] - 1.5 * x[(i, p / 2)] + r.random_range(-0.5..0.5))
        .collect();
    (x, y)
}

#[test]
fn every_point_of_the_path_satisfies_kkt() {
    for seed in 0..5 {
        let (x, y) = planted(80, 12, seed);
        let d = SparseDesign::from_dense(&x);
        let grid = lambda_grid(lambda_max(&d, &y), 20, 1e-3);
        for fit in lasso_path(&d, &y, &grid, LassoParams::default()) {
            assert!(fit.converged);
            let v = kkt_violation(&x, &y, &fit.weights, fit.intercept, fit.lambda);
            assert!(v < KKT_TOL, "seed {seed} lambda {}: {v}", fit.lambda);
        }
    }
}

#[test]
fn vanishing_penalty_matches_normal_equations() {
    for seed in 0..5 {
        let (x, y) = planted(60, 6, 100 + seed);
        let fit = lasso(&SparseDesign::from_dense(&x), &y, 0.0, None, LassoParams::default());
        let exact = normal_equations(&x, &y);
        assert!((fit.intercept - exact[0]).abs() < 1e-6);
        for j in 0..6 {
            assert!((fit.weights[j] - exact[j + 1]).abs() < 1e-6, "seed {seed} w{j}");
        }
    }
}

#[test]
fn planted_support_is_recovered() {
    let (rows, y) = ten_of_five_hundred(1500, 7);
    let targets = BTreeMap::from([("area".to_string(), y)]);
    let params = ClassifierParams {
        seed: 7,
        ..ClassifierParams::default()
    };
    let c = &train_area_classifiers(&rows, 500, &targets, params).unwrap()[0];
    let hits = (0..10).filter(|&j| c.weights[j] > 0.0).count();
    assert!(hits >= 8, "recovered {hits} of 10");
    assert!(c.cv.mean_precision() > 0.8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_designs_satisfy_kkt(seed in any::<u64>(), n in 8usize..40, p in 1usize..10, frac in 0.0f64..1.0) {
        let (x, y) = planted(n, p, seed);
        let d = SparseDesign::from_dense(&x);
        let lambda = lambda_max(&d, &y) * frac;
        let fit = lasso(&d, &y, lambda, None, LassoParams::default());
        prop_assert!(fit.converged);
        prop_assert!(kkt_violation(&x, &y, &fit.weights, fit.intercept, lambda) < KKT_TOL);
    }

    #[test]
    fn warm_and_cold_starts_agree(seed in any::<u64>(), frac in 0.01f64..1.0) {
        let (x, y) = planted(40, 8, seed);
        let d = SparseDesign::from_dense(&x);
        let lambda = lambda_max(&d, &y) * frac;
        let cold = lasso(&d, &y, lambda, None, LassoParams::default());
        let warm = lasso(&d, &y, lambda, Some(&[1.0; 8]), LassoParams::default());
        for (a, b) in cold.weights.iter().zip(&warm.weights) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }
}
