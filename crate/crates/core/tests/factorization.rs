mod common;

use std::collections::BTreeMap;

use common::{match_rows, rng};
use nalgebra::DMatrix;
use newsaffect::affect::AffectScorer;
use newsaffect::factors::{fit_nmf, predominance, select_k, AffectMatrix, FactorModel, NmfParams};
use newsaffect::synth::{generate, planted_affect_matrix, SynthSpec};
use proptest::prelude::*;
use rand::Rng;

fn assert_monotone(m: &FactorModel) {
    // multiplicative updates never increase the loss; allow summation rounding only
    let floor = 64.0 * f64::EPSILON * m.total;
    for (i, w) in m.objective.windows(2).enumerate() {
        assert!(w[1] <= w[0] + floor, "iteration {}: {} -> {}", i + 1, w[0], w[1]);
    }
}

fn rows_of(h: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..h.nrows()).map(|r| h.row(r).iter().copied().collect()).collect()
}

#[test]
fn single_planted_factor_is_explained_by_one_component() {
    let mut spec = SynthSpec {
        n_tweets: 3000,
        seed: 11,
        ..SynthSpec::default()
    };
    spec.factors.truncate(1);
    for l in [
        &mut spec.engagement.likes,
        &mut spec.engagement.retweets,
        &mut spec.engagement.replies,
        &mut spec.engagement.quotes,
        &mut spec.engagement.sentiment,
    ] {
        l.factors.truncate(1);
    }
    let (corpus, _) = generate(&spec).unwrap();
    let scorer = AffectScorer::bundled_test();
    let outlets: Vec<_> = corpus.outlet_tweets().cloned().collect();
    let scores = scorer.score_all(&outlets);
    let data = AffectMatrix::from_vectors(outlets.iter().map(|t| t.id.as_str()).zip(&scores)).unwrap();
    let m = fit_nmf(&data, 1, NmfParams::default()).unwrap();
    assert!(m.explained_variance >= 0.9, "ev = {}", m.explained_variance);
    assert_monotone(&m);
}

#[test]
fn planted_four_factors_are_recovered_at_small_n() {
    let spec = SynthSpec::default();
    let h0 = spec.h0().unwrap();
    let (data, _) = planted_affect_matrix(2000, &h0, spec.concentration, 0.01, 5).unwrap();
    let ks: Vec<usize> = (1..=8).collect();
    let (sel, models) = select_k(&data, &ks, NmfParams::default()).unwrap();
    assert_eq!(sel.chosen, 4, "{:?}", sel.curve);
    let m = models.iter().find(|m| m.k == 4).unwrap();
    let planted: Vec<Vec<f64>> = h0.iter().map(|r| r.to_vec()).collect();
    let (_, cos) = match_rows(&rows_of(&m.h), &planted);
    assert!(cos.iter().all(|&c| c >= 0.9), "{cos:?}");
    for m in &models {
        assert_monotone(m);
    }
}

#[test]
fn predominance_rows_sum_to_one_hundred() {
    let spec = SynthSpec::default();
    let (data, _) = planted_affect_matrix(500, &spec.h0().unwrap(), 0.3, 0.01, 2).unwrap();
    let m = fit_nmf(&data, 4, NmfParams::default()).unwrap();
    let groups: Vec<(String, String)> = m.ids.iter().enumerate().map(|(i, id)| (id.clone(), format!("g{}", i % 7))).collect();
    let table: BTreeMap<String, Vec<f64>> = predominance(&m, groups.iter().map(|(a, b)| (a.as_str(), b.as_str()))).unwrap();
    assert_eq!(table.len(), 7);
    for row in table.values() {
        assert_eq!(row.len(), 4);
        assert!((row.iter().sum::<f64>() - 100.0).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn objective_never_increases(seed in any::<u64>(), n in 5usize..60, k in 1usize..6) {
        let mut r = rng(seed);
        let x = DMatrix::from_fn(n, 18, |_, _| if r.random_bool(0.4) { 0.0 } else { r.random::<f64>() });
        prop_assume!(x.iter().any(|v| *v > 0.0));
        let data = AffectMatrix::new((0..n).map(|i| i.to_string()).collect(), x).unwrap();
        let m = fit_nmf(&data, k.min(n), NmfParams { max_iter: 300, tol: 0.0, seed }).unwrap();
        assert_monotone(&m);
        prop_assert!(m.w.iter().chain(m.h.iter()).all(|v| *v >= 0.0));
        prop_assert!((0.0..=1.0).contains(&m.explained_variance));
    }
}
