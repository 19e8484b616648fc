//! Per-area L1 least-squares classifiers and label propagation.
//!
//! Each macro area gets an independent model on bag-of-words counts with a
//! 0/1 target. The penalty is picked by inner cross-validation maximising
//! precision at the decision threshold; an outer cross-validation reports
//! precision and F1 of the whole selection procedure.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::lasso::{lambda_grid, lambda_max, lasso_path, LassoFit, LassoParams, SparseDesign};
use crate::corpus::TweetRecord;
use crate::error::{Error, Result};
use crate::seeds;
use crate::textprep::{preprocess_with, to_bow, BowVocab, HashtagPolicy, SparseBow, TextResources};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierParams {
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub n_lambdas: usize,
    /// Smallest penalty on the grid as a fraction of the largest.
    pub lambda_ratio: f64,
    pub min_positives: usize,
    pub threshold: f64,
    pub hashtags: HashtagPolicy,
    pub lasso: LassoParams,
    pub seed: u64,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        ClassifierParams {
            outer_folds: 5,
            inner_folds: 4,
            n_lambdas: 20,
            lambda_ratio: 1e-3,
            min_positives: 50,
            threshold: 0.5,
            hashtags: HashtagPolicy::Drop,
            lasso: LassoParams {
                tol: 1e-9,
                max_sweeps: 20_000,
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FoldMetrics {
    pub lambda: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl FoldMetrics {
    /// Zero when nothing is predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Outer cross-validation results.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CvReport {
    pub folds: Vec<FoldMetrics>,
}

impl CvReport {
    pub fn mean_precision(&self) -> f64 {
        self.folds.iter().map(FoldMetrics::precision).sum::<f64>() / self.folds.len().max(1) as f64
    }

    pub fn mean_f1(&self) -> f64 {
        self.folds.iter().map(FoldMetrics::f1).sum::<f64>() / self.folds.len().max(1) as f64
    }

    /// Confusion counts summed over folds.
    pub fn pooled(&self) -> FoldMetrics {
        self.folds.iter().fold(FoldMetrics::default(), |a, f| FoldMetrics {
            lambda: f64::NAN,
            tp: a.tp + f.tp,
            fp: a.fp + f.fp,
            fn_: a.fn_ + f.fn_,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaClassifier {
    pub area: String,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub threshold: f64,
    pub n_train: usize,
    pub n_positive: usize,
    pub cv: CvReport,
    pub params: ClassifierParams,
}

impl AreaClassifier {
    pub fn score(&self, row: &SparseBow) -> f64 {
        self.intercept + row.0.iter().map(|&(j, c)| self.weights[j] * c as f64).sum::<f64>()
    }

    /// Header with hyperparameters, then the intercept and every nonzero weight.
    pub fn write_tsv<W: Write>(&self, mut out: W, vocab: &BowVocab) -> std::io::Result<()> {
        let p = &self.params;
        writeln!(
            out,
            "# area={} lambda={} threshold={} outer_folds={} inner_folds={} n_lambdas={} lambda_ratio={} hashtags={} seed={}",
            self.area,
            self.lambda,
            self.threshold,
            p.outer_folds,
            p.inner_folds,
            p.n_lambdas,
            p.lambda_ratio,
            match p.hashtags {
                HashtagPolicy::Drop => "drop",
                HashtagPolicy::KeepBody => "keep",
            },
            p.seed
        )?;
        writeln!(out, "(intercept)\t{}", self.intercept)?;
        for (term, w) in vocab.terms().iter().zip(&self.weights) {
            if *w != 0.0 {
                writeln!(out, "{term}\t{w}")?;
            }
        }
        Ok(())
    }
}

/// One row per area of the cross-validated quality summary.
pub fn write_cv_summary<W: Write>(out: W, classifiers: &[AreaClassifier]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "area",
        "n_train",
        "n_positive",
        "lambda",
        "nonzero_weights",
        "precision_mean",
        "f1_mean",
        "precision_pooled",
        "f1_pooled",
    ])?;
    for c in classifiers {
        let pooled = c.cv.pooled();
        w.write_record([
            c.area.clone(),
            c.n_train.to_string(),
            c.n_positive.to_string(),
            c.lambda.to_string(),
            c.weights.iter().filter(|&&x| x != 0.0).count().to_string(),
            format!("{:.6}", c.cv.mean_precision()),
            format!("{:.6}", c.cv.mean_f1()),
            format!("{:.6}", pooled.precision()),
            format!("{:.6}", pooled.f1()),
        ])?;
    }
    w.flush().map_err(|e| Error::data(e.to_string()))?;
    Ok(())
}

/// 0/1 targets per area: a post is positive when any of its hashtags maps there.
pub fn area_targets(
    tweets: &[&TweetRecord],
    tag_areas: &BTreeMap<String, String>,
    areas: &[String],
) -> BTreeMap<String, Vec<f64>> {
    areas
        .iter()
        .map(|area| {
            let y = tweets
                .iter()
                .map(|t| {
                    let hit = t.hashtags.iter().any(|h| tag_areas.get(h) == Some(area));
                    if hit {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            (area.clone(), y)
        })
        .collect()
}

/// Bag-of-words rows for a set of posts.
pub fn bow_rows(tweets: &[&TweetRecord], res: &TextResources, vocab: &BowVocab, policy: HashtagPolicy) -> Vec<SparseBow> {
    tweets
        .par_iter()
        .map(|t| to_bow(&preprocess_with(&t.text, res, policy), vocab))
        .collect()
}

/// Balanced fold ids from a seeded shuffle.
fn fold_ids(n: usize, k: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeds::rng(seed, 0x666f_6c64, stream));
    let mut ids = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        ids[i] = pos % k;
    }
    ids
}

fn confusion(fit: &LassoFit, rows: &[&SparseBow], y: &[f64], threshold: f64) -> FoldMetrics {
    let mut m = FoldMetrics {
        lambda: fit.lambda,
        ..Default::default()
    };
    for (row, &t) in rows.iter().zip(y) {
        let pred = fit.predict(row) > threshold;
        let pos = t > 0.5;
        match (pred, pos) {
            (true, true) => m.tp += 1,
            (true, false) => m.fp += 1,
            (false, true) => m.fn_ += 1,
            (false, false) => {}
        }
    }
    m
}

struct Problem<'a> {
    rows: &'a [SparseBow],
    y: &'a [f64],
    n_features: usize,
}

impl Problem<'_> {
    fn subset(&self, idx: &[usize]) -> (Vec<&SparseBow>, Vec<f64>) {
        (idx.iter().map(|&i| &self.rows[i]).collect(), idx.iter().map(|&i| self.y[i]).collect())
    }

    fn path(&self, idx: &[usize], lambdas: &[f64], params: &ClassifierParams) -> Vec<LassoFit> {
        let (rows, y) = self.subset(idx);
        let x = SparseDesign::from_bows(&rows, self.n_features);
        lasso_path(&x, &y, lambdas, params.lasso)
    }

    /// Penalty maximising mean held-out precision over `k` folds of `idx`.
    /// Ties go to the smaller penalty.
    fn select_lambda(&self, idx: &[usize], lambdas: &[f64], params: &ClassifierParams, stream: u64) -> f64 {
        let k = params.inner_folds.min(idx.len()).max(2);
        let folds = fold_ids(idx.len(), k, params.seed, stream);
        let per_fold: Vec<Vec<f64>> = (0..k)
            .into_par_iter()
            .map(|f| {
                let train: Vec<usize> = idx.iter().zip(&folds).filter(|(_, &g)| g != f).map(|(&i, _)| i).collect();
                let test: Vec<usize> = idx.iter().zip(&folds).filter(|(_, &g)| g == f).map(|(&i, _)| i).collect();
                let (rows, y) = self.subset(&test);
                self.path(&train, lambdas, params)
                    .iter()
                    .map(|fit| confusion(fit, &rows, &y, params.threshold).precision())
                    .collect()
            })
            .collect();
        let mut best = (f64::NEG_INFINITY, lambdas[0]);
        for (li, &l) in lambdas.iter().enumerate() {
            let p = per_fold.iter().map(|v| v[li]).sum::<f64>() / k as f64;
            // grid is decreasing, so >= prefers the smaller penalty
            if p >= best.0 {
                best = (p, l);
            }
        }
        best.1
    }
}

/// Trains one classifier per area. Areas with fewer than
/// `params.min_positives` positives, or with a constant target, are skipped
/// with a warning.
pub fn train_area_classifiers(
    rows: &[SparseBow],
    n_features: usize,
    targets: &BTreeMap<String, Vec<f64>>,
    params: ClassifierParams,
) -> Result<Vec<AreaClassifier>> {
    if params.outer_folds < 2 || params.inner_folds < 2 || params.n_lambdas == 0 {
        return Err(Error::config("classifier needs >= 2 outer and inner folds and a nonempty grid"));
    }
    let n = rows.len();
    for (area, y) in targets {
        if y.len() != n {
            return Err(Error::data(format!("area {area}: {} targets for {n} rows", y.len())));
        }
    }
    let trained: Vec<Option<AreaClassifier>> = targets
        .par_iter()
        .map(|(area, y)| {
            let positives = y.iter().filter(|&&v| v > 0.5).count();
            if positives == 0 || positives == n {
                log::warn!("area {area}: target is constant, skipped");
                return None;
            }
            if positives < params.min_positives {
                log::warn!("area {area}: {positives} positives < {}, skipped", params.min_positives);
                return None;
            }
            Some(train_one(area, rows, n_features, y, positives, &params))
        })
        .collect();
    Ok(trained.into_iter().flatten().collect())
}

fn train_one(
    area: &str,
    rows: &[SparseBow],
    n_features: usize,
    y: &[f64],
    positives: usize,
    params: &ClassifierParams,
) -> AreaClassifier {
    let problem = Problem { rows, y, n_features };
    let all: Vec<usize> = (0..rows.len()).collect();
    let refs: Vec<&SparseBow> = rows.iter().collect();
    let x = SparseDesign::from_bows(&refs, n_features);
    let lmax = lambda_max(&x, y);
    let lambdas = lambda_grid(lmax, params.n_lambdas, params.lambda_ratio);

    let outer = fold_ids(rows.len(), params.outer_folds, params.seed, 0);
    let folds: Vec<FoldMetrics> = (0..params.outer_folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = all.iter().copied().filter(|&i| outer[i] != f).collect();
            let test: Vec<usize> = all.iter().copied().filter(|&i| outer[i] == f).collect();
            let lambda = problem.select_lambda(&train, &lambdas, params, 1 + f as u64);
            let upto: Vec<f64> = lambdas.iter().copied().filter(|&l| l >= lambda).collect();
            let fit = problem.path(&train, &upto, params).pop().expect("grid contains lambda");
            let (rows, yt) = problem.subset(&test);
            confusion(&fit, &rows, &yt, params.threshold)
        })
        .collect();

    let lambda = problem.select_lambda(&all, &lambdas, params, u64::MAX);
    let upto: Vec<f64> = lambdas.iter().copied().filter(|&l| l >= lambda).collect();
    let fit = lasso_path(&x, y, &upto, params.lasso).pop().expect("grid contains lambda");
    if !fit.converged {
        log::warn!("area {area}: coordinate descent hit the sweep limit");
    }
    AreaClassifier {
        area: area.to_string(),
        weights: fit.weights,
        intercept: fit.intercept,
        lambda,
        threshold: params.threshold,
        n_train: rows.len(),
        n_positive: positives,
        cv: CvReport { folds },
        params: *params,
    }
}

/// Continuous per-area scores for every post, thresholded strictly.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaLabels {
    pub areas: Vec<String>,
    pub ids: Vec<String>,
    /// `scores[i][a]` for post `i` and area `a`.
    pub scores: Vec<Vec<f64>>,
    pub threshold: f64,
}

impl AreaLabels {
    pub fn label(&self, i: usize, a: usize) -> bool {
        self.scores[i][a] > self.threshold
    }

    pub fn area_index(&self, area: &str) -> Option<usize> {
        self.areas.iter().position(|a| a == area)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["id".to_string()];
        header.extend(self.areas.iter().map(|a| format!("{a}_score")));
        header.extend(self.areas.iter().map(|a| format!("{a}_label")));
        w.write_record(&header)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(self.scores[i].iter().map(|s| s.to_string()));
            rec.extend((0..self.areas.len()).map(|a| u8::from(self.label(i, a)).to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::data(e.to_string()))?;
        Ok(())
    }

    /// Reads the file written by [`AreaLabels::write_csv`]; labels are
    /// recomputed from the scores with `threshold`.
    pub fn read_csv<R: std::io::Read>(input: R, threshold: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let areas: Vec<String> = header
            .iter()
            .skip(1)
            .filter_map(|h| h.strip_suffix("_score"))
            .map(String::from)
            .collect();
        if header.get(0) != Some("id") || header.len() != 1 + 2 * areas.len() {
            return Err(Error::data("area label file must have id, <area>_score and <area>_label columns"));
        }
        let mut ids = Vec::new();
        let mut scores = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            ids.push(rec[0].to_string());
            let row = (1..=areas.len())
                .map(|c| {
                    rec[c]
                        .parse::<f64>()
                        .map_err(|_| Error::data(format!("area score {:?} of {} is not a number", &rec[c], &rec[0])))
                })
                .collect::<Result<Vec<f64>>>()?;
            scores.push(row);
        }
        Ok(AreaLabels {
            areas,
            ids,
            scores,
            threshold,
        })
    }

    /// Percentage of each group's posts labelled with each area.
    pub fn coverage(&self, groups: &BTreeMap<String, String>) -> BTreeMap<String, Vec<f64>> {
        let mut counts: BTreeMap<String, (usize, Vec<usize>)> = BTreeMap::new();
        for (i, id) in self.ids.iter().enumerate() {
            let Some(g) = groups.get(id) else { continue };
            let e = counts
                .entry(g.clone())
                .or_insert_with(|| (0, vec![0; self.areas.len()]));
            e.0 += 1;
            for a in 0..self.areas.len() {
                if self.label(i, a) {
                    e.1[a] += 1;
                }
            }
        }
        counts
            .into_iter()
            .map(|(g, (n, hits))| (g, hits.iter().map(|&h| 100.0 * h as f64 / n as f64).collect()))
            .collect()
    }

    pub fn write_coverage_csv<W: Write>(&self, out: W, groups: &BTreeMap<String, String>) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["group".to_string()];
        header.extend(self.areas.iter().cloned());
        w.write_record(&header)?;
        for (g, pct) in self.coverage(groups) {
            let mut rec = vec![g];
            rec.extend(pct.iter().map(|p| format!("{p:.6}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::data(e.to_string()))?;
        Ok(())
    }
}

pub fn propagate_labels(classifiers: &[AreaClassifier], ids: &[String], rows: &[SparseBow]) -> AreaLabels {
    let scores = rows
        .par_iter()
        .map(|r| classifiers.iter().map(|c| c.score(r)).collect())
        .collect();
    AreaLabels {
        areas: classifiers.iter().map(|c| c.area.clone()).collect(),
        ids: ids.to_vec(),
        scores,
        threshold: classifiers.first().map_or(0.5, |c| c.threshold),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classifier(area: &str, weights: Vec<f64>, intercept: f64) -> AreaClassifier {
        AreaClassifier {
            area: area.into(),
            weights,
            intercept,
            lambda: 0.0,
            threshold: 0.5,
            n_train: 0,
            n_positive: 0,
            cv: CvReport::default(),
            params: ClassifierParams::default(),
        }
    }

    #[test]
    fn strict_threshold() {
        let c = vec![classifier("covid", vec![0.01, 0.0], 0.5)];
        let rows = vec![SparseBow(vec![(0, 1)]), SparseBow(vec![(1, 3)])];
        let labels = propagate_labels(&c, &["a".into(), "b".into()], &rows);
        assert!((labels.scores[0][0] - 0.51).abs() < 1e-12);
        assert!(labels.label(0, 0));
        assert_eq!(labels.scores[1][0], 0.5);
        assert!(!labels.label(1, 0));
    }

    #[test]
    fn coverage_recount() {
        let labels = AreaLabels {
            areas: vec!["x".into(), "y".into()],
            ids: vec!["1".into(), "2".into(), "3".into(), "4".into()],
            scores: vec![vec![0.9, 0.9], vec![0.1, 0.6], vec![0.7, 0.2], vec![0.0, 0.0]],
            threshold: 0.5,
        };
        let groups: BTreeMap<String, String> = [("1", "a"), ("2", "a"), ("3", "b"), ("4", "b")]
            .iter()
            .map(|(i, g)| (i.to_string(), g.to_string()))
            .collect();
        let cov = labels.coverage(&groups);
        assert_eq!(cov["a"], vec![50.0, 100.0]);
        assert_eq!(cov["b"], vec![50.0, 0.0]);

        let mut buf = Vec::new();
        labels.write_csv(&mut buf).unwrap();
        assert_eq!(AreaLabels::read_csv(buf.as_slice(), 0.5).unwrap(), labels);
    }

    #[test]
    fn metrics_with_no_predictions() {
        let m = FoldMetrics { lambda: 1.0, tp: 0, fp: 0, fn_: 4 };
        assert_eq!(m.precision(), 0.0);
        assert_eq!(m.f1(), 0.0);
        let m = FoldMetrics { lambda: 1.0, tp: 3, fp: 1, fn_: 1 };
        assert_eq!(m.precision(), 0.75);
        assert_eq!(m.f1(), 0.75);
    }

    #[test]
    fn folds_are_balanced() {
        let ids = fold_ids(103, 5, 9, 0);
        let mut sizes = [0; 5];
        for i in ids {
            sizes[i] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 20 || s == 21));
    }

    #[test]
    fn separable_area_is_learned() {
        // term 0 marks positives, term 1 is shared noise
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..200 {
            let pos = i % 3 == 0;
            let mut r = vec![(1, 1 + (i % 2) as u32)];
            if pos {
                r.insert(0, (0, 1));
            }
            rows.push(SparseBow(r));
            y.push(if pos { 1.0 } else { 0.0 });
        }
        let targets = BTreeMap::from([("a".to_string(), y), ("empty".to_string(), vec![0.0; 200])]);
        let cs = train_area_classifiers(&rows, 2, &targets, ClassifierParams::default()).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].cv.pooled().precision(), 1.0);
        assert_eq!(cs[0].cv.pooled().recall(), 1.0);
        let small = ClassifierParams { min_positives: 100, ..Default::default() };
        assert!(train_area_classifiers(&rows, 2, &targets, small).unwrap().is_empty());
    }
}
