//! Engagement regression suites over a feature table.
//!
//! Each model selects rows with finite values, drops constant columns,
//! quantile-normalises features and target, screens features by VIF and
//! fits OLS. Coefficients are therefore standardised.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::ols::{fit_ols, DEFAULT_ALPHA};
use super::quantile::{quantile_normalize_with, DEFAULT_OFFSET};
use super::vif::{vif_filter, DEFAULT_VIF_THRESHOLD};
use crate::affect::{AffectVector, Emotion, Foundation};
use crate::error::{Error, Result};
use crate::themes::AreaLabels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    /// The post text.
    Text,
    /// The linked article.
    Article,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Group {
    Emotions(Source),
    Morals(Source),
    Factors,
    Followers,
    Areas,
}

impl Group {
    pub fn is_confounder(self) -> bool {
        matches!(self, Group::Followers | Group::Areas)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub name: String,
    pub group: Group,
    /// NaN marks a missing value (for example no linked article).
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Target {
    Replies,
    Quotes,
    Likes,
    Retweets,
    Sentiment,
}

impl Target {
    pub const ALL: [Target; 5] = [Target::Replies, Target::Quotes, Target::Likes, Target::Retweets, Target::Sentiment];

    pub fn name(self) -> &'static str {
        match self {
            Target::Replies => "replies",
            Target::Quotes => "quotes",
            Target::Likes => "likes",
            Target::Retweets => "retweets",
            Target::Sentiment => "sentiment",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outlet posts with their explanatory columns and targets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    pub ids: Vec<String>,
    pub features: Vec<Feature>,
    /// NaN marks a missing target (for example no replies to average).
    pub targets: BTreeMap<Target, Vec<f64>>,
}

impl FeatureTable {
    pub fn new(ids: Vec<String>) -> Self {
        FeatureTable {
            ids,
            ..Default::default()
        }
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn push_feature(&mut self, name: impl Into<String>, group: Group, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.n() {
            return Err(Error::data(format!("feature {name}: {} values for {} rows", values.len(), self.n())));
        }
        if values.iter().any(|v| v.is_infinite()) {
            return Err(Error::data(format!("feature {name} has infinite values")));
        }
        self.features.push(Feature { name, group, values });
        Ok(())
    }

    pub fn push_target(&mut self, target: Target, values: Vec<f64>) -> Result<()> {
        if values.len() != self.n() {
            return Err(Error::data(format!("target {target}: {} values for {} rows", values.len(), self.n())));
        }
        self.targets.insert(target, values);
        Ok(())
    }

    /// Eight emotion and ten virtue/vice columns. `None` rows are missing.
    pub fn push_affect(&mut self, source: Source, vectors: &[Option<AffectVector>]) -> Result<()> {
        let suffix = match source {
            Source::Text => "",
            Source::Article => "_article",
        };
        let col = |f: &dyn Fn(&AffectVector) -> f64| -> Vec<f64> {
            vectors.iter().map(|v| v.as_ref().map_or(f64::NAN, f)).collect()
        };
        for e in Emotion::ALL {
            let i = e.index();
            self.push_feature(format!("{}{suffix}", e.name()), Group::Emotions(source), col(&|v| v.emotions[i]))?;
        }
        for fd in Foundation::ALL {
            let k = fd.index();
            self.push_feature(format!("{}{suffix}", fd.virtue_name()), Group::Morals(source), col(&|v| v.virtue[k]))?;
        }
        for fd in Foundation::ALL {
            let k = fd.index();
            self.push_feature(format!("{}{suffix}", fd.vice_name()), Group::Morals(source), col(&|v| v.vice[k]))?;
        }
        Ok(())
    }

    fn indices(&self, pred: impl Fn(Group) -> bool) -> Vec<usize> {
        (0..self.features.len()).filter(|&j| pred(self.features[j].group)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteParams {
    pub vif_threshold: f64,
    pub alpha: f64,
    pub quantile_offset: f64,
    /// Per-area subsets need `n > p + min_excess_rows`.
    pub min_excess_rows: usize,
}

impl Default for SuiteParams {
    fn default() -> Self {
        SuiteParams {
            vif_threshold: DEFAULT_VIF_THRESHOLD,
            alpha: DEFAULT_ALPHA,
            quantile_offset: DEFAULT_OFFSET,
            min_excess_rows: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub feature: String,
    pub beta: f64,
    pub se: f64,
    pub p: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionReport {
    pub model: String,
    pub target: Target,
    pub n: usize,
    /// Retained features in table order.
    pub coefficients: Vec<Coefficient>,
    pub dropped_constant: Vec<String>,
    pub dropped_vif: Vec<String>,
    pub r2: f64,
    pub adj_r2: f64,
    /// Set when no model could be fitted.
    pub degenerate: Option<String>,
}

impl RegressionReport {
    pub fn coefficient(&self, feature: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.feature == feature)
    }

    fn degenerate(model: &str, target: Target, n: usize, why: String) -> Self {
        RegressionReport {
            model: model.to_string(),
            target,
            n,
            coefficients: Vec::new(),
            dropped_constant: Vec::new(),
            dropped_vif: Vec::new(),
            r2: f64::NAN,
            adj_r2: f64::NAN,
            degenerate: Some(why),
        }
    }
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|x| *x == v[0])
}

/// Fits one model of `target` on the columns `cols` over the rows `rows`
/// (all rows when `None`).
pub fn fit_model(
    table: &FeatureTable,
    model: &str,
    cols: &[usize],
    target: Target,
    rows: Option<&[usize]>,
    params: &SuiteParams,
) -> Result<RegressionReport> {
    let y_all = table
        .targets
        .get(&target)
        .ok_or_else(|| Error::data(format!("target {target} missing from feature table")))?;
    let candidate: Vec<usize> = match rows {
        Some(r) => r.to_vec(),
        None => (0..table.n()).collect(),
    };
    let rows: Vec<usize> = candidate
        .into_iter()
        .filter(|&i| y_all[i].is_finite() && cols.iter().all(|&j| table.features[j].values[i].is_finite()))
        .collect();
    let n = rows.len();
    let y: Vec<f64> = rows.iter().map(|&i| y_all[i]).collect();
    if n < 3 || is_constant(&y) {
        return Ok(RegressionReport::degenerate(model, target, n, "too few rows or constant target".into()));
    }

    let mut dropped_constant = Vec::new();
    let mut kept = Vec::new();
    let mut columns = Vec::new();
    for &j in cols {
        let f = &table.features[j];
        let v: Vec<f64> = rows.iter().map(|&i| f.values[i]).collect();
        if is_constant(&v) {
            dropped_constant.push(f.name.clone());
        } else {
            columns.push(quantile_normalize_with(&v, params.quantile_offset)?);
            kept.push(j);
        }
    }
    if kept.is_empty() {
        let mut r = RegressionReport::degenerate(model, target, n, "no non-constant features".into());
        r.dropped_constant = dropped_constant;
        return Ok(r);
    }
    if n <= kept.len() + 1 {
        let mut r = RegressionReport::degenerate(model, target, n, format!("{n} rows for {} features", kept.len()));
        r.dropped_constant = dropped_constant;
        return Ok(r);
    }
    let x = DMatrix::from_fn(n, kept.len(), |i, j| columns[j][i]);
    let screen = vif_filter(&x, params.vif_threshold)?;
    let dropped_vif = screen.dropped.iter().map(|&(c, _)| table.features[kept[c]].name.clone()).collect();
    if screen.retained.is_empty() {
        let mut r = RegressionReport::degenerate(model, target, n, "no features survive VIF screening".into());
        r.dropped_constant = dropped_constant;
        r.dropped_vif = dropped_vif;
        return Ok(r);
    }
    let yq = quantile_normalize_with(&y, params.quantile_offset)?;
    let fit = fit_ols(&x.select_columns(&screen.retained), &yq)?;
    let coefficients = screen
        .retained
        .iter()
        .enumerate()
        .map(|(c, &col)| Coefficient {
            feature: table.features[kept[col]].name.clone(),
            beta: fit.beta[c],
            se: fit.se[c],
            p: fit.p[c],
            significant: fit.p[c] <= params.alpha,
        })
        .collect();
    Ok(RegressionReport {
        model: model.to_string(),
        target,
        n,
        coefficients,
        dropped_constant,
        dropped_vif,
        r2: fit.r2,
        adj_r2: fit.adj_r2,
        degenerate: None,
    })
}

/// Feature groups whose coefficients are reported, each fitted together
/// with the confounders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scheme {
    Emotions,
    Morals,
    Factors,
    All,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Emotions, Scheme::Morals, Scheme::Factors, Scheme::All];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Emotions => "emotions",
            Scheme::Morals => "morals",
            Scheme::Factors => "nmf",
            Scheme::All => "all",
        }
    }

    pub fn includes(self, g: Group) -> bool {
        match self {
            Scheme::Emotions => g == Group::Emotions(Source::Text),
            Scheme::Morals => g == Group::Morals(Source::Text),
            Scheme::Factors => g == Group::Factors,
            Scheme::All => matches!(
                g,
                Group::Emotions(Source::Text) | Group::Morals(Source::Text) | Group::Factors
            ),
        }
    }
}

/// One model per target with the scheme's features plus follower count and
/// area scores.
pub fn run_engagement_suite(table: &FeatureTable, scheme: Scheme, params: &SuiteParams) -> Result<Vec<RegressionReport>> {
    let cols = table.indices(|g| scheme.includes(g) || g.is_confounder());
    run_targets(table, scheme.name(), &cols, None, params)
}

fn run_targets(
    table: &FeatureTable,
    model: &str,
    cols: &[usize],
    rows: Option<&[usize]>,
    params: &SuiteParams,
) -> Result<Vec<RegressionReport>> {
    let targets: Vec<Target> = table.targets.keys().copied().collect();
    targets
        .par_iter()
        .map(|&t| fit_model(table, model, cols, t, rows, params))
        .collect()
}

/// Per-area models on the posts labelled with that area, follower count as
/// the only confounder. Areas with `n <= p + min_excess_rows` are skipped.
pub fn run_topic_suite(
    table: &FeatureTable,
    labels: &AreaLabels,
    scheme: Scheme,
    params: &SuiteParams,
) -> Result<BTreeMap<String, Vec<RegressionReport>>> {
    let index: std::collections::HashMap<&str, usize> =
        labels.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let cols = table.indices(|g| scheme.includes(g) || g == Group::Followers);
    let mut out = BTreeMap::new();
    for (a, area) in labels.areas.iter().enumerate() {
        let rows: Vec<usize> = table
            .ids
            .iter()
            .enumerate()
            .filter(|(_, id)| index.get(id.as_str()).is_some_and(|&l| labels.label(l, a)))
            .map(|(i, _)| i)
            .collect();
        if rows.len() <= cols.len() + params.min_excess_rows {
            log::warn!("area {area}: {} posts for {} features, skipped", rows.len(), cols.len());
            continue;
        }
        out.insert(area.clone(), run_targets(table, scheme.name(), &cols, Some(&rows), params)?);
    }
    Ok(out)
}

/// Rows of the adjusted-R² grid: each fits one group on its own, except
/// the first which uses every text-derived group plus confounders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridRow {
    All,
    Followers,
    Areas,
    Factors,
    Emotions(Source),
    Morals(Source),
}

impl GridRow {
    pub const ALL: [GridRow; 8] = [
        GridRow::All,
        GridRow::Followers,
        GridRow::Areas,
        GridRow::Factors,
        GridRow::Emotions(Source::Text),
        GridRow::Emotions(Source::Article),
        GridRow::Morals(Source::Text),
        GridRow::Morals(Source::Article),
    ];

    pub fn label(self) -> &'static str {
        match self {
            GridRow::All => "All features",
            GridRow::Followers => "# Followers",
            GridRow::Areas => "Macro area (T)",
            GridRow::Factors => "Clusters (T)",
            GridRow::Emotions(Source::Text) => "Emotions (T)",
            GridRow::Emotions(Source::Article) => "Emotions (A)",
            GridRow::Morals(Source::Text) => "Morals (T)",
            GridRow::Morals(Source::Article) => "Morals (A)",
        }
    }

    fn includes(self, g: Group) -> bool {
        match self {
            GridRow::All => Scheme::All.includes(g) || g.is_confounder(),
            GridRow::Followers => g == Group::Followers,
            GridRow::Areas => g == Group::Areas,
            GridRow::Factors => g == Group::Factors,
            GridRow::Emotions(s) => g == Group::Emotions(s),
            GridRow::Morals(s) => g == Group::Morals(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct R2Grid {
    pub targets: Vec<Target>,
    /// Row label and one report per target. Rows whose group is absent
    /// from the table are left out.
    pub rows: Vec<(String, Vec<RegressionReport>)>,
}

pub fn r2_grid(table: &FeatureTable, params: &SuiteParams) -> Result<R2Grid> {
    let mut rows = Vec::new();
    for row in GridRow::ALL {
        let cols = table.indices(|g| row.includes(g));
        if cols.is_empty() {
            continue;
        }
        rows.push((row.label().to_string(), run_targets(table, row.label(), &cols, None, params)?));
    }
    Ok(R2Grid {
        targets: table.targets.keys().copied().collect(),
        rows,
    })
}

fn fmt_opt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

impl R2Grid {
    /// `model,<target>...` with adjusted R²; empty cells for degenerate fits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(std::iter::once("model").chain(self.targets.iter().map(|t| t.name())))?;
        for (label, reports) in &self.rows {
            w.write_record(std::iter::once(label.clone()).chain(reports.iter().map(|r| fmt_opt(r.adj_r2))))?;
        }
        w.flush().map_err(|e| Error::data(e.to_string()))?;
        Ok(())
    }
}

/// `model,target,feature,beta,se,p,significant`.
pub fn write_coefficients<W: Write>(out: W, reports: &[RegressionReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "target", "feature", "beta", "se", "p", "significant"])?;
    for r in reports {
        for c in &r.coefficients {
            w.write_record([
                r.model.clone(),
                r.target.name().to_string(),
                c.feature.clone(),
                format!("{:.6}", c.beta),
                format!("{:.6}", c.se),
                format!("{:.6e}", c.p),
                u8::from(c.significant).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::data(e.to_string()))?;
    Ok(())
}

/// `model,target,n,features,r2,adj_r2,dropped_constant,dropped_vif,note`.
pub fn write_model_summary<W: Write>(out: W, reports: &[RegressionReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "target", "n", "features", "r2", "adj_r2", "dropped_constant", "dropped_vif", "note"])?;
    for r in reports {
        w.write_record([
            r.model.clone(),
            r.target.name().to_string(),
            r.n.to_string(),
            r.coefficients.len().to_string(),
            fmt_opt(r.r2),
            fmt_opt(r.adj_r2),
            r.dropped_constant.join(";"),
            r.dropped_vif.join(";"),
            r.degenerate.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::data(e.to_string()))?;
    Ok(())
}
