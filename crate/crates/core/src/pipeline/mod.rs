//! End-to-end stages behind the command-line tool.
//!
//! Each stage reads the configured inputs (and, for `factors` and `regress`,
//! the outputs of earlier stages), writes CSV files into its own directory
//! under the output root and records a `run.toml` with the seed.
//!
//! | stage     | directory  | main outputs |
//! |-----------|------------|--------------|
//! | `synth`   | `synth/`   | `corpus.jsonl`, `truth/*.csv`, `spec.toml` |
//! | `score`   | `score/`   | `affect.csv`, `affect_article.csv`, `conversations.csv` |
//! | `themes`  | `themes/`  | `pac.csv`, `clusters.csv`, then with a merge map `area_scores.csv`, `coverage.csv`, `cv_summary.csv` |
//! | `factors` | `factors/` | `ev_curve.csv`, `H.csv`, `W.csv`, `predominance_outlet.csv`, `predominance_area.csv` |
//! | `regress` | `regress/` | `r2_table.csv`, `coefficients.csv`, `areas/<area>/`, `prevalence.csv` |
//! | `report`  | `report/`  | `summary.csv`, `conversations.csv`, `prevalence.csv` |

mod config;
pub mod prevalence;

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

pub use config::{
    FactorsConfig, ModeName, Overrides, Paths, PipelineConfig, RegressConfig, ScopeName, ScoreConfig, SynthConfig,
    ThemesConfig,
};

use crate::affect::{conversation_sentiment, write_affect_csv, AffectVector};
use crate::corpus::{
    avg_conversation_size, build_conversations, load_corpus, outlet_roots, write_conversation_summary, Corpus,
    TweetRecord,
};
use crate::engage::{
    r2_grid, run_engagement_suite, run_topic_suite, write_coefficients, write_model_summary, FeatureTable, Group,
    RegressionReport, Scheme, Source, Target,
};
use crate::error::{Error, Result};
use crate::factors::{predominance, read_w_csv, select_k, write_predominance_csv, AffectMatrix};
use crate::synth::{self, SynthSpec};
use crate::textprep::{build_vocab, preprocess_with, to_bow, TokenizedDoc};
use crate::themes::classify::{area_targets, write_cv_summary};
use crate::themes::{
    assign_macro_areas, consensus_cluster, hashtag_stats, propagate_labels, select_hashtags, train_area_classifiers,
    train_embedding, write_cluster_listing, AreaLabels, MergeMap,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Score,
    Themes,
    Factors,
    Regress,
    Synth,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Score => "score",
            Command::Themes => "themes",
            Command::Factors => "factors",
            Command::Regress => "regress",
            Command::Synth => "synth",
            Command::Report => "report",
        }
    }
}

/// Everything the command line can set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub overrides: Overrides,
    /// Worker threads; `None` or `0` uses every core.
    pub threads: Option<usize>,
}

/// Key facts about a finished stage, also written to its `run.toml`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunSummary {
    pub command: String,
    pub seed: u64,
    pub version: String,
    pub summary: BTreeMap<String, String>,
}

impl RunSummary {
    fn new(command: Command, seed: u64) -> Self {
        RunSummary {
            command: command.name().to_string(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            summary: BTreeMap::new(),
        }
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.summary.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.summary.get(key).map(String::as_str)
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::data(e.to_string()))?;
        let path = dir.join("run.toml");
        fs::write(&path, text).map_err(|e| Error::io(path, e))
    }
}

/// Loads the config, applies overrides and runs one stage on a dedicated
/// thread pool.
pub fn run(command: Command, opts: &RunOptions) -> Result<RunSummary> {
    let mut cfg = match &opts.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    cfg.apply(&opts.overrides);
    cfg.validate_inputs(command != Command::Synth)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    pool.install(|| match command {
        Command::Score => cmd_score(&cfg),
        Command::Themes => cmd_themes(&cfg),
        Command::Factors => cmd_factors(&cfg),
        Command::Regress => cmd_regress(&cfg),
        Command::Synth => cmd_synth(&cfg, opts.overrides.seed),
        Command::Report => cmd_report(&cfg),
    })
}

fn stage_dir(cfg: &PipelineConfig, name: &str) -> Result<PathBuf> {
    let dir = cfg.output.join(name);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

/// Creates `path` and hands a buffered writer to `f`.
fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn file_name(area: &str) -> String {
    area.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn load(cfg: &PipelineConfig) -> Result<Corpus> {
    let path = cfg.corpus_path()?;
    let report = load_corpus(path)?;
    if report.malformed_count() > 0 {
        log::warn!("{}: skipped {} malformed lines", path.display(), report.malformed_count());
    }
    Ok(report.corpus)
}

fn score_texts<'a>(scorer: &crate::affect::AffectScorer, texts: &[&'a str]) -> Vec<AffectVector> {
    texts.par_iter().map(|t| scorer.score_text(t)).collect()
}

/// Per-post affect, article affect and conversation sentiment.
pub fn cmd_score(cfg: &PipelineConfig) -> Result<RunSummary> {
    let corpus = load(cfg)?;
    let scorer = cfg.scorer()?;
    let dir = stage_dir(cfg, "score")?;
    let mut run = RunSummary::new(Command::Score, cfg.seed);

    let vectors = scorer.score_all(corpus.tweets());
    let ids = corpus.tweets().iter().map(|t| t.id.as_str());
    write_file(&dir.join("affect.csv"), |w| write_affect_csv(w, ids.zip(&vectors)))?;

    let with_article: Vec<&TweetRecord> = corpus.outlet_tweets().filter(|t| t.article_text.is_some()).collect();
    let texts: Vec<&str> = with_article.iter().map(|t| t.article_text.as_deref().unwrap_or("")).collect();
    let article_vectors = score_texts(&scorer, &texts);
    write_file(&dir.join("affect_article.csv"), |w| {
        write_affect_csv(w, with_article.iter().map(|t| t.id.as_str()).zip(&article_vectors))
    })?;

    let conv = build_conversations(&corpus, &outlet_roots(&corpus))?;
    let scope = cfg.reply_scope();
    let sentiments: Vec<Option<f64>> = conv
        .trees
        .par_iter()
        .map(|t| conversation_sentiment(t, &corpus, &scorer, scope))
        .collect();
    write_file(&dir.join("conversations.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["root", "outlet", "size", "sentiment"])?;
        for (t, s) in conv.trees.iter().zip(&sentiments) {
            c.write_record([
                t.root.clone(),
                t.outlet.clone(),
                t.size().to_string(),
                s.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        c.flush().map_err(|e| Error::data(e.to_string()))
    })?;

    run.note("posts", corpus.len());
    run.note("articles", with_article.len());
    run.note("conversations", conv.trees.len());
    run.note("dangling_replies", conv.dangling.len());
    run.note("cyclic_replies", conv.cyclic.len());
    run.note("scoring_mode", scorer.mode);
    run.write(&dir)?;
    Ok(run)
}

/// Hashtag selection, embedding and consensus clustering; with a merge map
/// also area classifiers and propagated labels.
pub fn cmd_themes(cfg: &PipelineConfig) -> Result<RunSummary> {
    let corpus = load(cfg)?;
    let dir = stage_dir(cfg, "themes")?;
    let mut run = RunSummary::new(Command::Themes, cfg.seed);

    let stats = hashtag_stats(&corpus);
    let eligible = select_hashtags(&corpus, cfg.hashtag_filter())?;
    write_file(&dir.join("hashtags.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["hashtag", "count", "authors"])?;
        for t in &eligible {
            let s = &stats[t];
            c.write_record([t.clone(), s.count.to_string(), s.authors.to_string()])?;
        }
        c.flush().map_err(|e| Error::data(e.to_string()))
    })?;

    let emb = train_embedding(&corpus, &eligible, cfg.embedding_params())?;
    let p = dir.join("embedding.tsv");
    write_file(&p, |w| emb.write_tsv(w).map_err(io_at(&p)))?;
    let model = consensus_cluster(&emb, cfg.consensus_params())?;
    write_file(&dir.join("pac.csv"), |w| model.write_pac_csv(w))?;
    write_file(&dir.join("clusters.csv"), |w| {
        write_cluster_listing(w, &model, &stats, cfg.themes.listing_top)
    })?;
    run.note("eligible_hashtags", eligible.len());
    run.note("chosen_k", model.chosen_k);

    let merge = match &cfg.paths.merge_map {
        Some(p) if p.exists() => MergeMap::load(p)?,
        other => {
            log::warn!(
                "no merge map{}; inspect {} and write cluster_id<TAB>macro_area lines, then rerun",
                other.as_ref().map(|p| format!(" at {}", p.display())).unwrap_or_default(),
                dir.join("clusters.csv").display()
            );
            run.note("status", "awaiting_merge_map");
            run.write(&dir)?;
            return Ok(run);
        }
    };
    let tag_areas = assign_macro_areas(&model, &merge)?;
    write_file(&dir.join("hashtag_areas.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["hashtag", "cluster", "area"])?;
        for (t, cl) in model.tags.iter().zip(&model.partition) {
            c.write_record([t.clone(), cl.to_string(), tag_areas[t].clone()])?;
        }
        c.flush().map_err(|e| Error::data(e.to_string()))
    })?;

    let posts: Vec<&TweetRecord> = corpus.tweets().iter().filter(|t| t.reply_to.is_none()).collect();
    let res = cfg.text_resources()?;
    let policy = cfg.hashtag_policy();
    let docs: Vec<TokenizedDoc> = posts.par_iter().map(|t| preprocess_with(&t.text, &res, policy)).collect();
    let is_train: Vec<bool> = posts.iter().map(|t| t.hashtags.iter().any(|h| tag_areas.contains_key(h))).collect();
    let (train_docs, rest_docs): (Vec<TokenizedDoc>, Vec<TokenizedDoc>) = {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (d, &tr) in docs.iter().zip(&is_train) {
            if tr {
                a.push(d.clone())
            } else {
                b.push(d.clone())
            }
        }
        (a, b)
    };
    let (vocab, vstats) = build_vocab(&train_docs, &rest_docs, cfg.themes.vocab_train_min, cfg.themes.vocab_rest_min)?;
    let p = dir.join("vocab.tsv");
    write_file(&p, |w| vocab.write_tsv(w).map_err(io_at(&p)))?;

    let rows: Vec<_> = docs.par_iter().map(|d| to_bow(d, &vocab)).collect();
    let train_posts: Vec<&TweetRecord> = posts.iter().zip(&is_train).filter(|(_, &t)| t).map(|(p, _)| *p).collect();
    let train_rows: Vec<_> = rows.iter().zip(&is_train).filter(|(_, &t)| t).map(|(r, _)| r.clone()).collect();
    let targets = area_targets(&train_posts, &tag_areas, &merge.areas());
    let classifiers = train_area_classifiers(&train_rows, vocab.len(), &targets, cfg.classifier_params())?;
    if classifiers.is_empty() {
        return Err(Error::data(format!(
            "no macro area has {} positive posts; lower themes.min_positives",
            cfg.themes.min_positives
        )));
    }
    let cdir = dir.join("classifiers");
    fs::create_dir_all(&cdir).map_err(io_at(&cdir))?;
    for c in &classifiers {
        let p = cdir.join(format!("{}.tsv", file_name(&c.area)));
        write_file(&p, |w| c.write_tsv(w, &vocab).map_err(io_at(&p)))?;
    }
    write_file(&dir.join("cv_summary.csv"), |w| write_cv_summary(w, &classifiers))?;

    let ids: Vec<String> = posts.iter().map(|t| t.id.clone()).collect();
    let labels = propagate_labels(&classifiers, &ids, &rows);
    write_file(&dir.join("area_scores.csv"), |w| labels.write_csv(w))?;
    let outlets: BTreeMap<String, String> = posts
        .iter()
        .filter_map(|t| t.outlet.as_ref().map(|o| (t.id.clone(), o.clone())))
        .collect();
    write_file(&dir.join("coverage.csv"), |w| labels.write_coverage_csv(w, &outlets))?;

    run.note("status", "labelled");
    run.note("areas", classifiers.iter().map(|c| c.area.as_str()).collect::<Vec<_>>().join(","));
    run.note("training_posts", train_posts.len());
    run.note("vocabulary", vocab.len());
    run.note("retained_volume", format!("{:.6}", vstats.retained_volume));
    run.write(&dir)?;
    Ok(run)
}

fn read_area_labels(cfg: &PipelineConfig) -> Result<Option<AreaLabels>> {
    let p = cfg.output.join("themes").join("area_scores.csv");
    if !p.exists() {
        return Ok(None);
    }
    let file = File::open(&p).map_err(io_at(&p))?;
    AreaLabels::read_csv(file, cfg.themes.threshold).map(Some)
}

/// Factorisation of the affect matrix with elbow selection of K.
pub fn cmd_factors(cfg: &PipelineConfig) -> Result<RunSummary> {
    let corpus = load(cfg)?;
    let scorer = cfg.scorer()?;
    let dir = stage_dir(cfg, "factors")?;
    let mut run = RunSummary::new(Command::Factors, cfg.seed);

    let posts: Vec<&TweetRecord> = corpus
        .tweets()
        .iter()
        .filter(|t| t.is_outlet() || (cfg.factors.include_users && t.reply_to.is_none()))
        .collect();
    let texts: Vec<&str> = posts.iter().map(|t| t.text.as_str()).collect();
    let vectors = score_texts(&scorer, &texts);
    let x = AffectMatrix::from_vectors(posts.iter().map(|t| t.id.as_str()).zip(&vectors))?;
    let k_hi = cfg.factors.k_max.min(18).min(x.n());
    let ks: Vec<usize> = (cfg.factors.k_min.max(1)..=k_hi).collect();
    if ks.is_empty() {
        return Err(Error::config(format!(
            "factors: no K in {}..={} fits {} posts",
            cfg.factors.k_min,
            cfg.factors.k_max,
            x.n()
        )));
    }
    let (sel, models) = select_k(&x, &ks, cfg.nmf_params())?;
    let model = models
        .iter()
        .find(|m| m.k == sel.chosen)
        .ok_or_else(|| Error::numerical("chosen K has no fitted model"))?;
    write_file(&dir.join("ev_curve.csv"), |w| sel.write_csv(w))?;
    write_file(&dir.join("H.csv"), |w| model.write_h_csv(w))?;
    write_file(&dir.join("W.csv"), |w| model.write_w_csv(w))?;
    write_file(&dir.join("objective.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["iteration", "objective"])?;
        for (i, v) in model.objective.iter().enumerate() {
            c.write_record([i.to_string(), v.to_string()])?;
        }
        c.flush().map_err(|e| Error::data(e.to_string()))
    })?;

    let outlet_members: Vec<(&str, &str)> = posts
        .iter()
        .filter_map(|t| t.outlet.as_deref().map(|o| (t.id.as_str(), o)))
        .collect();
    let by_outlet = predominance(model, outlet_members)?;
    write_file(&dir.join("predominance_outlet.csv"), |w| write_predominance_csv(w, model.k, &by_outlet))?;

    if let Some(labels) = read_area_labels(cfg)? {
        let in_model: std::collections::HashSet<&str> = model.ids.iter().map(String::as_str).collect();
        let mut members = Vec::new();
        for (i, id) in labels.ids.iter().enumerate() {
            if !in_model.contains(id.as_str()) {
                continue;
            }
            for (a, area) in labels.areas.iter().enumerate() {
                if labels.label(i, a) {
                    members.push((id.as_str(), area.as_str()));
                }
            }
        }
        let by_area = predominance(model, members)?;
        write_file(&dir.join("predominance_area.csv"), |w| write_predominance_csv(w, model.k, &by_area))?;
        run.note("area_groups", by_area.len());
    }

    run.note("posts", x.n());
    run.note("chosen_k", sel.chosen);
    run.note("elbow_found", sel.elbow_found);
    run.note("explained_variance", format!("{:.6}", model.explained_variance));
    run.note("iterations", model.iterations);
    run.note("converged", model.converged);
    run.write(&dir)?;
    Ok(run)
}

/// Outlet posts as a regression table: text and article affect, factor
/// loadings and continuous area scores from earlier stages when present,
/// log follower count, engagement counts and reply sentiment.
pub fn feature_table(cfg: &PipelineConfig, corpus: &Corpus) -> Result<FeatureTable> {
    let scorer = cfg.scorer()?;
    let posts: Vec<&TweetRecord> = corpus.outlet_tweets().collect();
    if posts.is_empty() {
        return Err(Error::data("corpus has no outlet posts"));
    }
    let ids: Vec<String> = posts.iter().map(|t| t.id.clone()).collect();
    let mut table = FeatureTable::new(ids.clone());

    let texts: Vec<&str> = posts.iter().map(|t| t.text.as_str()).collect();
    let text_vectors: Vec<Option<AffectVector>> = score_texts(&scorer, &texts).into_iter().map(Some).collect();
    table.push_affect(Source::Text, &text_vectors)?;
    let article_vectors: Vec<Option<AffectVector>> = posts
        .par_iter()
        .map(|t| t.article_text.as_deref().map(|a| scorer.score_text(a)))
        .collect();
    if article_vectors.iter().any(Option::is_some) {
        table.push_affect(Source::Article, &article_vectors)?;
    }

    let w_path = cfg.output.join("factors").join("W.csv");
    if w_path.exists() {
        let (names, w_ids, w) = read_w_csv(File::open(&w_path).map_err(io_at(&w_path))?)?;
        let index: HashMap<&str, usize> = w_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        for (c, name) in names.iter().enumerate() {
            let col = ids.iter().map(|id| index.get(id.as_str()).map_or(f64::NAN, |&i| w[(i, c)])).collect();
            table.push_feature(name.clone(), Group::Factors, col)?;
        }
    } else {
        log::warn!("{} not found; run factors first to include factor loadings", w_path.display());
    }

    table.push_feature(
        "followers",
        Group::Followers,
        posts.iter().map(|t| (t.follower_count as f64).ln_1p()).collect(),
    )?;

    if let Some(labels) = read_area_labels(cfg)? {
        let index: HashMap<&str, usize> = labels.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        for (a, area) in labels.areas.iter().enumerate() {
            let col = ids
                .iter()
                .map(|id| index.get(id.as_str()).map_or(f64::NAN, |&i| labels.scores[i][a]))
                .collect();
            table.push_feature(format!("area_{area}"), Group::Areas, col)?;
        }
    }

    table.push_target(Target::Replies, posts.iter().map(|t| t.reply_count as f64).collect())?;
    table.push_target(Target::Quotes, posts.iter().map(|t| t.quote_count as f64).collect())?;
    table.push_target(Target::Likes, posts.iter().map(|t| t.like_count as f64).collect())?;
    table.push_target(Target::Retweets, posts.iter().map(|t| t.retweet_count as f64).collect())?;
    let conv = build_conversations(corpus, &ids)?;
    let mut sentiment = vec![f64::NAN; ids.len()];
    let pos: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let scope = cfg.reply_scope();
    let values: Vec<Option<f64>> = conv
        .trees
        .par_iter()
        .map(|t| conversation_sentiment(t, corpus, &scorer, scope))
        .collect();
    for (t, v) in conv.trees.iter().zip(values) {
        if let Some(v) = v {
            sentiment[pos[t.root.as_str()]] = v;
        }
    }
    table.push_target(Target::Sentiment, sentiment)?;
    Ok(table)
}

fn write_reports(dir: &Path, reports: &[RegressionReport]) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    write_file(&dir.join("coefficients.csv"), |w| write_coefficients(w, reports))?;
    write_file(&dir.join("model_summary.csv"), |w| write_model_summary(w, reports))
}

fn outlet_prevalence(corpus: &Corpus, cfg: &PipelineConfig) -> Result<Vec<prevalence::WindowRow>> {
    let scorer = cfg.scorer()?;
    let posts: Vec<&TweetRecord> = corpus.outlet_tweets().collect();
    let texts: Vec<&str> = posts.iter().map(|t| t.text.as_str()).collect();
    let vectors = score_texts(&scorer, &texts);
    prevalence::prevalence_series(posts.iter().map(|t| t.day()).zip(&vectors), cfg.regress.window_days)
}

/// Adjusted-R² grid, per-scheme coefficient reports, per-area models and
/// the moving-window prevalence series.
pub fn cmd_regress(cfg: &PipelineConfig) -> Result<RunSummary> {
    let corpus = load(cfg)?;
    let dir = stage_dir(cfg, "regress")?;
    let mut run = RunSummary::new(Command::Regress, cfg.seed);
    let table = feature_table(cfg, &corpus)?;
    let params = cfg.suite_params();

    let grid = r2_grid(&table, &params)?;
    write_file(&dir.join("r2_table.csv"), |w| grid.write_csv(w))?;

    let schemes: Vec<Scheme> = Scheme::ALL
        .into_iter()
        .filter(|s| table.features.iter().any(|f| s.includes(f.group)))
        .collect();
    let mut reports = Vec::new();
    for &s in &schemes {
        reports.extend(run_engagement_suite(&table, s, &params)?);
    }
    write_reports(&dir, &reports)?;

    let labels = read_area_labels(cfg)?;
    if let (Some(labels), true) = (&labels, cfg.regress.per_area) {
        let mut by_area: BTreeMap<String, Vec<RegressionReport>> = BTreeMap::new();
        for &s in &schemes {
            for (area, r) in run_topic_suite(&table, labels, s, &params)? {
                by_area.entry(area).or_default().extend(r);
            }
        }
        for (area, r) in &by_area {
            write_reports(&dir.join("areas").join(file_name(area)), r)?;
        }
        run.note("area_models", by_area.keys().cloned().collect::<Vec<_>>().join(","));
    }

    let series = outlet_prevalence(&corpus, cfg)?;
    write_file(&dir.join("prevalence.csv"), |w| prevalence::write_prevalence_csv(w, &series))?;

    run.note("outlet_posts", table.n());
    run.note("features", table.features.len());
    run.note("schemes", schemes.iter().map(|s| s.name()).collect::<Vec<_>>().join(","));
    run.note("degenerate_models", reports.iter().filter(|r| r.degenerate.is_some()).count());
    run.write(&dir)?;
    Ok(run)
}

/// Synthetic corpus with planted truth. `seed` overrides the seed in the synth spec file.
pub fn cmd_synth(cfg: &PipelineConfig, seed: Option<u64>) -> Result<RunSummary> {
    let mut spec = match &cfg.synth.spec {
        Some(p) => SynthSpec::load(p)?,
        None => SynthSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let dir = stage_dir(cfg, "synth")?;
    let (corpus, truth) = synth::generate_with(
        &spec,
        &match &cfg.paths.emotion_lexicon {
            Some(p) => crate::affect::EmotionLexicon::load(p)?,
            None => crate::affect::EmotionLexicon::bundled_test(),
        },
        &match &cfg.paths.moral_lexicon {
            Some(p) => crate::affect::MoralLexicon::load(p)?,
            None => crate::affect::MoralLexicon::bundled_test(),
        },
        &cfg.text_resources()?,
    )?;
    synth::write_outputs(&corpus, &truth, &dir)?;
    let p = dir.join("spec.toml");
    fs::write(&p, spec.to_toml()).map_err(io_at(&p))?;

    let mut run = RunSummary::new(Command::Synth, spec.seed);
    run.note("posts", corpus.len());
    run.note("outlet_posts", corpus.outlet_tweets().count());
    run.note("factors", truth.h0.len());
    run.write(&dir)?;
    Ok(run)
}

/// Corpus summary, conversation sizes per outlet and the prevalence series.
pub fn cmd_report(cfg: &PipelineConfig) -> Result<RunSummary> {
    let corpus = load(cfg)?;
    let dir = stage_dir(cfg, "report")?;
    let mut run = RunSummary::new(Command::Report, cfg.seed);

    let conv = build_conversations(&corpus, &outlet_roots(&corpus))?;
    let sizes = avg_conversation_size(&conv.trees);
    write_file(&dir.join("conversations.csv"), |w| write_conversation_summary(w, &sizes))?;
    let series = outlet_prevalence(&corpus, cfg)?;
    write_file(&dir.join("prevalence.csv"), |w| prevalence::write_prevalence_csv(w, &series))?;

    let outlets: std::collections::BTreeSet<&str> = corpus.outlet_tweets().filter_map(|t| t.outlet.as_deref()).collect();
    let replies = corpus.tweets().iter().filter(|t| t.reply_to.is_some()).count();
    let outlet_posts = corpus.outlet_tweets().count();
    let facts: Vec<(&str, String)> = vec![
        ("posts", corpus.len().to_string()),
        ("outlet_posts", outlet_posts.to_string()),
        ("user_posts", corpus.tweets().iter().filter(|t| !t.is_outlet() && t.reply_to.is_none()).count().to_string()),
        ("replies", replies.to_string()),
        ("outlets", outlets.len().to_string()),
        ("days", corpus.span_days().to_string()),
        ("hashtags", hashtag_stats(&corpus).len().to_string()),
        ("conversations", conv.trees.len().to_string()),
        ("dangling_replies", conv.dangling.len().to_string()),
        ("cyclic_replies", conv.cyclic.len().to_string()),
        ("prevalence_windows", series.len().to_string()),
    ];
    write_file(&dir.join("summary.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["metric", "value"])?;
        for (k, v) in &facts {
            c.write_record([*k, v.as_str()])?;
        }
        c.flush().map_err(|e| Error::data(e.to_string()))
    })?;
    for (k, v) in facts {
        run.note(k, v);
    }
    run.write(&dir)?;
    Ok(run)
}
