//! TOML pipeline configuration. Every key is optional.
//!
//! ```toml
//! seed = 7
//! output = "out"
//!
//! [paths]
//! corpus = "corpus.jsonl"
//! merge_map = "merge.tsv"
//!
//! [themes]
//! min_authors = 5
//! k_max = 30
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::affect::{AffectScorer, EmotionLexicon, MoralLexicon, ReplyScope, ScoringMode};
use crate::engage::SuiteParams;
use crate::error::{Error, Result};
use crate::factors::NmfParams;
use crate::seeds;
use crate::textprep::{HashtagPolicy, TextResources};
use crate::themes::lasso::LassoParams;
use crate::themes::{ClassifierParams, ConsensusParams, EmbeddingParams, HashtagFilter};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output: PathBuf,
    pub paths: Paths,
    pub score: ScoreConfig,
    pub themes: ThemesConfig,
    pub factors: FactorsConfig,
    pub regress: RegressConfig,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            output: PathBuf::from("out"),
            paths: Paths::default(),
            score: ScoreConfig::default(),
            themes: ThemesConfig::default(),
            factors: FactorsConfig::default(),
            regress: RegressConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

/// Input files. Lexicons and text resources fall back to the bundled test
/// data when unset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub emotion_lexicon: Option<PathBuf>,
    pub moral_lexicon: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    /// May be missing on the first `themes` run.
    pub merge_map: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    #[default]
    Document,
    Sentence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScopeName {
    #[default]
    Tree,
    Direct,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreConfig {
    pub mode: ModeName,
    /// Replies averaged into conversation sentiment.
    pub reply_scope: ScopeName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThemesConfig {
    pub min_per_day: f64,
    pub min_authors: usize,
    pub embedding_dim: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub runs: usize,
    pub kmeans_iter: usize,
    pub pac_low: f64,
    pub pac_high: f64,
    pub vocab_train_min: usize,
    pub vocab_rest_min: usize,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub n_lambdas: usize,
    pub lambda_ratio: f64,
    pub min_positives: usize,
    pub threshold: f64,
    /// Keep hashtag bodies as words of the classifier input.
    pub keep_hashtags: bool,
    /// Hashtags listed per cluster.
    pub listing_top: usize,
}

impl Default for ThemesConfig {
    fn default() -> Self {
        let f = HashtagFilter::default();
        let e = EmbeddingParams::default();
        let c = ConsensusParams::default();
        let k = ClassifierParams::default();
        ThemesConfig {
            min_per_day: f.min_per_day,
            min_authors: f.min_authors,
            embedding_dim: e.dim,
            negatives: e.negatives,
            epochs: e.epochs,
            learning_rate: e.learning_rate,
            k_min: c.k_min,
            k_max: c.k_max,
            runs: c.runs,
            kmeans_iter: c.max_iter,
            pac_low: c.pac_low,
            pac_high: c.pac_high,
            vocab_train_min: 500,
            vocab_rest_min: 1000,
            outer_folds: k.outer_folds,
            inner_folds: k.inner_folds,
            n_lambdas: k.n_lambdas,
            lambda_ratio: k.lambda_ratio,
            min_positives: k.min_positives,
            threshold: k.threshold,
            keep_hashtags: false,
            listing_top: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FactorsConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Fit on user posts as well as outlet posts.
    pub include_users: bool,
}

impl Default for FactorsConfig {
    fn default() -> Self {
        let p = NmfParams::default();
        FactorsConfig {
            k_min: 1,
            k_max: 18,
            max_iter: p.max_iter,
            tol: p.tol,
            include_users: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegressConfig {
    pub vif_threshold: f64,
    pub alpha: f64,
    pub quantile_offset: f64,
    pub min_excess_rows: usize,
    pub window_days: usize,
    pub per_area: bool,
}

impl Default for RegressConfig {
    fn default() -> Self {
        let s = SuiteParams::default();
        RegressConfig {
            vif_threshold: s.vif_threshold,
            alpha: s.alpha,
            quantile_offset: s.quantile_offset,
            min_excess_rows: s.min_excess_rows,
            window_days: 7,
            per_area: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    /// Generator spec; built-in defaults when unset.
    pub spec: Option<PathBuf>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

// stream ids for per-stage seeds
const EMBEDDING_STREAM: u64 = 0x656d_6264;
const CONSENSUS_STREAM: u64 = 0x636f_6e73;
const CLASSIFIER_STREAM: u64 = 0x636c_6173;
const NMF_STREAM: u64 = 0x6e6d_6621;

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    /// Loads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for slot in [
            &mut p.corpus,
            &mut p.emotion_lexicon,
            &mut p.moral_lexicon,
            &mut p.stopwords,
            &mut p.lemmas,
            &mut p.merge_map,
            &mut self.synth.spec,
        ] {
            resolve(base, slot);
        }
        if self.output.is_relative() {
            self.output = base.join(&self.output);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(out) = &o.output {
            self.output = out.clone();
        }
    }

    /// Checks that every referenced input exists. The merge map is exempt:
    /// its absence pauses the themes stage.
    pub fn validate(&self) -> Result<()> {
        self.validate_inputs(true)
    }

    /// As [`validate`](Self::validate), optionally skipping the corpus
    /// (which `synth` writes rather than reads).
    pub fn validate_inputs(&self, corpus: bool) -> Result<()> {
        let p = &self.paths;
        let corpus_path = if corpus { &p.corpus } else { &None };
        for (key, path) in [
            ("paths.corpus", corpus_path),
            ("paths.emotion_lexicon", &p.emotion_lexicon),
            ("paths.moral_lexicon", &p.moral_lexicon),
            ("paths.stopwords", &p.stopwords),
            ("paths.lemmas", &p.lemmas),
            ("synth.spec", &self.synth.spec),
        ] {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(Error::config(format!("{key}: {} does not exist", path.display())));
                }
            }
        }
        if p.stopwords.is_some() != p.lemmas.is_some() {
            return Err(Error::config("paths.stopwords and paths.lemmas must be given together"));
        }
        let t = &self.themes;
        if !(0.0..1.0).contains(&t.pac_low) || !(t.pac_low < t.pac_high && t.pac_high <= 1.0) {
            return Err(Error::config("themes: need 0 <= pac_low < pac_high <= 1"));
        }
        if self.regress.window_days == 0 {
            return Err(Error::config("regress.window_days must be positive"));
        }
        Ok(())
    }

    pub fn corpus_path(&self) -> Result<&Path> {
        self.paths
            .corpus
            .as_deref()
            .ok_or_else(|| Error::config("paths.corpus is required for this command"))
    }

    pub fn text_resources(&self) -> Result<TextResources> {
        match (&self.paths.stopwords, &self.paths.lemmas) {
            (Some(s), Some(l)) => TextResources::load(s, l),
            _ => Ok(TextResources::english()),
        }
    }

    pub fn scorer(&self) -> Result<AffectScorer> {
        let emotions = match &self.paths.emotion_lexicon {
            Some(p) => EmotionLexicon::load(p)?,
            None => {
                log::warn!("no emotion lexicon configured, using the bundled test lexicon");
                EmotionLexicon::bundled_test()
            }
        };
        let morals = match &self.paths.moral_lexicon {
            Some(p) => MoralLexicon::load(p)?,
            None => {
                log::warn!("no moral lexicon configured, using the bundled test lexicon");
                MoralLexicon::bundled_test()
            }
        };
        let mode = match self.score.mode {
            ModeName::Document => ScoringMode::Document,
            ModeName::Sentence => ScoringMode::SentenceMean,
        };
        Ok(AffectScorer::new(self.text_resources()?, emotions, morals).with_mode(mode))
    }

    pub fn reply_scope(&self) -> ReplyScope {
        match self.score.reply_scope {
            ScopeName::Tree => ReplyScope::WholeTree,
            ScopeName::Direct => ReplyScope::DirectOnly,
        }
    }

    pub fn hashtag_filter(&self) -> HashtagFilter {
        HashtagFilter {
            min_per_day: self.themes.min_per_day,
            min_authors: self.themes.min_authors,
        }
    }

    pub fn embedding_params(&self) -> EmbeddingParams {
        let t = &self.themes;
        EmbeddingParams {
            dim: t.embedding_dim,
            negatives: t.negatives,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            seed: seeds::derive(self.seed, EMBEDDING_STREAM, 0),
            ..EmbeddingParams::default()
        }
    }

    pub fn consensus_params(&self) -> ConsensusParams {
        let t = &self.themes;
        ConsensusParams {
            k_min: t.k_min,
            k_max: t.k_max,
            runs: t.runs,
            max_iter: t.kmeans_iter,
            pac_low: t.pac_low,
            pac_high: t.pac_high,
            seed: seeds::derive(self.seed, CONSENSUS_STREAM, 0),
        }
    }

    pub fn hashtag_policy(&self) -> HashtagPolicy {
        if self.themes.keep_hashtags {
            HashtagPolicy::KeepBody
        } else {
            HashtagPolicy::Drop
        }
    }

    pub fn classifier_params(&self) -> ClassifierParams {
        let t = &self.themes;
        ClassifierParams {
            outer_folds: t.outer_folds,
            inner_folds: t.inner_folds,
            n_lambdas: t.n_lambdas,
            lambda_ratio: t.lambda_ratio,
            min_positives: t.min_positives,
            threshold: t.threshold,
            hashtags: self.hashtag_policy(),
            lasso: LassoParams {
                tol: 1e-9,
                max_sweeps: 20_000,
            },
            seed: seeds::derive(self.seed, CLASSIFIER_STREAM, 0),
        }
    }

    pub fn nmf_params(&self) -> NmfParams {
        NmfParams {
            max_iter: self.factors.max_iter,
            tol: self.factors.tol,
            seed: seeds::derive(self.seed, NMF_STREAM, 0),
        }
    }

    pub fn suite_params(&self) -> SuiteParams {
        let r = &self.regress;
        SuiteParams {
            vif_threshold: r.vif_threshold,
            alpha: r.alpha,
            quantile_offset: r.quantile_offset,
            min_excess_rows: r.min_excess_rows,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let mut cfg = PipelineConfig::from_toml("seed = 3\n[themes]\nk_max = 12\n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.themes.k_max, 12);
        assert_eq!(cfg.themes.runs, 20);
        assert_eq!(cfg.factors.k_max, 18);
        cfg.apply(&Overrides {
            seed: Some(9),
            output: Some("x".into()),
        });
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.output, PathBuf::from("x"));
        assert!(PipelineConfig::from_toml("[themes]\nbogus = 1").is_err());
        assert!(PipelineConfig::from_toml("[score]\nmode = \"paragraph\"").is_err());
    }

    #[test]
    fn relative_paths_and_validation() {
        let mut cfg = PipelineConfig::from_toml("[paths]\ncorpus = \"c.jsonl\"\n").unwrap();
        cfg.resolve_paths(Path::new("/nonexistent/dir"));
        assert_eq!(cfg.paths.corpus.as_deref(), Some(Path::new("/nonexistent/dir/c.jsonl")));
        let e = cfg.validate().unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(PipelineConfig::default().validate().is_ok());
        assert_eq!(PipelineConfig::default().corpus_path().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn stage_seeds_differ() {
        let cfg = PipelineConfig::default();
        let seeds = [
            cfg.embedding_params().seed,
            cfg.consensus_params().seed,
            cfg.classifier_params().seed,
            cfg.nmf_params().seed,
        ];
        for i in 0..4 {
            for j in 0..i {
                assert_ne!(seeds[i], seeds[j]);
            }
        }
    }
}
