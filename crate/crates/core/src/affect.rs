//! Lexicon scoring of emotions, sentiment and moral foundations.
//!
//! Emotions are scored as the share of non-stopword tokens listed under each
//! emotion. Sentiment is the mean token valence (unlisted tokens count as 0).
//! Each moral foundation gets the mean 1..9 score of the tokens listed for it
//! (5 when none is present), which is then split into one-sided virtue and
//! vice intensities: `virtue = (m - 5) / 5` above the neutral point,
//! `vice = (5 - m) / 5` below it. Both lie in `[0, 0.8]` for `m` in `[1, 9]`.
//!
//! Repeated tokens count with multiplicity everywhere.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{ConversationTree, Corpus, TweetRecord};
use crate::error::{Error, Result};
use crate::textprep::{preprocess, split_sentences, TextResources, TokenizedDoc};

const TEST_EMOTIONS: &str = include_str!("../data/emotion_test.tsv");
const TEST_MORALS: &str = include_str!("../data/moral_test.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Emotion {
    Anger,
    Anticipation,
    Disgust,
    Fear,
    Joy,
    Sadness,
    Surprise,
    Trust,
}

impl Emotion {
    pub const ALL: [Emotion; 8] = [
        Emotion::Anger,
        Emotion::Anticipation,
        Emotion::Disgust,
        Emotion::Fear,
        Emotion::Joy,
        Emotion::Sadness,
        Emotion::Surprise,
        Emotion::Trust,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Anger => "anger",
            Emotion::Anticipation => "anticipation",
            Emotion::Disgust => "disgust",
            Emotion::Fear => "fear",
            Emotion::Joy => "joy",
            Emotion::Sadness => "sadness",
            Emotion::Surprise => "surprise",
            Emotion::Trust => "trust",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Emotion::ALL.into_iter().find(|e| e.name() == name)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Moral foundation; the virtue pole names the foundation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Foundation {
    Care,
    Fairness,
    Loyalty,
    Authority,
    Purity,
}

impl Foundation {
    pub const ALL: [Foundation; 5] = [
        Foundation::Care,
        Foundation::Fairness,
        Foundation::Loyalty,
        Foundation::Authority,
        Foundation::Purity,
    ];

    pub fn virtue_name(self) -> &'static str {
        match self {
            Foundation::Care => "care",
            Foundation::Fairness => "fairness",
            Foundation::Loyalty => "loyalty",
            Foundation::Authority => "authority",
            Foundation::Purity => "purity",
        }
    }

    pub fn vice_name(self) -> &'static str {
        match self {
            Foundation::Care => "harm",
            Foundation::Fairness => "cheating",
            Foundation::Loyalty => "betrayal",
            Foundation::Authority => "subversion",
            Foundation::Purity => "degradation",
        }
    }

    /// Accepts `care`, `care/harm`, `harm` and similar spellings.
    pub fn from_name(name: &str) -> Option<Self> {
        let head = name.split('/').next().unwrap_or(name);
        Foundation::ALL
            .into_iter()
            .find(|f| f.virtue_name() == head || f.vice_name() == head)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Column names of the 18-dimensional affect space: eight emotions, five
/// virtues, five vices.
pub const AFFECT_DIMS: [&str; 18] = [
    "anger",
    "anticipation",
    "disgust",
    "fear",
    "joy",
    "sadness",
    "surprise",
    "trust",
    "care",
    "fairness",
    "loyalty",
    "authority",
    "purity",
    "harm",
    "cheating",
    "betrayal",
    "subversion",
    "degradation",
];

pub const NEUTRAL_MORAL: f64 = 5.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct EmotionEntry {
    mask: u8,
    valence: i8,
}

/// Emotion membership sets and ±1 valences.
#[derive(Debug, Clone, Default)]
pub struct EmotionLexicon {
    entries: HashMap<String, EmotionEntry>,
}

impl EmotionLexicon {
    /// Parses `lemma<TAB>emotion<TAB>1` and `lemma<TAB>valence<TAB>±1` rows.
    /// The native `positive`/`negative` association rows are accepted too.
    /// Rows with a 0 value are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: HashMap<String, EmotionEntry> = HashMap::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::data(format!("emotion lexicon line {}: {line:?}", ln + 1));
            let mut parts = line.split('\t');
            let (word, key, value) = match (parts.next(), parts.next(), parts.next()) {
                (Some(w), Some(k), Some(v)) => (w.trim().to_lowercase(), k.trim(), v.trim()),
                _ => return Err(bad()),
            };
            let value: i32 = value.trim_start_matches('+').parse().map_err(|_| bad())?;
            if value == 0 {
                continue;
            }
            let entry = entries.entry(word).or_default();
            match key {
                "valence" | "sentiment" => {
                    if value.abs() != 1 {
                        return Err(bad());
                    }
                    entry.valence = value as i8;
                }
                "positive" => entry.valence = 1,
                "negative" => entry.valence = -1,
                other => {
                    let e = Emotion::from_name(other).ok_or_else(bad)?;
                    if value != 1 {
                        return Err(bad());
                    }
                    entry.mask |= 1 << e.index();
                }
            }
        }
        Ok(EmotionLexicon { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// The small lexicon shipped for tests and synthetic corpora.
    pub fn bundled_test() -> Self {
        Self::parse(TEST_EMOTIONS).expect("bundled emotion lexicon is well formed")
    }

    pub fn contains(&self, word: &str, emotion: Emotion) -> bool {
        self.entries
            .get(word)
            .is_some_and(|e| e.mask & (1 << emotion.index()) != 0)
    }

    pub fn valence(&self, word: &str) -> i8 {
        self.entries.get(word).map_or(0, |e| e.valence)
    }

    /// Words listed under `emotion`, sorted.
    pub fn words_for(&self, emotion: Emotion) -> Vec<&str> {
        let mut w: Vec<&str> = self
            .entries
            .iter()
            .filter(|(_, e)| e.mask & (1 << emotion.index()) != 0)
            .map(|(w, _)| w.as_str())
            .collect();
        w.sort_unstable();
        w
    }

    /// Emotions a word belongs to.
    pub fn emotions_of(&self, word: &str) -> Vec<Emotion> {
        Emotion::ALL
            .into_iter()
            .filter(|&e| self.contains(word, e))
            .collect()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Per-foundation moral valence scores on the 1..9 scale.
#[derive(Debug, Clone, Default)]
pub struct MoralLexicon {
    entries: HashMap<String, [Option<f64>; 5]>,
}

impl MoralLexicon {
    /// Parses `lemma<TAB>foundation<TAB>score` rows.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: HashMap<String, [Option<f64>; 5]> = HashMap::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |why: &str| Error::data(format!("moral lexicon line {}: {why}: {line:?}", ln + 1));
            let mut parts = line.split('\t');
            let (word, found, score) = match (parts.next(), parts.next(), parts.next()) {
                (Some(w), Some(f), Some(s)) => (w.trim().to_lowercase(), f.trim(), s.trim()),
                _ => return Err(bad("expected three columns")),
            };
            let f = Foundation::from_name(found).ok_or_else(|| bad("unknown foundation"))?;
            let s: f64 = score.parse().map_err(|_| bad("score is not a number"))?;
            if !(1.0..=9.0).contains(&s) {
                return Err(bad("score outside [1, 9]"));
            }
            entries.entry(word).or_default()[f.index()] = Some(s);
        }
        Ok(MoralLexicon { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn bundled_test() -> Self {
        Self::parse(TEST_MORALS).expect("bundled moral lexicon is well formed")
    }

    pub fn score(&self, word: &str, foundation: Foundation) -> Option<f64> {
        self.entries.get(word).and_then(|s| s[foundation.index()])
    }

    /// `(word, score)` pairs for a foundation, sorted by word.
    pub fn words_for(&self, foundation: Foundation) -> Vec<(&str, f64)> {
        let mut w: Vec<(&str, f64)> = self
            .entries
            .iter()
            .filter_map(|(w, s)| s[foundation.index()].map(|v| (w.as_str(), v)))
            .collect();
        w.sort_by(|a, b| a.0.cmp(b.0));
        w
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Splits a foundation mean into `(virtue, vice)`.
pub fn virtue_vice(mean: f64) -> (f64, f64) {
    if mean > NEUTRAL_MORAL {
        ((mean - NEUTRAL_MORAL) / 5.0, 0.0)
    } else if mean < NEUTRAL_MORAL {
        (0.0, (NEUTRAL_MORAL - mean) / 5.0)
    } else {
        (0.0, 0.0)
    }
}

pub fn score_emotions(doc: &TokenizedDoc, lex: &EmotionLexicon) -> [f64; 8] {
    let mut counts = [0usize; 8];
    for t in &doc.tokens {
        if let Some(e) = lex.entries.get(t.as_str()) {
            for (i, c) in counts.iter_mut().enumerate() {
                if e.mask & (1 << i) != 0 {
                    *c += 1;
                }
            }
        }
    }
    let n = doc.n_nonstop();
    if n == 0 {
        return [0.0; 8];
    }
    counts.map(|c| c as f64 / n as f64)
}

pub fn score_sentiment(doc: &TokenizedDoc, lex: &EmotionLexicon) -> f64 {
    let n = doc.n_nonstop();
    if n == 0 {
        return 0.0;
    }
    let total: i64 = doc.tokens.iter().map(|t| lex.valence(t) as i64).sum();
    total as f64 / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoralScores {
    pub means: [f64; 5],
    pub virtue: [f64; 5],
    pub vice: [f64; 5],
}

impl MoralScores {
    pub fn from_means(means: [f64; 5]) -> Self {
        let mut virtue = [0.0; 5];
        let mut vice = [0.0; 5];
        for k in 0..5 {
            (virtue[k], vice[k]) = virtue_vice(means[k]);
        }
        MoralScores {
            means,
            virtue,
            vice,
        }
    }
}

pub fn score_morals(doc: &TokenizedDoc, lex: &MoralLexicon) -> MoralScores {
    let mut sums = [0.0f64; 5];
    let mut counts = [0usize; 5];
    for t in &doc.tokens {
        if let Some(scores) = lex.entries.get(t.as_str()) {
            for k in 0..5 {
                if let Some(s) = scores[k] {
                    sums[k] += s;
                    counts[k] += 1;
                }
            }
        }
    }
    let mut means = [NEUTRAL_MORAL; 5];
    for k in 0..5 {
        if counts[k] > 0 {
            means[k] = sums[k] / counts[k] as f64;
        }
    }
    MoralScores::from_means(means)
}

/// Emotion, sentiment and moral scores of one document.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffectVector {
    pub emotions: [f64; 8],
    pub moral_means: [f64; 5],
    pub virtue: [f64; 5],
    pub vice: [f64; 5],
    pub sentiment: f64,
}

impl AffectVector {
    pub fn neutral() -> Self {
        AffectVector {
            emotions: [0.0; 8],
            moral_means: [NEUTRAL_MORAL; 5],
            virtue: [0.0; 5],
            vice: [0.0; 5],
            sentiment: 0.0,
        }
    }

    /// Values in [`AFFECT_DIMS`] order.
    pub fn dims(&self) -> [f64; 18] {
        let mut out = [0.0; 18];
        out[..8].copy_from_slice(&self.emotions);
        out[8..13].copy_from_slice(&self.virtue);
        out[13..].copy_from_slice(&self.vice);
        out
    }

    pub fn score_doc(doc: &TokenizedDoc, emotions: &EmotionLexicon, morals: &MoralLexicon) -> Self {
        let m = score_morals(doc, morals);
        AffectVector {
            emotions: score_emotions(doc, emotions),
            moral_means: m.means,
            virtue: m.virtue,
            vice: m.vice,
            sentiment: score_sentiment(doc, emotions),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoringMode {
    /// Score the whole text as one document.
    #[default]
    Document,
    /// Average emotions, sentiment and foundation means over non-empty
    /// sentences, then split the averaged means into virtue and vice.
    SentenceMean,
}

impl fmt::Display for ScoringMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoringMode::Document => "document",
            ScoringMode::SentenceMean => "sentence",
        })
    }
}

/// Text resources plus lexicons.
#[derive(Debug, Clone)]
pub struct AffectScorer {
    pub text: TextResources,
    pub emotions: EmotionLexicon,
    pub morals: MoralLexicon,
    pub mode: ScoringMode,
}

impl AffectScorer {
    pub fn new(text: TextResources, emotions: EmotionLexicon, morals: MoralLexicon) -> Self {
        AffectScorer {
            text,
            emotions,
            morals,
            mode: ScoringMode::Document,
        }
    }

    /// English text resources with the bundled test lexicons.
    pub fn bundled_test() -> Self {
        Self::new(
            TextResources::english(),
            EmotionLexicon::bundled_test(),
            MoralLexicon::bundled_test(),
        )
    }

    pub fn with_mode(mut self, mode: ScoringMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn score_text(&self, text: &str) -> AffectVector {
        match self.mode {
            ScoringMode::Document => {
                AffectVector::score_doc(&preprocess(text, &self.text), &self.emotions, &self.morals)
            }
            ScoringMode::SentenceMean => self.score_sentences(text),
        }
    }

    fn score_sentences(&self, text: &str) -> AffectVector {
        let scored: Vec<AffectVector> = split_sentences(text)
            .iter()
            .map(|s| preprocess(s, &self.text))
            .filter(|d| !d.is_empty())
            .map(|d| AffectVector::score_doc(&d, &self.emotions, &self.morals))
            .collect();
        if scored.is_empty() {
            return AffectVector::neutral();
        }
        let n = scored.len() as f64;
        let mut emotions = [0.0; 8];
        let mut means = [0.0; 5];
        let mut sentiment = 0.0;
        for v in &scored {
            for i in 0..8 {
                emotions[i] += v.emotions[i];
            }
            for k in 0..5 {
                means[k] += v.moral_means[k];
            }
            sentiment += v.sentiment;
        }
        let m = MoralScores::from_means(means.map(|s| s / n));
        AffectVector {
            emotions: emotions.map(|s| s / n),
            moral_means: m.means,
            virtue: m.virtue,
            vice: m.vice,
            sentiment: sentiment / n,
        }
    }

    pub fn score_sentiment_text(&self, text: &str) -> f64 {
        score_sentiment(&preprocess(text, &self.text), &self.emotions)
    }

    /// Scores posts in parallel; output order follows input order.
    pub fn score_all(&self, tweets: &[TweetRecord]) -> Vec<AffectVector> {
        tweets.par_iter().map(|t| self.score_text(&t.text)).collect()
    }
}

/// Which replies count towards a conversation's sentiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReplyScope {
    #[default]
    WholeTree,
    DirectOnly,
}

/// Mean reply sentiment below the root; `None` for a tree without replies.
pub fn conversation_sentiment(
    tree: &ConversationTree,
    corpus: &Corpus,
    scorer: &AffectScorer,
    scope: ReplyScope,
) -> Option<f64> {
    let scores: Vec<f64> = tree
        .nodes()
        .filter(|n| scope == ReplyScope::WholeTree || n.depth == 1)
        .filter_map(|n| corpus.get(n.id))
        .map(|t| scorer.score_sentiment_text(&t.text))
        .collect();
    if scores.is_empty() {
        None
    } else {
        Some(scores.iter().sum::<f64>() / scores.len() as f64)
    }
}

/// Writes `id`, the 18 affect dimensions and `sentiment`.
pub fn write_affect_csv<'a, W: Write>(
    out: W,
    rows: impl IntoIterator<Item = (&'a str, &'a AffectVector)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id"];
    header.extend(AFFECT_DIMS);
    header.push("sentiment");
    w.write_record(&header)?;
    for (id, v) in rows {
        let mut rec = Vec::with_capacity(20);
        rec.push(id.to_string());
        rec.extend(v.dims().iter().map(|x| x.to_string()));
        rec.push(v.sentiment.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::data(e.to_string()))?;
    Ok(())
}
