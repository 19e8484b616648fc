//! Text normalisation, tokenisation and bag-of-words vocabularies.
//!
//! Pipeline applied by [`preprocess`]: URLs and user mentions are removed,
//! hashtag markers are stripped (or whole hashtags dropped, see
//! [`HashtagPolicy`]), every codepoint that is not a letter or digit becomes
//! a separator, tokens are lowercased, stopwords are removed on the surface
//! form and the survivors are lemmatised by dictionary lookup.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;

use crate::error::{Error, Result};

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S*").unwrap());
static MENTION_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@\w+").unwrap());
static HASHTAG_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#\w+").unwrap());
static SENTENCE_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[.!?;]+").unwrap());

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");
const DEFAULT_LEMMAS: &str = include_str!("../data/lemmas_en.tsv");

/// Stopword list and lemma dictionary.
#[derive(Debug, Clone, Default)]
pub struct TextResources {
    stopwords: HashSet<String>,
    lemmas: HashMap<String, String>,
}

impl TextResources {
    pub fn new(
        stopwords: impl IntoIterator<Item = String>,
        lemmas: impl IntoIterator<Item = (String, String)>,
    ) -> Self {
        TextResources {
            stopwords: stopwords.into_iter().map(|s| s.to_lowercase()).collect(),
            lemmas: lemmas
                .into_iter()
                .map(|(s, l)| (s.to_lowercase(), l.to_lowercase()))
                .collect(),
        }
    }

    /// The English stopword list and lemma table shipped with the crate.
    pub fn english() -> Self {
        let stop = parse_stopwords(DEFAULT_STOPWORDS);
        let lemmas = parse_lemmas(DEFAULT_LEMMAS).expect("bundled lemma table is well formed");
        TextResources::new(stop, lemmas)
    }

    pub fn load(stopwords: &Path, lemmas: &Path) -> Result<Self> {
        let stop = fs::read_to_string(stopwords).map_err(|e| Error::io(stopwords, e))?;
        let lem = fs::read_to_string(lemmas).map_err(|e| Error::io(lemmas, e))?;
        let lem = parse_lemmas(&lem).map_err(|e| Error::data(format!("{}: {e}", lemmas.display())))?;
        Ok(TextResources::new(parse_stopwords(&stop), lem))
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(word)
    }

    /// Dictionary lemma, falling back to the word itself.
    pub fn lemma<'a>(&'a self, word: &'a str) -> &'a str {
        self.lemmas.get(word).map(String::as_str).unwrap_or(word)
    }
}

fn parse_stopwords(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

fn parse_lemmas(text: &str) -> std::result::Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(s), Some(l), None) if !s.is_empty() && !l.is_empty() => {
                out.push((s.trim().to_string(), l.trim().to_string()))
            }
            _ => return Err(format!("line {}: expected surface<TAB>lemma", i + 1)),
        }
    }
    Ok(out)
}

/// How `#tag` tokens are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HashtagPolicy {
    /// Drop the marker and keep the tag body as a word.
    #[default]
    KeepBody,
    /// Remove hashtags entirely.
    Drop,
}

/// A preprocessed document: lowercase lemmas with stopwords removed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenizedDoc {
    pub tokens: Vec<String>,
}

impl TokenizedDoc {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenizedDoc { tokens }
    }

    /// Number of non-stopword tokens, the denominator of every per-token average.
    pub fn n_nonstop(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

pub fn preprocess(text: &str, res: &TextResources) -> TokenizedDoc {
    preprocess_with(text, res, HashtagPolicy::KeepBody)
}

pub fn preprocess_with(text: &str, res: &TextResources, hashtags: HashtagPolicy) -> TokenizedDoc {
    let text = URL_RE.replace_all(text, " ");
    let text = MENTION_RE.replace_all(&text, " ");
    let text = match hashtags {
        HashtagPolicy::KeepBody => text,
        HashtagPolicy::Drop => HASHTAG_RE.replace_all(&text, " ").into_owned().into(),
    };
    let cleaned: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    let tokens = cleaned
        .split_whitespace()
        .map(str::to_lowercase)
        .filter(|w| !res.is_stopword(w))
        .map(|w| res.lemma(&w).to_string())
        .collect();
    TokenizedDoc { tokens }
}

/// Splits raw text into sentences after removing URLs.
pub fn split_sentences(text: &str) -> Vec<String> {
    let text = URL_RE.replace_all(text, " ");
    SENTENCE_RE
        .split(&text)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

/// Frequency-thresholded lemma vocabulary with dense indices.
#[derive(Debug, Clone, PartialEq)]
pub struct BowVocab {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    pub train_min: usize,
    pub rest_min: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VocabStats {
    pub total_tokens: usize,
    pub retained_tokens: usize,
    pub unique_lemmas: usize,
    /// Share of all tokens (train and rest) whose lemma is in the vocabulary.
    pub retained_volume: f64,
    /// Vocabulary size over the number of distinct lemmas.
    pub unique_fraction: f64,
}

fn count_lemmas<'a>(docs: impl IntoIterator<Item = &'a TokenizedDoc>) -> HashMap<&'a str, usize> {
    let mut counts = HashMap::new();
    for d in docs {
        for t in &d.tokens {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    counts
}

/// Keeps lemmas occurring at least `train_min` times in `train` and at least
/// `rest_min` times in `rest`. Indices follow lexicographic order.
pub fn build_vocab(
    train: &[TokenizedDoc],
    rest: &[TokenizedDoc],
    train_min: usize,
    rest_min: usize,
) -> Result<(BowVocab, VocabStats)> {
    if train.is_empty() || rest.is_empty() {
        return Err(Error::data("vocabulary needs nonempty train and rest collections"));
    }
    let train_counts = count_lemmas(train);
    let rest_counts = count_lemmas(rest);
    let mut terms: Vec<String> = train_counts
        .iter()
        .filter(|(lemma, &c)| c >= train_min && rest_counts.get(*lemma).copied().unwrap_or(0) >= rest_min)
        .map(|(lemma, _)| lemma.to_string())
        .collect();
    if terms.is_empty() {
        return Err(Error::data(format!(
            "empty vocabulary with thresholds train>={train_min}, rest>={rest_min}"
        )));
    }
    terms.sort();
    let vocab = BowVocab::from_terms(terms, train_min, rest_min);

    let mut unique: HashSet<&str> = train_counts.keys().copied().collect();
    unique.extend(rest_counts.keys().copied());
    let total_tokens: usize = train_counts.values().chain(rest_counts.values()).sum();
    let retained_tokens: usize = vocab
        .terms
        .iter()
        .map(|t| train_counts[t.as_str()] + rest_counts[t.as_str()])
        .sum();
    let stats = VocabStats {
        total_tokens,
        retained_tokens,
        unique_lemmas: unique.len(),
        retained_volume: retained_tokens as f64 / total_tokens as f64,
        unique_fraction: vocab.len() as f64 / unique.len() as f64,
    };
    Ok((vocab, stats))
}

impl BowVocab {
    pub fn from_terms(terms: Vec<String>, train_min: usize, rest_min: usize) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        BowVocab {
            terms,
            index,
            train_min,
            rest_min,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, lemma: &str) -> Option<usize> {
        self.index.get(lemma).copied()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// Writes `lemma<TAB>index` lines after a `#` header with the thresholds.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# train_min={} rest_min={}", self.train_min, self.rest_min)?;
        for (i, t) in self.terms.iter().enumerate() {
            writeln!(out, "{t}\t{i}")?;
        }
        Ok(())
    }

    pub fn read_tsv(text: &str) -> Result<Self> {
        let mut train_min = 0;
        let mut rest_min = 0;
        let mut entries = BTreeMap::new();
        for (ln, line) in text.lines().enumerate() {
            if let Some(header) = line.strip_prefix('#') {
                for kv in header.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("train_min", v)) => train_min = v.parse().unwrap_or(0),
                        Some(("rest_min", v)) => rest_min = v.parse().unwrap_or(0),
                        _ => {}
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (lemma, idx) = line
                .split_once('\t')
                .and_then(|(l, i)| i.trim().parse::<usize>().ok().map(|i| (l, i)))
                .ok_or_else(|| Error::data(format!("vocab line {}: expected lemma<TAB>index", ln + 1)))?;
            entries.insert(idx, lemma.to_string());
        }
        if entries.keys().copied().ne(0..entries.len()) {
            return Err(Error::data("vocab indices are not dense 0..V-1"));
        }
        Ok(BowVocab::from_terms(entries.into_values().collect(), train_min, rest_min))
    }
}

/// Sparse term-frequency vector: `(index, count)` pairs sorted by index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SparseBow(pub Vec<(usize, u32)>);

impl SparseBow {
    pub fn l1(&self) -> u64 {
        self.0.iter().map(|&(_, c)| c as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn to_bow(doc: &TokenizedDoc, vocab: &BowVocab) -> SparseBow {
    let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
    for t in &doc.tokens {
        if let Some(i) = vocab.index_of(t) {
            *counts.entry(i).or_insert(0) += 1;
        }
    }
    SparseBow(counts.into_iter().collect())
}
