//! Planted-truth corpus generator.
//!
//! Every post draws convex factor loadings `w` and its text is sampled so
//! that its scored affect vector is close to `w · H0`. Outlet posts also get
//! engagement counts `round(exp(a + beta · x + sigma * eps))`, where `x` holds
//! the loadings and the standardised log follower count, and a reply tree
//! whose mean sentiment follows `tanh(a + beta · x + sigma * eps)`.
//! Hashtags come from per-area pools and never appear in the text.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affect::{Emotion, EmotionLexicon, Foundation, MoralLexicon, AFFECT_DIMS, NEUTRAL_MORAL};
use crate::corpus::{Corpus, TweetRecord, SECONDS_PER_DAY};
use crate::error::{Error, Result};
use crate::factors::AffectMatrix;
use crate::seeds;
use crate::textprep::TextResources;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutletSpec {
    pub name: String,
    pub followers: u64,
}

/// A latent factor as a sparse map from affect dimension to weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub name: String,
    pub composition: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaSpec {
    pub name: String,
    /// Probability that a post belongs to the area.
    pub prevalence: f64,
    pub tags: Vec<String>,
    pub lemmas: Vec<String>,
}

/// Coefficients of one engagement target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub intercept: f64,
    /// One coefficient per factor.
    pub factors: Vec<f64>,
    pub followers: f64,
}

impl LinkSpec {
    fn linear(&self, loadings: &[f64], z_followers: f64) -> f64 {
        self.intercept + crate::linalg::dot(&self.factors, loadings) + self.followers * z_followers
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngagementSpec {
    pub sigma: f64,
    pub likes: LinkSpec,
    pub retweets: LinkSpec,
    pub replies: LinkSpec,
    pub quotes: LinkSpec,
    pub sentiment: LinkSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_tweets: usize,
    pub outlet_fraction: f64,
    pub reply_fraction: f64,
    /// Probability that a reply answers another reply instead of the root.
    pub chain_fraction: f64,
    pub n_users: usize,
    /// UTC seconds of the first day.
    pub start: i64,
    pub n_days: usize,
    /// Non-stopword tokens per post.
    pub tokens_per_tweet: usize,
    /// Moral tokens per foundation with a nonzero target.
    pub moral_tokens: usize,
    /// Area lemmas per area of the post.
    pub area_tokens: usize,
    pub reply_tokens: usize,
    /// Fraction of reply tokens carrying a valence.
    pub valence_rate: f64,
    pub article_fraction: f64,
    pub article_tokens: usize,
    /// Dirichlet concentration of the loadings; small values make one
    /// factor dominate each post.
    pub concentration: f64,
    /// Probability that a user post in some area carries hashtags.
    pub user_tag_rate: f64,
    pub outlet_tag_rate: f64,
    pub outlets: Vec<OutletSpec>,
    pub factors: Vec<FactorSpec>,
    pub areas: Vec<AreaSpec>,
    pub engagement: EngagementSpec,
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn factor(name: &str, dims: &[(&str, f64)]) -> FactorSpec {
    FactorSpec {
        name: name.into(),
        composition: dims.iter().map(|(d, v)| (d.to_string(), *v)).collect(),
    }
}

fn area(name: &str, prevalence: f64, tags: &[&str], lemmas: &[&str]) -> AreaSpec {
    AreaSpec {
        name: name.into(),
        prevalence,
        tags: strings(tags),
        lemmas: strings(lemmas),
    }
}

fn link(intercept: f64, factors: &[f64], followers: f64) -> LinkSpec {
    LinkSpec {
        intercept,
        factors: factors.to_vec(),
        followers,
    }
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            n_tweets: 20_000,
            outlet_fraction: 0.3,
            reply_fraction: 0.3,
            chain_fraction: 0.3,
            n_users: 1500,
            start: 1_577_836_800,
            n_days: 30,
            tokens_per_tweet: 60,
            moral_tokens: 4,
            area_tokens: 3,
            reply_tokens: 20,
            valence_rate: 0.5,
            article_fraction: 0.6,
            article_tokens: 150,
            concentration: 0.15,
            user_tag_rate: 0.8,
            outlet_tag_rate: 0.3,
            outlets: vec![
                OutletSpec { name: "dailywire".into(), followers: 1_200_000 },
                OutletSpec { name: "globeherald".into(), followers: 4_500_000 },
                OutletSpec { name: "metrotimes".into(), followers: 9_000_000 },
                OutletSpec { name: "worldpost".into(), followers: 18_000_000 },
                OutletSpec { name: "newsnetwork".into(), followers: 45_000_000 },
            ],
            factors: vec![
                factor("unrest", &[("anger", 0.15), ("disgust", 0.1), ("fear", 0.05), ("harm", 0.55)]),
                factor("novelty", &[("surprise", 0.2), ("anticipation", 0.05), ("fairness", 0.55)]),
                factor(
                    "trust",
                    &[("trust", 0.12), ("joy", 0.1), ("anticipation", 0.05), ("loyalty", 0.4), ("authority", 0.4)],
                ),
                factor("gloom", &[("sadness", 0.15), ("fear", 0.08), ("degradation", 0.55)]),
            ],
            areas: vec![
                area(
                    "covid",
                    0.3,
                    &[
                        "covid19", "coronavirus", "pandemic", "stayhome", "vaccine", "lockdown", "covid", "masks",
                        "socialdistancing", "flattenthecurve", "quarantine", "wearamask", "staysafe", "publichealth",
                        "covidvaccine", "sarscov2", "testing", "healthcare", "icu", "frontline",
                    ],
                    &["virus", "vaccine", "pandemic", "lockdown", "mask", "quarantine", "outbreak", "hospital"],
                ),
                area(
                    "politics",
                    0.3,
                    &[
                        "politics", "congress", "senate", "whitehouse", "vote", "election2020", "trump", "biden",
                        "democrats", "gop", "campaign", "debate", "impeachment", "supremecourt", "midterms",
                        "capitol", "ballot", "governor", "policy", "primaries",
                    ],
                    &["senate", "congress", "president", "ballot", "campaign", "governor", "policy", "lawmaker"],
                ),
                area(
                    "blm",
                    0.12,
                    &[
                        "blacklivesmatter", "blm", "georgefloyd", "protests", "policereform", "justiceforgeorgefloyd",
                        "icantbreathe", "racism", "civilrights", "equality", "policebrutality", "defundthepolice",
                        "protest", "sayhername", "justice", "juneteenth", "solidarity", "blackouttuesday",
                    ],
                    &["protest", "floyd", "police", "racism", "march", "activist", "rally", "civil"],
                ),
                area(
                    "climate",
                    0.12,
                    &[
                        "climatechange", "climate", "globalwarming", "climatecrisis", "environment", "climateaction",
                        "sustainability", "renewables", "cleanenergy", "wildfires", "emissions", "netzero",
                        "fridaysforfuture", "greennewdeal", "earthday", "biodiversity", "carbon", "parisagreement",
                    ],
                    &["climate", "carbon", "emission", "warming", "wildfire", "glacier", "drought", "renewable"],
                ),
                area(
                    "entertainment",
                    0.12,
                    &[
                        "entertainment", "movies", "music", "oscars", "hollywood", "netflix", "grammys", "tv",
                        "celebrity", "film", "concert", "album", "streaming", "boxoffice", "emmys", "premiere",
                        "trailer", "popculture",
                    ],
                    &["movie", "album", "concert", "celebrity", "oscar", "premiere", "singer", "actor"],
                ),
            ],
            engagement: EngagementSpec {
                sigma: 0.5,
                likes: link(3.0, &[1.0, -0.5, 0.8, -1.0], 0.6),
                retweets: link(2.0, &[1.2, 0.5, 0.3, -0.8], 0.5),
                replies: link(1.5, &[1.5, 0.8, -0.3, -1.0], 0.4),
                quotes: link(0.5, &[1.0, 0.6, 0.2, -0.6], 0.3),
                sentiment: link(0.0, &[-1.2, 0.0, 1.2, -0.8], 0.0),
            },
        }
    }
}

/// Word pools derived from the lexicons and validated against the stopwords.
struct Pools {
    emotion: Vec<Vec<String>>,
    /// Per foundation, words by integer score 1..=9 (index 0 unused).
    moral: Vec<Vec<Vec<String>>>,
    positive: Vec<String>,
    negative: Vec<String>,
    filler: Vec<String>,
}

impl Pools {
    fn new(emotions: &EmotionLexicon, morals: &MoralLexicon, text: &TextResources, reserved: &HashSet<&str>) -> Result<Self> {
        let usable = |w: &str| !text.is_stopword(w) && text.lemma(w) == w && !reserved.contains(w);
        let moral_words: HashSet<&str> = morals.words().collect();
        let mut emotion = Vec::new();
        for e in Emotion::ALL {
            let mut pool: Vec<String> = emotions
                .words_for(e)
                .into_iter()
                .filter(|w| emotions.emotions_of(w).len() == 1 && !moral_words.contains(w) && usable(w))
                .map(String::from)
                .collect();
            pool.sort();
            emotion.push(pool);
        }
        let mut moral = Vec::new();
        for f in Foundation::ALL {
            let mut by_score = vec![Vec::new(); 10];
            for (w, s) in morals.words_for(f) {
                let in_other = Foundation::ALL.iter().any(|&g| g != f && morals.score(w, g).is_some());
                if s.fract() == 0.0 && s != NEUTRAL_MORAL && !in_other && emotions.emotions_of(w).is_empty() && emotions.valence(w) == 0 && usable(w) {
                    by_score[s as usize].push(w.to_string());
                }
            }
            for p in &mut by_score {
                p.sort();
            }
            moral.push(by_score);
        }
        let mut positive = Vec::new();
        let mut negative = Vec::new();
        for w in emotions.words() {
            if emotions.emotions_of(w).is_empty() && !moral_words.contains(w) && usable(w) {
                match emotions.valence(w) {
                    1 => positive.push(w.to_string()),
                    -1 => negative.push(w.to_string()),
                    _ => {}
                }
            }
        }
        positive.sort();
        negative.sort();
        let filler: Vec<String> = (0..400)
            .map(|i| format!("zq{}{}", (b'a' + (i / 26) as u8) as char, (b'a' + (i % 26) as u8) as char))
            .filter(|w| usable(w) && !moral_words.contains(w.as_str()) && emotions.emotions_of(w).is_empty() && emotions.valence(w) == 0)
            .collect();
        if positive.is_empty() || negative.is_empty() {
            return Err(Error::data("emotion lexicon has no valence-only words for replies"));
        }
        Ok(Pools {
            emotion,
            moral,
            positive,
            negative,
            filler,
        })
    }
}

/// Integer moral scores (never 5) of `n` tokens whose mean is closest to `target`.
fn moral_scores(target: f64, n: usize) -> Vec<u8> {
    let sum = ((target * n as f64).round() as usize).clamp(n, 9 * n);
    if sum == 5 * n {
        return Vec::new();
    }
    let base = sum / n;
    let extra = sum % n;
    let mut s: Vec<u8> = (0..n).map(|i| (base + usize::from(i < extra)) as u8).collect();
    let fives: Vec<usize> = (0..n).filter(|&i| s[i] == 5).collect();
    for pair in fives.chunks(2) {
        if let [a, b] = *pair {
            s[a] = 4;
            s[b] = 6;
        } else {
            let five = pair[0];
            let j = (0..n).find(|&j| s[j] != 5).expect("sum differs from 5n");
            if s[j] == 6 {
                s[j] = 7;
                s[five] = 4;
            } else {
                s[j] -= 1;
                s[five] = 6;
            }
        }
    }
    s
}

/// Ground truth that the pipeline never reads.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTruth {
    pub factor_names: Vec<String>,
    /// K × 18 planted compositions.
    pub h0: Vec<[f64; 18]>,
    pub rows: Vec<TruthRow>,
    pub engagement: EngagementSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthRow {
    pub id: String,
    pub kind: PostKind,
    pub loadings: Vec<f64>,
    pub areas: Vec<String>,
    /// Planted mean reply sentiment for outlet posts.
    pub sentiment: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostKind {
    Outlet,
    User,
    Reply,
}

impl PostKind {
    fn name(self) -> &'static str {
        match self {
            PostKind::Outlet => "outlet",
            PostKind::User => "user",
            PostKind::Reply => "reply",
        }
    }
}

impl SynthTruth {
    /// Intended affect vector `w · H0` of a post.
    pub fn intended(&self, loadings: &[f64]) -> [f64; 18] {
        intended(&self.h0, loadings)
    }

    /// Writes `truth.csv`, `h0.csv` and `beta.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let k = self.h0.len();
        let file = |name: &str| {
            let p = dir.join(name);
            fs::File::create(&p).map_err(|e| Error::io(p, e))
        };

        let mut w = csv::Writer::from_writer(file("truth.csv")?);
        let mut header = vec!["id".to_string(), "kind".to_string()];
        header.extend((1..=k).map(|c| format!("w{c}")));
        header.push("areas".into());
        header.push("sentiment".into());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.id.clone(), r.kind.name().to_string()];
            rec.extend(r.loadings.iter().map(|v| v.to_string()));
            rec.push(r.areas.join(";"));
            rec.push(r.sentiment.map(|s| s.to_string()).unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(dir, e))?;

        let mut w = csv::Writer::from_writer(file("h0.csv")?);
        w.write_record(std::iter::once("dimension".to_string()).chain(self.factor_names.iter().cloned()))?;
        for (j, d) in AFFECT_DIMS.iter().enumerate() {
            w.write_record(std::iter::once(d.to_string()).chain(self.h0.iter().map(|row| row[j].to_string())))?;
        }
        w.flush().map_err(|e| Error::io(dir, e))?;

        let mut w = csv::Writer::from_writer(file("beta.csv")?);
        let mut header = vec!["target".to_string(), "intercept".to_string()];
        header.extend(self.factor_names.iter().cloned());
        header.push("followers".into());
        header.push("sigma".into());
        w.write_record(&header)?;
        let e = &self.engagement;
        for (name, l) in [
            ("likes", &e.likes),
            ("retweets", &e.retweets),
            ("replies", &e.replies),
            ("quotes", &e.quotes),
            ("sentiment", &e.sentiment),
        ] {
            let mut rec = vec![name.to_string(), l.intercept.to_string()];
            rec.extend(l.factors.iter().map(|v| v.to_string()));
            rec.push(l.followers.to_string());
            rec.push(e.sigma.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(dir, e))?;
        Ok(())
    }
}

fn intended(h0: &[[f64; 18]], loadings: &[f64]) -> [f64; 18] {
    let mut out = [0.0; 18];
    for (w, row) in loadings.iter().zip(h0) {
        for j in 0..18 {
            out[j] += w * row[j];
        }
    }
    out
}

/// `round(exp(eta))` clamped to the `u64` range.
pub fn engagement_count(eta: f64) -> u64 {
    let v = eta.exp().round();
    if v >= u64::MAX as f64 {
        u64::MAX
    } else {
        v as u64
    }
}

/// Convex weights from a symmetric Dirichlet.
fn dirichlet(k: usize, alpha: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let g = Gamma::new(alpha, 1.0).expect("alpha > 0");
    loop {
        let v: Vec<f64> = (0..k).map(|_| g.sample(rng)).collect();
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            return v.into_iter().map(|x| x / s).collect();
        }
    }
}

struct PlannedPost {
    kind: PostKind,
    author: String,
    outlet: Option<usize>,
    timestamp: i64,
    loadings: Vec<f64>,
    areas: Vec<usize>,
    reply_to: Option<usize>,
    /// Index of the outlet post at the root of the reply chain.
    root: Option<usize>,
}

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("synthetic spec: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serialises")
    }

    /// Planted compositions in factor order.
    pub fn h0(&self) -> Result<Vec<[f64; 18]>> {
        self.factors
            .iter()
            .map(|f| {
                let mut row = [0.0; 18];
                for (dim, &v) in &f.composition {
                    let j = AFFECT_DIMS
                        .iter()
                        .position(|d| d == dim)
                        .ok_or_else(|| Error::config(format!("factor {}: unknown dimension {dim}", f.name)))?;
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(Error::config(format!("factor {}: weight of {dim} must be >= 0", f.name)));
                    }
                    row[j] = v;
                }
                Ok(row)
            })
            .collect()
    }

    fn validate(&self, h0: &[[f64; 18]]) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        if self.n_tweets == 0 || self.n_users == 0 || self.n_days == 0 || self.outlets.is_empty() {
            return bad("n_tweets, n_users, n_days and outlets must be nonzero".into());
        }
        if h0.is_empty() {
            return bad("at least one factor is required".into());
        }
        for (name, v) in [
            ("outlet_fraction", self.outlet_fraction),
            ("reply_fraction", self.reply_fraction),
            ("chain_fraction", self.chain_fraction),
            ("valence_rate", self.valence_rate),
            ("article_fraction", self.article_fraction),
            ("user_tag_rate", self.user_tag_rate),
            ("outlet_tag_rate", self.outlet_tag_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.outlet_fraction + self.reply_fraction > 1.0 || (self.reply_fraction > 0.0 && self.outlet_fraction == 0.0) {
            return bad("outlet_fraction + reply_fraction must be <= 1 and replies need outlet posts".into());
        }
        if self.concentration <= 0.0 || !(self.engagement.sigma >= 0.0) {
            return bad("concentration must be > 0 and sigma >= 0".into());
        }
        let k = h0.len();
        let e = &self.engagement;
        for (name, l) in [("likes", &e.likes), ("retweets", &e.retweets), ("replies", &e.replies), ("quotes", &e.quotes), ("sentiment", &e.sentiment)] {
            if l.factors.len() != k {
                return bad(format!("engagement.{name} needs {k} factor coefficients"));
            }
        }
        for a in &self.areas {
            if !(0.0..=1.0).contains(&a.prevalence) || a.tags.is_empty() || a.lemmas.is_empty() {
                return bad(format!("area {}: prevalence in [0, 1] and nonempty tags and lemmas required", a.name));
            }
        }
        for f in 0..5 {
            let virtue = h0.iter().any(|r| r[8 + f] > 0.0);
            let vice = h0.iter().any(|r| r[13 + f] > 0.0);
            if virtue && vice {
                return bad(format!("{} has both virtue and vice weight; a post can only express one", Foundation::ALL[f].virtue_name()));
            }
            if h0.iter().any(|r| r[8 + f] > 0.8 || r[13 + f] > 0.8) {
                return bad("virtue and vice weights cannot exceed 0.8".into());
            }
        }
        let l = self.tokens_per_tweet;
        let reserved = 5 * self.moral_tokens + self.area_tokens * self.areas.len();
        if l <= reserved {
            return bad(format!("tokens_per_tweet must exceed {reserved}"));
        }
        let budget = (l - reserved) as f64 / l as f64;
        for (f, row) in self.factors.iter().zip(h0) {
            let s: f64 = row[..8].iter().sum();
            if s > budget {
                return bad(format!(
                    "factor {}: emotion weights sum to {s} but at most {budget:.3} of the tokens are free",
                    f.name
                ));
            }
        }
        Ok(())
    }

    fn plan(&self) -> Vec<PlannedPost> {
        let k = self.factors.len();
        let n = self.n_tweets;
        let n_outlet = ((n as f64 * self.outlet_fraction).round() as usize).max(1).min(n);
        let n_reply = ((n as f64 * self.reply_fraction).round() as usize).min(n - n_outlet);
        let n_user = n - n_outlet - n_reply;
        let mut rng = seeds::rng(self.seed, 1, 0);
        let day = |rng: &mut ChaCha8Rng| self.start + rng.random_range(0..self.n_days as i64 * SECONDS_PER_DAY);
        let areas = |rng: &mut ChaCha8Rng| -> Vec<usize> {
            (0..self.areas.len()).filter(|&a| rng.random_bool(self.areas[a].prevalence)).collect()
        };
        let mut posts = Vec::with_capacity(n);
        for i in 0..n_outlet {
            let o = i % self.outlets.len();
            posts.push(PlannedPost {
                kind: PostKind::Outlet,
                author: self.outlets[o].name.clone(),
                outlet: Some(o),
                timestamp: day(&mut rng),
                loadings: dirichlet(k, self.concentration, &mut rng),
                areas: areas(&mut rng),
                reply_to: None,
                root: None,
            });
        }
        for _ in 0..n_user {
            posts.push(PlannedPost {
                kind: PostKind::User,
                author: format!("user{}", rng.random_range(0..self.n_users)),
                outlet: None,
                timestamp: day(&mut rng),
                loadings: dirichlet(k, self.concentration, &mut rng),
                areas: areas(&mut rng),
                reply_to: None,
                root: None,
            });
        }
        let mut replies_of: Vec<Vec<usize>> = vec![Vec::new(); n_outlet];
        for _ in 0..n_reply {
            let root = rng.random_range(0..n_outlet);
            let parent = match replies_of[root].choose(&mut rng) {
                Some(&p) if rng.random_bool(self.chain_fraction) => p,
                _ => root,
            };
            let idx = posts.len();
            replies_of[root].push(idx);
            let ts = posts[parent].timestamp + rng.random_range(1..6 * 3600);
            posts.push(PlannedPost {
                kind: PostKind::Reply,
                author: format!("user{}", rng.random_range(0..self.n_users)),
                outlet: None,
                timestamp: ts,
                loadings: vec![0.0; k],
                areas: Vec::new(),
                reply_to: Some(parent),
                root: Some(root),
            });
        }
        posts
    }
}

/// Text whose scored affect vector approximates `target`, plus area lemmas.
fn affect_text(target: &[f64; 18], areas: &[&AreaSpec], spec: &SynthSpec, pools: &Pools, len: usize, rng: &mut ChaCha8Rng) -> Result<String> {
    let mut tokens: Vec<&str> = Vec::with_capacity(len);
    for f in 0..5 {
        let net = target[8 + f] - target[13 + f];
        let scores = moral_scores(NEUTRAL_MORAL + 5.0 * net, spec.moral_tokens.max(1));
        for s in scores {
            let pool = &pools.moral[f][s as usize];
            let w = pool.choose(rng).ok_or_else(|| {
                Error::config(format!("moral lexicon has no {} word with score {s}", Foundation::ALL[f].virtue_name()))
            })?;
            tokens.push(w);
        }
    }
    for a in areas {
        for _ in 0..spec.area_tokens {
            tokens.push(a.lemmas.choose(rng).expect("validated nonempty"));
        }
    }
    let free = len.saturating_sub(tokens.len());
    let mut cumulative = [0.0; 8];
    let mut acc = 0.0;
    for i in 0..8 {
        acc += target[i] * len as f64 / free.max(1) as f64;
        cumulative[i] = acc;
    }
    if acc > 1.0 + 1e-9 {
        return Err(Error::config("emotion weights exceed the free token budget"));
    }
    for _ in 0..free {
        let u: f64 = rng.random();
        let w = match cumulative.iter().position(|&c| u < c) {
            Some(e) => pools.emotion[e]
                .choose(rng)
                .ok_or_else(|| Error::config(format!("no pure {} words in the emotion lexicon", Emotion::ALL[e].name())))?,
            None => pools.filler.choose(rng).expect("filler pool is nonempty"),
        };
        tokens.push(w);
    }
    tokens.shuffle(rng);
    Ok(tokens.join(" "))
}

fn reply_text(sentiment: f64, spec: &SynthSpec, pools: &Pools, rng: &mut ChaCha8Rng) -> String {
    let p_pos = spec.valence_rate * (1.0 + sentiment) / 2.0;
    let p_neg = spec.valence_rate * (1.0 - sentiment) / 2.0;
    let tokens: Vec<&str> = (0..spec.reply_tokens.max(1))
        .map(|_| {
            let u: f64 = rng.random();
            let pool = if u < p_pos {
                &pools.positive
            } else if u < p_pos + p_neg {
                &pools.negative
            } else {
                &pools.filler
            };
            pool.choose(rng).expect("pools are nonempty").as_str()
        })
        .collect();
    tokens.join(" ")
}

/// Generates a corpus with the bundled test lexicons and English resources.
pub fn generate(spec: &SynthSpec) -> Result<(Corpus, SynthTruth)> {
    generate_with(spec, &EmotionLexicon::bundled_test(), &MoralLexicon::bundled_test(), &TextResources::english())
}

pub fn generate_with(
    spec: &SynthSpec,
    emotions: &EmotionLexicon,
    morals: &MoralLexicon,
    text: &TextResources,
) -> Result<(Corpus, SynthTruth)> {
    let h0 = spec.h0()?;
    spec.validate(&h0)?;
    let area_words: HashSet<&str> = spec.areas.iter().flat_map(|a| a.lemmas.iter().map(String::as_str)).collect();
    for w in &area_words {
        if text.is_stopword(w) || text.lemma(w) != *w || emotions.valence(w) != 0 || !emotions.emotions_of(w).is_empty() || morals.words().any(|m| m == *w) {
            return Err(Error::config(format!("area lemma {w} is a stopword, inflected form or lexicon word")));
        }
    }
    let pools = Pools::new(emotions, morals, text, &area_words)?;
    let plan = spec.plan();

    let log_f: Vec<f64> = spec.outlets.iter().map(|o| (o.followers.max(1) as f64).ln()).collect();
    let mean = crate::linalg::mean(&log_f);
    let sd = (log_f.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / log_f.len() as f64).sqrt();
    let z_followers: Vec<f64> = log_f.iter().map(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 }).collect();
    let noise = Normal::new(0.0, spec.engagement.sigma).map_err(|e| Error::config(e.to_string()))?;

    // root-level sentiment targets, drawn before the per-post pass
    let root_sentiment: Vec<Option<f64>> = plan
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.outlet.map(|o| {
                let mut rng = seeds::rng(spec.seed, 3, i as u64);
                (spec.engagement.sentiment.linear(&p.loadings, z_followers[o]) + noise.sample(&mut rng)).tanh()
            })
        })
        .collect();

    let id = |i: usize| format!("t{i:07}");
    let records: Vec<TweetRecord> = plan
        .par_iter()
        .enumerate()
        .map(|(i, p)| -> Result<TweetRecord> {
            let mut rng = seeds::rng(spec.seed, 2, i as u64);
            let area_specs: Vec<&AreaSpec> = p.areas.iter().map(|&a| &spec.areas[a]).collect();
            let target = intended(&h0, &p.loadings);
            let mut rec = TweetRecord {
                id: id(i),
                author: p.author.clone(),
                outlet: p.outlet.map(|o| spec.outlets[o].name.clone()),
                timestamp: p.timestamp,
                text: String::new(),
                hashtags: BTreeSet::new(),
                reply_to: p.reply_to.map(id),
                like_count: 0,
                retweet_count: 0,
                reply_count: 0,
                quote_count: 0,
                follower_count: 0,
                article_text: None,
            };
            match p.kind {
                PostKind::Reply => {
                    let s = root_sentiment[p.root.expect("replies have roots")].expect("roots are outlet posts");
                    rec.text = reply_text(s, spec, &pools, &mut rng);
                    rec.follower_count = rng.random_range(0..5000);
                }
                PostKind::User | PostKind::Outlet => {
                    rec.text = affect_text(&target, &area_specs, spec, &pools, spec.tokens_per_tweet, &mut rng)?;
                    let tag_rate = if p.kind == PostKind::Outlet { spec.outlet_tag_rate } else { spec.user_tag_rate };
                    for a in &area_specs {
                        if rng.random_bool(tag_rate) {
                            let n = rng.random_range(1..=a.tags.len().min(3));
                            rec.hashtags.extend(a.tags.choose_multiple(&mut rng, n).cloned());
                        }
                    }
                }
            }
            if let Some(o) = p.outlet {
                rec.text.push_str(&format!(" https://{}.example/{}", spec.outlets[o].name, rec.id));
                if rng.random_bool(spec.article_fraction) {
                    rec.article_text =
                        Some(affect_text(&target, &area_specs, spec, &pools, spec.article_tokens.max(spec.tokens_per_tweet), &mut rng)?);
                }
                let e = &spec.engagement;
                let z = z_followers[o];
                let mut draw = |l: &LinkSpec| engagement_count(l.linear(&p.loadings, z) + noise.sample(&mut rng));
                rec.like_count = draw(&e.likes);
                rec.retweet_count = draw(&e.retweets);
                rec.reply_count = draw(&e.replies);
                rec.quote_count = draw(&e.quotes);
                rec.follower_count = spec.outlets[o].followers;
            } else if p.kind == PostKind::User {
                rec.follower_count = rng.random_range(0..5000);
            }
            Ok(rec)
        })
        .collect::<Result<_>>()?;

    let rows = plan
        .iter()
        .enumerate()
        .map(|(i, p)| TruthRow {
            id: id(i),
            kind: p.kind,
            loadings: p.loadings.clone(),
            areas: p.areas.iter().map(|&a| spec.areas[a].name.clone()).collect(),
            sentiment: root_sentiment[i],
        })
        .collect();
    let truth = SynthTruth {
        factor_names: spec.factors.iter().map(|f| f.name.clone()).collect(),
        h0,
        rows,
        engagement: spec.engagement.clone(),
    };
    Ok((Corpus::new(records)?, truth))
}

/// Affect matrix `X = max(0, W0 H0 + N(0, sigma^2))` with Dirichlet rows of
/// `W0`. Returns `X` and `W0`.
pub fn planted_affect_matrix(
    n: usize,
    h0: &[[f64; 18]],
    concentration: f64,
    sigma: f64,
    seed: u64,
) -> Result<(AffectMatrix, Vec<Vec<f64>>)> {
    if h0.is_empty() || n == 0 || concentration <= 0.0 {
        return Err(Error::config("planted matrix needs factors, rows and concentration > 0"));
    }
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::config(e.to_string()))?;
    let rows: Vec<(Vec<f64>, [f64; 18])> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds::rng(seed, 4, i as u64);
            let w = dirichlet(h0.len(), concentration, &mut rng);
            let mut x = intended(h0, &w);
            for v in &mut x {
                *v = (*v + noise.sample(&mut rng)).max(0.0);
            }
            (w, x)
        })
        .collect();
    let data: Vec<f64> = rows.iter().flat_map(|(_, x)| x.iter().copied()).collect();
    let x = nalgebra::DMatrix::from_row_slice(n, 18, &data);
    let ids = (0..n).map(|i| format!("p{i}")).collect();
    Ok((AffectMatrix::new(ids, x)?, rows.into_iter().map(|(w, _)| w).collect()))
}

/// Writes the corpus as JSON lines and the truth files next to it.
pub fn write_outputs(corpus: &Corpus, truth: &SynthTruth, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    corpus.write_jsonl(&dir.join("corpus.jsonl"))?;
    truth.write(&dir.join("truth"))
}

/// Writes a spec as TOML.
pub fn write_spec<W: Write>(mut out: W, spec: &SynthSpec) -> std::io::Result<()> {
    out.write_all(spec.to_toml().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affect::AffectScorer;

    fn small() -> SynthSpec {
        SynthSpec {
            n_tweets: 600,
            n_users: 100,
            ..Default::default()
        }
    }

    #[test]
    fn moral_score_rounding() {
        for (target, n) in [(9.0, 4), (1.0, 4), (7.0, 4), (5.1, 4), (5.5, 4), (4.75, 4), (6.0, 3), (5.0 + 5.0 / 3.0, 3)] {
            let s = moral_scores(target, n);
            if s.is_empty() {
                assert_eq!((target * n as f64).round() as usize, 5 * n);
                continue;
            }
            assert!(s.iter().all(|&v| (1..=9).contains(&v) && v != 5), "{s:?}");
            let mean = s.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
            assert!((mean - target).abs() <= 0.5 / n as f64 + 1e-12, "{target} {s:?}");
        }
    }

    #[test]
    fn deterministic() {
        let (a, ta) = generate(&small()).unwrap();
        let (b, tb) = generate(&small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let (c, _) = generate(&SynthSpec { seed: 1, ..small() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_noise_zero_beta_gives_intercept_counts() {
        let mut spec = small();
        let k = spec.factors.len();
        spec.engagement.sigma = 0.0;
        for l in [&mut spec.engagement.likes, &mut spec.engagement.retweets, &mut spec.engagement.replies, &mut spec.engagement.quotes] {
            l.factors = vec![0.0; k];
            l.followers = 0.0;
        }
        let (c, _) = generate(&spec).unwrap();
        let e = &spec.engagement;
        for t in c.outlet_tweets() {
            assert_eq!(t.like_count, engagement_count(e.likes.intercept));
            assert_eq!(t.retweet_count, engagement_count(e.retweets.intercept));
            assert_eq!(t.reply_count, engagement_count(e.replies.intercept));
            assert_eq!(t.quote_count, engagement_count(e.quotes.intercept));
        }
    }

    #[test]
    fn affect_fidelity() {
        let (c, truth) = generate(&small()).unwrap();
        let scorer = AffectScorer::bundled_test();
        let mut dev = 0.0;
        let mut count = 0;
        for (t, r) in c.tweets().iter().zip(&truth.rows) {
            if r.kind == PostKind::Reply {
                continue;
            }
            let got = scorer.score_text(&t.text).dims();
            let want = truth.intended(&r.loadings);
            dev += got.iter().zip(&want).map(|(a, b)| (a - b).abs()).sum::<f64>() / 18.0;
            count += 1;
        }
        assert!(dev / (count as f64) < 0.05, "{}", dev / count as f64);
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        let mut spec = small();
        spec.factors[0].composition.insert("care".into(), 0.3);
        assert!(generate(&spec).is_err());
        let mut spec = small();
        spec.factors[1].composition.insert("joy".into(), 0.9);
        assert!(generate(&spec).is_err());
        let mut spec = small();
        spec.factors[1].composition.insert("nonsense".into(), 0.1);
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = SynthSpec::default();
        assert_eq!(SynthSpec::from_toml(&spec.to_toml()).unwrap(), spec);
        let partial = SynthSpec::from_toml("n_tweets = 10\nseed = 3\n").unwrap();
        assert_eq!(partial.n_tweets, 10);
        assert_eq!(partial.factors, SynthSpec::default().factors);
        assert!(SynthSpec::from_toml("bogus = 1").is_err());
    }
}
