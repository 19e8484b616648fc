//! Thematic macro areas from hashtag co-occurrence.
//!
//! 1. [`select_hashtags`] keeps hashtags used at least once per day on
//!    average and by enough distinct authors.
//! 2. [`embedding::train_embedding`] learns skip-gram vectors where each
//!    post's hashtag set is one sentence.
//! 3. [`consensus::consensus_cluster`] repeats K-means over a range of K,
//!    scores each K by PAC and partitions the chosen consensus matrix.
//! 4. A human-written merge map turns cluster ids into macro areas
//!    ([`assign_macro_areas`]).
//! 5. [`classify`] trains one L1 least-squares model per area on bag-of-words
//!    features and propagates area labels to every post.

pub mod classify;
pub mod consensus;
pub mod embedding;
pub mod kmeans;
pub mod lasso;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub use classify::{
    propagate_labels, train_area_classifiers, AreaClassifier, AreaLabels, ClassifierParams,
};
pub use consensus::{consensus_cluster, ConsensusModel, ConsensusParams};
pub use embedding::{train_embedding, EmbeddingParams, HashtagEmbedding};

/// Macro-area name for clusters absent from the merge map.
pub const UNMAPPED_AREA: &str = "none";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HashtagFilter {
    /// Minimum average uses per covered day.
    pub min_per_day: f64,
    pub min_authors: usize,
}

impl Default for HashtagFilter {
    fn default() -> Self {
        HashtagFilter {
            min_per_day: 1.0,
            min_authors: 10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HashtagStats {
    pub count: usize,
    pub authors: usize,
}

/// Number of posts using each hashtag and number of distinct authors.
pub fn hashtag_stats(corpus: &Corpus) -> BTreeMap<String, HashtagStats> {
    let mut authors: BTreeMap<&str, (usize, BTreeSet<&str>)> = BTreeMap::new();
    for t in corpus.tweets() {
        for tag in &t.hashtags {
            let e = authors.entry(tag.as_str()).or_default();
            e.0 += 1;
            e.1.insert(t.author.as_str());
        }
    }
    authors
        .into_iter()
        .map(|(tag, (count, a))| {
            (
                tag.to_string(),
                HashtagStats {
                    count,
                    authors: a.len(),
                },
            )
        })
        .collect()
}

/// Eligible hashtags, sorted.
pub fn select_hashtags(corpus: &Corpus, filter: HashtagFilter) -> Result<Vec<String>> {
    let days = corpus.span_days() as f64;
    let keep: Vec<String> = hashtag_stats(corpus)
        .into_iter()
        .filter(|(_, s)| s.count as f64 >= filter.min_per_day * days && s.authors >= filter.min_authors)
        .map(|(t, _)| t)
        .collect();
    if keep.is_empty() {
        return Err(Error::data(format!(
            "no hashtag used >= {} times per day by >= {} authors; lower the thresholds",
            filter.min_per_day, filter.min_authors
        )));
    }
    Ok(keep)
}

/// Cluster id to macro-area name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeMap(pub BTreeMap<usize, String>);

impl MergeMap {
    /// Parses `cluster_id<TAB>macro_area` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, area) = line
                .split_once('\t')
                .and_then(|(id, a)| id.trim().parse::<usize>().ok().map(|id| (id, a.trim())))
                .filter(|(_, a)| !a.is_empty())
                .ok_or_else(|| Error::data(format!("merge map line {}: expected cluster_id<TAB>macro_area", ln + 1)))?;
            map.insert(id, area.to_string());
        }
        Ok(MergeMap(map))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Distinct area names, sorted, excluding [`UNMAPPED_AREA`].
    pub fn areas(&self) -> Vec<String> {
        self.0
            .values()
            .filter(|a| a.as_str() != UNMAPPED_AREA)
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// Hashtag to macro area through the final partition and the merge map.
pub fn assign_macro_areas(model: &ConsensusModel, merge: &MergeMap) -> Result<BTreeMap<String, String>> {
    if let Some((&bad, _)) = merge.0.iter().find(|(&id, _)| id >= model.chosen_k) {
        return Err(Error::data(format!(
            "merge map references cluster {bad} but only {} clusters exist",
            model.chosen_k
        )));
    }
    Ok(model
        .tags
        .iter()
        .zip(&model.partition)
        .map(|(tag, c)| {
            let area = merge.0.get(c).cloned().unwrap_or_else(|| UNMAPPED_AREA.to_string());
            (tag.clone(), area)
        })
        .collect())
}

/// Writes `cluster,rank,hashtag,count` with the `top_n` most used tags per cluster.
pub fn write_cluster_listing<W: Write>(
    out: W,
    model: &ConsensusModel,
    stats: &BTreeMap<String, HashtagStats>,
    top_n: usize,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cluster", "rank", "hashtag", "count"])?;
    for c in 0..model.chosen_k {
        let mut members: Vec<(&str, usize)> = model
            .tags
            .iter()
            .zip(&model.partition)
            .filter(|(_, &p)| p == c)
            .map(|(t, _)| (t.as_str(), stats.get(t).map_or(0, |s| s.count)))
            .collect();
        members.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        for (rank, (tag, count)) in members.into_iter().take(top_n).enumerate() {
            w.write_record([c.to_string(), (rank + 1).to_string(), tag.to_string(), count.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::data(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TweetRecord;

    fn tweet(id: usize, author: usize, day: i64, tags: &[&str]) -> TweetRecord {
        TweetRecord {
            id: id.to_string(),
            author: format!("u{author}"),
            outlet: None,
            timestamp: day * 86_400 + 100,
            text: String::new(),
            hashtags: tags.iter().map(|t| t.to_string()).collect(),
            reply_to: None,
            like_count: 0,
            retweet_count: 0,
            reply_count: 0,
            quote_count: 0,
            follower_count: 0,
            article_text: None,
        }
    }

    #[test]
    fn selection_boundaries() {
        // 10 days, "keep" used 10 times by 10 authors, "few" 9 times by 9
        let mut tweets = Vec::new();
        for i in 0..10 {
            let tags: &[&str] = if i < 9 { &["keep", "few"] } else { &["keep"] };
            tweets.push(tweet(i, i, i as i64, tags));
        }
        let c = Corpus::new(tweets).unwrap();
        assert_eq!(c.span_days(), 10);
        let kept = select_hashtags(&c, HashtagFilter::default()).unwrap();
        assert_eq!(kept, vec!["keep"]);
        let lax = HashtagFilter { min_per_day: 0.9, min_authors: 9 };
        assert_eq!(select_hashtags(&c, lax).unwrap(), vec!["few", "keep"]);
        let strict = HashtagFilter { min_per_day: 2.0, min_authors: 1 };
        assert!(select_hashtags(&c, strict).is_err());
    }

    #[test]
    fn author_threshold() {
        // one author repeating a tag 20 times over 2 days
        let tweets = (0..20).map(|i| tweet(i, 0, (i % 2) as i64, &["solo"])).collect();
        let c = Corpus::new(tweets).unwrap();
        assert!(select_hashtags(&c, HashtagFilter::default()).is_err());
    }

    fn model() -> ConsensusModel {
        ConsensusModel {
            tags: vec!["a".into(), "b".into(), "c".into()],
            per_k: Vec::new(),
            chosen_k: 3,
            consensus: Vec::new(),
            partition: vec![0, 1, 2],
        }
    }

    #[test]
    fn macro_area_lookup() {
        let merge = MergeMap::parse("0\tPolitics\n1\tCovid\n").unwrap();
        let areas = assign_macro_areas(&model(), &merge).unwrap();
        assert_eq!(areas["b"], "Covid");
        assert_eq!(areas["a"], "Politics");
        assert_eq!(areas["c"], UNMAPPED_AREA);
        assert_eq!(merge.areas(), vec!["Covid", "Politics"]);
    }

    #[test]
    fn merge_map_errors() {
        assert!(MergeMap::parse("x\tPolitics\n").is_err());
        assert!(MergeMap::parse("0\t\n").is_err());
        let merge = MergeMap::parse("7\tPolitics\n").unwrap();
        assert!(assign_macro_areas(&model(), &merge).is_err());
    }
}
