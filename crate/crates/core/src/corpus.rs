//! Post records, JSON-lines ingestion and reply trees.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: i64 = 86_400;

/// One post. Field names match the JSON-lines input format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub author: String,
    /// Outlet handle when the post was authored by a news outlet.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outlet: Option<String>,
    /// UTC epoch seconds.
    pub timestamp: i64,
    pub text: String,
    #[serde(default, deserialize_with = "deserialize_hashtags")]
    pub hashtags: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_to: Option<String>,
    #[serde(default)]
    pub like_count: u64,
    #[serde(default)]
    pub retweet_count: u64,
    #[serde(default)]
    pub reply_count: u64,
    #[serde(default)]
    pub quote_count: u64,
    #[serde(default)]
    pub follower_count: u64,
    /// Full text of the article linked by the post, when it was retrieved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub article_text: Option<String>,
}

impl TweetRecord {
    pub fn is_outlet(&self) -> bool {
        self.outlet.is_some()
    }

    /// UTC day index (days since the epoch).
    pub fn day(&self) -> i64 {
        self.timestamp.div_euclid(SECONDS_PER_DAY)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.reply_to.as_deref() == Some(self.id.as_str()) {
            return Err(format!("tweet {} replies to itself", self.id));
        }
        Ok(())
    }
}

/// Normalises a raw hashtag: strips leading `#` markers and lowercases.
pub fn normalize_hashtag(tag: &str) -> String {
    tag.trim().trim_start_matches('#').to_lowercase()
}

fn deserialize_hashtags<'de, D>(de: D) -> std::result::Result<BTreeSet<String>, D::Error>
where
    D: Deserializer<'de>,
{
    let raw: Option<Vec<String>> = Option::deserialize(de)?;
    Ok(raw
        .unwrap_or_default()
        .iter()
        .map(|t| normalize_hashtag(t))
        .filter(|t| !t.is_empty())
        .collect())
}

/// An immutable collection of posts with unique ids.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    tweets: Vec<TweetRecord>,
    index: HashMap<String, usize>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.tweets == other.tweets
    }
}

impl Corpus {
    pub fn new(tweets: Vec<TweetRecord>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tweets.len());
        for (i, t) in tweets.iter().enumerate() {
            t.validate().map_err(Error::Data)?;
            if index.insert(t.id.clone(), i).is_some() {
                return Err(Error::data(format!("duplicate tweet id {}", t.id)));
            }
        }
        Ok(Corpus { tweets, index })
    }

    pub fn tweets(&self) -> &[TweetRecord] {
        &self.tweets
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TweetRecord> {
        self.index.get(id).map(|&i| &self.tweets[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Number of distinct UTC calendar days with at least one post; 0 when empty.
    pub fn span_days(&self) -> usize {
        self.tweets
            .iter()
            .map(TweetRecord::day)
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn outlet_tweets(&self) -> impl Iterator<Item = &TweetRecord> {
        self.tweets.iter().filter(|t| t.is_outlet())
    }

    /// Writes the corpus as JSON lines (gzip when the path ends in `.gz`).
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out: Box<dyn Write> = if is_gzip(path) {
            Box::new(BufWriter::new(GzEncoder::new(
                file,
                flate2::Compression::default(),
            )))
        } else {
            Box::new(BufWriter::new(file))
        };
        for t in &self.tweets {
            let line = serde_json::to_string(t).map_err(|e| Error::data(e.to_string()))?;
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MalformedLine {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadReport {
    pub corpus: Corpus,
    pub malformed: Vec<MalformedLine>,
}

impl LoadReport {
    pub fn malformed_count(&self) -> usize {
        self.malformed.len()
    }
}

fn is_gzip(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("gz" | "gzip" | "tgz")
    )
}

/// Loads a JSON-lines corpus. Blank lines are ignored; malformed lines are
/// counted and returned. Aborts when more than half of the lines are malformed.
pub fn load_corpus(path: &Path) -> Result<LoadReport> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader: Box<dyn Read> = if is_gzip(path) {
        Box::new(MultiGzDecoder::new(file))
    } else {
        Box::new(file)
    };
    parse_jsonl(BufReader::new(reader)).map_err(|e| match e {
        Error::Data(msg) => Error::data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses JSON-lines records from any buffered reader.
pub fn parse_jsonl<R: BufRead>(reader: R) -> Result<LoadReport> {
    let mut tweets = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut malformed = Vec::new();
    let mut nonblank = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::data(format!("read error at line {}: {e}", i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        nonblank += 1;
        let parsed = serde_json::from_str::<TweetRecord>(&line)
            .map_err(|e| e.to_string())
            .and_then(|t| t.validate().map(|_| t));
        match parsed {
            Ok(t) => {
                if let Some(first) = seen.get(&t.id) {
                    malformed.push(MalformedLine {
                        line: i + 1,
                        reason: format!("duplicate id {} (first on line {first})", t.id),
                    });
                } else {
                    seen.insert(t.id.clone(), i + 1);
                    tweets.push(t);
                }
            }
            Err(reason) => malformed.push(MalformedLine {
                line: i + 1,
                reason,
            }),
        }
    }
    if nonblank > 0 && malformed.len() * 2 > nonblank {
        let sample: Vec<String> = malformed
            .iter()
            .take(5)
            .map(|m| format!("line {}: {}", m.line, m.reason))
            .collect();
        return Err(Error::data(format!(
            "{} of {} lines malformed; first errors: {}",
            malformed.len(),
            nonblank,
            sample.join("; ")
        )));
    }
    if !malformed.is_empty() {
        log::warn!("skipped {} malformed line(s)", malformed.len());
    }
    Ok(LoadReport {
        corpus: Corpus::new(tweets)?,
        malformed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplyNode<'a> {
    pub id: &'a str,
    /// 1 for direct replies to the root.
    pub depth: usize,
}

/// Replies reachable from an outlet post by following `reply_to` edges.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversationTree {
    pub root: String,
    /// Outlet of the root post, or its author when no outlet is set.
    pub outlet: String,
    /// Reply ids with their depth below the root, in corpus order.
    pub replies: Vec<(String, usize)>,
}

impl ConversationTree {
    /// Number of nodes excluding the root.
    pub fn size(&self) -> usize {
        self.replies.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = ReplyNode<'_>> {
        self.replies.iter().map(|(id, depth)| ReplyNode {
            id: id.as_str(),
            depth: *depth,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct Conversations {
    pub trees: Vec<ConversationTree>,
    /// Tweets whose reply chain ends at a parent missing from the corpus.
    pub dangling: Vec<String>,
    /// Tweets on, or leading into, a reply cycle.
    pub cyclic: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Resolution {
    Unknown,
    InProgress,
    Tree { tree: usize, depth: usize },
    /// Chain ends at a post that is not one of the requested roots.
    Detached,
    Dangling,
    Cyclic,
}

/// Groups replies under the requested roots. Every tweet is assigned to the
/// nearest root on its reply chain.
pub fn build_conversations(corpus: &Corpus, roots: &[String]) -> Result<Conversations> {
    let tweets = corpus.tweets();
    let mut state = vec![Resolution::Unknown; tweets.len()];
    let mut trees = Vec::new();
    for root in roots {
        let idx = corpus
            .position(root)
            .ok_or_else(|| Error::data(format!("conversation root {root} not in corpus")))?;
        if let Resolution::Tree { .. } = state[idx] {
            continue;
        }
        state[idx] = Resolution::Tree {
            tree: trees.len(),
            depth: 0,
        };
        let t = &tweets[idx];
        trees.push(ConversationTree {
            root: t.id.clone(),
            outlet: t.outlet.clone().unwrap_or_else(|| t.author.clone()),
            replies: Vec::new(),
        });
    }

    let mut path = Vec::new();
    for start in 0..tweets.len() {
        if state[start] != Resolution::Unknown {
            continue;
        }
        path.clear();
        let mut cur = start;
        let outcome = loop {
            match state[cur] {
                Resolution::Unknown => {}
                Resolution::InProgress => break Resolution::Cyclic,
                resolved => break resolved,
            }
            state[cur] = Resolution::InProgress;
            path.push(cur);
            match tweets[cur].reply_to.as_deref() {
                None => break Resolution::Detached,
                Some(parent) => match corpus.position(parent) {
                    None => break Resolution::Dangling,
                    Some(p) => cur = p,
                },
            }
        };
        for (k, &node) in path.iter().rev().enumerate() {
            state[node] = match outcome {
                Resolution::Tree { tree, depth } => Resolution::Tree {
                    tree,
                    depth: depth + k + 1,
                },
                other => other,
            };
        }
    }

    let mut dangling = Vec::new();
    let mut cyclic = Vec::new();
    for (i, s) in state.iter().enumerate() {
        let id = &tweets[i].id;
        match *s {
            Resolution::Tree { tree, depth } if depth > 0 => {
                trees[tree].replies.push((id.clone(), depth))
            }
            Resolution::Dangling => dangling.push(id.clone()),
            Resolution::Cyclic => cyclic.push(id.clone()),
            _ => {}
        }
    }
    if !cyclic.is_empty() {
        log::warn!("{} tweet(s) skipped on reply cycles", cyclic.len());
    }
    Ok(Conversations {
        trees,
        dangling,
        cyclic,
    })
}

/// Roots for every outlet post in the corpus, in corpus order.
pub fn outlet_roots(corpus: &Corpus) -> Vec<String> {
    corpus.outlet_tweets().map(|t| t.id.clone()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConversationSummary {
    pub n_trees: usize,
    pub avg_size: f64,
}

/// Mean conversation size per outlet.
pub fn avg_conversation_size(trees: &[ConversationTree]) -> BTreeMap<String, ConversationSummary> {
    let mut acc: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for t in trees {
        let e = acc.entry(t.outlet.clone()).or_default();
        e.0 += 1;
        e.1 += t.size();
    }
    acc.into_iter()
        .map(|(outlet, (n, total))| {
            (
                outlet,
                ConversationSummary {
                    n_trees: n,
                    avg_size: total as f64 / n as f64,
                },
            )
        })
        .collect()
}

/// Writes `outlet,n_trees,avg_size`.
pub fn write_conversation_summary<W: Write>(
    out: W,
    summary: &BTreeMap<String, ConversationSummary>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["outlet", "n_trees", "avg_size"])?;
    for (outlet, s) in summary {
        w.write_record([
            outlet.as_str(),
            &s.n_trees.to_string(),
            &format!("{:.6}", s.avg_size),
        ])?;
    }
    w.flush().map_err(|e| Error::data(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tweet(id: &str, reply_to: Option<&str>) -> TweetRecord {
        TweetRecord {
            id: id.into(),
            author: format!("u_{id}"),
            outlet: None,
            timestamp: 0,
            text: String::new(),
            hashtags: BTreeSet::new(),
            reply_to: reply_to.map(Into::into),
            like_count: 0,
            retweet_count: 0,
            reply_count: 0,
            quote_count: 0,
            follower_count: 0,
            article_text: None,
        }
    }

    fn outlet(id: &str, name: &str) -> TweetRecord {
        TweetRecord {
            outlet: Some(name.into()),
            ..tweet(id, None)
        }
    }

    #[test]
    fn three_valid_lines() {
        let data = r##"{"id":"1","author":"a","timestamp":0,"text":"x"}
{"id":"2","author":"b","timestamp":86400,"text":"y","hashtags":["#Covid","news"]}
{"id":"3","author":"c","timestamp":90000,"text":"z","reply_to":"1"}
"##;
        let rep = parse_jsonl(data.as_bytes()).unwrap();
        assert_eq!(rep.corpus.len(), 3);
        assert_eq!(rep.malformed_count(), 0);
        assert_eq!(rep.corpus.span_days(), 2);
        let tags: Vec<_> = rep.corpus.get("2").unwrap().hashtags.iter().cloned().collect();
        assert_eq!(tags, vec!["covid", "news"]);
    }

    #[test]
    fn empty_input() {
        let rep = parse_jsonl("".as_bytes()).unwrap();
        assert!(rep.corpus.is_empty());
        assert_eq!(rep.corpus.span_days(), 0);
    }

    #[test]
    fn one_valid_one_malformed() {
        let data = "{\"id\":\"1\",\"author\":\"a\",\"timestamp\":0,\"text\":\"x\"}\n{\"id\":\"2\",\"author\":\n";
        let rep = parse_jsonl(data.as_bytes()).unwrap();
        assert_eq!(rep.corpus.len(), 1);
        assert_eq!(rep.malformed_count(), 1);
        assert_eq!(rep.malformed[0].line, 2);
    }

    #[test]
    fn mostly_malformed_aborts() {
        let data = "{\"id\":\"1\",\"author\":\"a\",\"timestamp\":0,\"text\":\"x\"}\nnope\nnope\n";
        assert!(matches!(parse_jsonl(data.as_bytes()), Err(Error::Data(_))));
    }

    #[test]
    fn invariant_violations_are_malformed() {
        let data = concat!(
            "{\"id\":\"1\",\"author\":\"a\",\"timestamp\":0,\"text\":\"x\"}\n",
            "{\"id\":\"2\",\"author\":\"a\",\"timestamp\":0,\"text\":\"x\",\"reply_to\":\"2\"}\n",
            "{\"id\":\"1\",\"author\":\"a\",\"timestamp\":0,\"text\":\"dup\"}\n",
            "{\"id\":\"3\",\"author\":\"a\",\"timestamp\":0,\"text\":\"x\",\"like_count\":-1}\n",
            "{\"id\":\"4\",\"author\":\"a\",\"timestamp\":0,\"text\":\"x\"}\n",
            "{\"id\":\"5\",\"author\":\"a\",\"timestamp\":0,\"text\":\"x\"}\n",
            "{\"id\":\"6\",\"author\":\"a\",\"timestamp\":0,\"text\":\"x\"}\n",
        );
        let rep = parse_jsonl(data.as_bytes()).unwrap();
        assert_eq!(rep.corpus.len(), 4);
        assert_eq!(rep.malformed_count(), 3);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_corpus(Path::new("/nonexistent/corpus.jsonl")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn simple_chain() {
        let c = Corpus::new(vec![
            outlet("A", "@x"),
            tweet("B", Some("A")),
            tweet("C", Some("B")),
        ])
        .unwrap();
        let conv = build_conversations(&c, &["A".into()]).unwrap();
        assert_eq!(conv.trees.len(), 1);
        assert_eq!(conv.trees[0].size(), 2);
        assert_eq!(
            conv.trees[0].replies,
            vec![("B".to_string(), 1), ("C".to_string(), 2)]
        );
    }

    #[test]
    fn root_without_replies() {
        let c = Corpus::new(vec![outlet("A", "@x"), tweet("B", None)]).unwrap();
        let conv = build_conversations(&c, &["A".into()]).unwrap();
        assert_eq!(conv.trees[0].size(), 0);
    }

    #[test]
    fn cycles_are_skipped() {
        let c = Corpus::new(vec![
            outlet("A", "@x"),
            tweet("B", Some("C")),
            tweet("C", Some("B")),
            tweet("D", Some("C")),
            tweet("E", Some("A")),
        ])
        .unwrap();
        let conv = build_conversations(&c, &["A".into()]).unwrap();
        assert_eq!(conv.trees[0].size(), 1);
        assert_eq!(conv.cyclic, vec!["B", "C", "D"]);
    }

    #[test]
    fn unknown_root_is_error() {
        let c = Corpus::new(vec![outlet("A", "@x")]).unwrap();
        assert!(build_conversations(&c, &["Z".into()]).is_err());
    }

    #[test]
    fn average_sizes() {
        let mk = |root: &str, outlet: &str, n: usize| ConversationTree {
            root: root.into(),
            outlet: outlet.into(),
            replies: (0..n).map(|i| (format!("{root}{i}"), 1)).collect(),
        };
        let s = avg_conversation_size(&[mk("a", "@x", 2), mk("b", "@x", 4), mk("c", "@y", 7)]);
        assert_eq!(s["@x"].avg_size, 3.0);
        assert_eq!(s["@x"].n_trees, 2);
        assert_eq!(s["@y"].avg_size, 7.0);
        let mut buf = Vec::new();
        write_conversation_summary(&mut buf, &s).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "outlet,n_trees,avg_size\n@x,2,3.000000\n@y,1,7.000000\n"
        );
    }
}
