//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use newsaffect::corpus::TweetRecord;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(name: &str) -> PathBuf {
    crate_dir().join("tests").join("fixtures").join(name)
}

pub fn data_file(name: &str) -> PathBuf {
    crate_dir().join("data").join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Affect tally

pub const EMOTIONS: [&str; 8] = ["anger", "anticipation", "disgust", "fear", "joy", "sadness", "surprise", "trust"];
pub const FOUNDATIONS: [&str; 5] = ["care", "fairness", "loyalty", "authority", "purity"];

/// Reads the lexicon, stopword and lemma files directly and tallies tokens
/// with exact rationals.
pub struct TallyOracle {
    emotions: HashMap<String, HashSet<usize>>,
    valence: HashMap<String, i64>,
    morals: HashMap<String, Vec<(usize, i64)>>,
    stopwords: HashSet<String>,
    lemmas: HashMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct Tally {
    pub n: usize,
    pub emotions: [f64; 8],
    pub sentiment: f64,
    pub means: [f64; 5],
    pub virtue: [f64; 5],
    pub vice: [f64; 5],
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split('\t').map(|s| s.trim().to_string()).collect())
        .collect()
}

fn ratio(num: i64, den: usize) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den as i64))
}

impl TallyOracle {
    pub fn bundled() -> Self {
        let mut emotions: HashMap<String, HashSet<usize>> = HashMap::new();
        let mut valence = HashMap::new();
        for r in rows(&data_file("emotion_test.tsv")) {
            let v: i64 = r[2].trim_start_matches('+').parse().unwrap();
            if let Some(i) = EMOTIONS.iter().position(|e| *e == r[1]) {
                if v != 0 {
                    emotions.entry(r[0].clone()).or_default().insert(i);
                }
            } else {
                assert_eq!(r[1], "valence");
                valence.insert(r[0].clone(), v);
            }
        }
        let mut morals: HashMap<String, Vec<(usize, i64)>> = HashMap::new();
        for r in rows(&data_file("moral_test.tsv")) {
            let k = FOUNDATIONS.iter().position(|f| *f == r[1]).unwrap();
            morals.entry(r[0].clone()).or_default().push((k, r[2].parse().unwrap()));
        }
        let stopwords = fs::read_to_string(data_file("stopwords_en.txt"))
            .unwrap()
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        let lemmas = rows(&data_file("lemmas_en.tsv")).into_iter().map(|r| (r[0].clone(), r[1].clone())).collect();
        TallyOracle {
            emotions,
            valence,
            morals,
            stopwords,
            lemmas,
        }
    }

    /// Whitespace-delimited URLs and mentions are dropped, everything that is
    /// not alphanumeric separates words.
    pub fn tokens(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for chunk in text.split_whitespace() {
            let lower = chunk.to_lowercase();
            if lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.") {
                continue;
            }
            let chunk = if let Some(rest) = chunk.strip_prefix('@') {
                rest.trim_start_matches(|c: char| c.is_alphanumeric() || c == '_')
            } else {
                chunk
            };
            let mut word = String::new();
            for c in chunk.chars().chain(std::iter::once(' ')) {
                if c.is_alphanumeric() {
                    word.push(c);
                } else if !word.is_empty() {
                    let w = word.to_lowercase();
                    word.clear();
                    if self.stopwords.contains(&w) {
                        continue;
                    }
                    out.push(self.lemmas.get(&w).cloned().unwrap_or(w));
                }
            }
        }
        out
    }

    pub fn tally(&self, text: &str) -> Tally {
        let toks = self.tokens(text);
        let n = toks.len();
        let mut emo = [0i64; 8];
        let mut val = 0i64;
        let mut sums = [0i64; 5];
        let mut counts = [0usize; 5];
        for t in &toks {
            if let Some(set) = self.emotions.get(t) {
                for &i in set {
                    emo[i] += 1;
                }
            }
            val += self.valence.get(t).copied().unwrap_or(0);
            if let Some(list) = self.morals.get(t) {
                for &(k, s) in list {
                    sums[k] += s;
                    counts[k] += 1;
                }
            }
        }
        let f = |r: BigRational| r.to_f64().unwrap();
        let zero = BigRational::zero();
        let five = BigRational::from_integer(BigInt::from(5));
        let mut t = Tally {
            n,
            emotions: [0.0; 8],
            sentiment: 0.0,
            means: [5.0; 5],
            virtue: [0.0; 5],
            vice: [0.0; 5],
        };
        if n > 0 {
            for i in 0..8 {
                t.emotions[i] = f(ratio(emo[i], n));
            }
            t.sentiment = f(ratio(val, n));
        }
        for k in 0..5 {
            let m = if counts[k] > 0 { ratio(sums[k], counts[k]) } else { five.clone() };
            let d = (&m - &five) / &five;
            t.means[k] = f(m);
            if d > zero {
                t.virtue[k] = f(d);
            } else if d < zero {
                t.vice[k] = f(-d);
            }
        }
        t
    }
}

pub fn load_fixture_records(name: &str) -> Vec<TweetRecord> {
    fs::read_to_string(fixture(name))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

// ---------------------------------------------------------------------------
// Conversation trees

/// Breadth-first reply tree below `root`: `(node, depth)` pairs, root
/// excluded, each node visited once, never descending into another root.
pub fn bfs_tree(records: &[TweetRecord], root: &str, roots: &HashSet<String>) -> Vec<(String, usize)> {
    let mut children: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in records {
        if let Some(p) = &r.reply_to {
            children.entry(p.as_str()).or_default().push(r.id.as_str());
        }
    }
    let mut seen: HashSet<&str> = HashSet::from([root]);
    let mut queue = VecDeque::from([(root, 0usize)]);
    let mut out = Vec::new();
    while let Some((id, d)) = queue.pop_front() {
        for &c in children.get(id).map(Vec::as_slice).unwrap_or(&[]) {
            if !roots.contains(c) && seen.insert(c) {
                out.push((c.to_string(), d + 1));
                queue.push_back((c, d + 1));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Clustering

/// Pair counts by explicit enumeration of every run's cluster members.
pub fn co_membership(runs: &[Vec<usize>], n: usize) -> Vec<u32> {
    let mut m = vec![0u32; n * n];
    for labels in runs {
        let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &l) in labels.iter().enumerate() {
            members.entry(l).or_default().push(i);
        }
        for group in members.values() {
            for &a in group {
                for &b in group {
                    m[a * n + b] += 1;
                }
            }
        }
    }
    m
}

/// Three unit-vector blobs of `per` points in `dim` dimensions around
/// orthogonal centres with per-coordinate noise `sigma`.
pub fn planted_blobs(per: usize, dim: usize, sigma: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for c in 0..3 {
        for _ in 0..per {
            let mut v: Vec<f64> = (0..dim).map(|j| if j == c { 1.0 } else { 0.0 } + noise.sample(&mut r)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            points.push(v);
            truth.push(c);
        }
    }
    (points, truth)
}

// ---------------------------------------------------------------------------
// Exact least squares

fn to_rational(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

/// Solves the normal equations of `y = b0 + X b` exactly by Gaussian
/// elimination over the rationals. Returns `[b0, b...]`.
pub fn normal_equations(x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let (n, p) = x.shape();
    let q = p + 1;
    let col = |i: usize, j: usize| if j == 0 { BigRational::one() } else { to_rational(x[(i, j - 1)]) };
    let yr: Vec<BigRational> = y.iter().map(|&v| to_rational(v)).collect();
    let mut a: Vec<Vec<BigRational>> = vec![vec![BigRational::zero(); q + 1]; q];
    for i in 0..n {
        let row: Vec<BigRational> = (0..q).map(|j| col(i, j)).collect();
        for r in 0..q {
            for c in 0..q {
                a[r][c] += &row[r] * &row[c];
            }
            a[r][q] += &row[r] * &yr[i];
        }
    }
    for c in 0..q {
        let piv = (c..q).find(|&r| !a[r][c].is_zero()).expect("full rank");
        a.swap(c, piv);
        for r in 0..q {
            if r != c && !a[r][c].is_zero() {
                let f = &a[r][c] / &a[c][c];
                for k in c..=q {
                    let delta = &f * &a[c][k];
                    a[r][k] -= delta;
                }
            }
        }
    }
    (0..q).map(|r| (&a[r][q] / &a[r][r]).to_f64().unwrap()).collect()
}

/// Centred-lasso optimality residual: for nonzero `w_j` the distance of
/// `x_j'r/n` from `lambda sign(w_j)`, for zero `w_j` the excess of
/// `|x_j'r/n|` over `lambda`. Returns the worst violation.
pub fn kkt_violation(x: &DMatrix<f64>, y: &[f64], w: &[f64], b: f64, lambda: f64) -> f64 {
    let (n, p) = x.shape();
    let r: Vec<f64> = (0..n).map(|i| y[i] - b - (0..p).map(|j| x[(i, j)] * w[j]).sum::<f64>()).collect();
    let rmean = r.iter().sum::<f64>() / n as f64;
    let mut worst = rmean.abs();
    for j in 0..p {
        let mu = (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64;
        let g = (0..n).map(|i| (x[(i, j)] - mu) * r[i]).sum::<f64>() / n as f64;
        let v = if w[j] != 0.0 {
            (g - lambda * w[j].signum()).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

// ---------------------------------------------------------------------------
// Normal quantiles

/// Standard normal CDF from the everywhere-convergent series
/// `1/2 + phi(x) * sum x^(2k+1) / (2k+1)!!`, accumulated in exact
/// rationals and only rounded at the end.
pub fn normal_cdf_series(x: f64) -> f64 {
    let xr = to_rational(x);
    let x2 = &xr * &xr;
    let mut term = xr.clone();
    let mut sum = xr.clone();
    let mut k = 0i64;
    let eps = BigRational::new(BigInt::one(), BigInt::from(10).pow(30));
    while term.abs() > eps {
        k += 1;
        term = &term * &x2 / BigRational::from_integer(BigInt::from(2 * k + 1));
        sum += &term;
        if k > 400 {
            break;
        }
    }
    let s = sum.to_f64().unwrap();
    0.5 + s * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Bisection on [`normal_cdf_series`].
pub fn normal_quantile_oracle(p: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0f64, 10.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf_series(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// Factor matching

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Exhaustive assignment of recovered rows to planted rows maximising the
/// summed cosine. Returns `perm` (planted `i` matched to recovered
/// `perm[i]`) and the per-pair cosines.
pub fn match_rows(recovered: &[Vec<f64>], planted: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    assert_eq!(recovered.len(), planted.len());
    let k = planted.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for p in permutations(k) {
        let s: f64 = (0..k).map(|i| cosine(&planted[i], &recovered[p[i]])).sum();
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, p));
        }
    }
    let (_, perm) = best.unwrap();
    let cos = (0..k).map(|i| cosine(&planted[i], &recovered[perm[i]])).collect();
    (perm, cos)
}

// ---------------------------------------------------------------------------
// Regression fixtures

/// Standard normal design with `p` columns.
pub fn gaussian_design(n: usize, p: usize, r: &mut impl Rng) -> DMatrix<f64> {
    let z = Normal::new(0.0, 1.0).unwrap();
    DMatrix::from_fn(n, p, |_, _| z.sample(r))
}

// ---------------------------------------------------------------------------
// Output trees

/// Relative path to file contents for every file below `root`.
pub fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                out.insert(p.strip_prefix(base).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

/// Four planted features with `|beta| >= 3 sigma`, two null features and a
/// follower confounder; the target is a rounded log-linear count.
pub const PLANTED_SIGMA: f64 = 0.5;
pub const PLANTED_BETA: [(&str, f64); 7] = [
    ("anger", 1.5),
    ("fear", -1.5),
    ("care", 2.0),
    ("harm", -2.0),
    ("null_a", 0.0),
    ("null_b", 0.0),
    ("followers", 1.0),
];

pub fn planted_engagement(n: usize, seed: u64) -> newsaffect::engage::FeatureTable {
    use newsaffect::engage::{FeatureTable, Group, Source, Target};
    let mut r = rng(seed);
    let x = gaussian_design(n, PLANTED_BETA.len(), &mut r);
    let noise = Normal::new(0.0, PLANTED_SIGMA).unwrap();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let eta = 2.0 + (0..PLANTED_BETA.len()).map(|j| PLANTED_BETA[j].1 * x[(i, j)]).sum::<f64>() + noise.sample(&mut r);
            newsaffect::synth::engagement_count(eta) as f64
        })
        .collect();
    let mut t = FeatureTable::new((0..n).map(|i| format!("p{i}")).collect());
    for (j, (name, _)) in PLANTED_BETA.iter().enumerate() {
        let group = match *name {
            "followers" => Group::Followers,
            "care" | "harm" => Group::Morals(Source::Text),
            _ => Group::Emotions(Source::Text),
        };
        t.push_feature(*name, group, x.column(j).iter().copied().collect()).unwrap();
    }
    t.push_target(Target::Likes, y).unwrap();
    t
}

/// Bag-of-words design with 500 lemmas of which the first 10 mark the area.
pub fn ten_of_five_hundred(n: usize, seed: u64) -> (Vec<newsaffect::textprep::SparseBow>, Vec<f64>) {
    let mut r = rng(seed);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let positive = r.random_bool(0.3);
        let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
        for _ in 0..30 {
            *counts.entry(r.random_range(10..500)).or_default() += 1;
        }
        if positive {
            for _ in 0..3 {
                *counts.entry(r.random_range(0..10)).or_default() += 1;
            }
        }
        rows.push(newsaffect::textprep::SparseBow(counts.into_iter().collect()));
        y.push(if positive { 1.0 } else { 0.0 });
    }
    (rows, y)
}

/// Cluster to area by majority over the planted tag pools.
pub fn merge_map_from_truth(listing: &Path, spec: &newsaffect::synth::SynthSpec, keep: &[&str]) -> String {
    let tag_area: BTreeMap<&str, &str> = spec
        .areas
        .iter()
        .flat_map(|a| a.tags.iter().map(move |t| (t.as_str(), a.name.as_str())))
        .collect();
    let (_, rows) = read_csv(listing);
    let mut votes: BTreeMap<usize, BTreeMap<&str, usize>> = BTreeMap::new();
    for r in &rows {
        let area = tag_area[r[2].as_str()];
        *votes.entry(r[0].parse().unwrap()).or_default().entry(area).or_default() += 1;
    }
    let mut out = String::new();
    for (c, v) in votes {
        let (area, _) = v.into_iter().max_by_key(|&(a, n)| (n, std::cmp::Reverse(a))).unwrap();
        if keep.contains(&area) {
            out.push_str(&format!("{c}\t{area}\n"));
        }
    }
    out
}
