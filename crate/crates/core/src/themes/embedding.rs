//! Skip-gram with negative sampling over hashtag "sentences".
//!
//! Every hashtag in a post is a context for every other hashtag of the same
//! post. Training is single threaded so a fixed seed gives bit-identical
//! vectors.

use std::collections::HashMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingParams {
    pub dim: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Learning rate floor as a fraction of the initial rate.
    pub min_lr_fraction: f64,
    /// Size of the fixed (center, context) sample used to track the loss.
    pub eval_pairs: usize,
    pub seed: u64,
}

impl Default for EmbeddingParams {
    fn default() -> Self {
        EmbeddingParams {
            dim: 32,
            negatives: 5,
            epochs: 15,
            learning_rate: 0.025,
            min_lr_fraction: 1e-4,
            eval_pairs: 2000,
            seed: 0,
        }
    }
}

/// Unit-norm hashtag vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct HashtagEmbedding {
    pub tags: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
    pub params: EmbeddingParams,
    /// Mean loss on the fixed evaluation sample after each epoch.
    pub epoch_losses: Vec<f64>,
}

impl HashtagEmbedding {
    pub fn vector(&self, tag: &str) -> Option<&[f64]> {
        self.tags.iter().position(|t| t == tag).map(|i| self.vectors[i].as_slice())
    }

    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        Some(crate::linalg::dot(self.vector(a)?, self.vector(b)?))
    }

    /// TSV dump: a `#` header with hyperparameters, then `tag<TAB>v1<TAB>...`.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let p = &self.params;
        writeln!(
            out,
            "# dim={} negatives={} epochs={} learning_rate={} window=full seed={}",
            p.dim, p.negatives, p.epochs, p.learning_rate, p.seed
        )?;
        for (t, v) in self.tags.iter().zip(&self.vectors) {
            write!(out, "{t}")?;
            for x in v {
                write!(out, "\t{x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Sentences of eligible hashtags, one per post with at least two of them.
pub fn hashtag_sentences(corpus: &Corpus, eligible: &[String]) -> Vec<Vec<usize>> {
    let index: HashMap<&str, usize> = eligible.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    corpus
        .tweets()
        .iter()
        .map(|t| {
            t.hashtags
                .iter()
                .filter_map(|h| index.get(h.as_str()).copied())
                .collect::<Vec<_>>()
        })
        .filter(|s| s.len() >= 2)
        .collect()
}

pub fn train_embedding(corpus: &Corpus, eligible: &[String], params: EmbeddingParams) -> Result<HashtagEmbedding> {
    let sentences = hashtag_sentences(corpus, eligible);
    train_on_sentences(eligible, &sentences, params)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-log(sigmoid(x))` computed without overflow.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

struct NegativeTable {
    cumulative: Vec<f64>,
}

impl NegativeTable {
    /// Unigram counts raised to 3/4.
    fn new(counts: &[usize]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NegativeTable { cumulative }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cumulative.last().unwrap();
        let u = rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

struct Sgns {
    dim: usize,
    input: Vec<f64>,
    output: Vec<f64>,
}

impl Sgns {
    fn row(v: &[f64], dim: usize, i: usize) -> &[f64] {
        &v[i * dim..(i + 1) * dim]
    }

    fn pair_loss(&self, center: usize, context: usize, negatives: &[usize]) -> f64 {
        let c = Self::row(&self.input, self.dim, center);
        let mut loss = neg_log_sigmoid(crate::linalg::dot(c, Self::row(&self.output, self.dim, context)));
        for &n in negatives {
            loss += neg_log_sigmoid(-crate::linalg::dot(c, Self::row(&self.output, self.dim, n)));
        }
        loss
    }

    fn update(&mut self, center: usize, target: usize, label: f64, lr: f64, grad: &mut [f64]) {
        let d = self.dim;
        let (ci, ti) = (center * d, target * d);
        let score: f64 = (0..d).map(|k| self.input[ci + k] * self.output[ti + k]).sum();
        let g = lr * (label - sigmoid(score));
        for k in 0..d {
            grad[k] += g * self.output[ti + k];
            self.output[ti + k] += g * self.input[ci + k];
        }
    }
}

/// Trains on pre-built sentences of vocabulary indices.
pub fn train_on_sentences(
    tags: &[String],
    sentences: &[Vec<usize>],
    params: EmbeddingParams,
) -> Result<HashtagEmbedding> {
    if tags.len() < 2 || sentences.iter().all(|s| s.len() < 2) {
        return Err(Error::data("hashtag embedding needs at least two co-occurring hashtags"));
    }
    if params.dim == 0 || params.epochs == 0 {
        return Err(Error::config("embedding dim and epochs must be positive"));
    }
    let v = tags.len();
    let d = params.dim;
    let mut rng = seeds::rng(params.seed, 0x656d_6265_6464, 0);

    let mut counts = vec![0usize; v];
    for s in sentences {
        for &w in s {
            counts[w] += 1;
        }
    }
    let table = NegativeTable::new(&counts);

    let mut model = Sgns {
        dim: d,
        input: (0..v * d).map(|_| (rng.random::<f64>() - 0.5) / d as f64).collect(),
        output: vec![0.0; v * d],
    };

    let pairs_per_epoch: usize = sentences.iter().map(|s| s.len() * (s.len() - 1)).sum();
    let total = (pairs_per_epoch * params.epochs) as f64;

    let mut eval = Vec::with_capacity(params.eval_pairs);
    for _ in 0..params.eval_pairs {
        let s = &sentences[rng.random_range(0..sentences.len())];
        if s.len() < 2 {
            continue;
        }
        let i = rng.random_range(0..s.len());
        let mut j = rng.random_range(0..s.len() - 1);
        if j >= i {
            j += 1;
        }
        let negs: Vec<usize> = (0..params.negatives).map(|_| table.sample(&mut rng)).collect();
        eval.push((s[i], s[j], negs));
    }
    let eval_loss = |m: &Sgns| {
        eval.iter().map(|(c, o, n)| m.pair_loss(*c, *o, n)).sum::<f64>() / eval.len().max(1) as f64
    };

    let mut order: Vec<usize> = (0..sentences.len()).collect();
    let mut processed = 0usize;
    let mut grad = vec![0.0; d];
    let mut epoch_losses = Vec::with_capacity(params.epochs);
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &si in &order {
            let s = &sentences[si];
            for (i, &center) in s.iter().enumerate() {
                for (j, &context) in s.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let frac = 1.0 - processed as f64 / total;
                    let lr = params.learning_rate * frac.max(params.min_lr_fraction);
                    processed += 1;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    model.update(center, context, 1.0, lr, &mut grad);
                    for _ in 0..params.negatives {
                        let neg = table.sample(&mut rng);
                        if neg == context {
                            continue;
                        }
                        model.update(center, neg, 0.0, lr, &mut grad);
                    }
                    let ci = center * d;
                    for k in 0..d {
                        model.input[ci + k] += grad[k];
                    }
                }
            }
        }
        epoch_losses.push(eval_loss(&model));
    }

    let vectors = (0..v)
        .map(|i| {
            let row = Sgns::row(&model.input, d, i);
            let norm = crate::linalg::dot(row, row).sqrt();
            row.iter().map(|x| x / norm).collect()
        })
        .collect();
    Ok(HashtagEmbedding {
        tags: tags.to_vec(),
        vectors,
        params,
        epoch_losses,
    })
}
