//! Consensus clustering with PAC model selection.
//!
//! For every K, K-means is run `runs` times with distinct seeds. The
//! consensus matrix entry `C[i][j]` is the fraction of runs that put `i` and
//! `j` in the same cluster. PAC is the fraction of off-diagonal pairs whose
//! consensus lies strictly inside `(pac_low, pac_high)`; the chosen K
//! minimises it. K = 1 and K = n always give PAC = 0 and are reported but
//! never chosen while another K is available.

use std::io::Write;

use rayon::prelude::*;

use super::embedding::HashtagEmbedding;
use super::kmeans::{canonical_labels, kmeans, KMeansParams, Points};
use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsensusParams {
    pub k_min: usize,
    pub k_max: usize,
    pub runs: usize,
    pub max_iter: usize,
    pub pac_low: f64,
    pub pac_high: f64,
    pub seed: u64,
}

impl Default for ConsensusParams {
    fn default() -> Self {
        ConsensusParams {
            k_min: 1,
            k_max: 100,
            runs: 20,
            max_iter: 100,
            pac_low: 0.1,
            pac_high: 0.9,
            seed: 0,
        }
    }
}

/// Labelings and PAC for one K.
#[derive(Debug, Clone, PartialEq)]
pub struct KConsensus {
    pub k: usize,
    /// One labeling per run, in seed order.
    pub runs: Vec<Vec<usize>>,
    pub pac: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusModel {
    pub tags: Vec<String>,
    pub per_k: Vec<KConsensus>,
    pub chosen_k: usize,
    /// Row-major consensus matrix of the chosen K.
    pub consensus: Vec<f64>,
    /// Cluster id per tag, numbered by first appearance.
    pub partition: Vec<usize>,
}

impl ConsensusModel {
    pub fn n(&self) -> usize {
        self.tags.len()
    }

    /// `(K, PAC)` for every evaluated K.
    pub fn pac_curve(&self) -> Vec<(usize, f64)> {
        self.per_k.iter().map(|k| (k.k, k.pac)).collect()
    }

    pub fn consensus_for(&self, k: usize) -> Option<Vec<f64>> {
        self.per_k
            .iter()
            .find(|c| c.k == k)
            .map(|c| consensus_matrix(&c.runs, self.n()))
    }

    pub fn write_pac_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["K", "PAC"])?;
        for (k, pac) in self.pac_curve() {
            w.write_record([k.to_string(), pac.to_string()])?;
        }
        w.flush().map_err(|e| Error::data(e.to_string()))?;
        Ok(())
    }
}

/// Co-clustering frequencies over a set of labelings.
pub fn consensus_matrix(runs: &[Vec<usize>], n: usize) -> Vec<f64> {
    let mut counts = vec![0u32; n * n];
    for labels in runs {
        for i in 0..n {
            counts[i * n + i] += 1;
            for j in (i + 1)..n {
                if labels[i] == labels[j] {
                    counts[i * n + j] += 1;
                }
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            counts[j * n + i] = counts[i * n + j];
        }
    }
    let r = runs.len() as f64;
    counts.into_iter().map(|c| c as f64 / r).collect()
}

/// Fraction of off-diagonal pairs with consensus strictly inside `(low, high)`.
pub fn pac(consensus: &[f64], n: usize, low: f64, high: f64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let mut ambiguous = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let c = consensus[i * n + j];
            if c > low && c < high {
                ambiguous += 1;
            }
        }
    }
    ambiguous as f64 / (n * (n - 1) / 2) as f64
}

pub fn consensus_cluster(emb: &HashtagEmbedding, params: ConsensusParams) -> Result<ConsensusModel> {
    consensus_cluster_points(&emb.tags, &Points::from_rows(&emb.vectors), params)
}

/// Runs consensus clustering on arbitrary points labelled by `tags`.
pub fn consensus_cluster_points(tags: &[String], points: &Points, params: ConsensusParams) -> Result<ConsensusModel> {
    let n = points.len();
    if n == 0 || tags.len() != n {
        return Err(Error::data("consensus clustering needs one tag per point"));
    }
    if params.runs == 0 || params.k_min == 0 || params.k_min > params.k_max {
        return Err(Error::config("consensus needs runs >= 1 and 1 <= k_min <= k_max"));
    }
    if params.k_max > n {
        log::warn!("skipping K > {n}: not enough points");
    }
    let ks: Vec<usize> = (params.k_min..=params.k_max.min(n)).collect();
    if ks.is_empty() {
        return Err(Error::data(format!("no K in {}..={} fits {n} points", params.k_min, params.k_max)));
    }

    let jobs: Vec<(usize, usize)> = ks.iter().flat_map(|&k| (0..params.runs).map(move |h| (k, h))).collect();
    let labelings: Vec<Vec<usize>> = jobs
        .par_iter()
        .map(|&(k, h)| {
            let mut rng = seeds::rng(params.seed, k as u64, h as u64);
            kmeans(points, KMeansParams { k, max_iter: params.max_iter }, &mut rng).labels
        })
        .collect();

    let per_k: Vec<KConsensus> = ks
        .par_iter()
        .enumerate()
        .map(|(ki, &k)| {
            let runs = labelings[ki * params.runs..(ki + 1) * params.runs].to_vec();
            let c = consensus_matrix(&runs, n);
            KConsensus {
                k,
                pac: pac(&c, n, params.pac_low, params.pac_high),
                runs,
            }
        })
        .collect();

    let candidates: Vec<&KConsensus> = per_k.iter().filter(|c| c.k > 1 && c.k < n).collect();
    let best = if candidates.is_empty() {
        &per_k[0]
    } else {
        candidates
            .into_iter()
            .min_by(|a, b| a.pac.total_cmp(&b.pac).then(a.k.cmp(&b.k)))
            .unwrap()
    };
    let chosen_k = best.k;
    let consensus = consensus_matrix(&best.runs, n);
    let rows = Points::new(consensus.clone(), n);
    let mut rng = seeds::rng(params.seed, u64::MAX, chosen_k as u64);
    let partition = canonical_labels(
        &kmeans(&rows, KMeansParams { k: chosen_k, max_iter: params.max_iter }, &mut rng).labels,
    );
    Ok(ConsensusModel {
        tags: tags.to_vec(),
        per_k,
        chosen_k,
        consensus,
        partition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_runs_give_binary_matrix() {
        let runs = vec![vec![0, 0, 1, 1]; 20];
        let c = consensus_matrix(&runs, 4);
        assert!(c.iter().all(|&x| x == 0.0 || x == 1.0));
        assert_eq!(pac(&c, 4, 0.1, 0.9), 0.0);
        for i in 0..4 {
            assert_eq!(c[i * 4 + i], 1.0);
        }
    }

    #[test]
    fn pac_is_label_permutation_invariant() {
        let runs = vec![vec![0, 0, 1, 2], vec![1, 0, 0, 2], vec![2, 2, 1, 0]];
        let relabeled: Vec<Vec<usize>> = runs.iter().map(|r| r.iter().map(|&l| (l + 1) % 3).collect()).collect();
        let a = consensus_matrix(&runs, 4);
        let b = consensus_matrix(&relabeled, 4);
        assert_eq!(a, b);
        assert_eq!(pac(&a, 4, 0.1, 0.9), pac(&b, 4, 0.1, 0.9));
    }

    #[test]
    fn pac_bounds_are_strict() {
        // entries exactly at 0.1 or 0.9 are not ambiguous
        let c = vec![1.0, 0.1, 0.9, 0.1, 1.0, 0.5, 0.9, 0.5, 1.0];
        assert!((pac(&c, 3, 0.1, 0.9) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn oversized_k_is_skipped() {
        let tags: Vec<String> = (0..4).map(|i| i.to_string()).collect();
        let pts = Points::from_rows(&[vec![0.0], vec![0.1], vec![5.0], vec![5.1]]);
        let m = consensus_cluster_points(
            &tags,
            &pts,
            ConsensusParams { k_max: 10, runs: 5, ..Default::default() },
        )
        .unwrap();
        assert_eq!(m.per_k.last().unwrap().k, 4);
        assert_eq!(m.chosen_k, 2);
        assert_eq!(m.partition, vec![0, 0, 1, 1]);
    }
}
