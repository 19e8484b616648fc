//! Lloyd's K-means with k-means++ seeding.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::sq_dist;

/// Row-major point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    data: Vec<f64>,
    dim: usize,
}

impl Points {
    pub fn new(data: Vec<f64>, dim: usize) -> Self {
        assert!(dim > 0 && data.len() % dim == 0, "data length must be a multiple of dim");
        Points { data, dim }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(1, Vec::len);
        Points::new(rows.iter().flatten().copied().collect(), dim)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations: usize,
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(points: &Points, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = d2.iter().rposition(|&d| d > 0.0).unwrap_or(n - 1);
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > u && d > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // every point coincides with a chosen centre
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(next)));
        }
    }
    chosen.into_iter().map(|i| points.row(i).to_vec()).collect()
}

/// Clusters `points` into `k` groups. Iterates until assignments stop
/// changing or `max_iter` is reached. An emptied cluster is re-seeded with
/// the point farthest from its current centroid.
pub fn kmeans(points: &Points, params: KMeansParams, rng: &mut ChaCha8Rng) -> KMeansResult {
    let n = points.len();
    let k = params.k;
    assert!(k >= 1 && k <= n, "k must be in 1..=n");
    let dim = points.dim();
    let mut centroids = plus_plus_init(points, k, rng);
    let mut labels = vec![usize::MAX; n];
    let mut iterations = 0;
    loop {
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for i in 0..n {
            let (c, d) = nearest(points.row(i), &centroids);
            dists[i] = d;
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        for c in 0..k {
            if sizes[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| sizes[labels[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                .expect("k <= n leaves a donor cluster");
            sizes[labels[far]] -= 1;
            labels[far] = c;
            sizes[c] = 1;
            dists[far] = 0.0;
            changed = true;
        }
        if !changed || iterations >= params.max_iter {
            break;
        }
        iterations += 1;
        for c in centroids.iter_mut() {
            c.iter_mut().for_each(|x| *x = 0.0);
        }
        for i in 0..n {
            let c = &mut centroids[labels[i]];
            for (x, p) in c.iter_mut().zip(points.row(i)) {
                *x += p;
            }
        }
        for (c, &s) in centroids.iter_mut().zip(&sizes) {
            c.iter_mut().for_each(|x| *x /= s as f64);
        }
    }
    let inertia = (0..n).map(|i| sq_dist(points.row(i), &centroids[labels[i]])).sum();
    debug_assert!(centroids.iter().all(|c| c.len() == dim));
    KMeansResult {
        labels,
        centroids,
        inertia,
        iterations,
    }
}

/// Renumbers labels by order of first appearance.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn separates_two_groups() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| if i < 10 { vec![i as f64 * 0.01, 0.0] } else { vec![10.0 + i as f64 * 0.01, 5.0] })
            .collect();
        let pts = Points::from_rows(&rows);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = kmeans(&pts, KMeansParams { k: 2, max_iter: 100 }, &mut rng);
        let l = canonical_labels(&r.labels);
        assert!(l[..10].iter().all(|&x| x == 0));
        assert!(l[10..].iter().all(|&x| x == 1));
    }

    #[test]
    fn k_equals_n_and_duplicates() {
        let pts = Points::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = kmeans(&pts, KMeansParams { k: 3, max_iter: 100 }, &mut rng);
        let mut l = r.labels.clone();
        l.sort();
        assert_eq!(l, vec![0, 1, 2]);
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn canonical_relabel() {
        assert_eq!(canonical_labels(&[2, 2, 0, 1, 0]), vec![0, 0, 1, 2, 1]);
    }
}
