//! Rank-based inverse-normal transform.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Offset `a` in `(rank - a) / (n + 1 - 2a)`; 0.5 gives `(rank - 0.5) / n`.
pub const DEFAULT_OFFSET: f64 = 0.5;

/// 1-based ranks; tied values share the mean of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn quantile_normalize(values: &[f64]) -> Result<Vec<f64>> {
    quantile_normalize_with(values, DEFAULT_OFFSET)
}

pub fn quantile_normalize_with(values: &[f64], offset: f64) -> Result<Vec<f64>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("quantile normalisation needs finite values"));
    }
    let Some(first) = values.first() else {
        return Err(Error::data("quantile normalisation of an empty column"));
    };
    if values.iter().all(|v| v == first) {
        return Err(Error::data("constant column cannot be quantile normalised"));
    }
    if !(0.0..1.0).contains(&offset) {
        return Err(Error::config("quantile offset must lie in [0, 1)"));
    }
    let n = values.len() as f64;
    let normal = Normal::standard();
    Ok(average_ranks(values)
        .into_iter()
        .map(|r| normal.inverse_cdf((r - offset) / (n + 1.0 - 2.0 * offset)))
        .collect())
}
