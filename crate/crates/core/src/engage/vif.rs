//! Variance inflation screening.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::pinv_sym;

pub const DEFAULT_VIF_THRESHOLD: f64 = 5.0;

/// `1 - R^2` below this counts as exact collinearity.
const COLLINEAR_TOL: f64 = 1e-12;

/// Correlation matrix of the columns; a constant column gets a zero row.
fn correlation(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = x.shape();
    let mut z = x.clone();
    for j in 0..p {
        let mut col = z.column_mut(j);
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        let sd = col.norm();
        if sd > 0.0 {
            col /= sd;
        }
    }
    z.transpose() * z
}

/// VIF of every column, `1 / (1 - R_j^2)`, with `R_j^2` from regressing
/// column `j` on the others (with intercept). Constant or exactly collinear
/// columns get infinity.
pub fn vif(x: &DMatrix<f64>) -> Vec<f64> {
    let r = correlation(x);
    let p = r.ncols();
    (0..p)
        .map(|j| {
            if r[(j, j)] == 0.0 {
                return f64::INFINITY;
            }
            if p == 1 {
                return 1.0;
            }
            let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
            let sub = r.select_rows(&others).select_columns(&others);
            let rj = r.select_rows(&others).column(j).into_owned();
            let r2 = (rj.transpose() * pinv_sym(&sub) * &rj)[(0, 0)];
            let resid = 1.0 - r2;
            if resid <= COLLINEAR_TOL {
                f64::INFINITY
            } else {
                1.0 / resid
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VifOutcome {
    /// Surviving column indices in original order.
    pub retained: Vec<usize>,
    /// `(column, VIF at removal)` in removal order.
    pub dropped: Vec<(usize, f64)>,
    /// VIF of each retained column after filtering.
    pub final_vif: Vec<f64>,
}

/// Repeatedly drops the column with the largest VIF while any exceeds
/// `threshold`. Among equal maxima the later column goes, so the first copy
/// of a duplicated column survives.
pub fn vif_filter(x: &DMatrix<f64>, threshold: f64) -> Result<VifOutcome> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(Error::data(format!("VIF screening needs n > p (n = {n}, p = {p})")));
    }
    let mut retained: Vec<usize> = (0..p).collect();
    let mut dropped = Vec::new();
    loop {
        if retained.is_empty() {
            return Ok(VifOutcome { retained, dropped, final_vif: Vec::new() });
        }
        let v = vif(&x.select_columns(&retained));
        let (worst, &max) = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
            .expect("nonempty");
        if max <= threshold {
            return Ok(VifOutcome { retained, dropped, final_vif: v });
        }
        dropped.push((retained.remove(worst), max));
    }
}
