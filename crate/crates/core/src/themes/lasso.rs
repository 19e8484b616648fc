//! L1-penalised least squares by cyclic coordinate descent.
//!
//! Minimises `1/(2n) * ||y - b - X w||^2 + lambda * ||w||_1` with an
//! unpenalised intercept `b`. Columns are centred implicitly so sparse
//! bag-of-words designs stay sparse: the residual is kept as a sparse-updated
//! vector plus a scalar offset.

use nalgebra::DMatrix;

use crate::textprep::SparseBow;

/// Column-compressed design matrix with column means.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDesign {
    n_rows: usize,
    cols: Vec<Vec<(u32, f64)>>,
    sums: Vec<f64>,
    /// Squared norms of the centred columns.
    centred_sq: Vec<f64>,
}

impl SparseDesign {
    pub fn from_bows(rows: &[&SparseBow], n_features: usize) -> Self {
        let mut cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_features];
        for (i, row) in rows.iter().enumerate() {
            for &(j, c) in &row.0 {
                cols[j].push((i as u32, c as f64));
            }
        }
        Self::from_columns(rows.len(), cols)
    }

    pub fn from_dense(x: &DMatrix<f64>) -> Self {
        let cols = (0..x.ncols())
            .map(|j| {
                (0..x.nrows())
                    .filter(|&i| x[(i, j)] != 0.0)
                    .map(|i| (i as u32, x[(i, j)]))
                    .collect()
            })
            .collect();
        Self::from_columns(x.nrows(), cols)
    }

    fn from_columns(n_rows: usize, cols: Vec<Vec<(u32, f64)>>) -> Self {
        let n = n_rows as f64;
        let sums: Vec<f64> = cols.iter().map(|c| c.iter().map(|&(_, v)| v).sum()).collect();
        let centred_sq = cols
            .iter()
            .zip(&sums)
            .map(|(c, &s)| {
                let sq: f64 = c.iter().map(|&(_, v)| v * v).sum();
                (sq - s * s / n).max(0.0)
            })
            .collect();
        SparseDesign {
            n_rows,
            cols,
            sums,
            centred_sq,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.cols.len()
    }

    pub fn mean(&self, j: usize) -> f64 {
        self.sums[j] / self.n_rows as f64
    }

    /// Row-wise product `X w` (uncentred).
    pub fn matvec(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        for (col, &wj) in self.cols.iter().zip(w) {
            if wj != 0.0 {
                for &(i, v) in col {
                    out[i as usize] += v * wj;
                }
            }
        }
        out
    }

    /// Dense copy, mainly for checks.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.cols.len());
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                m[(i as usize, j)] = v;
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoParams {
    /// Stop when the largest coefficient move, scaled by the column's
    /// standard deviation, drops below `tol`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoParams {
    fn default() -> Self {
        LassoParams {
            tol: 1e-10,
            max_sweeps: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub sweeps: usize,
    pub converged: bool,
}

impl LassoFit {
    pub fn predict(&self, row: &SparseBow) -> f64 {
        self.intercept + row.0.iter().map(|&(j, c)| self.weights[j] * c as f64).sum::<f64>()
    }

    pub fn nonzeros(&self) -> usize {
        self.weights.iter().filter(|&&w| w != 0.0).count()
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Smallest penalty for which every weight is zero.
pub fn lambda_max(x: &SparseDesign, y: &[f64]) -> f64 {
    let n = x.n_rows as f64;
    let ymean = crate::linalg::mean(y);
    (0..x.n_features())
        .map(|j| {
            let dot: f64 = x.cols[j].iter().map(|&(i, v)| v * (y[i as usize] - ymean)).sum();
            (dot / n).abs()
        })
        .fold(0.0, f64::max)
}

/// Geometric grid from `lambda_max` down to `lambda_max * ratio`.
pub fn lambda_grid(lmax: f64, count: usize, ratio: f64) -> Vec<f64> {
    if count == 1 {
        return vec![lmax];
    }
    (0..count)
        .map(|i| lmax * ratio.powf(i as f64 / (count - 1) as f64))
        .collect()
}

pub fn lasso(x: &SparseDesign, y: &[f64], lambda: f64, warm: Option<&[f64]>, params: LassoParams) -> LassoFit {
    assert_eq!(y.len(), x.n_rows, "target length must match design rows");
    let n = x.n_rows as f64;
    let p = x.n_features();
    let ymean = crate::linalg::mean(y);
    let mut w: Vec<f64> = warm.map_or_else(|| vec![0.0; p], <[f64]>::to_vec);

    // r_i = rt_i + shift is the centred residual; rsum tracks sum(rt).
    let xw = x.matvec(&w);
    let mut rt: Vec<f64> = y.iter().zip(&xw).map(|(yi, xi)| yi - ymean - xi).collect();
    let mut shift: f64 = (0..p).map(|j| x.mean(j) * w[j]).sum();
    let mut rsum: f64 = rt.iter().sum();

    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < params.max_sweeps {
        sweeps += 1;
        let mut max_move = 0.0f64;
        for j in 0..p {
            let a = x.centred_sq[j] / n;
            if a <= 0.0 {
                w[j] = 0.0;
                continue;
            }
            let mu = x.mean(j);
            let sparse_dot: f64 = x.cols[j].iter().map(|&(i, v)| v * rt[i as usize]).sum();
            let grad = (sparse_dot + shift * x.sums[j] - mu * (rsum + n * shift)) / n;
            let old = w[j];
            let new = soft_threshold(grad + a * old, lambda) / a;
            let delta = new - old;
            if delta != 0.0 {
                for &(i, v) in &x.cols[j] {
                    rt[i as usize] -= delta * v;
                }
                rsum -= delta * x.sums[j];
                shift += delta * mu;
                w[j] = new;
                max_move = max_move.max(delta.abs() * a.sqrt());
            }
        }
        if max_move < params.tol {
            converged = true;
            break;
        }
    }
    let intercept = ymean - (0..p).map(|j| x.mean(j) * w[j]).sum::<f64>();
    LassoFit {
        weights: w,
        intercept,
        lambda,
        sweeps,
        converged,
    }
}

/// Solutions along a decreasing penalty grid with warm starts.
pub fn lasso_path(x: &SparseDesign, y: &[f64], lambdas: &[f64], params: LassoParams) -> Vec<LassoFit> {
    let mut out: Vec<LassoFit> = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let warm = out.last().map(|f| f.weights.clone());
        out.push(lasso(x, y, l, warm.as_deref(), params));
    }
    out
}
