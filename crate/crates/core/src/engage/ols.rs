//! Ordinary least squares with classical standard errors.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::linalg::{lstsq, pinv_sym};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Fit of `y = b0 + X b + e`.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub intercept: f64,
    /// One entry per column of `X`.
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub t: Vec<f64>,
    /// Two-sided, t distribution with `n - p - 1` degrees of freedom.
    pub p: Vec<f64>,
    pub r2: f64,
    pub adj_r2: f64,
    pub n: usize,
    pub residuals: Vec<f64>,
}

pub fn fit_ols(x: &DMatrix<f64>, y: &[f64]) -> Result<OlsFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::data(format!("{} targets for {n} rows", y.len())));
    }
    if n <= p + 1 {
        return Err(Error::data(format!("OLS needs n > p + 1 (n = {n}, p = {p})")));
    }
    let mut design = DMatrix::from_element(n, p + 1, 1.0);
    design.columns_mut(1, p).copy_from(x);
    let yv = DVector::from_column_slice(y);
    let coef = lstsq(&design, &yv);
    let fitted = &design * &coef;
    let residuals: Vec<f64> = yv.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let ymean = yv.mean();
    let tss: f64 = yv.iter().map(|v| (v - ymean) * (v - ymean)).sum();
    if tss == 0.0 {
        return Err(Error::data("target is constant"));
    }
    let df = (n - p - 1) as f64;
    let sigma2 = rss / df;
    let cov = pinv_sym(&(design.transpose() * &design)) * sigma2;
    let tdist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::numerical(e.to_string()))?;
    let mut se = Vec::with_capacity(p);
    let mut t = Vec::with_capacity(p);
    let mut pv = Vec::with_capacity(p);
    for j in 1..=p {
        let s = cov[(j, j)].max(0.0).sqrt();
        let tj = if s > 0.0 {
            coef[j] / s
        } else if coef[j] == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(coef[j])
        };
        se.push(s);
        t.push(tj);
        pv.push(if tj.is_infinite() { 0.0 } else { (2.0 * tdist.sf(tj.abs())).min(1.0) });
    }
    let r2 = (1.0 - rss / tss).min(1.0);
    let adj_r2 = 1.0 - (1.0 - r2) * (n - 1) as f64 / df;
    Ok(OlsFit {
        intercept: coef[0],
        beta: coef.iter().skip(1).copied().collect(),
        se,
        t,
        p: pv,
        r2,
        adj_r2,
        n,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_fit() {
        let x = DMatrix::from_fn(30, 2, |i, j| ((i * (j + 3)) % 7) as f64 + i as f64 * 0.1 * j as f64);
        let y: Vec<f64> = (0..30).map(|i| 1.5 + 2.0 * x[(i, 0)] - 0.5 * x[(i, 1)]).collect();
        let f = fit_ols(&x, &y).unwrap();
        assert!((f.r2 - 1.0).abs() < 1e-12 && (f.adj_r2 - 1.0).abs() < 1e-12);
        assert!(f.residuals.iter().all(|r| r.abs() < 1e-9));
        assert!((f.beta[0] - 2.0).abs() < 1e-9 && (f.beta[1] + 0.5).abs() < 1e-9);
        assert!((f.intercept - 1.5).abs() < 1e-9);
    }

    #[test]
    fn residuals_orthogonal_to_columns() {
        let x = DMatrix::from_fn(40, 3, |i, j| ((i * 7 + j * 13) % 11) as f64 - 5.0);
        let y: Vec<f64> = (0..40).map(|i| ((i * 5) % 9) as f64).collect();
        let f = fit_ols(&x, &y).unwrap();
        for j in 0..3 {
            let d: f64 = x.column(j).iter().zip(&f.residuals).map(|(a, b)| a * b).sum();
            assert!(d.abs() < 1e-8);
        }
        assert!(f.adj_r2 <= f.r2);
        assert!(f.p.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn too_few_rows() {
        let x = DMatrix::zeros(3, 2);
        assert!(fit_ols(&x, &[1.0, 2.0, 3.0]).is_err());
    }
}
