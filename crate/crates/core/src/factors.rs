//! Non-negative factorisation of the affect matrix, `X ≈ W H`.
//!
//! Rows of `X` are posts, columns the 18 affect dimensions. `H` (K × 18)
//! gives the composition of each latent factor and `W` (n × K) the loading
//! of every post on each factor.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::affect::{AffectVector, AFFECT_DIMS};
use crate::error::{Error, Result};
use crate::seeds;

/// Non-negative n × 18 matrix keyed by post id.
#[derive(Debug, Clone, PartialEq)]
pub struct AffectMatrix {
    pub ids: Vec<String>,
    pub x: DMatrix<f64>,
}

impl AffectMatrix {
    pub fn new(ids: Vec<String>, x: DMatrix<f64>) -> Result<Self> {
        if ids.len() != x.nrows() {
            return Err(Error::data(format!("{} ids for {} rows", ids.len(), x.nrows())));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::data(format!("affect matrix entry {v} is negative or not finite")));
        }
        Ok(AffectMatrix { ids, x })
    }

    pub fn from_vectors<'a>(rows: impl IntoIterator<Item = (&'a str, &'a AffectVector)>) -> Result<Self> {
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for (id, v) in rows {
            ids.push(id.to_string());
            data.extend_from_slice(&v.dims());
        }
        let n = ids.len();
        Self::new(ids, DMatrix::from_row_slice(n, AFFECT_DIMS.len(), &data))
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmfParams {
    pub max_iter: usize,
    /// Stop when one iteration lowers the objective by less than this
    /// fraction of its initial value.
    pub tol: f64,
    pub seed: u64,
}

impl Default for NmfParams {
    fn default() -> Self {
        NmfParams {
            max_iter: 2000,
            tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub k: usize,
    pub ids: Vec<String>,
    /// n × K loadings.
    pub w: DMatrix<f64>,
    /// K × m compositions.
    pub h: DMatrix<f64>,
    /// Squared Frobenius residual at initialisation and after every iteration.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub explained_variance: f64,
    /// Squared Frobenius norm of `X`.
    pub total: f64,
}

impl FactorModel {
    pub fn residual(&self) -> f64 {
        *self.objective.last().expect("objective has the initial value")
    }

    /// `dimension,NMF1..NMFK`: one row per affect dimension.
    pub fn write_h_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(std::iter::once("dimension".to_string()).chain(factor_names(self.k)))?;
        for (j, dim) in AFFECT_DIMS.iter().enumerate() {
            let rec = std::iter::once(dim.to_string()).chain((0..self.k).map(|c| self.h[(c, j)].to_string()));
            w.write_record(rec)?;
        }
        w.flush().map_err(|e| Error::data(e.to_string()))?;
        Ok(())
    }

    /// `id,NMF1..NMFK`: one row per post.
    pub fn write_w_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(std::iter::once("id".to_string()).chain(factor_names(self.k)))?;
        for (i, id) in self.ids.iter().enumerate() {
            let rec = std::iter::once(id.clone()).chain((0..self.k).map(|c| self.w[(i, c)].to_string()));
            w.write_record(rec)?;
        }
        w.flush().map_err(|e| Error::data(e.to_string()))?;
        Ok(())
    }
}

/// Loadings written by [`FactorModel::write_w_csv`]: factor names, ids and
/// the n × K matrix.
pub fn read_w_csv<R: std::io::Read>(input: R) -> Result<(Vec<String>, Vec<String>, DMatrix<f64>)> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.len() < 2 || &header[0] != "id" {
        return Err(Error::data("loadings file must start with an id column and one column per factor"));
    }
    let names: Vec<String> = header.iter().skip(1).map(String::from).collect();
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        ids.push(rec[0].to_string());
        for v in rec.iter().skip(1) {
            let x: f64 = v
                .parse()
                .map_err(|_| Error::data(format!("loading {v:?} of {} is not a number", &rec[0])))?;
            data.push(x);
        }
    }
    let w = DMatrix::from_row_slice(ids.len(), names.len(), &data);
    Ok((names, ids, w))
}

pub fn factor_names(k: usize) -> impl Iterator<Item = String> {
    (1..=k).map(|c| format!("NMF{c}"))
}

fn sq_residual(x: &DMatrix<f64>, w: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
    let wh = w * h;
    x.iter().zip(wh.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn pos_neg(v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (v.iter().map(|x| x.max(0.0)).collect(), v.iter().map(|x| (-x).max(0.0)).collect())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// SVD-based non-negative start; zeros are filled with small seeded values.
fn nndsvd_init(x: &DMatrix<f64>, k: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = x.shape();
    let svd = x.clone().svd(true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let s = &svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));

    let mut w = DMatrix::zeros(n, k);
    let mut h = DMatrix::zeros(k, m);
    for (c, &j) in order.iter().take(k).enumerate() {
        let uj: Vec<f64> = u.column(j).iter().copied().collect();
        let vj: Vec<f64> = vt.row(j).iter().copied().collect();
        let (ucol, vrow, sigma): (Vec<f64>, Vec<f64>, f64) = if c == 0 {
            let su = uj.iter().sum::<f64>().signum();
            let su = if su == 0.0 { 1.0 } else { su };
            (uj.iter().map(|v| (v * su).max(0.0)).collect::<Vec<_>>(), vj.iter().map(|v| (v * su).max(0.0)).collect::<Vec<_>>(), 1.0)
        } else {
            let (up, un) = pos_neg(&uj);
            let (vp, vn) = pos_neg(&vj);
            let (nup, nvp, nun, nvn) = (norm(&up), norm(&vp), norm(&un), norm(&vn));
            let (mp, mn) = (nup * nvp, nun * nvn);
            if mp >= mn {
                if mp == 0.0 {
                    continue;
                }
                (up.iter().map(|v| v / nup).collect(), vp.iter().map(|v| v / nvp).collect(), mp)
            } else {
                (un.iter().map(|v| v / nun).collect(), vn.iter().map(|v| v / nvn).collect(), mn)
            }
        };
        let scale = (s[j] * sigma).sqrt();
        for i in 0..n {
            w[(i, c)] = scale * ucol[i];
        }
        for jj in 0..m {
            h[(c, jj)] = scale * vrow[jj];
        }
    }

    let avg = x.mean();
    let mut rng = seeds::rng(seed, 0x6e6d_66, k as u64);
    let fill = avg / 100.0;
    for v in w.iter_mut().chain(h.iter_mut()) {
        if *v < 1e-12 * avg.max(f64::MIN_POSITIVE) {
            *v = fill * rng.random::<f64>();
        }
    }
    (w, h)
}

fn multiplicative_step(num: &DMatrix<f64>, den: &DMatrix<f64>, target: &mut DMatrix<f64>) {
    for ((t, &a), &b) in target.iter_mut().zip(num.iter()).zip(den.iter()) {
        if b > 0.0 {
            *t *= a / b;
        }
    }
}

/// Lee-Seung multiplicative updates for the squared Frobenius loss.
pub fn fit_nmf(data: &AffectMatrix, k: usize, params: NmfParams) -> Result<FactorModel> {
    let x = &data.x;
    let (n, m) = x.shape();
    if k == 0 || k > n {
        return Err(Error::data(format!("K = {k} needs 1 <= K <= n = {n}")));
    }
    let total: f64 = x.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return Err(Error::data("affect matrix is all zero"));
    }
    if x.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::data("affect matrix has negative or non-finite entries"));
    }
    let (mut w, mut h) = nndsvd_init(x, k, params.seed);
    let mut objective = vec![sq_residual(x, &w, &h)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iter {
        iterations += 1;
        let wt = w.transpose();
        let num_h = &wt * x;
        let den_h = (&wt * &w) * &h;
        multiplicative_step(&num_h, &den_h, &mut h);

        let ht = h.transpose();
        let num_w = x * &ht;
        let den_w = &w * (&h * &ht);
        multiplicative_step(&num_w, &den_w, &mut w);

        let f = sq_residual(x, &w, &h);
        let prev = *objective.last().unwrap();
        objective.push(f);
        if !f.is_finite() {
            return Err(Error::numerical(format!("NMF objective diverged at iteration {iterations}")));
        }
        if prev <= 0.0 || (prev - f) / objective[0] < params.tol {
            converged = true;
            break;
        }
    }
    debug_assert_eq!(h.ncols(), m);
    let residual = *objective.last().unwrap();
    Ok(FactorModel {
        k,
        ids: data.ids.clone(),
        w,
        h,
        objective,
        iterations,
        converged,
        explained_variance: (1.0 - residual / total).clamp(0.0, 1.0),
        total,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    /// `(K, explained variance)` in increasing K.
    pub curve: Vec<(usize, f64)>,
    pub chosen: usize,
    /// False when no point of the curve is concave and the largest K was returned.
    pub elbow_found: bool,
}

impl KSelection {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["K", "ev"])?;
        for (k, ev) in &self.curve {
            w.write_record([k.to_string(), ev.to_string()])?;
        }
        w.flush().map_err(|e| Error::data(e.to_string()))?;
        Ok(())
    }
}

/// Elbow of an explained-variance curve: the K with the largest positive
/// second difference `(ev(K) - ev(K-1)) - (ev(K+1) - ev(K))`, with
/// `ev(0) = 0`. Ties go to the smaller K.
pub fn elbow(curve: &[(usize, f64)]) -> (usize, bool) {
    let last = curve.last().map_or(1, |c| c.0);
    if curve.len() < 2 {
        return (last, curve.len() == 1);
    }
    let mut best: Option<(usize, f64)> = None;
    for i in 0..curve.len() - 1 {
        let (k, ev) = curve[i];
        let before = if i == 0 {
            if k == 1 {
                0.0
            } else {
                continue;
            }
        } else {
            curve[i - 1].1
        };
        let d2 = (ev - before) - (curve[i + 1].1 - ev);
        if d2 > 0.0 && best.is_none_or(|(_, b)| d2 > b) {
            best = Some((k, d2));
        }
    }
    match best {
        Some((k, _)) => (k, true),
        None => (last, false),
    }
}

/// Fits every K in `ks` (each with a seed derived from `params.seed` and K)
/// and picks the elbow.
pub fn select_k(data: &AffectMatrix, ks: &[usize], params: NmfParams) -> Result<(KSelection, Vec<FactorModel>)> {
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() || ks[0] == 0 || *ks.last().unwrap() > AFFECT_DIMS.len().min(data.n()) {
        return Err(Error::config(format!("K range must lie within 1..={}", AFFECT_DIMS.len().min(data.n()))));
    }
    let models: Vec<FactorModel> = ks
        .par_iter()
        .map(|&k| fit_nmf(data, k, NmfParams { seed: seeds::derive(params.seed, k as u64, 0), ..params }))
        .collect::<Result<_>>()?;
    let curve: Vec<(usize, f64)> = models.iter().map(|m| (m.k, m.explained_variance)).collect();
    let (chosen, elbow_found) = elbow(&curve);
    if !elbow_found {
        log::warn!("explained-variance curve has no elbow; using K = {chosen}");
    }
    Ok((KSelection { curve, chosen, elbow_found }, models))
}

/// Mean loading per group, normalised to percentages. `members` lists
/// `(id, group)` pairs; an id may belong to several groups.
pub fn predominance<'a>(
    model: &FactorModel,
    members: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let index: std::collections::HashMap<&str, usize> =
        model.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut sums: BTreeMap<&str, (usize, Vec<f64>)> = BTreeMap::new();
    for (id, g) in members {
        let &i = index
            .get(id)
            .ok_or_else(|| Error::data(format!("grouped id {id} has no loading row")))?;
        let e = sums.entry(g).or_insert_with(|| (0, vec![0.0; model.k]));
        e.0 += 1;
        for c in 0..model.k {
            e.1[c] += model.w[(i, c)];
        }
    }
    let mut out = BTreeMap::new();
    for (g, (count, s)) in sums {
        let means: Vec<f64> = s.iter().map(|v| v / count as f64).collect();
        let total: f64 = means.iter().sum();
        if total <= 0.0 {
            log::warn!("group {g} has zero loading on every factor, omitted");
            continue;
        }
        out.insert(g.to_string(), means.iter().map(|v| 100.0 * v / total).collect());
    }
    Ok(out)
}

pub fn write_predominance_csv<W: Write>(out: W, k: usize, table: &BTreeMap<String, Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(std::iter::once("group".to_string()).chain(factor_names(k)))?;
    for (g, row) in table {
        w.write_record(std::iter::once(g.clone()).chain(row.iter().map(|v| v.to_string())))?;
    }
    w.flush().map_err(|e| Error::data(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: usize, f: impl Fn(usize, usize) -> f64) -> AffectMatrix {
        let x = DMatrix::from_fn(rows, 18, f);
        AffectMatrix::new((0..rows).map(|i| i.to_string()).collect(), x).unwrap()
    }

    // the residual is only known to about eps * ||X||^2 in absolute terms
    fn assert_monotone(m: &FactorModel) {
        let floor = 64.0 * f64::EPSILON * m.total;
        for w in m.objective.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-10) + floor, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn rank_one_is_exact() {
        let a = matrix(30, |i, j| (1 + i % 7) as f64 * (1 + j % 5) as f64);
        let m = fit_nmf(&a, 1, NmfParams::default()).unwrap();
        assert!(m.explained_variance >= 0.999, "{}", m.explained_variance);
        assert_monotone(&m);
    }

    #[test]
    fn full_k_reconstructs() {
        let a = matrix(40, |i, j| ((i * 31 + j * 17) % 11) as f64 / 10.0 + if i % 18 == j { 1.0 } else { 0.0 });
        let m = fit_nmf(&a, 18, NmfParams::default()).unwrap();
        assert!(m.explained_variance >= 0.99, "{}", m.explained_variance);
        assert!(m.w.iter().chain(m.h.iter()).all(|v| *v >= 0.0));
        assert_monotone(&m);
    }

    #[test]
    fn rejects_bad_input() {
        let mut x = DMatrix::zeros(3, 18);
        assert!(fit_nmf(&AffectMatrix::new(vec!["a".into(), "b".into(), "c".into()], x.clone()).unwrap(), 1, NmfParams::default()).is_err());
        x[(0, 0)] = -1.0;
        assert!(AffectMatrix::new(vec!["a".into(), "b".into(), "c".into()], x).is_err());
    }

    #[test]
    fn loadings_round_trip() {
        let x = matrix(6, |i, j| ((i * 7 + j * 3) % 5) as f64 / 3.0);
        let m = fit_nmf(&x, 2, NmfParams::default()).unwrap();
        let mut buf = Vec::new();
        m.write_w_csv(&mut buf).unwrap();
        let (names, ids, w) = read_w_csv(buf.as_slice()).unwrap();
        assert_eq!(names, ["NMF1", "NMF2"]);
        assert_eq!(ids, m.ids);
        assert_eq!(w, m.w);
    }

    #[test]
    fn elbow_rule() {
        assert_eq!(elbow(&[(1, 0.99), (2, 0.995), (3, 0.999)]), (1, true));
        assert_eq!(elbow(&[(1, 0.3)]), (1, true));
        let curve = [(1, 0.3), (2, 0.55), (3, 0.78), (4, 0.97), (5, 0.975), (6, 0.98)];
        assert_eq!(elbow(&curve).0, 4);
        // convex curve: no elbow
        assert_eq!(elbow(&[(1, 0.1), (2, 0.3), (3, 0.6)]), (3, false));
    }

    #[test]
    fn predominance_percentages() {
        let model = FactorModel {
            k: 4,
            ids: vec!["a".into(), "b".into()],
            w: DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 1.0, 1.0, 2.0, 0.0, 0.0, 2.0]),
            h: DMatrix::zeros(4, 18),
            objective: vec![0.0],
            iterations: 0,
            converged: true,
            explained_variance: 1.0,
            total: 1.0,
        };
        let t = predominance(&model, [("a", "g1"), ("b", "g2"), ("b", "g3"), ("a", "g3")]).unwrap();
        assert_eq!(t["g1"], vec![25.0; 4]);
        assert_eq!(t["g2"], vec![50.0, 0.0, 0.0, 50.0]);
        assert_eq!(t["g3"], vec![37.5, 12.5, 12.5, 37.5]);
        assert!(predominance(&model, [("zz", "g")]).is_err());
    }
}
