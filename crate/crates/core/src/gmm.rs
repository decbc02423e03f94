//! Gaussian mixtures with full per-component covariance, fitted by EM.
//!
//! Shared by the driver profiler and the clustering comparison. Means are
//! seeded with k-means++, every point is hard-assigned to its nearest seed for
//! the first M-step, and a small ridge is added to each covariance diagonal.
//! The ridge is relative to the mean per-column variance of the data, so it
//! stays negligible whatever the data scale and the log-likelihood still
//! rises at every iteration.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmOptions {
    pub max_iter: usize,
    /// Stop once the mean per-point log-likelihood gains less than this.
    pub tol: f64,
    /// Covariance floor as a fraction of the mean per-column data variance.
    pub ridge: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_iter: 500,
            tol: 1e-7,
            ridge: DEFAULT_RIDGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    /// One row per component.
    pub means: DMatrix<f64>,
    pub covariances: Vec<DMatrix<f64>>,
    /// Total log-likelihood after each EM iteration.
    pub log_likelihood_trace: Vec<f64>,
    pub converged: bool,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn row(data: &DMatrix<f64>, i: usize) -> Vec<f64> {
    data.row(i).iter().copied().collect()
}

/// k-means++ seeding: indices of the chosen rows.
pub fn kmeans_plus_plus(data: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = data.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| row(data, i)).collect();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = rows
        .iter()
        .map(|r| squared_distance(r, &rows[chosen[0]]))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // All remaining points coincide with a centre; take any unused row.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(r, &rows[next]));
        }
    }
    chosen
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Log-density of every row under N(mean, cov), via a Cholesky factor.
fn log_densities(data: &DMatrix<f64>, mean: &DVector<f64>, chol: &Cholesky<f64, Dyn>) -> Vec<f64> {
    let d = data.ncols() as f64;
    let l = chol.l_dirty();
    let log_det: f64 = 2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>();
    let mut centred = data.transpose();
    for mut c in centred.column_iter_mut() {
        c -= mean;
    }
    let z = l
        .solve_lower_triangular(&centred)
        .expect("Cholesky factor is invertible");
    let norm = d * (2.0 * std::f64::consts::PI).ln() + log_det;
    z.column_iter()
        .map(|c| -0.5 * (norm + c.norm_squared()))
        .collect()
}

fn factor(cov: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(cov.clone())
        .ok_or_else(|| Error::invalid("covariance is not positive definite; increase the ridge"))
}

impl GaussianMixture {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dims(&self) -> usize {
        self.means.ncols()
    }

    /// Per-point, per-component log of weight times density.
    fn weighted_log_densities(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = data.nrows();
        let mut out = DMatrix::from_element(n, self.k(), f64::NEG_INFINITY);
        for j in 0..self.k() {
            if self.weights[j] <= 0.0 {
                continue;
            }
            let chol = factor(&self.covariances[j])?;
            let mean = self.means.row(j).transpose();
            let ld = log_densities(data, &mean, &chol);
            let lw = self.weights[j].ln();
            for (i, v) in ld.into_iter().enumerate() {
                out[(i, j)] = lw + v;
            }
        }
        Ok(out)
    }

    fn check_dims(&self, data: &DMatrix<f64>) -> Result<()> {
        if data.ncols() != self.dims() {
            return Err(Error::invalid(format!(
                "data has {} columns but the model was fitted on {}",
                data.ncols(),
                self.dims()
            )));
        }
        Ok(())
    }

    /// Responsibilities (n x K); each row sums to one.
    pub fn responsibilities(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dims(data)?;
        let mut w = self.weighted_log_densities(data)?;
        for i in 0..w.nrows() {
            let r: Vec<f64> = w.row(i).iter().copied().collect();
            let z = log_sum_exp(&r);
            for j in 0..w.ncols() {
                w[(i, j)] = (w[(i, j)] - z).exp();
            }
        }
        Ok(w)
    }

    pub fn log_likelihood(&self, data: &DMatrix<f64>) -> Result<f64> {
        self.check_dims(data)?;
        let w = self.weighted_log_densities(data)?;
        Ok((0..w.nrows())
            .map(|i| log_sum_exp(&w.row(i).iter().copied().collect::<Vec<_>>()))
            .sum())
    }

    /// Hard assignment by largest responsibility; ties go to the lowest index.
    pub fn predict(&self, data: &DMatrix<f64>) -> Result<Vec<usize>> {
        let r = self.responsibilities(data)?;
        Ok((0..r.nrows())
            .map(|i| {
                let mut best = 0;
                for j in 1..r.ncols() {
                    if r[(i, j)] > r[(i, best)] {
                        best = j;
                    }
                }
                best
            })
            .collect())
    }

    /// Free parameters: means, full covariances and K-1 weights.
    pub fn n_parameters(&self) -> usize {
        let (k, d) = (self.k(), self.dims());
        k * d + k * d * (d + 1) / 2 + k - 1
    }

    /// Bayesian information criterion, -2 log L + p ln N.
    pub fn bic(&self, data: &DMatrix<f64>) -> Result<f64> {
        Ok(-2.0 * self.log_likelihood(data)?
            + self.n_parameters() as f64 * (data.nrows() as f64).ln())
    }
}

/// Weighted mean and covariance (plus ridge) of `data` under weights `r`.
fn weighted_moments(
    data: &DMatrix<f64>,
    r: &[f64],
    ridge: f64,
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let nk: f64 = r.iter().sum();
    let d = data.ncols();
    let w = DVector::from_column_slice(r);
    let mean = if nk > 0.0 {
        data.tr_mul(&w) / nk
    } else {
        DVector::zeros(d)
    };
    let mut centred = data.clone();
    for (i, mut rw) in centred.row_iter_mut().enumerate() {
        rw -= mean.transpose();
        rw *= r[i].sqrt();
    }
    let mut cov = if nk > 0.0 {
        centred.tr_mul(&centred) / nk
    } else {
        DMatrix::zeros(d, d)
    };
    for i in 0..d {
        cov[(i, i)] += ridge;
    }
    (nk, mean, cov)
}

fn m_step(
    data: &DMatrix<f64>,
    resp: &DMatrix<f64>,
    ridge: f64,
    previous: Option<&GaussianMixture>,
) -> GaussianMixture {
    let (n, k, d) = (data.nrows(), resp.ncols(), data.ncols());
    let mut weights = vec![0.0; k];
    let mut means = DMatrix::zeros(k, d);
    let mut covariances = Vec::with_capacity(k);
    for j in 0..k {
        let r: Vec<f64> = resp.column(j).iter().copied().collect();
        let (nk, mean, cov) = weighted_moments(data, &r, ridge);
        if nk <= f64::EPSILON * n as f64 {
            // An empty component keeps its old shape and drops out with weight 0.
            match previous {
                Some(prev) => {
                    means.set_row(j, &prev.means.row(j));
                    covariances.push(prev.covariances[j].clone());
                }
                None => covariances.push(DMatrix::identity(d, d) * ridge.max(f64::MIN_POSITIVE)),
            }
            continue;
        }
        weights[j] = nk / n as f64;
        means.set_row(j, &mean.transpose());
        covariances.push(cov);
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    GaussianMixture {
        weights,
        means,
        covariances,
        log_likelihood_trace: Vec::new(),
        converged: false,
    }
}

/// Mean per-column variance, or 1 for constant data.
fn data_scale(data: &DMatrix<f64>) -> f64 {
    let n = data.nrows() as f64;
    let v = data
        .column_iter()
        .map(|c| {
            let m = c.sum() / n;
            c.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
        })
        .sum::<f64>()
        / data.ncols() as f64;
    if v > 0.0 {
        v
    } else {
        1.0
    }
}

/// Fits a K-component mixture to the rows of `data`.
pub fn fit(data: &DMatrix<f64>, k: usize, opts: &EmOptions, seed: u64) -> Result<GaussianMixture> {
    let n = data.nrows();
    if k == 0 {
        return Err(Error::invalid("number of components must be at least 1"));
    }
    if k > n {
        return Err(Error::invalid(format!(
            "{k} components requested for {n} points"
        )));
    }
    if data.ncols() == 0 {
        return Err(Error::invalid("data has no columns"));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("data contains non-finite values"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = kmeans_plus_plus(data, k, &mut rng);
    let centres: Vec<Vec<f64>> = seeds.iter().map(|&i| row(data, i)).collect();
    let mut resp = DMatrix::zeros(n, k);
    for i in 0..n {
        let x = row(data, i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, c) in centres.iter().enumerate() {
            let dd = squared_distance(&x, c);
            if dd < best_d {
                best_d = dd;
                best = j;
            }
        }
        resp[(i, best)] = 1.0;
    }
    let ridge = opts.ridge * data_scale(data);
    let mut model = m_step(data, &resp, ridge, None);
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let resp = model.responsibilities(data)?;
        model = m_step(data, &resp, ridge, Some(&model));
        let ll = model.log_likelihood(data)?;
        let gain = trace.last().map(|prev: &f64| (ll - prev) / n as f64);
        trace.push(ll);
        if gain.is_some_and(|g| g.abs() < opts.tol) {
            converged = true;
            break;
        }
    }
    model.log_likelihood_trace = trace;
    model.converged = converged;
    Ok(model)
}
