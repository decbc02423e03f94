//! Partition quality indices and adjusted Rand index.
//!
//! All indices use Euclidean distance and ignore noise points (label -1).

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NOISE: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionScores {
    pub silhouette: f64,
    pub calinski_harabasz: f64,
    pub davies_bouldin: f64,
}

/// Pairwise Euclidean distances, computed once and reused across partitions.
#[derive(Debug, Clone)]
pub struct Distances {
    n: usize,
    d: Vec<f64>,
}

impl Distances {
    pub fn new(points: &DMatrix<f64>) -> Self {
        let n = points.nrows();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| points.row(i).iter().copied().collect())
            .collect();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rows[i]
                    .iter()
                    .zip(&rows[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Distances { n, d }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

/// Groups point indices by label, skipping noise.
fn members(labels: &[i64]) -> BTreeMap<i64, Vec<usize>> {
    let mut m: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        if l != NOISE {
            m.entry(l).or_default().push(i);
        }
    }
    m
}

fn check(n: usize, labels: &[i64]) -> Result<BTreeMap<i64, Vec<usize>>> {
    if labels.len() != n {
        return Err(Error::invalid(format!(
            "{} labels for {n} points",
            labels.len()
        )));
    }
    let m = members(labels);
    if m.len() < 2 {
        return Err(Error::invalid(format!(
            "scores need at least 2 clusters, got {}",
            m.len()
        )));
    }
    Ok(m)
}

/// Mean silhouette over non-noise points; a point alone in its cluster scores 0.
pub fn silhouette_with(dist: &Distances, labels: &[i64]) -> Result<f64> {
    let groups = check(dist.len(), labels)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for (label, idx) in &groups {
        for &i in idx {
            count += 1;
            if idx.len() == 1 {
                continue;
            }
            let a = idx
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| dist.get(i, j))
                .sum::<f64>()
                / (idx.len() - 1) as f64;
            let b = groups
                .iter()
                .filter(|(l, _)| *l != label)
                .map(|(_, other)| {
                    other.iter().map(|&j| dist.get(i, j)).sum::<f64>() / other.len() as f64
                })
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                total += (b - a) / m;
            }
        }
    }
    Ok(total / count as f64)
}

pub fn silhouette(points: &DMatrix<f64>, labels: &[i64]) -> Result<f64> {
    silhouette_with(&Distances::new(points), labels)
}

fn centroid(points: &DMatrix<f64>, idx: &[usize]) -> Vec<f64> {
    let mut c = vec![0.0; points.ncols()];
    for &i in idx {
        for (k, v) in points.row(i).iter().enumerate() {
            c[k] += v;
        }
    }
    c.iter_mut().for_each(|v| *v /= idx.len() as f64);
    c
}

fn dist_to(points: &DMatrix<f64>, i: usize, c: &[f64]) -> f64 {
    points
        .row(i)
        .iter()
        .zip(c)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub fn calinski_harabasz(points: &DMatrix<f64>, labels: &[i64]) -> Result<f64> {
    let groups = check(points.nrows(), labels)?;
    let all: Vec<usize> = groups.values().flatten().copied().collect();
    let overall = centroid(points, &all);
    let (mut between, mut within) = (0.0, 0.0);
    for idx in groups.values() {
        let c = centroid(points, idx);
        let gap: f64 = c.iter().zip(&overall).map(|(a, b)| (a - b) * (a - b)).sum();
        between += idx.len() as f64 * gap;
        within += idx
            .iter()
            .map(|&i| dist_to(points, i, &c).powi(2))
            .sum::<f64>();
    }
    let (n, k) = (all.len() as f64, groups.len() as f64);
    if within == 0.0 {
        return Ok(1.0);
    }
    Ok(between * (n - k) / (within * (k - 1.0)))
}

pub fn davies_bouldin(points: &DMatrix<f64>, labels: &[i64]) -> Result<f64> {
    let groups = check(points.nrows(), labels)?;
    let centroids: Vec<Vec<f64>> = groups.values().map(|idx| centroid(points, idx)).collect();
    let spread: Vec<f64> = groups
        .values()
        .zip(&centroids)
        .map(|(idx, c)| idx.iter().map(|&i| dist_to(points, i, c)).sum::<f64>() / idx.len() as f64)
        .collect();
    if spread.iter().all(|&s| s == 0.0) {
        return Ok(0.0);
    }
    let k = centroids.len();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst: f64 = 0.0;
        for j in 0..k {
            if i == j {
                continue;
            }
            let sep: f64 = centroids[i]
                .iter()
                .zip(&centroids[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let ratio = if sep > 0.0 {
                (spread[i] + spread[j]) / sep
            } else {
                f64::INFINITY
            };
            worst = worst.max(ratio);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

pub fn score_with(
    points: &DMatrix<f64>,
    dist: &Distances,
    labels: &[i64],
) -> Result<PartitionScores> {
    Ok(PartitionScores {
        silhouette: silhouette_with(dist, labels)?,
        calinski_harabasz: calinski_harabasz(points, labels)?,
        davies_bouldin: davies_bouldin(points, labels)?,
    })
}

pub fn score(points: &DMatrix<f64>, labels: &[i64]) -> Result<PartitionScores> {
    score_with(points, &Distances::new(points), labels)
}

fn choose2(x: u64) -> f64 {
    (x * x.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index between two labelings. Noise points count as singletons.
pub fn adjusted_rand_index(a: &[i64], b: &[i64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid("labelings differ in length"));
    }
    let n = a.len() as u64;
    // Give every noise point its own label, distinct from all real ones.
    let relabel = |labels: &[i64]| -> Vec<i64> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &l)| if l == NOISE { -(i as i64) - 2 } else { l })
            .collect()
    };
    let (a, b) = (relabel(a), relabel(b));
    let mut table: BTreeMap<(i64, i64), u64> = BTreeMap::new();
    let mut rows: BTreeMap<i64, u64> = BTreeMap::new();
    let mut cols: BTreeMap<i64, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(&b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sa: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sb: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sa * sb / choose2(n).max(1.0);
    let max = 0.5 * (sa + sb);
    if (max - expected).abs() < f64::EPSILON {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
