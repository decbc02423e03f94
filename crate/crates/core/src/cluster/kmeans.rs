//! Spherical k-means: points and centres live on the unit sphere and are
//! compared by cosine similarity.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const RESTARTS: usize = 4;
const MAX_ITER: usize = 300;

fn normalise(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn seed_centres(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centres = vec![rows[rng.random_range(0..n)].clone()];
    while centres.len() < k {
        let weights: Vec<f64> = rows
            .iter()
            .map(|r| {
                centres
                    .iter()
                    .map(|c| 1.0 - dot(r, c))
                    .fold(f64::INFINITY, f64::min)
                    .max(0.0)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut t = rng.random::<f64>() * total;
            weights
                .iter()
                .position(|&w| {
                    if t < w {
                        true
                    } else {
                        t -= w;
                        false
                    }
                })
                .unwrap_or(n - 1)
        } else {
            rng.random_range(0..n)
        };
        centres.push(rows[pick].clone());
    }
    centres
}

fn nearest(r: &[f64], centres: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, c) in centres.iter().enumerate() {
        let s = dot(r, c);
        if s > best.1 {
            best = (j, s);
        }
    }
    best
}

fn run(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let d = rows[0].len();
    let mut centres = seed_centres(rows, k, rng);
    let mut labels = vec![usize::MAX; rows.len()];
    for _ in 0..MAX_ITER {
        let mut changed = false;
        for (i, r) in rows.iter().enumerate() {
            let (j, _) = nearest(r, &centres);
            if labels[i] != j {
                labels[i] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut sizes = vec![0usize; k];
        for (r, &l) in rows.iter().zip(&labels) {
            sizes[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(r) {
                *s += x;
            }
        }
        for j in 0..k {
            if sizes[j] == 0 {
                // Re-seed an empty cluster at the point worst served by its centre.
                let worst = (0..rows.len())
                    .min_by(|&a, &b| {
                        dot(&rows[a], &centres[labels[a]])
                            .total_cmp(&dot(&rows[b], &centres[labels[b]]))
                    })
                    .expect("non-empty input");
                sums[j] = rows[worst].clone();
            }
            normalise(&mut sums[j]);
        }
        centres = sums;
    }
    let cohesion = rows
        .iter()
        .zip(&labels)
        .map(|(r, &l)| dot(r, &centres[l]))
        .sum();
    (labels, cohesion)
}

/// Cosine k-means with several seeded restarts; the most cohesive run wins.
pub fn kmeans_cosine(points: &DMatrix<f64>, k: usize, seed: u64) -> Result<Vec<i64>> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} is not in 1..={n}")));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r: Vec<f64> = points.row(i).iter().copied().collect();
            normalise(&mut r);
            r
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..RESTARTS {
        let (labels, cohesion) = run(&rows, k, &mut rng);
        if best.as_ref().is_none_or(|(_, c)| cohesion > *c) {
            best = Some((labels, cohesion));
        }
    }
    let labels = best.expect("at least one restart").0;
    Ok(super::canonical_labels(
        &labels.iter().map(|&l| l as i64).collect::<Vec<_>>(),
    ))
}
