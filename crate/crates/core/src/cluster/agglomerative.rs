//! Agglomerative clustering with average, complete or Ward linkage.
//!
//! The full merge tree is built once with the nearest-neighbour chain
//! algorithm and Lance-Williams updates; cutting it at any k is then cheap.
//! All three linkages are reducible, so sorting the chain's merges by height
//! gives the same tree as the textbook greedy procedure.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Average,
    Complete,
    Ward,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    /// Representative points of the two merged clusters.
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

#[derive(Debug, Clone)]
pub struct Dendrogram {
    n: usize,
    /// Sorted by height, ties by discovery order.
    pub merges: Vec<Merge>,
}

/// Builds the dendrogram of `points` (rows).
pub fn build(points: &DMatrix<f64>, linkage: Linkage) -> Result<Dendrogram> {
    let n = points.nrows();
    if n < 2 {
        return Err(Error::invalid(
            "agglomerative clustering needs at least 2 points",
        ));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| points.row(i).iter().copied().collect())
        .collect();
    if linkage == Linkage::Ward && rows.iter().all(|r| r == &rows[0]) {
        return Err(Error::invalid(
            "ward linkage is undefined when all points are identical",
        ));
    }
    // Ward works on squared distances; heights are reported as their square root.
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let sq: f64 = rows[i]
                .iter()
                .zip(&rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let v = if linkage == Linkage::Ward {
                sq
            } else {
                sq.sqrt()
            };
            dist[i * n + j] = v;
            dist[j * n + i] = v;
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n - 1);
    let mut chain: Vec<usize> = Vec::new();
    let d = |dist: &Vec<f64>, i: usize, j: usize| dist[i * n + j];

    while merges.len() < n - 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("an active cluster"));
        }
        loop {
            let top = *chain.last().expect("non-empty chain");
            let prev = chain.len().checked_sub(2).map(|i| chain[i]);
            // Nearest active neighbour; the previous chain element wins ties.
            let mut best = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |p| d(&dist, top, p));
            for j in 0..n {
                if j != top && active[j] && d(&dist, top, j) < best_d {
                    best = Some(j);
                    best_d = d(&dist, top, j);
                }
            }
            let next = best.expect("another active cluster");
            if Some(next) == prev {
                break;
            }
            chain.push(next);
        }
        let b = chain.pop().expect("chain top");
        let a = chain.pop().expect("chain second");
        let (keep, gone) = (a.min(b), a.max(b));
        let h = d(&dist, a, b);
        merges.push(Merge {
            a: keep,
            b: gone,
            height: if linkage == Linkage::Ward {
                h.sqrt()
            } else {
                h
            },
        });
        let (sa, sb) = (size[keep] as f64, size[gone] as f64);
        for k in 0..n {
            if !active[k] || k == keep || k == gone {
                continue;
            }
            let (dak, dbk) = (d(&dist, keep, k), d(&dist, gone, k));
            let v = match linkage {
                Linkage::Average => (sa * dak + sb * dbk) / (sa + sb),
                Linkage::Complete => dak.max(dbk),
                Linkage::Ward => {
                    let sk = size[k] as f64;
                    ((sa + sk) * dak + (sb + sk) * dbk - sk * h) / (sa + sb + sk)
                }
            };
            dist[keep * n + k] = v;
            dist[k * n + keep] = v;
        }
        active[gone] = false;
        size[keep] += size[gone];
    }
    merges.sort_by(|x, y| x.height.total_cmp(&y.height));
    Ok(Dendrogram { n, merges })
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl Dendrogram {
    /// Flat clustering with exactly `k` clusters.
    pub fn cut(&self, k: usize) -> Result<Vec<i64>> {
        if k == 0 || k > self.n {
            return Err(Error::invalid(format!("k = {k} is not in 1..={}", self.n)));
        }
        let mut parent: Vec<usize> = (0..self.n).collect();
        for m in &self.merges[..self.n - k] {
            let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
            parent[ra.max(rb)] = ra.min(rb);
        }
        let roots: Vec<i64> = (0..self.n).map(|i| find(&mut parent, i) as i64).collect();
        Ok(super::canonical_labels(&roots))
    }
}

pub fn agglomerative(points: &DMatrix<f64>, k: usize, linkage: Linkage) -> Result<Vec<i64>> {
    build(points, linkage)?.cut(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> DMatrix<f64> {
        DMatrix::from_row_slice(5, 1, &[0.0, 1.0, 2.0, 10.0, 11.0])
    }

    #[test]
    fn cuts_line_into_two_groups() {
        for l in [Linkage::Average, Linkage::Complete, Linkage::Ward] {
            assert_eq!(
                agglomerative(&line(), 2, l).unwrap(),
                vec![0, 0, 0, 1, 1],
                "{l:?}"
            );
        }
    }

    #[test]
    fn complete_linkage_heights() {
        let d = build(&line(), Linkage::Complete).unwrap();
        let h: Vec<f64> = d.merges.iter().map(|m| m.height).collect();
        assert_eq!(h, vec![1.0, 1.0, 2.0, 11.0]);
    }

    #[test]
    fn ward_rejects_identical_points() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        assert!(build(&x, Linkage::Ward).is_err());
        assert!(build(&x, Linkage::Average).is_ok());
    }
}
