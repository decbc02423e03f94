//! Density-based hierarchical clustering in the style of HDBSCAN.
//!
//! Steps: core distances at `min_samples` (the point itself counts),
//! mutual-reachability distances, a minimum spanning tree (Prim), the
//! single-linkage tree from its sorted edges, condensation at
//! `min_cluster_size`, and excess-of-mass selection. The root is never
//! selected, so a single blob comes out as noise rather than one cluster.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::metrics::{Distances, NOISE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DensityParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
}

impl Default for DensityParams {
    fn default() -> Self {
        DensityParams {
            min_cluster_size: 15,
            min_samples: 5,
        }
    }
}

fn lambda(d: f64) -> f64 {
    1.0 / d.max(1e-12)
}

/// Minimum spanning tree over mutual-reachability distances, as (u, v, w).
fn mst(dist: &Distances, core: &[f64]) -> Vec<(usize, usize, f64)> {
    let n = dist.len();
    let reach = |i: usize, j: usize| dist.get(i, j).max(core[i]).max(core[j]);
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_w = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let w = reach(current, j);
            if w < best[j] {
                best[j] = w;
                from[j] = current;
            }
            if best[j] < next_w {
                next_w = best[j];
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push((from[next], next, next_w));
        current = next;
    }
    edges.sort_by(|a, b| a.2.total_cmp(&b.2));
    edges
}

/// Single-linkage tree: node ids < n are points; node n + i is the i-th merge.
struct LinkageTree {
    n: usize,
    children: Vec<(usize, usize, f64)>,
    size: Vec<usize>,
}

fn linkage_tree(n: usize, edges: &[(usize, usize, f64)]) -> LinkageTree {
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    let mut size = vec![1usize; 2 * n - 1];
    let mut children = Vec::with_capacity(n - 1);
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (i, &(u, v, w)) in edges.iter().enumerate() {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        let node = n + i;
        parent[a] = node;
        parent[b] = node;
        size[node] = size[a] + size[b];
        children.push((a, b, w));
    }
    LinkageTree { n, children, size }
}

impl LinkageTree {
    fn leaves(&self, node: usize, out: &mut Vec<usize>) {
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < self.n {
                out.push(x);
            } else {
                let (a, b, _) = self.children[x - self.n];
                stack.push(a);
                stack.push(b);
            }
        }
    }
}

/// Condensed tree: clusters with their birth lambda, parent and the points
/// that leave them (at which lambda).
struct Condensed {
    birth: Vec<f64>,
    parent: Vec<Option<usize>>,
    /// (cluster, lambda) at which each point leaves its last cluster.
    point_exit: Vec<(usize, f64)>,
    /// (child cluster, lambda, size) splits, per parent.
    splits: Vec<Vec<(usize, f64, usize)>>,
}

fn condense(tree: &LinkageTree, min_cluster_size: usize) -> Condensed {
    let n = tree.n;
    let root = 2 * n - 2;
    let mut c = Condensed {
        birth: vec![0.0],
        parent: vec![None],
        point_exit: vec![(0, 0.0); n],
        splits: vec![Vec::new()],
    };
    let mut stack = vec![(root, 0usize)];
    let mut buf = Vec::new();
    while let Some((node, cluster)) = stack.pop() {
        if node < n {
            // A lone point reached directly: it leaves at its parent's lambda,
            // which the caller has already recorded.
            continue;
        }
        let (a, b, w) = tree.children[node - n];
        let l = lambda(w);
        let (sa, sb) = (tree.size[a], tree.size[b]);
        let big_a = sa >= min_cluster_size;
        let big_b = sb >= min_cluster_size;
        if big_a && big_b {
            for (child, s) in [(a, sa), (b, sb)] {
                let id = c.birth.len();
                c.birth.push(l);
                c.parent.push(Some(cluster));
                c.splits.push(Vec::new());
                c.splits[cluster].push((id, l, s));
                stack.push((child, id));
            }
            continue;
        }
        for (child, big) in [(a, big_a), (b, big_b)] {
            if big {
                stack.push((child, cluster));
            } else {
                buf.clear();
                tree.leaves(child, &mut buf);
                for &p in &buf {
                    c.point_exit[p] = (cluster, l);
                }
            }
        }
    }
    c
}

fn select(c: &Condensed) -> Vec<bool> {
    let k = c.birth.len();
    let mut stability = vec![0.0; k];
    for &(cl, l) in &c.point_exit {
        stability[cl] += l - c.birth[cl];
    }
    for (cl, splits) in c.splits.iter().enumerate() {
        for &(_, l, s) in splits {
            stability[cl] += (l - c.birth[cl]) * s as f64;
        }
    }
    let mut selected = vec![false; k];
    let mut subtree = stability.clone();
    // Children always have larger ids than their parent.
    for cl in (1..k).rev() {
        let kids: Vec<usize> = c.splits[cl].iter().map(|s| s.0).collect();
        if kids.is_empty() {
            selected[cl] = true;
            continue;
        }
        let below: f64 = kids.iter().map(|&x| subtree[x]).sum();
        if stability[cl] >= below {
            selected[cl] = true;
            let mut stack = kids;
            while let Some(x) = stack.pop() {
                selected[x] = false;
                stack.extend(c.splits[x].iter().map(|s| s.0));
            }
        } else {
            subtree[cl] = below;
        }
    }
    selected
}

pub fn density_hier(points: &DMatrix<f64>, params: &DensityParams) -> Result<Vec<i64>> {
    density_hier_with(&Distances::new(points), params)
}

pub fn density_hier_with(dist: &Distances, params: &DensityParams) -> Result<Vec<i64>> {
    let n = dist.len();
    if n < 2 {
        return Err(Error::invalid("density clustering needs at least 2 points"));
    }
    if params.min_cluster_size < 2 || params.min_samples < 1 {
        return Err(Error::invalid(
            "min_cluster_size must be >= 2 and min_samples >= 1",
        ));
    }
    let core: Vec<f64> = (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n).map(|j| dist.get(i, j)).collect();
            let k = params.min_samples.min(n) - 1;
            d.select_nth_unstable_by(k, f64::total_cmp);
            d[k]
        })
        .collect();
    let tree = linkage_tree(n, &mst(dist, &core));
    let condensed = condense(&tree, params.min_cluster_size);
    let selected = select(&condensed);
    let mut ids = vec![NOISE; selected.len()];
    let mut next = 0;
    for (cl, &s) in selected.iter().enumerate() {
        if s {
            ids[cl] = next;
            next += 1;
        }
    }
    let labels: Vec<i64> = condensed
        .point_exit
        .iter()
        .map(|&(cl, _)| {
            let mut x = Some(cl);
            while let Some(c) = x {
                if selected[c] {
                    return ids[c];
                }
                x = condensed.parent[c];
            }
            NOISE
        })
        .collect();
    Ok(super::canonical_labels(&labels))
}
