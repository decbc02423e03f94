//! Clustering of day vectors: one density-based method, five k-based
//! comparison methods, partition scores, parameter sweeps and medoid reports.

pub mod agglomerative;
pub mod hdbscan;
pub mod kmeans;
pub mod metrics;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::embed::{cosine, DocKey};
use crate::encoder::{decode_word, DayDocument};
use crate::error::{Error, Result};
use crate::exec::{map_ordered, Execution};
use crate::gmm::{self, EmOptions};

pub use agglomerative::Linkage;
pub use hdbscan::DensityParams;
pub use metrics::{adjusted_rand_index, score, Distances, PartitionScores, NOISE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DensityHier,
    GaussianMixture,
    AggloAverage,
    AggloComplete,
    AggloWard,
    KmeansCosine,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::DensityHier,
        Method::GaussianMixture,
        Method::AggloAverage,
        Method::AggloComplete,
        Method::AggloWard,
        Method::KmeansCosine,
    ];

    /// Methods that take the number of clusters as input.
    pub const WITH_K: [Method; 5] = [
        Method::GaussianMixture,
        Method::AggloAverage,
        Method::AggloComplete,
        Method::AggloWard,
        Method::KmeansCosine,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::DensityHier => "density_hier",
            Method::GaussianMixture => "gaussian_mixture",
            Method::AggloAverage => "agglo_average",
            Method::AggloComplete => "agglo_complete",
            Method::AggloWard => "agglo_ward",
            Method::KmeansCosine => "kmeans_cosine",
        }
    }

    pub fn takes_k(self) -> bool {
        self != Method::DensityHier
    }

    fn linkage(self) -> Option<Linkage> {
        match self {
            Method::AggloAverage => Some(Linkage::Average),
            Method::AggloComplete => Some(Linkage::Complete),
            Method::AggloWard => Some(Linkage::Ward),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown clustering method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterParams {
    /// Number of clusters for k-based methods.
    pub k: Option<usize>,
    pub density: DensityParams,
    pub em_max_iter: usize,
    pub em_tol: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            k: None,
            density: DensityParams::default(),
            em_max_iter: 100,
            em_tol: 1e-4,
        }
    }
}

impl ClusterParams {
    fn em(&self) -> EmOptions {
        EmOptions {
            max_iter: self.em_max_iter,
            tol: self.em_tol,
            ..EmOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Per-vector cluster id; -1 is noise.
    pub labels: Vec<i64>,
    pub k: usize,
    pub method: Method,
    pub params: BTreeMap<String, String>,
}

/// Renumbers non-noise labels by first appearance.
pub(crate) fn canonical_labels(labels: &[i64]) -> Vec<i64> {
    let mut map: HashMap<i64, i64> = HashMap::new();
    labels
        .iter()
        .map(|&l| {
            if l == NOISE {
                return NOISE;
            }
            let next = map.len() as i64;
            *map.entry(l).or_insert(next)
        })
        .collect()
}

fn cluster_count(labels: &[i64]) -> usize {
    let mut ids: Vec<i64> = labels.iter().copied().filter(|&l| l != NOISE).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.len()
}

fn assignment(
    labels: Vec<i64>,
    method: Method,
    params: BTreeMap<String, String>,
) -> ClusterAssignment {
    ClusterAssignment {
        k: cluster_count(&labels),
        labels,
        method,
        params,
    }
}

fn required_k(method: Method, params: &ClusterParams, n: usize) -> Result<usize> {
    let k = params
        .k
        .ok_or_else(|| Error::Config(format!("{method} needs a number of clusters")))?;
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} is not in 1..={n}")));
    }
    Ok(k)
}

pub fn cluster(
    vectors: &DMatrix<f64>,
    method: Method,
    params: &ClusterParams,
    seed: u64,
) -> Result<ClusterAssignment> {
    let n = vectors.nrows();
    if n < 2 {
        return Err(Error::invalid("need >= 2 documents to cluster"));
    }
    let mut p = BTreeMap::new();
    let labels = match method {
        Method::DensityHier => {
            p.insert(
                "min_cluster_size".into(),
                params.density.min_cluster_size.to_string(),
            );
            p.insert("min_samples".into(), params.density.min_samples.to_string());
            hdbscan::density_hier(vectors, &params.density)?
        }
        Method::GaussianMixture => {
            let k = required_k(method, params, n)?;
            p.insert("k".into(), k.to_string());
            let model = gmm::fit(vectors, k, &params.em(), seed)?;
            canonical_labels(
                &model
                    .predict(vectors)?
                    .into_iter()
                    .map(|l| l as i64)
                    .collect::<Vec<_>>(),
            )
        }
        Method::KmeansCosine => {
            let k = required_k(method, params, n)?;
            p.insert("k".into(), k.to_string());
            kmeans::kmeans_cosine(vectors, k, seed)?
        }
        _ => {
            let k = required_k(method, params, n)?;
            p.insert("k".into(), k.to_string());
            agglomerative::agglomerative(
                vectors,
                k,
                method.linkage().expect("agglomerative method"),
            )?
        }
    };
    Ok(assignment(labels, method, p))
}

/// Smallest min_cluster_size from `candidates` whose density clustering
/// yields `target` clusters, with that assignment.
pub fn tune_density(
    vectors: &DMatrix<f64>,
    target: usize,
    min_samples: usize,
    candidates: &[usize],
) -> Result<Option<ClusterAssignment>> {
    let dist = Distances::new(vectors);
    for &mcs in candidates {
        let params = DensityParams {
            min_cluster_size: mcs,
            min_samples,
        };
        let labels = hdbscan::density_hier_with(&dist, &params)?;
        if cluster_count(&labels) == target {
            let mut p = BTreeMap::new();
            p.insert("min_cluster_size".into(), mcs.to_string());
            p.insert("min_samples".into(), min_samples.to_string());
            return Ok(Some(assignment(labels, Method::DensityHier, p)));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: Method,
    pub k: usize,
    /// None when the partition cannot be scored (fewer than two clusters).
    pub scores: Option<PartitionScores>,
}

enum Prepared {
    Tree(agglomerative::Dendrogram),
    Direct,
    Failed,
}

/// Scores every (method, k) cell. Methods without a k are skipped.
pub fn sweep(
    vectors: &DMatrix<f64>,
    methods: &[Method],
    k_range: &[usize],
    params: &ClusterParams,
    seed: u64,
    exec: Execution,
) -> Vec<SweepRow> {
    let methods: Vec<Method> = methods.iter().copied().filter(|m| m.takes_k()).collect();
    if methods.is_empty() || k_range.is_empty() || vectors.nrows() < 2 {
        return Vec::new();
    }
    let dist = Distances::new(vectors);
    let prepared: Vec<Prepared> = map_ordered(&methods, exec, |m| match m.linkage() {
        Some(l) => agglomerative::build(vectors, l).map_or(Prepared::Failed, Prepared::Tree),
        None => Prepared::Direct,
    });
    let cells: Vec<(usize, usize)> = (0..methods.len())
        .flat_map(|i| k_range.iter().map(move |&k| (i, k)))
        .collect();
    map_ordered(&cells, exec, |&(i, k)| {
        let method = methods[i];
        let labels = match &prepared[i] {
            Prepared::Tree(t) => t.cut(k).ok(),
            Prepared::Direct => cluster(
                vectors,
                method,
                &ClusterParams {
                    k: Some(k),
                    ..*params
                },
                seed,
            )
            .ok()
            .map(|a| a.labels),
            Prepared::Failed => None,
        };
        let scores = labels.and_then(|l| metrics::score_with(vectors, &dist, &l).ok());
        SweepRow { method, k, scores }
    })
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "method",
        "k",
        "silhouette",
        "calinski_harabasz",
        "davies_bouldin",
    ])?;
    for r in rows {
        let (s, ch, db) = match r.scores {
            Some(s) => (
                s.silhouette.to_string(),
                s.calinski_harabasz.to_string(),
                s.davies_bouldin.to_string(),
            ),
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([r.method.as_str().to_owned(), r.k.to_string(), s, ch, db])?;
    }
    w.flush()?;
    Ok(())
}

/// k with the best silhouette for `method` in a sweep; ties go to the smaller k.
pub fn best_k(rows: &[SweepRow], method: Method) -> Option<usize> {
    rows.iter()
        .filter(|r| r.method == method)
        .filter_map(|r| r.scores.map(|s| (r.k, s.silhouette)))
        .fold(None, |best: Option<(usize, f64)>, (k, s)| match best {
            Some((_, bs)) if bs >= s => best,
            _ => Some((k, s)),
        })
        .map(|(k, _)| k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster: i64,
    pub size: usize,
    pub medoid: DocKey,
    /// Decoded words of the medoid document.
    pub words: Vec<String>,
    pub description: String,
}

pub const UNDESCRIBED: &str = "undescribed";

/// Per cluster, the member with the highest mean cosine similarity to the
/// other members, decoded. Noise is not reported.
pub fn decode_centroids(
    assignment: &ClusterAssignment,
    vectors: &DMatrix<f64>,
    docs: &[DayDocument],
    descriptions: &BTreeMap<i64, String>,
) -> Result<Vec<ClusterSummary>> {
    if assignment.labels.len() != docs.len() || docs.len() != vectors.nrows() {
        return Err(Error::invalid(
            "assignment, vectors and documents are not aligned",
        ));
    }
    let rows = matrix_rows(vectors);
    medoids(&assignment.labels, &rows)
        .into_iter()
        .map(|(cluster, (best, size))| {
            let words = docs[best]
                .words
                .iter()
                .map(|w| decode_word(w).map(|d| d.to_string()))
                .collect::<Result<_>>()?;
            Ok(ClusterSummary {
                cluster,
                size,
                medoid: DocKey::of(&docs[best]),
                words,
                description: descriptions
                    .get(&cluster)
                    .cloned()
                    .unwrap_or_else(|| UNDESCRIBED.to_owned()),
            })
        })
        .collect()
}

fn matrix_rows(vectors: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..vectors.nrows())
        .map(|i| vectors.row(i).iter().copied().collect())
        .collect()
}

/// Medoid index and size of every non-noise cluster.
fn medoids(labels: &[i64], rows: &[Vec<f64>]) -> BTreeMap<i64, (usize, usize)> {
    let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        if l != NOISE {
            groups.entry(l).or_default().push(i);
        }
    }
    groups
        .into_iter()
        .map(|(cluster, members)| {
            let mut best = members[0];
            let mut best_sim = f64::NEG_INFINITY;
            for &i in &members {
                let sim: f64 = members
                    .iter()
                    .map(|&j| cosine(&rows[i], &rows[j]))
                    .sum::<f64>()
                    / members.len() as f64;
                if sim > best_sim {
                    best_sim = sim;
                    best = i;
                }
            }
            (cluster, (best, members.len()))
        })
        .collect()
}

/// Cluster whose medoid is most cosine-similar to `v`.
pub fn most_similar_cluster(
    v: &[f64],
    assignment: &ClusterAssignment,
    vectors: &DMatrix<f64>,
) -> Option<i64> {
    let rows = matrix_rows(vectors);
    medoids(&assignment.labels, &rows)
        .into_iter()
        .map(|(c, (m, _))| (c, cosine(v, &rows[m])))
        .fold(None, |best: Option<(i64, f64)>, (c, s)| match best {
            Some((_, bs)) if bs >= s => best,
            _ => Some((c, s)),
        })
        .map(|(c, _)| c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_labels_follow_first_appearance() {
        assert_eq!(
            canonical_labels(&[5, 5, NOISE, 2, 5, 9]),
            vec![0, 0, NOISE, 1, 0, 2]
        );
    }

    #[test]
    fn methods_parse() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("lda".parse::<Method>().is_err());
    }

    #[test]
    fn k_methods_need_k() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]);
        assert!(cluster(&x, Method::KmeansCosine, &ClusterParams::default(), 0).is_err());
        let one = DMatrix::from_row_slice(1, 1, &[0.0]);
        let err = cluster(&one, Method::DensityHier, &ClusterParams::default(), 0).unwrap_err();
        assert!(err.to_string().contains("need >= 2 documents"));
    }
}
