//! Stage orchestration shared by the `hos` binary and the end-to-end tests.
//!
//! Every stage is a pure function of its input and a [`PipelineConfig`];
//! outputs are ordered by driver id so reruns with the same seed are
//! byte-identical.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::activity_log::{merge_contiguous, DriverLog};
use crate::cluster::{
    self, decode_centroids, sweep, tune_density, ClusterAssignment, ClusterParams, ClusterSummary,
    Method, PartitionScores, SweepRow, NOISE,
};
use crate::embed::{train_embedding, DocKey, EmbeddingParams};
use crate::encoder::{encode_corpora, DayDocument};
use crate::error::{Error, Result};
use crate::exec::{map_ordered, Execution};
use crate::gmm::EmOptions;
use crate::infraction::{
    analyze_log, annotate, builtin_tests, evaluate_tests, tests_from_file, ConstraintTest,
    DriverReport, DEFAULT_EPSILONS,
};
use crate::labeller::{label_log, raw_log, LabeledActivity};
use crate::profiler::{
    assign_profiles, build_frequency_table, fit_mixture, select_k, single_profile, DayAssignment,
    FrequencyTable, KSelection, ProfileReport,
};
use crate::regulation::RegulationParameters;
use crate::synth::{
    generate_corpus, inject_per_block, GeneratorConfig, InjectionKind, SyntheticCorpus,
};

/// Inclusive integer range as written in the configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KRange {
    pub min: usize,
    pub max: usize,
}

impl KRange {
    pub fn values(self) -> Vec<usize> {
        (self.min..=self.max).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// TOML file of `[[test]]` tables replacing the built-in tests.
    pub tests: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringConfig {
    pub method: Method,
    #[serde(flatten)]
    pub params: ClusterParams,
    /// One model over legal and illegal days instead of one per split.
    pub joint: bool,
    /// min_cluster_size candidates tried when a density method is given a target k.
    pub density_candidates: Vec<usize>,
    pub sweep_methods: Vec<Method>,
    pub sweep_k: KRange,
    /// Cluster descriptions per split, keyed by cluster id.
    pub descriptions: BTreeMap<String, BTreeMap<String, String>>,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            method: Method::DensityHier,
            params: ClusterParams::default(),
            joint: false,
            density_candidates: (5..=60).collect(),
            sweep_methods: Method::WITH_K.to_vec(),
            sweep_k: KRange { min: 2, max: 12 },
            descriptions: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    /// Fixed number of profiles; the BIC choice over `k_range` otherwise.
    pub k: Option<usize>,
    pub k_range: KRange,
    pub include_infractions: bool,
    pub em: EmOptions,
    /// Profile interpretations keyed by profile id.
    pub interpretations: BTreeMap<String, String>,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            k: None,
            k_range: KRange { min: 1, max: 6 },
            include_infractions: false,
            em: EmOptions::default(),
            interpretations: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    #[serde(flatten)]
    pub corpus: GeneratorConfig,
    pub inject: Vec<InjectionKind>,
    /// One injection of each listed kind per this many drivers.
    pub inject_every: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            corpus: GeneratorConfig::default(),
            inject: Vec::new(),
            inject_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    pub fill_gaps: bool,
    pub paths: Paths,
    pub regulation: RegulationParameters,
    /// Inline `[[test]]` tables; `paths.tests` wins when both are given.
    #[serde(rename = "test")]
    pub tests: Vec<ConstraintTest>,
    pub epsilons: Vec<u32>,
    pub embedding: EmbeddingParams,
    pub clustering: ClusteringConfig,
    pub profiles: ProfileConfig,
    pub generate: GenerateConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: None,
            fill_gaps: false,
            paths: Paths::default(),
            regulation: RegulationParameters::default(),
            tests: Vec::new(),
            epsilons: DEFAULT_EPSILONS.to_vec(),
            embedding: EmbeddingParams::default(),
            clustering: ClusteringConfig::default(),
            profiles: ProfileConfig::default(),
            generate: GenerateConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.regulation.validate()?;
        for t in &cfg.tests {
            t.validate(&cfg.regulation)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Tests in effect: the tests file, else inline tables, else the built-ins.
    pub fn constraint_tests(&self) -> Result<Vec<ConstraintTest>> {
        if let Some(path) = &self.paths.tests {
            return tests_from_file(path, &self.regulation);
        }
        Ok(if self.tests.is_empty() {
            builtin_tests()
        } else {
            self.tests.clone()
        })
    }

    fn descriptions(&self, split: &str) -> Result<BTreeMap<i64, String>> {
        let Some(map) = self.clustering.descriptions.get(split) else {
            return Ok(BTreeMap::new());
        };
        map.iter()
            .map(|(k, v)| {
                let id = k
                    .parse()
                    .map_err(|_| Error::Config(format!("cluster id '{k}' is not an integer")))?;
                Ok((id, v.clone()))
            })
            .collect()
    }

    fn interpretations(&self) -> Result<BTreeMap<usize, String>> {
        self.profiles
            .interpretations
            .iter()
            .map(|(k, v)| {
                let id = k
                    .parse()
                    .map_err(|_| Error::Config(format!("profile id '{k}' is not an integer")))?;
                Ok((id, v.clone()))
            })
            .collect()
    }
}

/// Synthetic corpus with the configured injections applied.
pub fn generate(cfg: &PipelineConfig, seed: u64, exec: Execution) -> Result<SyntheticCorpus> {
    let mut corpus = generate_corpus(&cfg.generate.corpus, seed, exec)?;
    if !cfg.generate.inject.is_empty() {
        inject_per_block(&mut corpus, &cfg.generate.inject, cfg.generate.inject_every)?;
    }
    Ok(corpus)
}

/// Merges contiguous records and labels every driver.
pub fn label(
    logs: &[DriverLog],
    cfg: &PipelineConfig,
    exec: Execution,
) -> Vec<Vec<LabeledActivity>> {
    map_ordered(logs, exec, |log| {
        label_log(&merge_contiguous(log), &cfg.regulation)
    })
}

/// Re-runs the infraction analysis on labelled logs; returns the annotated
/// logs and one report per driver.
pub fn infractions(
    labelled: &[Vec<LabeledActivity>],
    cfg: &PipelineConfig,
    exec: Execution,
) -> Result<(Vec<Vec<LabeledActivity>>, Vec<DriverReport>)> {
    let tests = cfg.constraint_tests()?;
    let logs: Vec<DriverLog> = labelled.iter().filter_map(|l| raw_log(l)).collect();
    let out = map_ordered(&logs, exec, |log| {
        analyze_log(log, &cfg.regulation, &tests, &cfg.epsilons)
    });
    Ok(out.into_iter().unzip())
}

/// Recomputes the infraction column from the strict labels, so clustering
/// does not depend on whether the input was annotated.
fn annotated(
    labelled: &[Vec<LabeledActivity>],
    cfg: &PipelineConfig,
) -> Result<Vec<Vec<LabeledActivity>>> {
    let tests = cfg.constraint_tests()?;
    Ok(labelled
        .iter()
        .map(|log| {
            let mut log = log.clone();
            let found = evaluate_tests(&log, &tests, &cfg.regulation);
            annotate(&mut log, &found);
            log
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocCluster {
    pub driver: String,
    pub week: u32,
    pub day: u32,
    pub legal: bool,
    pub cluster: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitClusters {
    /// "legal", "illegal" or "joint".
    pub split: String,
    pub assignment: ClusterAssignment,
    pub scores: Option<PartitionScores>,
    pub documents: Vec<DocCluster>,
    pub clusters: Vec<ClusterSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterOutput {
    pub seed: u64,
    pub method: Method,
    pub joint: bool,
    pub splits: Vec<SplitClusters>,
    pub warnings: Vec<String>,
}

impl ClusterOutput {
    /// Day assignments with categories named `split:cluster` (noise as `split:noise`).
    pub fn day_assignments(&self) -> Vec<DayAssignment> {
        let mut days: Vec<DayAssignment> = self
            .splits
            .iter()
            .flat_map(|s| {
                s.documents.iter().map(move |d| DayAssignment {
                    driver: d.driver.clone(),
                    week: d.week,
                    day: d.day,
                    category: if d.cluster == NOISE {
                        format!("{}:noise", s.split)
                    } else {
                        format!("{}:{}", s.split, d.cluster)
                    },
                    legal: d.legal,
                })
            })
            .collect();
        days.sort_by(|a, b| (&a.driver, a.week, a.day).cmp(&(&b.driver, b.week, b.day)));
        days
    }
}

/// Documents of each split, in the canonical (driver, week, day) order.
pub fn splits(
    labelled: &[Vec<LabeledActivity>],
    cfg: &PipelineConfig,
) -> Result<Vec<(String, Vec<DayDocument>)>> {
    let (legal, illegal) = encode_corpora(&annotated(labelled, cfg)?);
    Ok(if cfg.clustering.joint {
        let mut all: Vec<DayDocument> = legal.into_iter().chain(illegal).collect();
        all.sort_by(|a, b| (&a.driver_id, a.week, a.day).cmp(&(&b.driver_id, b.week, b.day)));
        vec![("joint".to_owned(), all)]
    } else {
        vec![("legal".to_owned(), legal), ("illegal".to_owned(), illegal)]
    })
}

/// Embedding matrix aligned with `docs`.
fn embed(docs: &[DayDocument], cfg: &PipelineConfig, seed: u64) -> Result<nalgebra::DMatrix<f64>> {
    let model = train_embedding(docs, &cfg.embedding, seed)?;
    let dims = model.dims();
    let mut data = Vec::with_capacity(docs.len() * dims);
    for d in docs {
        let v = model
            .vector_of(&DocKey::of(d))
            .ok_or_else(|| Error::invalid("document missing from its model"))?;
        data.extend_from_slice(v);
    }
    Ok(nalgebra::DMatrix::from_row_slice(docs.len(), dims, &data))
}

fn cluster_split(
    split: &str,
    docs: &[DayDocument],
    cfg: &PipelineConfig,
    seed: u64,
    warnings: &mut Vec<String>,
) -> Result<SplitClusters> {
    let c = &cfg.clustering;
    let documents = |labels: &[i64]| -> Vec<DocCluster> {
        docs.iter()
            .zip(labels)
            .map(|(d, &cluster)| DocCluster {
                driver: d.driver_id.clone(),
                week: d.week,
                day: d.day,
                legal: d.legal,
                cluster,
            })
            .collect()
    };
    let x = embed(docs, cfg, seed)?;
    if docs.len() == 1 {
        warnings.push(format!(
            "{split} split has a single document; it forms its own cluster"
        ));
        let assignment = ClusterAssignment {
            labels: vec![0],
            k: 1,
            method: c.method,
            params: BTreeMap::new(),
        };
        let clusters = decode_centroids(&assignment, &x, docs, &cfg.descriptions(split)?)?;
        return Ok(SplitClusters {
            split: split.to_owned(),
            documents: documents(&assignment.labels),
            assignment,
            scores: None,
            clusters,
        });
    }
    let assignment = match (c.method, c.params.k) {
        (Method::DensityHier, Some(target)) => {
            match tune_density(
                &x,
                target,
                c.params.density.min_samples,
                &c.density_candidates,
            )? {
                Some(a) => a,
                None => {
                    warnings.push(format!(
                        "{split}: no min_cluster_size candidate yields {target} density clusters; using the configured one"
                    ));
                    cluster::cluster(&x, c.method, &c.params, seed)?
                }
            }
        }
        _ => cluster::cluster(&x, c.method, &c.params, seed)?,
    };
    let scores = cluster::score(&x, &assignment.labels).ok();
    let clusters = decode_centroids(&assignment, &x, docs, &cfg.descriptions(split)?)?;
    Ok(SplitClusters {
        split: split.to_owned(),
        documents: documents(&assignment.labels),
        assignment,
        scores,
        clusters,
    })
}

/// Encodes, embeds, clusters and decodes every split.
pub fn clusterize(
    labelled: &[Vec<LabeledActivity>],
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<ClusterOutput> {
    let splits = splits(labelled, cfg)?;
    let total: usize = splits.iter().map(|(_, d)| d.len()).sum();
    if total < 2 {
        return Err(Error::invalid("need >= 2 documents to cluster"));
    }
    let mut warnings = Vec::new();
    let mut out = Vec::new();
    for (name, docs) in &splits {
        if docs.is_empty() {
            warnings.push(format!("{name} split has no documents"));
            continue;
        }
        out.push(cluster_split(name, docs, cfg, seed, &mut warnings)?);
    }
    Ok(ClusterOutput {
        seed,
        method: cfg.clustering.method,
        joint: cfg.clustering.joint,
        splits: out,
        warnings,
    })
}

/// Validity indices over the configured (method, k) grid, per split.
pub fn sweep_splits(
    labelled: &[Vec<LabeledActivity>],
    cfg: &PipelineConfig,
    seed: u64,
    exec: Execution,
) -> Result<Vec<(String, Vec<SweepRow>)>> {
    let c = &cfg.clustering;
    let mut out = Vec::new();
    for (name, docs) in splits(labelled, cfg)? {
        if docs.len() < 2 {
            continue;
        }
        let x = embed(&docs, cfg, seed)?;
        out.push((
            name,
            sweep(
                &x,
                &c.sweep_methods,
                &c.sweep_k.values(),
                &c.params,
                seed,
                exec,
            ),
        ));
    }
    if out.is_empty() {
        return Err(Error::invalid("need >= 2 documents to cluster"));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileOutput {
    pub seed: u64,
    pub k: usize,
    pub selection: Option<KSelection>,
    pub table: FrequencyTable,
    pub report: ProfileReport,
    pub warnings: Vec<String>,
}

/// Frequency table, K choice, mixture fit and driver assignment.
pub fn profile(
    clusters: &ClusterOutput,
    cfg: &PipelineConfig,
    seed: u64,
    exec: Execution,
) -> Result<ProfileOutput> {
    let p = &cfg.profiles;
    let (table, table_warnings) =
        build_frequency_table(&clusters.day_assignments(), p.include_infractions)?;
    let mut warnings: Vec<String> = table_warnings
        .dropped_drivers
        .iter()
        .map(|d| format!("driver {d} has no days left to profile"))
        .collect();
    if table.drivers.len() == 1 || table.day_categories.len() == 1 {
        warnings.push(if table.drivers.len() == 1 {
            "only one driver; the number of profiles is forced to 1".to_owned()
        } else {
            "only one day category; the number of profiles is forced to 1".to_owned()
        });
        let report = single_profile(&table, &cfg.interpretations()?)?;
        return Ok(ProfileOutput {
            seed,
            k: 1,
            selection: None,
            table,
            report,
            warnings,
        });
    }
    let (k, selection) = match p.k {
        Some(k) => (k, None),
        None => {
            let s = select_k(&table, &p.k_range.values(), seed, &p.em, exec)?;
            warnings.extend(
                s.skipped
                    .iter()
                    .map(|k| format!("K = {k} exceeds the number of drivers and was skipped")),
            );
            (s.recommended, Some(s))
        }
    };
    let model = fit_mixture(&table, k, seed, &p.em)?;
    let report = assign_profiles(&model, &table, &cfg.interpretations()?)?;
    Ok(ProfileOutput {
        seed,
        k,
        selection,
        table,
        report,
        warnings,
    })
}

/// Sweep rows of every split, with a leading `split` column.
pub fn write_sweeps_csv<W: std::io::Write>(
    sweeps: &[(String, Vec<SweepRow>)],
    sink: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "split",
        "method",
        "k",
        "silhouette",
        "calinski_harabasz",
        "davies_bouldin",
    ])?;
    for (split, rows) in sweeps {
        for r in rows {
            let scores = match r.scores {
                Some(s) => [
                    s.silhouette.to_string(),
                    s.calinski_harabasz.to_string(),
                    s.davies_bouldin.to_string(),
                ],
                None => Default::default(),
            };
            let [s, ch, db] = scores;
            w.write_record([
                split.clone(),
                r.method.as_str().to_owned(),
                r.k.to_string(),
                s,
                ch,
                db,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
