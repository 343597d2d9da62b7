//! Experiment configuration (TOML).
//!
//! ```toml
//! seed = 42
//! jobs = 0                      # 0: all cores
//!
//! [dataset]
//! name = "movielens"
//! path = "ratings.tsv"         # relative to the config file
//! delimiter = "\t"
//! rating_min = 1.0
//! rating_max = 5.0
//!
//! [grouping]
//! score = "pop_ratio"           # pop_ratio | avg_item_pop | mainstreaminess | file
//!
//! [evaluation]
//! folds = 5
//! algorithms = ["UserKNN", "UserKNNAvg", "NMF", "CoClustering"]
//!
//! [bias]
//! top_n = 10
//!
//! [output]
//! dir = "out/movielens"        # also relative to the config file
//! ```
//!
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bias_analysis::{BiasConfig, CandidatePolicy};
use crate::error::{Error, Result};
use crate::ingest::{RatingRange, Schema};
use crate::recommenders::{
    Algorithm, AlgorithmSpec, CoClusteringParams, KnnParams, NmfParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub jobs: usize,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub grouping: GroupingConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub bias: BiasSection,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// Ratings used as given.
    #[default]
    Explicit,
    /// Sentinel values are replaced by `implicit_fill`.
    Implicit,
    /// Play counts, rescaled per user onto `scale_min..=scale_max`.
    Playcount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub path: PathBuf,
    #[serde(default)]
    pub kind: DatasetKind,
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    #[serde(default = "default_user_column")]
    pub user_column: String,
    #[serde(default = "default_item_column")]
    pub item_column: String,
    #[serde(default = "default_rating_column")]
    pub rating_column: String,
    pub rating_min: f64,
    pub rating_max: f64,
    #[serde(default)]
    pub implicit_marker: Option<f64>,
    #[serde(default)]
    pub implicit_fill: Option<f64>,
    #[serde(default)]
    pub min_user_ratings: Option<usize>,
    #[serde(default)]
    pub max_user_ratings: Option<usize>,
    #[serde(default = "default_scale_min")]
    pub scale_min: f64,
    #[serde(default = "default_scale_max")]
    pub scale_max: f64,
}

fn default_delimiter() -> String {
    ",".into()
}
fn default_user_column() -> String {
    "user_id".into()
}
fn default_item_column() -> String {
    "item_id".into()
}
fn default_rating_column() -> String {
    "rating".into()
}
fn default_scale_min() -> f64 {
    1.0
}
fn default_scale_max() -> f64 {
    1000.0
}

impl DatasetConfig {
    pub fn schema(&self) -> Result<Schema> {
        let delimiter = match self.delimiter.as_bytes() {
            [b] => *b,
            _ => {
                return Err(Error::Config(format!(
                    "dataset.delimiter must be a single byte, got {:?}",
                    self.delimiter
                )))
            }
        };
        let mut schema = Schema::new(self.rating_range()?);
        schema.delimiter = delimiter;
        schema.user_column = self.user_column.clone();
        schema.item_column = self.item_column.clone();
        schema.rating_column = self.rating_column.clone();
        if self.kind == DatasetKind::Implicit {
            schema.implicit_marker = Some(self.implicit_marker.unwrap_or(0.0));
        }
        Ok(schema)
    }

    pub fn rating_range(&self) -> Result<RatingRange> {
        RatingRange::new(self.rating_min, self.rating_max)
            .map_err(|e| Error::Config(format!("dataset rating range: {e}")))
    }

    pub fn scale_range(&self) -> Result<RatingRange> {
        RatingRange::new(self.scale_min, self.scale_max)
            .map_err(|e| Error::Config(format!("dataset scale range: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// Fraction of the profile in the popular-item set.
    #[default]
    PopRatio,
    /// Mean item popularity over the profile.
    AvgItemPop,
    /// Kendall tau between global and personal rating averages.
    Mainstreaminess,
    /// Per-user scores read from `score_file`.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroupingConfig {
    pub score: ScoreKind,
    pub score_file: Option<PathBuf>,
    pub score_column: String,
    pub top_fraction: f64,
    /// LowPop, MedPop, HighPop sizes; equal thirds when absent.
    pub sizes: Option<[usize; 3]>,
    /// Seeded per-group user subsample of this total size, taken after
    /// grouping.
    pub user_sample: Option<usize>,
}

impl Default for GroupingConfig {
    fn default() -> Self {
        Self {
            score: ScoreKind::PopRatio,
            score_file: None,
            score_column: "score".into(),
            top_fraction: 0.2,
            sizes: None,
            user_sample: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnnSection {
    pub k: usize,
    pub min_support: usize,
}

impl Default for KnnSection {
    fn default() -> Self {
        let p = KnnParams::default();
        Self {
            k: p.k,
            min_support: p.min_support,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NmfSection {
    pub factors: usize,
    pub epochs: usize,
    pub reg_user: f64,
    pub reg_item: f64,
}

impl Default for NmfSection {
    fn default() -> Self {
        let p = NmfParams::default();
        Self {
            factors: p.factors,
            epochs: p.epochs,
            reg_user: p.reg_user,
            reg_item: p.reg_item,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoClusteringSection {
    pub user_clusters: usize,
    pub item_clusters: usize,
    pub epochs: usize,
}

impl Default for CoClusteringSection {
    fn default() -> Self {
        let p = CoClusteringParams::default();
        Self {
            user_clusters: p.user_clusters,
            item_clusters: p.item_clusters,
            epochs: p.epochs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub folds: usize,
    pub algorithms: Vec<Algorithm>,
    pub knn: KnnSection,
    pub nmf: NmfSection,
    pub coclustering: CoClusteringSection,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            algorithms: Algorithm::ALL.to_vec(),
            knn: KnnSection::default(),
            nmf: NmfSection::default(),
            coclustering: CoClusteringSection::default(),
        }
    }
}

impl EvaluationConfig {
    /// Spec for `algorithm` seeded with `seed`.
    pub fn spec(&self, algorithm: Algorithm, seed: u64) -> AlgorithmSpec {
        let knn = KnnParams {
            k: self.knn.k,
            min_support: self.knn.min_support,
        };
        match algorithm {
            Algorithm::UserKnn => AlgorithmSpec::UserKnn(knn),
            Algorithm::UserKnnAvg => AlgorithmSpec::UserKnnAvg(knn),
            Algorithm::Nmf => AlgorithmSpec::Nmf(NmfParams {
                factors: self.nmf.factors,
                epochs: self.nmf.epochs,
                reg_user: self.nmf.reg_user,
                reg_item: self.nmf.reg_item,
                seed,
            }),
            Algorithm::CoClustering => AlgorithmSpec::CoClustering(CoClusteringParams {
                user_clusters: self.coclustering.user_clusters,
                item_clusters: self.coclustering.item_clusters,
                epochs: self.coclustering.epochs,
                seed,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BiasSection {
    pub enabled: bool,
    pub top_n: usize,
    pub min_item_ratings: usize,
    /// 0 disables candidate subsampling.
    pub max_candidates: usize,
    pub include_zero_counts: bool,
}

impl Default for BiasSection {
    fn default() -> Self {
        let b = BiasConfig::default();
        Self {
            enabled: true,
            top_n: b.top_n,
            min_item_ratings: b.candidates.min_item_ratings,
            max_candidates: b.candidates.max_candidates.unwrap_or(0),
            include_zero_counts: b.include_zero_counts,
        }
    }
}

impl BiasSection {
    pub fn to_config(&self, seed: u64) -> BiasConfig {
        BiasConfig {
            top_n: self.top_n,
            candidates: CandidatePolicy {
                min_item_ratings: self.min_item_ratings,
                max_candidates: (self.max_candidates > 0).then_some(self.max_candidates),
                seed,
            },
            include_zero_counts: self.include_zero_counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a TOML config, or the config echo of a `manifest.json`. Relative
    /// dataset, score-file and output paths resolve against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            let manifest: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            let echo = manifest
                .get("config")
                .ok_or_else(|| Error::Config(format!("{} has no `config` entry", path.display())))?;
            serde_json::from_value(echo.clone()).map_err(|e| Error::Config(e.to_string()))?
        } else {
            Self::from_toml_str(&text)?
        };
        let absolute = std::path::absolute(path).map_err(|e| Error::io(path, e))?;
        let base = absolute.parent().unwrap_or(Path::new("/"));
        cfg.dataset.path = resolve(base, &cfg.dataset.path);
        if let Some(p) = &cfg.grouping.score_file {
            cfg.grouping.score_file = Some(resolve(base, p));
        }
        cfg.output.dir = resolve(base, &cfg.output.dir);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    /// Checks every knob against the preconditions of the stage it feeds.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let d = &self.dataset;
        d.schema()?;
        if d.name.trim().is_empty() {
            return bad("dataset.name is empty".into());
        }
        match (d.min_user_ratings, d.max_user_ratings) {
            (Some(0), _) => return bad("dataset.min_user_ratings must be at least 1".into()),
            (Some(lo), Some(hi)) if hi < lo => {
                return bad(format!("dataset.max_user_ratings {hi} < min_user_ratings {lo}"))
            }
            _ => {}
        }
        match d.kind {
            DatasetKind::Implicit => match d.implicit_fill {
                None => return bad("dataset.implicit_fill is required for implicit datasets".into()),
                Some(f) if !d.rating_range()?.contains(f) => {
                    return bad(format!("dataset.implicit_fill {f} outside the rating range"))
                }
                _ => {}
            },
            DatasetKind::Playcount => {
                d.scale_range()?;
            }
            DatasetKind::Explicit => {}
        }

        let g = &self.grouping;
        if !(g.top_fraction > 0.0 && g.top_fraction <= 1.0) {
            return bad(format!("grouping.top_fraction {} not in (0, 1]", g.top_fraction));
        }
        if g.score == ScoreKind::File && g.score_file.is_none() {
            return bad("grouping.score = \"file\" needs grouping.score_file".into());
        }
        if g.user_sample.is_some_and(|n| n < 3) {
            return bad("grouping.user_sample must be at least 3".into());
        }

        let e = &self.evaluation;
        if e.folds < 2 {
            return bad(format!("evaluation.folds must be at least 2, got {}", e.folds));
        }
        if e.algorithms.is_empty() {
            return bad("evaluation.algorithms is empty".into());
        }
        for (i, a) in e.algorithms.iter().enumerate() {
            if e.algorithms[..i].contains(a) {
                return bad(format!("evaluation.algorithms lists {a} twice"));
            }
            e.spec(*a, 0)
                .validate()
                .map_err(|err| Error::Config(format!("evaluation.{a}: {err}")))?;
        }
        if self.bias.enabled {
            self.bias
                .to_config(0)
                .validate()
                .map_err(|err| Error::Config(err.to_string()))?;
        }
        Ok(())
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
