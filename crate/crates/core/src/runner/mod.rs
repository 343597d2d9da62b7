//! Experiment orchestration: configuration, the staged pipeline and the
//! on-disk report bundle.
//!
//! A run writes into `<dir>.partial` and renames it to `<dir>` on success;
//! on failure the partial directory is removed.

mod config;
mod reference;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{
    BiasSection, CoClusteringSection, DatasetConfig, DatasetKind, EvaluationConfig,
    ExperimentConfig, GroupingConfig, KnnSection, NmfSection, OutputConfig, ScoreKind,
};
pub use reference::{
    verify_against_reference, CellCheck, MarkerCheck, OrderingCheck, ReferenceCell,
    ReferenceTable, VerificationReport,
};

use crate::bias_analysis::{
    group_regressions, profile_size_popularity_correlation, write_profile_correlation_csv,
    write_rec_frequency_csv, write_regressions_csv, RecFrequencyBuilder, RecFrequencyTable,
    RegressionRow,
};
use crate::error::{Error, Result, StageExt};
use crate::evaluation::{
    evaluate_with, make_folds, write_group_summary_csv, write_mae_per_user_csv,
    write_significance_csv, EvaluationReport, Significance,
};
use crate::ingest::{
    convert_implicit, dataset_stats, filter_users, parse_ratings, scale_playcounts,
    write_dataset, DatasetStats, RatingDataset,
};
use crate::popularity::{
    equal_group_sizes, item_popularity, split_groups, write_popularity_csv, Group,
    GroupAssignment, PopularityProfile,
};
use crate::recommenders::{Algorithm, AlgorithmSpec};
use crate::seed::derive_seed;

/// Values for the three groups, serialized under their group names.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GroupValues {
    #[serde(rename = "LowPop")]
    pub low_pop: Option<f64>,
    #[serde(rename = "MedPop")]
    pub med_pop: Option<f64>,
    #[serde(rename = "HighPop")]
    pub high_pop: Option<f64>,
}

impl GroupValues {
    pub fn from_fn(mut f: impl FnMut(Group) -> Option<f64>) -> Self {
        Self {
            low_pop: f(Group::LowPop),
            med_pop: f(Group::MedPop),
            high_pop: f(Group::HighPop),
        }
    }

    pub fn get(&self, g: Group) -> Option<f64> {
        match g {
            Group::LowPop => self.low_pop,
            Group::MedPop => self.med_pop,
            Group::HighPop => self.high_pop,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub grand_mae: GroupValues,
    pub grand_mae_per_rating: GroupValues,
    /// LowPop significance marker; `None` when the tests could not run.
    pub significance: Option<Significance>,
}

/// Grand MAE per algorithm and group with LowPop significance markers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub dataset: String,
    pub seed: u64,
    pub folds: usize,
    pub group_sizes: [usize; 3],
    pub results: Vec<SummaryRow>,
}

impl Summary {
    pub fn from_reports(dataset: &str, seed: u64, folds: usize, groups: &GroupAssignment, reports: &[EvaluationReport]) -> Self {
        Self {
            dataset: dataset.to_string(),
            seed,
            folds,
            group_sizes: Group::ALL.map(|g| groups.members(g).len()),
            results: reports
                .iter()
                .map(|r| SummaryRow {
                    algorithm: r.algorithm,
                    grand_mae: GroupValues::from_fn(|g| r.grand_mae[g.index()]),
                    grand_mae_per_rating: GroupValues::from_fn(|g| r.grand_mae_per_rating[g.index()]),
                    significance: r.significance.as_ref().map(|s| s.flag),
                })
                .collect(),
        }
    }

    pub fn row(&self, algorithm: Algorithm) -> Option<&SummaryRow> {
        self.results.iter().find(|r| r.algorithm == algorithm)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Loads and preprocesses the configured dataset: parse, convert implicit
/// feedback, filter users, then rescale play counts.
pub fn load_dataset(cfg: &DatasetConfig) -> Result<RatingDataset> {
    let mut ds = parse_ratings(&cfg.path, &cfg.schema()?)?;
    if cfg.kind == DatasetKind::Implicit {
        let fill = cfg
            .implicit_fill
            .ok_or_else(|| Error::Config("dataset.implicit_fill is required".into()))?;
        ds = convert_implicit(&ds, cfg.implicit_marker.unwrap_or(0.0), fill)?;
    }
    if cfg.min_user_ratings.is_some() || cfg.max_user_ratings.is_some() {
        ds = filter_users(
            &ds,
            cfg.min_user_ratings.unwrap_or(1),
            cfg.max_user_ratings.unwrap_or(usize::MAX),
        )?;
    }
    if cfg.kind == DatasetKind::Playcount {
        ds = scale_playcounts(&ds, cfg.scale_range()?)?;
    }
    Ok(ds)
}

/// Reads per-user scores from a CSV with the dataset's user column and
/// `column`. Users absent from the file get no score.
pub fn read_score_file(ds: &RatingDataset, path: &Path, user_column: &str, column: &str) -> Result<Vec<Option<f64>>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (uc, sc) = (find(user_column)?, find(column)?);
    let mut scores = vec![None; ds.n_users()];
    for (n, row) in rdr.records().enumerate() {
        let row = row?;
        let line = n + 2;
        let (Some(user), Some(raw)) = (row.get(uc), row.get(sc)) else {
            return Err(Error::MalformedRow { line, reason: "missing field".into() });
        };
        if raw.is_empty() {
            continue;
        }
        let value: f64 = raw.parse().map_err(|_| Error::MalformedRow {
            line,
            reason: format!("score `{raw}` is not a number"),
        })?;
        if let Some(u) = ds.user_index(user) {
            scores[u as usize] = Some(value);
        }
    }
    Ok(scores)
}

/// Everything up to and including user grouping.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: RatingDataset,
    pub stats: DatasetStats,
    pub profile: PopularityProfile,
    pub groups: GroupAssignment,
    /// The dataset models are evaluated on: the full dataset, or the user
    /// subsample when `grouping.user_sample` is set.
    pub eval_dataset: RatingDataset,
    pub eval_groups: GroupAssignment,
}

pub fn grouping_scores(ds: &RatingDataset, profile: &PopularityProfile, cfg: &ExperimentConfig) -> Result<Vec<Option<f64>>> {
    Ok(match cfg.grouping.score {
        ScoreKind::PopRatio => profile.user_pop_ratio.iter().map(|&v| Some(v)).collect(),
        ScoreKind::AvgItemPop => profile.user_avg_item_pop.iter().map(|&v| Some(v)).collect(),
        ScoreKind::Mainstreaminess => profile
            .user_mainstreaminess
            .clone()
            .unwrap_or_else(|| crate::popularity::mainstreaminess(ds)),
        ScoreKind::File => {
            let path = cfg
                .grouping
                .score_file
                .as_ref()
                .ok_or_else(|| Error::Config("grouping.score_file is required".into()))?;
            read_score_file(ds, path, &cfg.dataset.user_column, &cfg.grouping.score_column)?
        }
    })
}

/// Seeded per-group subsample totalling `n` users (n/3 from each group),
/// restricted to the sampled users' ratings.
pub fn subsample_users(ds: &RatingDataset, groups: &GroupAssignment, n: usize, seed: u64) -> (RatingDataset, GroupAssignment) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; ds.n_users()];
    for g in Group::ALL {
        let members = groups.members(g);
        let take = (n / 3).min(members.len());
        for k in sample(&mut rng, members.len(), take) {
            keep[members[k] as usize] = true;
        }
    }
    let sub = ds.retain(|r| keep[r.user as usize]);
    let labels = (0..ds.n_users() as u32)
        .filter(|&u| keep[u as usize])
        .map(|u| groups.group_of(u))
        .collect();
    (sub, GroupAssignment::from_labels(labels))
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let dataset = load_dataset(&cfg.dataset).stage("ingest")?;
    let stats = dataset_stats(&dataset).stage("ingest")?;
    let with_m = cfg.grouping.score == ScoreKind::Mainstreaminess || cfg.dataset.kind == DatasetKind::Playcount;
    let profile = PopularityProfile::compute(&dataset, cfg.grouping.top_fraction, with_m).stage("popularity")?;
    let scores = grouping_scores(&dataset, &profile, cfg).stage("popularity")?;
    let n_scored = scores.iter().flatten().count();
    let sizes = cfg.grouping.sizes.unwrap_or_else(|| equal_group_sizes(n_scored));
    let groups = split_groups(&scores, sizes).stage("popularity")?;
    let (eval_dataset, eval_groups) = match cfg.grouping.user_sample {
        Some(n) => subsample_users(&dataset, &groups, n, derive_seed(cfg.seed, "user-sample")),
        None => (dataset.clone(), groups.clone()),
    };
    Ok(Prepared {
        dataset,
        stats,
        profile,
        groups,
        eval_dataset,
        eval_groups,
    })
}

/// Which parts of the pipeline to execute and write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Plan {
    pub name: &'static str,
    pub dump_dataset: bool,
    pub popularity: bool,
    pub evaluate: bool,
    pub bias: bool,
}

impl Plan {
    pub const INGEST: Plan = Plan { name: "ingest", dump_dataset: true, popularity: false, evaluate: false, bias: false };
    pub const POPULARITY: Plan = Plan { name: "popularity", dump_dataset: false, popularity: true, evaluate: false, bias: false };
    pub const EVALUATE: Plan = Plan { name: "evaluate", dump_dataset: false, popularity: true, evaluate: true, bias: false };
    pub const BIAS: Plan = Plan { name: "bias", dump_dataset: false, popularity: true, evaluate: false, bias: true };
    pub const FULL: Plan = Plan { name: "run", dump_dataset: false, popularity: true, evaluate: true, bias: true };
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub summary: Option<Summary>,
    pub warnings: Vec<String>,
}

/// Runs the full pipeline and writes the report bundle.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    run_plan(cfg, Plan::FULL)
}

pub fn run_plan(cfg: &ExperimentConfig, plan: Plan) -> Result<RunOutcome> {
    cfg.validate()?;
    let out = cfg.output.dir.clone();
    let partial = PathBuf::from(format!("{}.partial", out.display()));
    if partial.exists() {
        fs::remove_dir_all(&partial).map_err(|e| Error::io(&partial, e))?;
    }
    fs::create_dir_all(&partial).map_err(|e| Error::io(&partial, e))?;

    let result = if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(|| execute(cfg, plan, &partial)))
    } else {
        execute(cfg, plan, &partial)
    };
    match result {
        Ok(mut outcome) => {
            if out.exists() {
                fs::remove_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            }
            fs::rename(&partial, &out).map_err(|e| Error::io(&out, e))?;
            outcome.out_dir = out;
            Ok(outcome)
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&partial);
            Err(e)
        }
    }
}

struct Bundle<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Bundle<'_> {
    fn write(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn write_str(&mut self, name: &str, text: &str) -> Result<()> {
        self.write(name, |w| w.write_all(text.as_bytes()).map_err(|e| Error::io(name, e)))
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a ExperimentConfig,
    seeds: Seeds,
    methods: BTreeMap<&'static str, &'static str>,
    dataset_stats: &'a DatasetStats,
    evaluated_users: usize,
    outputs: &'a [String],
    warnings: &'a [String],
    started_unix: u64,
    wall_clock_seconds: f64,
}

#[derive(Serialize)]
struct Seeds {
    master: u64,
    folds: u64,
    user_sample: Option<u64>,
    derived: BTreeMap<String, u64>,
}

fn methods() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("t_test", "Welch two-sample, two-sided, per fold"),
        ("t_test_samples", "per-user MAE"),
        ("group_mae", "unweighted mean of per-user MAE; per-rating variant reported alongside"),
        ("significance", "*** if all per-fold LowPop tests p<0.001, ** if all p<0.05"),
        ("folds", "rating-level shuffle, round-robin"),
        ("sparsity", "1 - |R|/(|U||I|)"),
    ])
}

fn execute(cfg: &ExperimentConfig, plan: Plan, dir: &Path) -> Result<RunOutcome> {
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut bundle = Bundle { dir, files: Vec::new() };
    let mut warnings = Vec::new();
    let name = cfg.dataset.name.as_str();

    let (prep, seeds_user_sample) = if plan.popularity || plan.evaluate || plan.bias {
        (prepare(cfg)?, cfg.grouping.user_sample.map(|_| derive_seed(cfg.seed, "user-sample")))
    } else {
        let dataset = load_dataset(&cfg.dataset).stage("ingest")?;
        let stats = dataset_stats(&dataset).stage("ingest")?;
        let profile = PopularityProfile::compute(&dataset, cfg.grouping.top_fraction, false).stage("ingest")?;
        let groups = GroupAssignment::from_labels(vec![None; dataset.n_users()]);
        (
            Prepared {
                eval_dataset: dataset.clone(),
                eval_groups: groups.clone(),
                dataset,
                stats,
                profile,
                groups,
            },
            None,
        )
    };

    bundle.write_str("stats.json", &(serde_json::to_string_pretty(&prep.stats)? + "\n"))?;
    bundle.write_str("stats.txt", &format!("{name}\n{}\n", prep.stats))?;
    if plan.dump_dataset {
        bundle.write("dataset.csv", |w| write_dataset(&prep.dataset, w, b','))?;
    }

    if plan.popularity {
        bundle.write("popularity.csv", |w| write_popularity_csv(&prep.dataset, &prep.profile, &prep.groups, w))?;
        match profile_size_popularity_correlation(&prep.dataset, &prep.profile, &prep.groups) {
            Ok(c) => bundle.write("profile_correlation.csv", |w| write_profile_correlation_csv(name, &c, w))?,
            Err(e) => warnings.push(format!("profile correlation skipped: {e}")),
        }
    }

    let mut derived = BTreeMap::new();
    let folds_seed = derive_seed(cfg.seed, "folds");
    let mut summary = None;
    if plan.evaluate || plan.bias {
        let ds = &prep.eval_dataset;
        let groups = &prep.eval_groups;
        let folds = make_folds(ds, cfg.evaluation.folds, folds_seed).stage("evaluate")?;
        let bias_cfg = cfg.bias.to_config(cfg.seed);
        let mut reports = Vec::new();
        let mut tables: Vec<RecFrequencyTable> = Vec::new();
        for &algorithm in &cfg.evaluation.algorithms {
            let spec = cfg.evaluation.spec(algorithm, cfg.seed);
            if matches!(spec, AlgorithmSpec::Nmf(_) | AlgorithmSpec::CoClustering(_)) {
                for k in 0..folds.k {
                    let label = format!("{algorithm}/fold{k}");
                    derived.insert(label.clone(), derive_seed(cfg.seed, &label));
                }
            }
            let mut builder = if plan.bias {
                Some(RecFrequencyBuilder::new(ds.n_items(), algorithm, groups, bias_cfg.clone()).stage("bias")?)
            } else {
                None
            };
            let report = evaluate_with(ds, &spec, groups, &folds, |fold, model, train| match &mut builder {
                Some(b) => b.add_fold(fold, model, train).stage("bias"),
                None => Ok(()),
            })
            .stage("evaluate")?;
            if report.significance.is_none() {
                warnings.push(format!("{algorithm}: significance tests could not run"));
            }
            reports.push(report);
            if let Some(b) = builder {
                tables.push(b.finish());
            }
        }

        if plan.evaluate {
            bundle.write("mae_per_user.csv", |w| write_mae_per_user_csv(ds, &reports, w))?;
            bundle.write("group_summary.csv", |w| write_group_summary_csv(&reports, w))?;
            bundle.write("significance.csv", |w| write_significance_csv(&reports, w))?;
            let s = Summary::from_reports(name, cfg.seed, cfg.evaluation.folds, groups, &reports);
            bundle.write_str("summary.json", &s.to_json()?)?;
            summary = Some(s);
        }

        if plan.bias {
            if bias_cfg.candidates.max_candidates.is_some() {
                for k in 0..folds.k {
                    let label = format!("candidates/fold{k}");
                    derived.insert(label.clone(), derive_seed(cfg.seed, &label));
                }
            }
            let item_pop = item_popularity(ds).stage("bias")?;
            let mut rows = Vec::new();
            for t in &tables {
                for (g, r) in Group::ALL.into_iter().zip(group_regressions(t, &item_pop, bias_cfg.include_zero_counts)) {
                    if let Err(e) = &r {
                        warnings.push(format!("{} {g}: regression skipped: {e}", t.provenance.algorithm));
                    }
                    rows.push(RegressionRow {
                        algorithm: t.provenance.algorithm,
                        group: g,
                        result: r.ok(),
                        candidate_policy: t.provenance.candidate_policy.clone(),
                    });
                }
            }
            bundle.write("rec_frequency.csv", |w| {
                write_rec_frequency_csv(ds, &tables, &item_pop, bias_cfg.include_zero_counts, w)
            })?;
            bundle.write("regressions.csv", |w| write_regressions_csv(name, &rows, w))?;
        }
    }

    let mut outputs = bundle.files.clone();
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: plan.name,
        config: cfg,
        seeds: Seeds {
            master: cfg.seed,
            folds: folds_seed,
            user_sample: seeds_user_sample,
            derived,
        },
        methods: methods(),
        dataset_stats: &prep.stats,
        evaluated_users: prep.eval_groups.n_grouped(),
        outputs: &outputs,
        warnings: &warnings,
        started_unix,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    bundle.write_str("manifest.json", &(serde_json::to_string_pretty(&manifest)? + "\n"))?;

    Ok(RunOutcome {
        out_dir: dir.to_path_buf(),
        files: bundle.files,
        summary,
        warnings,
    })
}
