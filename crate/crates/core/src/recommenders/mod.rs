//! Collaborative-filtering rating predictors behind one fit/predict contract.
//!
//! Every model falls back to training means for users or items it has not
//! seen, and clamps its output into the training rating range.

mod coclustering;
mod knn;
mod nmf;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Rating, RatingDataset, RatingRange};

pub use coclustering::{CoClusteringModel, CoClusteringParams};
pub use knn::{similarity_msd, KnnModel, KnnParams};
pub use nmf::{NmfModel, NmfParams};

/// Compressed row storage of one side of the rating matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Compressed {
    ptr: Vec<usize>,
    idx: Vec<u32>,
    val: Vec<f64>,
}

impl Compressed {
    fn build(n_rows: usize, triples: &[(u32, u32, f64)]) -> Self {
        let mut ptr = vec![0usize; n_rows + 1];
        for &(row, _, _) in triples {
            ptr[row as usize + 1] += 1;
        }
        for r in 0..n_rows {
            ptr[r + 1] += ptr[r];
        }
        let mut fill = ptr.clone();
        let mut idx = vec![0u32; triples.len()];
        let mut val = vec![0.0; triples.len()];
        let mut sorted: Vec<&(u32, u32, f64)> = triples.iter().collect();
        sorted.sort_by_key(|t| (t.0, t.1));
        for &&(row, col, v) in &sorted {
            let at = fill[row as usize];
            idx[at] = col;
            val[at] = v;
            fill[row as usize] += 1;
        }
        Self { ptr, idx, val }
    }

    fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let span = self.ptr[r]..self.ptr[r + 1];
        (&self.idx[span.clone()], &self.val[span])
    }
}

/// Training-side rating matrix with both user-major and item-major views.
///
/// Index space is that of the source dataset; users or items with no
/// training ratings are simply empty rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseRatings {
    n_users: usize,
    n_items: usize,
    by_user: Compressed,
    by_item: Compressed,
    range: RatingRange,
    global_mean: f64,
}

impl SparseRatings {
    pub fn from_dataset(ds: &RatingDataset) -> Result<Self> {
        Self::from_ratings(
            ds.n_users(),
            ds.n_items(),
            ds.ratings().iter().copied(),
            ds.rating_range(),
        )
    }

    pub fn from_ratings(
        n_users: usize,
        n_items: usize,
        ratings: impl IntoIterator<Item = Rating>,
        range: RatingRange,
    ) -> Result<Self> {
        let triples: Vec<(u32, u32, f64)> = ratings
            .into_iter()
            .map(|r| (r.user, r.item, r.value))
            .collect();
        if triples.is_empty() {
            return Err(Error::degenerate("empty training set"));
        }
        if let Some(t) = triples
            .iter()
            .find(|t| t.0 as usize >= n_users || t.1 as usize >= n_items)
        {
            return Err(Error::invalid(format!(
                "rating ({}, {}) outside a {n_users}x{n_items} matrix",
                t.0, t.1
            )));
        }
        let by_user = Compressed::build(n_users, &triples);
        let flipped: Vec<(u32, u32, f64)> = triples.iter().map(|&(u, i, v)| (i, u, v)).collect();
        let by_item = Compressed::build(n_items, &flipped);
        let global_mean = by_user.val.iter().sum::<f64>() / by_user.val.len() as f64;
        Ok(Self {
            n_users,
            n_items,
            by_user,
            by_item,
            range,
            global_mean,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_ratings(&self) -> usize {
        self.by_user.val.len()
    }

    pub fn rating_range(&self) -> RatingRange {
        self.range
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    /// Items (ascending) and values rated by `u`.
    pub fn user_row(&self, u: u32) -> (&[u32], &[f64]) {
        self.by_user.row(u as usize)
    }

    /// Users (ascending) and values for item `i`.
    pub fn item_col(&self, i: u32) -> (&[u32], &[f64]) {
        self.by_item.row(i as usize)
    }

    pub fn user_count(&self, u: u32) -> usize {
        self.by_user.ptr[u as usize + 1] - self.by_user.ptr[u as usize]
    }

    pub fn item_count(&self, i: u32) -> usize {
        self.by_item.ptr[i as usize + 1] - self.by_item.ptr[i as usize]
    }

    pub fn user_mean(&self, u: u32) -> Option<f64> {
        mean(self.user_row(u).1)
    }

    pub fn item_mean(&self, i: u32) -> Option<f64> {
        mean(self.item_col(i).1)
    }

    /// Iterates all training triples in (user, item) order.
    pub fn iter(&self) -> impl Iterator<Item = Rating> + '_ {
        (0..self.n_users as u32).flat_map(move |u| {
            let (items, vals) = self.user_row(u);
            items.iter().zip(vals).map(move |(&i, &v)| Rating {
                user: u,
                item: i,
                value: v,
            })
        })
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Frozen training means used by the fallback chain and the mean-centred
/// predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub global_mean: f64,
    pub user_means: Vec<Option<f64>>,
    pub item_means: Vec<Option<f64>>,
    pub range: RatingRange,
}

impl Baseline {
    pub fn from_training(train: &SparseRatings) -> Self {
        Self {
            global_mean: train.global_mean(),
            user_means: (0..train.n_users() as u32).map(|u| train.user_mean(u)).collect(),
            item_means: (0..train.n_items() as u32).map(|i| train.item_mean(i)).collect(),
            range: train.rating_range(),
        }
    }

    pub fn user_mean(&self, u: u32) -> Option<f64> {
        self.user_means.get(u as usize).copied().flatten()
    }

    pub fn item_mean(&self, i: u32) -> Option<f64> {
        self.item_means.get(i as usize).copied().flatten()
    }

    /// Fallback for pairs where the user or item is unknown; `None` when both
    /// are known and the model should predict.
    fn fallback(&self, u: u32, i: u32) -> Option<f64> {
        match (self.user_mean(u), self.item_mean(i)) {
            (None, None) => Some(self.global_mean),
            (None, Some(mi)) => Some(mi),
            (Some(mu), None) => Some(mu),
            (Some(_), Some(_)) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "UserKNN")]
    UserKnn,
    #[serde(rename = "UserKNNAvg")]
    UserKnnAvg,
    #[serde(rename = "NMF")]
    Nmf,
    #[serde(rename = "CoClustering")]
    CoClustering,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::UserKnn,
        Algorithm::UserKnnAvg,
        Algorithm::Nmf,
        Algorithm::CoClustering,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::UserKnn => "UserKNN",
            Algorithm::UserKnnAvg => "UserKNNAvg",
            Algorithm::Nmf => "NMF",
            Algorithm::CoClustering => "CoClustering",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown algorithm `{s}`")))
    }
}

/// An algorithm together with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AlgorithmSpec {
    UserKnn(KnnParams),
    UserKnnAvg(KnnParams),
    Nmf(NmfParams),
    CoClustering(CoClusteringParams),
}

impl AlgorithmSpec {
    /// The algorithm with its default hyperparameters.
    pub fn default_for(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::UserKnn => AlgorithmSpec::UserKnn(KnnParams::default()),
            Algorithm::UserKnnAvg => AlgorithmSpec::UserKnnAvg(KnnParams::default()),
            Algorithm::Nmf => AlgorithmSpec::Nmf(NmfParams::default()),
            Algorithm::CoClustering => AlgorithmSpec::CoClustering(CoClusteringParams::default()),
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            AlgorithmSpec::UserKnn(_) => Algorithm::UserKnn,
            AlgorithmSpec::UserKnnAvg(_) => Algorithm::UserKnnAvg,
            AlgorithmSpec::Nmf(_) => Algorithm::Nmf,
            AlgorithmSpec::CoClustering(_) => Algorithm::CoClustering,
        }
    }

    /// Same spec with the random seed replaced (no-op for KNN).
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            AlgorithmSpec::Nmf(p) => p.seed = seed,
            AlgorithmSpec::CoClustering(p) => p.seed = seed,
            AlgorithmSpec::UserKnn(_) | AlgorithmSpec::UserKnnAvg(_) => {}
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AlgorithmSpec::UserKnn(p) | AlgorithmSpec::UserKnnAvg(p) => p.validate(),
            AlgorithmSpec::Nmf(p) => p.validate(),
            AlgorithmSpec::CoClustering(p) => p.validate(),
        }
    }

    pub fn fit(&self, train: &SparseRatings) -> Result<TrainedModel> {
        self.validate()?;
        let baseline = Baseline::from_training(train);
        let state = match self {
            AlgorithmSpec::UserKnn(p) => ModelState::Knn(KnnModel::fit(train, *p, false)?),
            AlgorithmSpec::UserKnnAvg(p) => ModelState::Knn(KnnModel::fit(train, *p, true)?),
            AlgorithmSpec::Nmf(p) => ModelState::Nmf(NmfModel::fit(train, p)?),
            AlgorithmSpec::CoClustering(p) => {
                ModelState::CoClustering(CoClusteringModel::fit(train, p)?)
            }
        };
        Ok(TrainedModel {
            algorithm: self.algorithm(),
            baseline,
            state,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state")]
pub enum ModelState {
    Knn(KnnModel),
    Nmf(NmfModel),
    CoClustering(CoClusteringModel),
}

/// A fitted predictor. Immutable; safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub algorithm: Algorithm,
    pub baseline: Baseline,
    pub state: ModelState,
}

pub const MODEL_FORMAT: &str = "popbias-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelArtifact {
    format: String,
    version: u32,
    model: TrainedModel,
}

impl TrainedModel {
    /// Predicted rating for user `u` on item `i`, clamped into the training
    /// rating range. Indices beyond the training matrix count as unknown.
    pub fn predict(&self, u: u32, i: u32) -> f64 {
        self.baseline.range.clamp(self.predict_unclamped(u, i))
    }

    fn predict_unclamped(&self, u: u32, i: u32) -> f64 {
        if let Some(v) = self.baseline.fallback(u, i) {
            return v;
        }
        match &self.state {
            ModelState::Knn(m) => m.estimate(&self.baseline, u, i),
            ModelState::Nmf(m) => m.estimate(u, i),
            ModelState::CoClustering(m) => m.estimate(&self.baseline, u, i),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelArtifact {
            format: MODEL_FORMAT.into(),
            version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let artifact: ModelArtifact = serde_json::from_str(text)?;
        if artifact.format != MODEL_FORMAT || artifact.version != MODEL_FORMAT_VERSION {
            return Err(Error::Serde(format!(
                "unsupported model artifact {} v{}",
                artifact.format, artifact.version
            )));
        }
        let mut model = artifact.model;
        if let ModelState::Knn(k) = &mut model.state {
            k.rebuild();
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn fixture() -> RatingDataset {
        RatingDataset::from_triples(
            [
                ("A", "i1", 4.0),
                ("B", "i1", 5.0),
                ("B", "i2", 3.0),
                ("C", "i1", 1.0),
                ("C", "i2", 2.0),
            ],
            RatingRange::new(1.0, 5.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn sparse_views_agree() {
        let ds = fixture();
        let sp = SparseRatings::from_dataset(&ds).unwrap();
        assert_eq!(sp.n_ratings(), 5);
        assert_eq!(sp.global_mean(), 3.0);
        let from_items: usize = (0..2).map(|i| sp.item_count(i)).sum();
        assert_eq!(from_items, 5);
        assert_eq!(sp.item_col(1), (&[1u32, 2][..], &[3.0, 2.0][..]));
        assert_eq!(sp.user_mean(2), Some(1.5));
        let back: Vec<Rating> = sp.iter().collect();
        assert_eq!(back, ds.ratings());
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let r = SparseRatings::from_ratings(2, 2, std::iter::empty(), RatingRange::new(1.0, 5.0).unwrap());
        assert!(r.is_err());
    }

    #[test]
    fn fallback_chain() {
        // user 0 knows only item 0; item 1 rated by user 1 only; user 2 and item 2 unseen.
        let train = SparseRatings::from_ratings(
            3,
            3,
            [
                Rating { user: 0, item: 0, value: 2.0 },
                Rating { user: 1, item: 1, value: 4.0 },
                Rating { user: 1, item: 0, value: 3.0 },
            ],
            RatingRange::new(1.0, 5.0).unwrap(),
        )
        .unwrap();
        for alg in Algorithm::ALL {
            let m = AlgorithmSpec::default_for(alg).fit(&train).unwrap();
            assert_eq!(m.predict(2, 2), 3.0, "{alg}");
            assert_eq!(m.predict(2, 1), 4.0, "{alg}");
            assert_eq!(m.predict(0, 2), 2.0, "{alg}");
            assert_eq!(m.predict(99, 99), 3.0, "{alg}");
        }
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("SVD".parse::<Algorithm>().is_err());
    }

    #[test]
    fn artifact_round_trip() {
        let ds = fixture();
        let train = SparseRatings::from_dataset(&ds).unwrap();
        for alg in Algorithm::ALL {
            let m = AlgorithmSpec::default_for(alg).fit(&train).unwrap();
            let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
            for u in 0..3 {
                for i in 0..2 {
                    assert_eq!(m.predict(u, i).to_bits(), back.predict(u, i).to_bits());
                }
            }
        }
        assert!(TrainedModel::from_json(r#"{"format":"other","version":1,"model":null}"#).is_err());
    }

    fn random_ratings() -> impl Strategy<Value = Vec<(u8, u8, u8)>> {
        prop::collection::btree_map((0u8..6, 0u8..6), 1u8..=5, 1..30)
            .prop_map(|m| m.into_iter().map(|((u, i), v)| (u, i, v)).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn predictions_stay_in_range(cells in random_ratings(), seed in any::<u64>()) {
            let range = RatingRange::new(1.0, 5.0).unwrap();
            let train = SparseRatings::from_ratings(
                7, 7,
                cells.iter().map(|&(u, i, v)| Rating { user: u as u32, item: i as u32, value: v as f64 }),
                range,
            ).unwrap();
            for alg in Algorithm::ALL {
                let spec = AlgorithmSpec::default_for(alg).with_seed(seed);
                let m = spec.fit(&train).unwrap();
                let m2 = spec.fit(&train).unwrap();
                for u in 0..8 {
                    for i in 0..8 {
                        let p = m.predict(u, i);
                        prop_assert!(range.contains(p), "{alg} gave {p}");
                        prop_assert_eq!(p.to_bits(), m2.predict(u, i).to_bits());
                    }
                }
            }
        }
    }
}
