//! Seeded k-fold cross-validation, per-user and per-group MAE, and the
//! all-folds significance rule for LowPop.

use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Rating, RatingDataset};
use crate::popularity::{Group, GroupAssignment};
use crate::recommenders::{AlgorithmSpec, SparseRatings, TrainedModel};
use crate::seed::derive_seed;
use crate::stats::{mean, sample_variance, student_t_two_sided};

/// Partition of rating indices (into `RatingDataset::ratings()`) into k test
/// sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub test_sets: Vec<Vec<usize>>,
}

/// Shuffles rating indices with a seeded generator and deals them
/// round-robin into `k` test sets.
pub fn make_folds(ds: &RatingDataset, k: usize, seed: u64) -> Result<FoldPlan> {
    make_folds_for(ds.n_ratings(), k, seed)
}

pub fn make_folds_for(n_ratings: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    if k > n_ratings {
        return Err(Error::invalid(format!(
            "{k} folds exceed the {n_ratings} available ratings"
        )));
    }
    let mut order: Vec<usize> = (0..n_ratings).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test_sets = vec![Vec::with_capacity(n_ratings / k + 1); k];
    for (pos, idx) in order.into_iter().enumerate() {
        test_sets[pos % k].push(idx);
    }
    for set in &mut test_sets {
        set.sort_unstable();
    }
    Ok(FoldPlan { k, seed, test_sets })
}

impl FoldPlan {
    /// Training matrix and held-out ratings of fold `fold`.
    pub fn split(&self, ds: &RatingDataset, fold: usize) -> Result<(SparseRatings, Vec<Rating>)> {
        let mut in_test = vec![false; ds.n_ratings()];
        for &i in &self.test_sets[fold] {
            in_test[i] = true;
        }
        let test: Vec<Rating> = self.test_sets[fold].iter().map(|&i| ds.ratings()[i]).collect();
        let train = SparseRatings::from_ratings(
            ds.n_users(),
            ds.n_items(),
            ds.ratings()
                .iter()
                .zip(&in_test)
                .filter(|(_, &t)| !t)
                .map(|(r, _)| *r),
            ds.rating_range(),
        )?;
        Ok((train, test))
    }
}

/// Mean absolute value of the errors.
pub fn mae(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::degenerate("mae of an empty error list"));
    }
    Ok(errors.iter().map(|e| e.abs()).sum::<f64>() / errors.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

/// Welch's unequal-variance two-sample t-test, two-sided.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::degenerate("welch t-test needs at least 2 values per sample"));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a) / a.len() as f64, sample_variance(b) / b.len() as f64);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Err(Error::degenerate("welch t-test on two constant samples"));
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / (va * va / (a.len() as f64 - 1.0) + vb * vb / (b.len() as f64 - 1.0));
    Ok(TTest {
        t,
        p: student_t_two_sided(t, df),
        df,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserFoldError {
    pub user: u32,
    pub group: Option<Group>,
    pub abs_errors: Vec<f64>,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    /// Users with at least one test rating, ascending by index.
    pub users: Vec<UserFoldError>,
    /// Unweighted mean of member per-user MAEs, indexed by `Group::index`.
    pub group_mae: [Option<f64>; 3],
    /// MAE pooled over all member test ratings.
    pub group_mae_per_rating: [Option<f64>; 3],
}

impl FoldResult {
    pub fn user_maes(&self, g: Group) -> Vec<f64> {
        self.users
            .iter()
            .filter(|u| u.group == Some(g))
            .map(|u| u.mae)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupPair {
    LowVsMed,
    LowVsHigh,
}

impl GroupPair {
    pub const BOTH: [GroupPair; 2] = [GroupPair::LowVsMed, GroupPair::LowVsHigh];

    pub fn groups(self) -> (Group, Group) {
        match self {
            GroupPair::LowVsMed => (Group::LowPop, Group::MedPop),
            GroupPair::LowVsHigh => (Group::LowPop, Group::HighPop),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GroupPair::LowVsMed => "LowPop-MedPop",
            GroupPair::LowVsHigh => "LowPop-HighPop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestRecord {
    pub pair: GroupPair,
    pub fold: usize,
    pub t: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Significance {
    #[serde(rename = "")]
    None,
    #[serde(rename = "**")]
    Weak,
    #[serde(rename = "***")]
    Strong,
}

impl Significance {
    pub fn marker(self) -> &'static str {
        match self {
            Significance::None => "",
            Significance::Weak => "**",
            Significance::Strong => "***",
        }
    }

    pub fn is_flagged(self) -> bool {
        self != Significance::None
    }
}

impl fmt::Display for Significance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.marker())
    }
}

/// Significance thresholds for the "***" and "**" markers.
pub const DEFAULT_ALPHAS: (f64, f64) = (0.001, 0.05);

/// Applies the all-folds rule to per-test p-values: `Strong` when every
/// p-value is below `alphas.0`, `Weak` when every one is below `alphas.1`.
pub fn flag_from_p_values(p_values: &[f64], alphas: (f64, f64)) -> Significance {
    if p_values.is_empty() {
        Significance::None
    } else if p_values.iter().all(|&p| p < alphas.0) {
        Significance::Strong
    } else if p_values.iter().all(|&p| p < alphas.1) {
        Significance::Weak
    } else {
        Significance::None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub tests: Vec<TTestRecord>,
    pub flag: Significance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub algorithm: crate::recommenders::Algorithm,
    pub folds: Vec<FoldResult>,
    /// Mean over folds of the group MAE.
    pub grand_mae: [Option<f64>; 3],
    pub grand_mae_per_rating: [Option<f64>; 3],
    /// `None` when a group lacks the samples a t-test needs.
    pub significance: Option<SignificanceResult>,
}

impl EvaluationReport {
    pub fn grand(&self, g: Group) -> Option<f64> {
        self.grand_mae[g.index()]
    }
}

/// Runs Welch tests LowPop-vs-MedPop and LowPop-vs-HighPop in every fold on
/// per-user MAE samples and applies the all-folds rule.
pub fn significance_protocol(report: &EvaluationReport, alphas: (f64, f64)) -> Result<SignificanceResult> {
    let mut tests = Vec::with_capacity(report.folds.len() * 2);
    for fold in &report.folds {
        for pair in GroupPair::BOTH {
            let (a, b) = pair.groups();
            let (sa, sb) = (fold.user_maes(a), fold.user_maes(b));
            if sa.is_empty() || sb.is_empty() {
                return Err(Error::degenerate(format!(
                    "fold {} has no {} or {} samples",
                    fold.fold, a, b
                )));
            }
            let t = welch_t_test(&sa, &sb)?;
            tests.push(TTestRecord {
                pair,
                fold: fold.fold,
                t: t.t,
                p: t.p,
            });
        }
    }
    let p: Vec<f64> = tests.iter().map(|t| t.p).collect();
    Ok(SignificanceResult {
        flag: flag_from_p_values(&p, alphas),
        tests,
    })
}

/// Cross-validates one algorithm. Seeded algorithms get the per-fold seed
/// `derive_seed(spec seed, "<algorithm>/fold<k>")`.
pub fn evaluate(
    ds: &RatingDataset,
    spec: &AlgorithmSpec,
    groups: &GroupAssignment,
    folds: &FoldPlan,
) -> Result<EvaluationReport> {
    evaluate_with(ds, spec, groups, folds, |_, _, _| Ok(()))
}

/// Like [`evaluate`], calling `visit(fold, model, train)` after each fold's
/// model has been scored.
pub fn evaluate_with(
    ds: &RatingDataset,
    spec: &AlgorithmSpec,
    groups: &GroupAssignment,
    folds: &FoldPlan,
    mut visit: impl FnMut(usize, &TrainedModel, &SparseRatings) -> Result<()>,
) -> Result<EvaluationReport> {
    spec.validate()?;
    if groups.n_users() != ds.n_users() {
        return Err(Error::invalid(format!(
            "group assignment covers {} users, dataset has {}",
            groups.n_users(),
            ds.n_users()
        )));
    }
    let base_seed = match spec {
        AlgorithmSpec::Nmf(p) => p.seed,
        AlgorithmSpec::CoClustering(p) => p.seed,
        _ => 0,
    };
    let mut results = Vec::with_capacity(folds.k);
    for fold in 0..folds.k {
        let (train, test) = folds.split(ds, fold)?;
        let fold_spec = spec.with_seed(derive_seed(
            base_seed,
            &format!("{}/fold{fold}", spec.algorithm()),
        ));
        let model = fold_spec.fit(&train)?;
        let errors: Vec<f64> = test
            .par_iter()
            .map(|r| (r.value - model.predict(r.user, r.item)).abs())
            .collect();
        results.push(fold_result(fold, &test, &errors, groups));
        visit(fold, &model, &train)?;
    }
    Ok(assemble(spec.algorithm(), results))
}

fn fold_result(fold: usize, test: &[Rating], errors: &[f64], groups: &GroupAssignment) -> FoldResult {
    let mut per_user: std::collections::BTreeMap<u32, Vec<f64>> = Default::default();
    for (r, &e) in test.iter().zip(errors) {
        per_user.entry(r.user).or_default().push(e);
    }
    let users: Vec<UserFoldError> = per_user
        .into_iter()
        .map(|(user, abs_errors)| UserFoldError {
            user,
            group: groups.group_of(user),
            mae: abs_errors.iter().sum::<f64>() / abs_errors.len() as f64,
            abs_errors,
        })
        .collect();
    let mut group_mae = [None; 3];
    let mut group_mae_per_rating = [None; 3];
    for g in Group::ALL {
        let members: Vec<&UserFoldError> = users.iter().filter(|u| u.group == Some(g)).collect();
        if members.is_empty() {
            continue;
        }
        group_mae[g.index()] = Some(members.iter().map(|u| u.mae).sum::<f64>() / members.len() as f64);
        let (s, n) = members
            .iter()
            .fold((0.0, 0usize), |(s, n), u| (s + u.abs_errors.iter().sum::<f64>(), n + u.abs_errors.len()));
        group_mae_per_rating[g.index()] = Some(s / n as f64);
    }
    FoldResult {
        fold,
        users,
        group_mae,
        group_mae_per_rating,
    }
}

fn assemble(algorithm: crate::recommenders::Algorithm, folds: Vec<FoldResult>) -> EvaluationReport {
    let grand = |pick: &dyn Fn(&FoldResult) -> Option<f64>| {
        let vals: Vec<f64> = folds.iter().filter_map(pick).collect();
        (!vals.is_empty()).then(|| mean(&vals))
    };
    let mut grand_mae = [None; 3];
    let mut grand_mae_per_rating = [None; 3];
    for g in Group::ALL {
        grand_mae[g.index()] = grand(&|f: &FoldResult| f.group_mae[g.index()]);
        grand_mae_per_rating[g.index()] = grand(&|f: &FoldResult| f.group_mae_per_rating[g.index()]);
    }
    let mut report = EvaluationReport {
        algorithm,
        folds,
        grand_mae,
        grand_mae_per_rating,
        significance: None,
    };
    report.significance = significance_protocol(&report, DEFAULT_ALPHAS).ok();
    report
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_mae_per_user_csv(
    ds: &RatingDataset,
    reports: &[EvaluationReport],
    out: impl Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["fold", "algorithm", "user_id", "group", "n_test_ratings", "mae"])?;
    for rep in reports {
        for fold in &rep.folds {
            for u in &fold.users {
                w.write_record([
                    fold.fold.to_string(),
                    rep.algorithm.to_string(),
                    ds.users()[u.user as usize].clone(),
                    u.group.map(|g| g.to_string()).unwrap_or_default(),
                    u.abs_errors.len().to_string(),
                    u.mae.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("mae_per_user.csv", e))?;
    Ok(())
}

pub fn write_group_summary_csv(reports: &[EvaluationReport], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["algorithm", "group", "fold", "group_mae", "grand_mae"])?;
    for rep in reports {
        for g in Group::ALL {
            for fold in &rep.folds {
                w.write_record([
                    rep.algorithm.to_string(),
                    g.to_string(),
                    fold.fold.to_string(),
                    fmt_opt(fold.group_mae[g.index()]),
                    fmt_opt(rep.grand(g)),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("group_summary.csv", e))?;
    Ok(())
}

pub fn write_significance_csv(reports: &[EvaluationReport], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["algorithm", "pair", "fold", "t", "p", "flag"])?;
    for rep in reports {
        let Some(sig) = &rep.significance else { continue };
        for t in &sig.tests {
            w.write_record([
                rep.algorithm.to_string(),
                t.pair.name().to_string(),
                t.fold.to_string(),
                t.t.to_string(),
                t.p.to_string(),
                sig.flag.marker().to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("significance.csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::RatingRange;
    use crate::recommenders::{Algorithm, KnnParams};
    use proptest::prelude::*;

    fn constant_dataset() -> RatingDataset {
        let mut triples = Vec::new();
        for u in 0..9 {
            for i in 0..6 {
                if (u + i) % 3 != 0 {
                    triples.push((format!("u{u}"), format!("i{i}"), 3.0));
                }
            }
        }
        RatingDataset::from_triples(triples, RatingRange::new(1.0, 5.0).unwrap()).unwrap()
    }

    #[test]
    fn fold_sizes() {
        let p = make_folds_for(10, 5, 1).unwrap();
        assert!(p.test_sets.iter().all(|s| s.len() == 2));
        let p = make_folds_for(11, 5, 1).unwrap();
        let sizes: Vec<usize> = p.test_sets.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
        assert_eq!(make_folds_for(11, 5, 1).unwrap(), p);
        assert!(make_folds_for(4, 5, 1).is_err());
        assert!(make_folds_for(10, 1, 1).is_err());
    }

    #[test]
    fn mae_cases() {
        assert_eq!(mae(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, -2.0]).unwrap(), 1.5);
        assert_eq!(mae(&[-0.7; 4]).unwrap(), 0.7);
        assert!(mae(&[]).is_err());
    }

    #[test]
    fn welch_reference_values() {
        // scipy.stats.ttest_ind(equal_var=False)
        let r = welch_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert!((r.t + 1.0).abs() < 1e-12);
        assert!((r.p - 0.34659350708733416).abs() < 1e-9);
        let r = welch_t_test(&[0.3, 1.7, 2.2, 5.9, 4.4, 3.1], &[2.5, 2.9, 7.1, 6.6]).unwrap();
        assert!((r.t + 1.2654381698628443).abs() < 1e-12);
        assert!((r.p - 0.2552547073424018).abs() < 1e-9);
        let r = welch_t_test(
            &[1.0, 1.1, 0.9, 1.05, 0.95, 1.02, 0.98],
            &[2.0, 2.2, 1.9, 2.1, 2.05],
        )
        .unwrap();
        assert!((r.t + 18.8152534255558).abs() < 1e-9);
        assert!((r.p - 1.5361837315744073e-06).abs() < 1e-9);
    }

    #[test]
    fn welch_edge_cases() {
        let a = [1.0, 4.0, 2.0];
        let r = welch_t_test(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p - 1.0).abs() < 1e-15);
        let (x, y) = ([1.0, 2.0, 3.0, 4.0, 5.0], [2.0, 3.0, 4.0, 5.0, 6.5]);
        let (f, b) = (welch_t_test(&x, &y).unwrap(), welch_t_test(&y, &x).unwrap());
        assert_eq!(f.t, -b.t);
        assert_eq!(f.p, b.p);
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_err());
        assert!(welch_t_test(&[1.0, 1.0], &[2.0, 2.0]).is_err());
        assert!(welch_t_test(&[1.0, 1.0], &[2.0, 3.0]).is_ok());
    }

    #[test]
    fn flags() {
        assert_eq!(flag_from_p_values(&[0.0001; 10], DEFAULT_ALPHAS), Significance::Strong);
        let mut p = vec![0.0001; 10];
        p[3] = 0.2;
        assert_eq!(flag_from_p_values(&p, DEFAULT_ALPHAS), Significance::None);
        assert_eq!(flag_from_p_values(&[0.01; 10], DEFAULT_ALPHAS), Significance::Weak);
    }

    #[test]
    fn exact_fit_gives_zero_mae() {
        let ds = constant_dataset();
        let scores: Vec<Option<f64>> = (0..9).map(|u| Some(u as f64)).collect();
        let groups = crate::popularity::split_groups(&scores, [3, 3, 3]).unwrap();
        let folds = make_folds(&ds, 5, 7).unwrap();
        for alg in [Algorithm::UserKnn, Algorithm::UserKnnAvg, Algorithm::CoClustering] {
            let rep = evaluate(&ds, &AlgorithmSpec::default_for(alg), &groups, &folds).unwrap();
            for g in Group::ALL {
                assert!(rep.grand(g).unwrap().abs() < 1e-12, "{alg} {g}");
            }
        }
    }

    #[test]
    fn singleton_aggregation() {
        let ds = RatingDataset::from_triples(
            [("a", "x", 4.0), ("a", "y", 2.0)],
            RatingRange::new(1.0, 5.0).unwrap(),
        )
        .unwrap();
        let groups = GroupAssignment::from_labels(vec![Some(Group::LowPop)]);
        let folds = make_folds(&ds, 2, 0).unwrap();
        let rep = evaluate(&ds, &AlgorithmSpec::UserKnn(KnnParams::default()), &groups, &folds).unwrap();
        for f in &rep.folds {
            assert_eq!(f.users.len(), 1);
            assert_eq!(f.group_mae[0], Some(f.users[0].abs_errors[0]));
            assert_eq!(f.group_mae[1], None);
        }
        assert!(rep.significance.is_none());
    }

    #[test]
    fn group_coverage_is_checked() {
        let ds = constant_dataset();
        let groups = GroupAssignment::from_labels(vec![None; 3]);
        let folds = make_folds(&ds, 5, 7).unwrap();
        let spec = AlgorithmSpec::default_for(Algorithm::Nmf);
        assert!(evaluate(&ds, &spec, &groups, &folds).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition(n in 2usize..300, k in 2usize..12, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let p = make_folds_for(n, k, seed).unwrap();
            let mut all: Vec<usize> = p.test_sets.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let sizes: Vec<usize> = p.test_sets.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }

        #[test]
        fn welch_matches_textbook_formula(
            a in prop::collection::vec(-50.0f64..50.0, 2..50),
            b in prop::collection::vec(-50.0f64..50.0, 2..50),
        ) {
            let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let var = |v: &[f64]| { let mu = m(v); v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (v.len() - 1) as f64 };
            let (sa, sb) = (var(&a) / a.len() as f64, var(&b) / b.len() as f64);
            let t = (m(&a) - m(&b)) / (sa + sb).sqrt();
            let df = (sa + sb).powi(2) / (sa * sa / (a.len() - 1) as f64 + sb * sb / (b.len() - 1) as f64);
            let r = welch_t_test(&a, &b).unwrap();
            prop_assert!((r.t - t).abs() <= 1e-12 * (1.0 + t.abs()));
            prop_assert!((r.df - df).abs() <= 1e-12 * (1.0 + df));
        }
    }
}
