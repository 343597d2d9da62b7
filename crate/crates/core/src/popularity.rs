//! Item- and user-level popularity measures and the LowPop / MedPop / HighPop
//! user split.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::RatingDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    LowPop,
    MedPop,
    HighPop,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::LowPop, Group::MedPop, Group::HighPop];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Group::LowPop => "LowPop",
            Group::MedPop => "MedPop",
            Group::HighPop => "HighPop",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "LowPop" => Ok(Group::LowPop),
            "MedPop" => Ok(Group::MedPop),
            "HighPop" => Ok(Group::HighPop),
            other => Err(Error::invalid(format!("unknown group `{other}`"))),
        }
    }
}

/// Pop_i = |U_i| / |U| for every item.
pub fn item_popularity(ds: &RatingDataset) -> Result<Vec<f64>> {
    if ds.n_users() == 0 {
        return Err(Error::degenerate("item popularity needs at least one user"));
    }
    let n = ds.n_users() as f64;
    Ok(ds
        .item_rater_counts()
        .into_iter()
        .map(|c| c as f64 / n)
        .collect())
}

/// Mean Pop_i over each user's profile.
pub fn user_avg_item_popularity(ds: &RatingDataset, item_pop: &[f64]) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; ds.n_users()];
    let mut cnt = vec![0usize; ds.n_users()];
    for r in ds.ratings() {
        sum[r.user as usize] += item_pop[r.item as usize];
        cnt[r.user as usize] += 1;
    }
    sum.iter()
        .zip(&cnt)
        .enumerate()
        .map(|(u, (&s, &c))| {
            if c == 0 {
                Err(empty_profile(ds, u))
            } else {
                Ok(s / c as f64)
            }
        })
        .collect()
}

fn empty_profile(ds: &RatingDataset, u: usize) -> Error {
    Error::degenerate(format!("user `{}` has an empty profile", ds.users()[u]))
}

/// Indices of the ⌈top_fraction × |I|⌉ most popular items, sorted ascending.
/// Ties at the cutoff go to the smaller (lexicographically first) item.
pub fn popular_item_set(item_pop: &[f64], top_fraction: f64) -> Result<Vec<u32>> {
    if !(top_fraction > 0.0 && top_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "top fraction {top_fraction} must lie in (0, 1)"
        )));
    }
    // The epsilon keeps 0.2 * 10 from rounding up to 3.
    let take = ((top_fraction * item_pop.len() as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut order: Vec<u32> = (0..item_pop.len() as u32).collect();
    order.sort_by(|&a, &b| {
        item_pop[b as usize]
            .total_cmp(&item_pop[a as usize])
            .then(a.cmp(&b))
    });
    let mut set: Vec<u32> = order.into_iter().take(take).collect();
    set.sort_unstable();
    Ok(set)
}

/// Pop_u = |I_u ∩ popular| / |I_u|.
pub fn user_popularity_ratio(ds: &RatingDataset, popular_set: &[u32]) -> Result<Vec<f64>> {
    let mut is_popular = vec![false; ds.n_items()];
    for &i in popular_set {
        is_popular[i as usize] = true;
    }
    let mut hits = vec![0usize; ds.n_users()];
    let mut cnt = vec![0usize; ds.n_users()];
    for r in ds.ratings() {
        cnt[r.user as usize] += 1;
        if is_popular[r.item as usize] {
            hits[r.user as usize] += 1;
        }
    }
    (0..ds.n_users())
        .map(|u| {
            if cnt[u] == 0 {
                Err(empty_profile(ds, u))
            } else {
                Ok(hits[u] as f64 / cnt[u] as f64)
            }
        })
        .collect()
}

/// Kendall's τ-b with tie correction, in O(n log n).
///
/// Fails on length mismatch, fewer than two points, NaNs, or a constant
/// sequence (for which τ-b is undefined).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::degenerate("kendall tau needs at least 2 points"));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::invalid("kendall tau input contains NaN"));
    }

    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let total = (n * (n - 1) / 2) as u64;
    let mut tied_x = 0u64;
    let mut tied_xy = 0u64;
    let (mut run_x, mut run_xy) = (1u64, 1u64);
    for w in pairs.windows(2) {
        if w[0].0 == w[1].0 {
            run_x += 1;
            if w[0].1 == w[1].1 {
                run_xy += 1;
            } else {
                tied_xy += run_xy * (run_xy - 1) / 2;
                run_xy = 1;
            }
        } else {
            tied_x += run_x * (run_x - 1) / 2;
            tied_xy += run_xy * (run_xy - 1) / 2;
            run_x = 1;
            run_xy = 1;
        }
    }
    tied_x += run_x * (run_x - 1) / 2;
    tied_xy += run_xy * (run_xy - 1) / 2;

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);

    let mut tied_y = 0u64;
    let mut run_y = 1u64;
    for w in ys.windows(2) {
        if w[0] == w[1] {
            run_y += 1;
        } else {
            tied_y += run_y * (run_y - 1) / 2;
            run_y = 1;
        }
    }
    tied_y += run_y * (run_y - 1) / 2;

    if tied_x == total || tied_y == total {
        return Err(Error::degenerate(
            "kendall tau is undefined for a constant sequence",
        ));
    }
    let numer = total as f64 - tied_x as f64 - tied_y as f64 + tied_xy as f64 - 2.0 * swaps as f64;
    let denom = ((total - tied_x) as f64 * (total - tied_y) as f64).sqrt();
    Ok((numer / denom).clamp(-1.0, 1.0))
}

/// Stable merge sort returning the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + (mid - i)].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + (n - j)].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Global APC: mean interaction strength per item across all its raters.
/// Unrated items get NaN.
pub fn global_apc(ds: &RatingDataset) -> Vec<f64> {
    let mut sum = vec![0.0; ds.n_items()];
    let mut cnt = vec![0usize; ds.n_items()];
    for r in ds.ratings() {
        sum[r.item as usize] += r.value;
        cnt[r.item as usize] += 1;
    }
    sum.into_iter()
        .zip(cnt)
        .map(|(s, c)| if c == 0 { f64::NAN } else { s / c as f64 })
        .collect()
}

/// Mainstreaminess of one user: τ-b between the global APC of the user's
/// profile items and the user's own interaction strengths on them.
pub fn user_mainstreaminess(ds: &RatingDataset, apc: &[f64], user: u32) -> Result<f64> {
    let profile: Vec<_> = ds.ratings().iter().filter(|r| r.user == user).collect();
    mainstreaminess_of(ds, apc, user, &profile)
}

fn mainstreaminess_of(
    ds: &RatingDataset,
    apc: &[f64],
    user: u32,
    profile: &[&crate::ingest::Rating],
) -> Result<f64> {
    if profile.len() < 2 {
        return Err(Error::degenerate(format!(
            "user `{}` has fewer than 2 profile items",
            ds.users()[user as usize]
        )));
    }
    let global: Vec<f64> = profile.iter().map(|r| apc[r.item as usize]).collect();
    let own: Vec<f64> = profile.iter().map(|r| r.value).collect();
    kendall_tau(&global, &own)
}

/// Mainstreaminess for every user; `None` where τ-b is undefined (profile
/// smaller than 2, or constant global or personal strengths).
pub fn mainstreaminess(ds: &RatingDataset) -> Vec<Option<f64>> {
    let apc = global_apc(ds);
    let spans = ds.user_spans();
    spans
        .into_iter()
        .enumerate()
        .map(|(u, span)| {
            let profile: Vec<_> = ds.ratings()[span].iter().collect();
            mainstreaminess_of(ds, &apc, u as u32, &profile).ok()
        })
        .collect()
}

/// All popularity quantities for one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityProfile {
    pub item_pop: Vec<f64>,
    /// Sorted item indices of the top-fraction most popular items.
    pub popular_set: Vec<u32>,
    pub user_avg_item_pop: Vec<f64>,
    pub user_pop_ratio: Vec<f64>,
    pub user_mainstreaminess: Option<Vec<Option<f64>>>,
}

impl PopularityProfile {
    pub fn compute(ds: &RatingDataset, top_fraction: f64, with_mainstreaminess: bool) -> Result<Self> {
        let item_pop = item_popularity(ds)?;
        let popular_set = popular_item_set(&item_pop, top_fraction)?;
        let user_avg_item_pop = user_avg_item_popularity(ds, &item_pop)?;
        let user_pop_ratio = user_popularity_ratio(ds, &popular_set)?;
        let user_mainstreaminess = with_mainstreaminess.then(|| mainstreaminess(ds));
        Ok(Self {
            item_pop,
            popular_set,
            user_avg_item_pop,
            user_pop_ratio,
            user_mainstreaminess,
        })
    }
}

/// Partition of (a subset of) users into the three popularity groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAssignment {
    labels: Vec<Option<Group>>,
    members: [Vec<u32>; 3],
}

impl GroupAssignment {
    pub fn from_labels(labels: Vec<Option<Group>>) -> Self {
        let mut members: [Vec<u32>; 3] = Default::default();
        for (u, g) in labels.iter().enumerate() {
            if let Some(g) = g {
                members[g.index()].push(u as u32);
            }
        }
        Self { labels, members }
    }

    pub fn group_of(&self, user: u32) -> Option<Group> {
        self.labels.get(user as usize).copied().flatten()
    }

    /// Members of `g`, ascending by user index.
    pub fn members(&self, g: Group) -> &[u32] {
        &self.members[g.index()]
    }

    pub fn labels(&self) -> &[Option<Group>] {
        &self.labels
    }

    pub fn n_users(&self) -> usize {
        self.labels.len()
    }

    pub fn n_grouped(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }
}

/// Sorts users by score (ties by index) and takes the lowest `sizes[0]` as
/// LowPop, the highest `sizes[2]` as HighPop, and a centred block of
/// `sizes[1]` from what remains as MedPop. Users without a score stay
/// ungrouped.
pub fn split_groups(scores: &[Option<f64>], sizes: [usize; 3]) -> Result<GroupAssignment> {
    let mut order: Vec<u32> = (0..scores.len() as u32)
        .filter(|&u| scores[u as usize].is_some())
        .collect();
    let total: usize = sizes.iter().sum();
    if total > order.len() {
        return Err(Error::invalid(format!(
            "group sizes {sizes:?} exceed the {} scored users",
            order.len()
        )));
    }
    if scores.iter().flatten().any(|s| s.is_nan()) {
        return Err(Error::invalid("grouping score contains NaN"));
    }
    order.sort_by(|&a, &b| {
        let (sa, sb) = (scores[a as usize].unwrap(), scores[b as usize].unwrap());
        sa.partial_cmp(&sb).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    let n = order.len();
    let [n_low, n_med, n_high] = sizes;
    let med_start = n_low + (n - total) / 2;

    let mut labels = vec![None; scores.len()];
    for &u in &order[..n_low] {
        labels[u as usize] = Some(Group::LowPop);
    }
    for &u in &order[med_start..med_start + n_med] {
        labels[u as usize] = Some(Group::MedPop);
    }
    for &u in &order[n - n_high..] {
        labels[u as usize] = Some(Group::HighPop);
    }
    Ok(GroupAssignment::from_labels(labels))
}

/// Equal thirds of `n` (remainder users stay in the middle, ungrouped).
pub fn equal_group_sizes(n: usize) -> [usize; 3] {
    [n / 3; 3]
}

/// Writes `popularity.csv`.
pub fn write_popularity_csv(
    ds: &RatingDataset,
    profile: &PopularityProfile,
    groups: &GroupAssignment,
    out: impl Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "user_id",
        "profile_size",
        "avg_item_pop",
        "pop_ratio",
        "mainstreaminess",
        "group",
    ])?;
    let sizes = ds.profile_sizes();
    for (u, id) in ds.users().iter().enumerate() {
        let ms = profile
            .user_mainstreaminess
            .as_ref()
            .and_then(|m| m[u])
            .map(|v| v.to_string())
            .unwrap_or_default();
        let group = groups
            .group_of(u as u32)
            .map(|g| g.name().to_string())
            .unwrap_or_default();
        w.write_record([
            id.clone(),
            sizes[u].to_string(),
            profile.user_avg_item_pop[u].to_string(),
            profile.user_pop_ratio[u].to_string(),
            ms,
            group,
        ])?;
    }
    w.flush().map_err(|e| Error::io("popularity.csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::RatingRange;
    use proptest::prelude::*;

    fn range() -> RatingRange {
        RatingRange::new(1.0, 1000.0).unwrap()
    }

    /// O(n²) pair counting, independent of the merge-sort path.
    pub(crate) fn tau_b_brute(x: &[f64], y: &[f64]) -> Option<f64> {
        let n = x.len();
        let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
        for i in 0..n {
            for j in i + 1..n {
                let dx = (x[i] - x[j]).signum() * ((x[i] != x[j]) as i32 as f64);
                let dy = (y[i] - y[j]).signum() * ((y[i] != y[j]) as i32 as f64);
                match (dx == 0.0, dy == 0.0) {
                    (true, true) => {}
                    (true, false) => tx += 1,
                    (false, true) => ty += 1,
                    (false, false) => {
                        if dx * dy > 0.0 {
                            c += 1
                        } else {
                            d += 1
                        }
                    }
                }
            }
        }
        let denom = (((c + d + tx) * (c + d + ty)) as f64).sqrt();
        (denom > 0.0).then(|| (c - d) as f64 / denom)
    }

    #[test]
    fn item_popularity_values() {
        let ds = RatingDataset::with_entities(
            Vec::<String>::new(),
            ["never"],
            [
                ("u1", "all", 1.0),
                ("u2", "all", 1.0),
                ("u3", "all", 1.0),
                ("u4", "all", 1.0),
                ("u5", "all", 1.0),
                ("u1", "two", 1.0),
                ("u2", "two", 1.0),
            ],
            range(),
        )
        .unwrap();
        let pop = item_popularity(&ds).unwrap();
        let at = |id| pop[ds.item_index(id).unwrap() as usize];
        assert_eq!(at("all"), 1.0);
        assert_eq!(at("two"), 0.4);
        assert_eq!(at("never"), 0.0);
    }

    #[test]
    fn avg_item_popularity() {
        let ds = RatingDataset::from_triples(
            [("a", "x", 1.0), ("b", "x", 1.0), ("b", "y", 1.0)],
            range(),
        )
        .unwrap();
        let out = user_avg_item_popularity(&ds, &[0.2, 0.6]).unwrap();
        assert_eq!(out[0], 0.2);
        assert!((out[1] - 0.4).abs() < 1e-15);
        let out = user_avg_item_popularity(&ds, &[0.3, 0.3]).unwrap();
        assert!(out.iter().all(|&v| (v - 0.3).abs() < 1e-15));

        let with_idle =
            RatingDataset::with_entities(["idle"], Vec::<String>::new(), [("a", "x", 1.0)], range())
                .unwrap();
        assert!(user_avg_item_popularity(&with_idle, &[1.0]).is_err());
    }

    #[test]
    fn popular_set_selection() {
        let pops: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        assert_eq!(popular_item_set(&pops, 0.2).unwrap(), vec![8, 9]);
        assert_eq!(popular_item_set(&[0.5; 5], 0.2).unwrap(), vec![0]);
        assert_eq!(popular_item_set(&[0.7], 0.2).unwrap(), vec![0]);
        assert_eq!(popular_item_set(&[0.1; 11], 0.2).unwrap().len(), 3);
        assert!(popular_item_set(&pops, 1.0).is_err());
        assert!(popular_item_set(&pops, 0.0).is_err());
    }

    #[test]
    fn popularity_ratio() {
        let mut triples = Vec::new();
        for i in 0..5 {
            triples.push(("eighty", format!("i{i}"), 1.0));
        }
        for i in ["a", "b", "c", "d"] {
            triples.push(("quarter", i.to_string(), 1.0));
        }
        triples.push(("none", "z".to_string(), 1.0));
        let ds = RatingDataset::from_triples(triples, range()).unwrap();
        let ix = |id: &str| ds.item_index(id).unwrap();
        let popular = {
            let mut v = vec![ix("i0"), ix("i1"), ix("i2"), ix("i3"), ix("a")];
            v.sort();
            v
        };
        let ratio = user_popularity_ratio(&ds, &popular).unwrap();
        let at = |id: &str| ratio[ds.user_index(id).unwrap() as usize];
        assert_eq!(at("eighty"), 0.8);
        assert_eq!(at("quarter"), 0.25);
        assert_eq!(at("none"), 0.0);
    }

    #[test]
    fn tau_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(kendall_tau(&x, &x).unwrap(), 1.0);
        assert_eq!(kendall_tau(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
        let t = kendall_tau(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]).unwrap();
        assert!((t - 1.0 / 3.0).abs() < 1e-15);
        // scipy.stats.kendalltau reference value
        let t = kendall_tau(&[1.0, 1.0, 2.0, 3.0, 3.0, 2.0], &[1.0, 2.0, 2.0, 3.0, 1.0, 1.0]).unwrap();
        assert!((t - 0.17407765595569785).abs() < 1e-12);
    }

    #[test]
    fn tau_errors() {
        assert!(kendall_tau(&[1.0, 2.0], &[1.0]).is_err());
        assert!(kendall_tau(&[1.0], &[1.0]).is_err());
        assert!(kendall_tau(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(kendall_tau(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).is_err());
    }

    #[test]
    fn mainstreaminess_examples() {
        // Three artists with global APC (100, 50, 10) built from a second user.
        let ds = RatingDataset::from_triples(
            [
                ("u", "a1", 2.0),
                ("u", "a2", 5.0),
                ("u", "a3", 1.0),
                ("w", "a1", 198.0),
                ("w", "a2", 95.0),
                ("w", "a3", 19.0),
            ],
            range(),
        )
        .unwrap();
        let apc = global_apc(&ds);
        assert_eq!(apc, vec![100.0, 50.0, 10.0]);
        let m = mainstreaminess(&ds);
        assert!((m[0].unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m[1], Some(1.0));
        assert!((user_mainstreaminess(&ds, &apc, 0).unwrap() - 1.0 / 3.0).abs() < 1e-15);

        let rev = RatingDataset::from_triples(
            [
                ("u", "a1", 1.0),
                ("u", "a2", 2.0),
                ("u", "a3", 3.0),
                ("w", "a1", 300.0),
                ("w", "a2", 200.0),
                ("w", "a3", 100.0),
            ],
            range(),
        )
        .unwrap();
        let apc = global_apc(&rev);
        // APC = (150.5, 101, 51.5): decreasing, u increasing.
        assert_eq!(user_mainstreaminess(&rev, &apc, 0).unwrap(), -1.0);

        let single = RatingDataset::from_triples([("u", "a1", 1.0)], range()).unwrap();
        assert_eq!(mainstreaminess(&single), vec![None]);
    }

    #[test]
    fn split_examples() {
        let g = split_groups(&[Some(0.9), Some(0.1), Some(0.5)], [1, 1, 1]).unwrap();
        assert_eq!(g.members(Group::LowPop), &[1]);
        assert_eq!(g.members(Group::MedPop), &[2]);
        assert_eq!(g.members(Group::HighPop), &[0]);

        // users 0..3 with scores (0.2, 0.2, 0.5, 0.9)
        let g = split_groups(&[Some(0.2), Some(0.2), Some(0.5), Some(0.9)], [1, 1, 1]).unwrap();
        assert_eq!(g.members(Group::LowPop), &[0]);
        assert_eq!(g.members(Group::MedPop), &[1]);
        assert_eq!(g.members(Group::HighPop), &[3]);
        assert_eq!(g.group_of(2), None);

        assert!(split_groups(&[Some(0.1), Some(0.2)], [1, 1, 1]).is_err());
        let g = split_groups(&[None, Some(0.1), Some(0.2), Some(0.3)], [1, 1, 1]).unwrap();
        assert_eq!(g.group_of(0), None);
    }

    #[test]
    fn split_three_thousand() {
        let scores: Vec<Option<f64>> = (0..3000).map(|u| Some(((u * 7919) % 3001) as f64)).collect();
        let g = split_groups(&scores, [1000, 1000, 1000]).unwrap();
        assert_eq!(g.n_grouped(), 3000);
        for grp in Group::ALL {
            assert_eq!(g.members(grp).len(), 1000);
        }
    }

    fn tau_input() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(0u8..6, n).prop_map(|v| v.into_iter().map(f64::from).collect()),
                prop::collection::vec(0u8..6, n).prop_map(|v| v.into_iter().map(f64::from).collect()),
            )
        })
    }

    proptest! {
        #[test]
        fn tau_matches_pair_counting((x, y) in tau_input()) {
            match (kendall_tau(&x, &y), tau_b_brute(&x, &y)) {
                (Ok(t), Some(b)) => {
                    prop_assert!((t - b).abs() < 1e-12);
                    prop_assert!(t.abs() <= 1.0);
                    prop_assert!((kendall_tau(&y, &x).unwrap() - t).abs() < 1e-12);
                }
                (Err(_), None) => {}
                (a, b) => prop_assert!(false, "disagree: {a:?} vs {b:?}"),
            }
        }

        #[test]
        fn popularity_ignores_rating_magnitudes(
            cells in prop::collection::btree_set((0u8..8, 0u8..8), 1..40),
            scale in 1.0f64..4.0,
        ) {
            let make = |k: f64| RatingDataset::from_triples(
                cells.iter().map(|&(u, i)| (format!("u{u}"), format!("i{i}"), 1.0 + k * ((u + i) % 3) as f64)),
                RatingRange::new(1.0, 20.0).unwrap(),
            ).unwrap();
            prop_assert_eq!(item_popularity(&make(1.0)).unwrap(), item_popularity(&make(scale)).unwrap());
        }

        #[test]
        fn split_is_ordered_partition(scores in prop::collection::vec(0.0f64..1.0, 3..60)) {
            let n = scores.len();
            let s: Vec<Option<f64>> = scores.iter().copied().map(Some).collect();
            let g = split_groups(&s, [n / 3; 3]).unwrap();
            let max_of = |grp| g.members(grp).iter().map(|&u| scores[u as usize]).fold(f64::MIN, f64::max);
            let min_of = |grp| g.members(grp).iter().map(|&u| scores[u as usize]).fold(f64::MAX, f64::min);
            prop_assert!(max_of(Group::LowPop) <= min_of(Group::MedPop));
            prop_assert!(max_of(Group::MedPop) <= min_of(Group::HighPop));
            prop_assert_eq!(g.n_grouped(), 3 * (n / 3));
        }
    }
}
