//! User-based k-nearest-neighbour predictors with mean-squared-difference
//! similarity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Baseline, SparseRatings};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub min_support: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 40, min_support: 1 }
    }
}

impl KnnParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("knn k must be at least 1"));
        }
        Ok(())
    }
}

/// MSD similarity `1 / (msd + 1)` over the items both users rated, or `None`
/// when they share fewer than `min_support` items.
pub fn similarity_msd(train: &SparseRatings, u: u32, v: u32, min_support: usize) -> Option<f64> {
    let (ia, va) = train.user_row(u);
    let (ib, vb) = train.user_row(v);
    let (mut a, mut b) = (0, 0);
    let (mut sq, mut n) = (0.0, 0usize);
    while a < ia.len() && b < ib.len() {
        match ia[a].cmp(&ib[b]) {
            std::cmp::Ordering::Less => a += 1,
            std::cmp::Ordering::Greater => b += 1,
            std::cmp::Ordering::Equal => {
                let d = va[a] - vb[b];
                sq += d * d;
                n += 1;
                a += 1;
                b += 1;
            }
        }
    }
    (n >= min_support.max(1)).then(|| 1.0 / (sq / n as f64 + 1.0))
}

/// Fitted KNN state: the training matrix plus a dense user x user similarity
/// table (NaN where similarity is undefined). The table is rebuilt rather
/// than serialized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnModel {
    pub params: KnnParams,
    pub with_means: bool,
    train: SparseRatings,
    #[serde(skip)]
    sim: Vec<f64>,
}

impl PartialEq for KnnModel {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params && self.with_means == other.with_means && self.train == other.train
    }
}

impl KnnModel {
    pub fn fit(train: &SparseRatings, params: KnnParams, with_means: bool) -> Result<Self> {
        params.validate()?;
        if train.n_ratings() == 0 {
            return Err(Error::degenerate("empty training set"));
        }
        let mut model = Self {
            params,
            with_means,
            train: train.clone(),
            sim: Vec::new(),
        };
        model.rebuild();
        Ok(model)
    }

    /// Recomputes the similarity table row by row. Each row accumulates
    /// squared differences through the item-major view, so cost is the sum
    /// over the user's items of those items' rater counts.
    pub(crate) fn rebuild(&mut self) {
        let n = self.train.n_users();
        let train = &self.train;
        let min_support = self.params.min_support.max(1);
        let mut sim = vec![f64::NAN; n * n];
        sim.par_chunks_mut(n.max(1))
            .enumerate()
            .for_each_init(
                || (vec![0.0f64; n], vec![0u32; n], Vec::<u32>::new()),
                |(sq, cnt, touched), (u, row)| {
                    let (items, vals) = train.user_row(u as u32);
                    for (&i, &r_ui) in items.iter().zip(vals) {
                        let (raters, rv) = train.item_col(i);
                        for (&v, &r_vi) in raters.iter().zip(rv) {
                            let v = v as usize;
                            if cnt[v] == 0 {
                                touched.push(v as u32);
                            }
                            let d = r_ui - r_vi;
                            sq[v] += d * d;
                            cnt[v] += 1;
                        }
                    }
                    for &v in touched.iter() {
                        let v = v as usize;
                        if v != u && cnt[v] as usize >= min_support {
                            row[v] = 1.0 / (sq[v] / cnt[v] as f64 + 1.0);
                        }
                        sq[v] = 0.0;
                        cnt[v] = 0;
                    }
                    touched.clear();
                },
            );
        self.sim = sim;
    }

    pub fn similarity(&self, u: u32, v: u32) -> Option<f64> {
        let n = self.train.n_users();
        let s = self.sim[u as usize * n + v as usize];
        (!s.is_nan()).then_some(s)
    }

    /// Up to k raters of `i` most similar to `u`, as (similarity, user, rating);
    /// ties in similarity go to the smaller user index.
    pub fn neighbors(&self, u: u32, i: u32) -> Vec<(f64, u32, f64)> {
        let n = self.train.n_users();
        let row = &self.sim[u as usize * n..(u as usize + 1) * n];
        let (raters, vals) = self.train.item_col(i);
        let mut cand: Vec<(f64, u32, f64)> = raters
            .iter()
            .zip(vals)
            .filter(|(&v, _)| v != u)
            .filter_map(|(&v, &r)| {
                let s = row[v as usize];
                (!s.is_nan()).then_some((s, v, r))
            })
            .collect();
        let order = |a: &(f64, u32, f64), b: &(f64, u32, f64)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        if cand.len() > self.params.k {
            cand.select_nth_unstable_by(self.params.k - 1, order);
            cand.truncate(self.params.k);
        }
        cand.sort_by(order);
        cand
    }

    pub(super) fn estimate(&self, base: &Baseline, u: u32, i: u32) -> f64 {
        let nb = self.neighbors(u, i);
        let user_mean = base.user_mean(u).unwrap_or(base.global_mean);
        if nb.is_empty() {
            return if self.with_means { user_mean } else { base.global_mean };
        }
        let (mut num, mut den) = (0.0, 0.0);
        for &(s, v, r) in &nb {
            let centred = if self.with_means {
                r - base.user_mean(v).unwrap_or(base.global_mean)
            } else {
                r
            };
            num += s * centred;
            den += s;
        }
        if self.with_means {
            user_mean + num / den
        } else {
            num / den
        }
    }
}
