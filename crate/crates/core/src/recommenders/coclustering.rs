//! Co-clustering rating predictor.
//!
//! Users and items are each assigned to a cluster. A prediction combines the
//! co-cluster average with the user's and item's offsets from their cluster
//! averages:
//!
//! `r̂ = A_co(g(u), h(i)) + (μ_u − A_u(g(u))) + (μ_i − A_i(h(i)))`
//!
//! Training alternates between recomputing the three average tables and
//! greedily moving each user, then each item, to the cluster with the lowest
//! squared error on its training ratings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Baseline, SparseRatings};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoClusteringParams {
    pub user_clusters: usize,
    pub item_clusters: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for CoClusteringParams {
    fn default() -> Self {
        Self {
            user_clusters: 3,
            item_clusters: 3,
            epochs: 20,
            seed: 0,
        }
    }
}

impl CoClusteringParams {
    pub fn validate(&self) -> Result<()> {
        if self.user_clusters == 0 || self.item_clusters == 0 {
            return Err(Error::invalid("co-clustering needs at least one cluster per side"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoClusteringModel {
    pub user_clusters: usize,
    pub item_clusters: usize,
    pub user_assignment: Vec<u32>,
    pub item_assignment: Vec<u32>,
    /// Row-major `user_clusters x item_clusters`.
    pub cocluster_avg: Vec<f64>,
    pub user_cluster_avg: Vec<f64>,
    pub item_cluster_avg: Vec<f64>,
}

/// Means the fit needs for every user and item; unknown entities never enter
/// the error sums so their placeholder is irrelevant.
struct Means {
    user: Vec<f64>,
    item: Vec<f64>,
}

impl CoClusteringModel {
    pub fn fit(train: &SparseRatings, params: &CoClusteringParams) -> Result<Self> {
        Self::fit_traced(train, params, |_| {})
    }

    /// Fits and returns the unclamped training SSE after initialization and
    /// after every epoch.
    pub fn fit_with_history(
        train: &SparseRatings,
        params: &CoClusteringParams,
    ) -> Result<(Self, Vec<f64>)> {
        let means = means_of(train);
        let mut history = Vec::new();
        let model = Self::fit_traced(train, params, |m| history.push(m.sse_with(train, &means)))?;
        Ok((model, history))
    }

    fn fit_traced(
        train: &SparseRatings,
        params: &CoClusteringParams,
        mut observe: impl FnMut(&CoClusteringModel),
    ) -> Result<Self> {
        params.validate()?;
        let (ku, ki) = (params.user_clusters, params.item_clusters);
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let user_assignment = (0..train.n_users()).map(|_| rng.random_range(0..ku as u32)).collect();
        let item_assignment = (0..train.n_items()).map(|_| rng.random_range(0..ki as u32)).collect();
        let mu = train.global_mean();
        let mut model = Self {
            user_clusters: ku,
            item_clusters: ki,
            user_assignment,
            item_assignment,
            cocluster_avg: vec![mu; ku * ki],
            user_cluster_avg: vec![mu; ku],
            item_cluster_avg: vec![mu; ki],
        };
        let means = means_of(train);
        model.recompute_averages(train);
        observe(&model);
        for _ in 0..params.epochs {
            model.reassign_users(train, &means);
            model.reassign_items(train, &means);
            model.recompute_averages(train);
            observe(&model);
        }
        Ok(model)
    }

    /// Cluster averages from the current assignment. Empty cells keep their
    /// previous value.
    fn recompute_averages(&mut self, train: &SparseRatings) {
        let (ku, ki) = (self.user_clusters, self.item_clusters);
        let mut co = vec![(0.0, 0usize); ku * ki];
        let mut uc = vec![(0.0, 0usize); ku];
        let mut ic = vec![(0.0, 0usize); ki];
        for r in train.iter() {
            let g = self.user_assignment[r.user as usize] as usize;
            let h = self.item_assignment[r.item as usize] as usize;
            co[g * ki + h].0 += r.value;
            co[g * ki + h].1 += 1;
            uc[g].0 += r.value;
            uc[g].1 += 1;
            ic[h].0 += r.value;
            ic[h].1 += 1;
        }
        let apply = |dst: &mut [f64], acc: &[(f64, usize)]| {
            for (d, &(s, n)) in dst.iter_mut().zip(acc) {
                if n > 0 {
                    *d = s / n as f64;
                }
            }
        };
        apply(&mut self.cocluster_avg, &co);
        apply(&mut self.user_cluster_avg, &uc);
        apply(&mut self.item_cluster_avg, &ic);
    }

    fn raw(&self, g: usize, h: usize, mu_u: f64, mu_i: f64) -> f64 {
        self.cocluster_avg[g * self.item_clusters + h] + (mu_u - self.user_cluster_avg[g])
            + (mu_i - self.item_cluster_avg[h])
    }

    fn reassign_users(&mut self, train: &SparseRatings, means: &Means) {
        for u in 0..train.n_users() {
            let (items, vals) = train.user_row(u as u32);
            if items.is_empty() {
                continue;
            }
            let current = self.user_assignment[u] as usize;
            let best = argmin(current, (0..self.user_clusters).map(|g| {
                items
                    .iter()
                    .zip(vals)
                    .map(|(&i, &r)| {
                        let h = self.item_assignment[i as usize] as usize;
                        let e = r - self.raw(g, h, means.user[u], means.item[i as usize]);
                        e * e
                    })
                    .sum::<f64>()
            }));
            self.user_assignment[u] = best as u32;
        }
    }

    fn reassign_items(&mut self, train: &SparseRatings, means: &Means) {
        for i in 0..train.n_items() {
            let (users, vals) = train.item_col(i as u32);
            if users.is_empty() {
                continue;
            }
            let current = self.item_assignment[i] as usize;
            let best = argmin(current, (0..self.item_clusters).map(|h| {
                users
                    .iter()
                    .zip(vals)
                    .map(|(&u, &r)| {
                        let g = self.user_assignment[u as usize] as usize;
                        let e = r - self.raw(g, h, means.user[u as usize], means.item[i]);
                        e * e
                    })
                    .sum::<f64>()
            }));
            self.item_assignment[i] = best as u32;
        }
    }

    pub(super) fn estimate(&self, base: &Baseline, u: u32, i: u32) -> f64 {
        let g = self.user_assignment[u as usize] as usize;
        let h = self.item_assignment[i as usize] as usize;
        let mu_u = base.user_mean(u).unwrap_or(base.global_mean);
        let mu_i = base.item_mean(i).unwrap_or(base.global_mean);
        self.raw(g, h, mu_u, mu_i)
    }

    /// Unclamped squared error over the training ratings.
    pub fn training_sse(&self, train: &SparseRatings) -> f64 {
        self.sse_with(train, &means_of(train))
    }

    fn sse_with(&self, train: &SparseRatings, means: &Means) -> f64 {
        train
            .iter()
            .map(|r| {
                let g = self.user_assignment[r.user as usize] as usize;
                let h = self.item_assignment[r.item as usize] as usize;
                let e = r.value - self.raw(g, h, means.user[r.user as usize], means.item[r.item as usize]);
                e * e
            })
            .sum()
    }
}

fn means_of(train: &SparseRatings) -> Means {
    let mu = train.global_mean();
    Means {
        user: (0..train.n_users() as u32).map(|u| train.user_mean(u).unwrap_or(mu)).collect(),
        item: (0..train.n_items() as u32).map(|i| train.item_mean(i).unwrap_or(mu)).collect(),
    }
}

/// Index of the smallest value. The current cluster wins ties, then the
/// lowest index.
fn argmin(current: usize, values: impl Iterator<Item = f64>) -> usize {
    let values: Vec<f64> = values.collect();
    let mut best = (current, values[current]);
    for (k, &v) in values.iter().enumerate() {
        if v < best.1 {
            best = (k, v);
        }
    }
    best.0
}
