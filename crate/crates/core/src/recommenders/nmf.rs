//! Regularized non-negative matrix factorization fitted with multiplicative
//! updates over the observed entries only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SparseRatings;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmfParams {
    pub factors: usize,
    pub epochs: usize,
    pub reg_user: f64,
    pub reg_item: f64,
    pub seed: u64,
}

impl Default for NmfParams {
    fn default() -> Self {
        Self {
            factors: 15,
            epochs: 50,
            reg_user: 0.06,
            reg_item: 0.06,
            seed: 0,
        }
    }
}

impl NmfParams {
    pub fn validate(&self) -> Result<()> {
        if self.factors == 0 {
            return Err(Error::invalid("nmf needs at least one factor"));
        }
        if !(self.reg_user >= 0.0 && self.reg_item >= 0.0) {
            return Err(Error::invalid("nmf regularizers must be non-negative"));
        }
        Ok(())
    }
}

/// Row-major user (|U| x f) and item (|I| x f) factor matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmfModel {
    pub factors: usize,
    pub user_factors: Vec<f64>,
    pub item_factors: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl NmfModel {
    pub fn fit(train: &SparseRatings, params: &NmfParams) -> Result<Self> {
        Self::fit_traced(train, params, |_, _| {})
    }

    /// Fits and returns the objective value after initialization and after
    /// every epoch.
    pub fn fit_with_history(train: &SparseRatings, params: &NmfParams) -> Result<(Self, Vec<f64>)> {
        let mut history = Vec::with_capacity(params.epochs + 1);
        let model = Self::fit_traced(train, params, |_, m| {
            history.push(m.objective(train, params.reg_user, params.reg_item))
        })?;
        Ok((model, history))
    }

    fn fit_traced(
        train: &SparseRatings,
        params: &NmfParams,
        mut observe: impl FnMut(usize, &NmfModel),
    ) -> Result<Self> {
        params.validate()?;
        if train.rating_range().min < 0.0 {
            return Err(Error::invalid("nmf needs non-negative ratings"));
        }
        let f = params.factors;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        // Uniform on (0, 1]: zero is a fixed point of the update.
        let mut init = |n: usize| -> Vec<f64> { (0..n * f).map(|_| 1.0 - rng.random::<f64>()).collect() };
        let user_factors = init(train.n_users());
        let item_factors = init(train.n_items());
        let mut model = Self {
            factors: f,
            user_factors,
            item_factors,
        };
        observe(0, &model);
        for epoch in 1..=params.epochs {
            model.update_users(train, params.reg_user);
            model.update_items(train, params.reg_item);
            observe(epoch, &model);
        }
        Ok(model)
    }

    fn update_users(&mut self, train: &SparseRatings, reg: f64) {
        let f = self.factors;
        let q = &self.item_factors;
        self.user_factors
            .par_chunks_mut(f)
            .enumerate()
            .for_each_init(
                || (vec![0.0; f], vec![0.0; f]),
                |(num, den), (u, p)| {
                    let (items, vals) = train.user_row(u as u32);
                    if items.is_empty() {
                        return;
                    }
                    num.fill(0.0);
                    den.fill(0.0);
                    for (&i, &r) in items.iter().zip(vals) {
                        let qi = &q[i as usize * f..(i as usize + 1) * f];
                        let est = dot(p, qi);
                        for k in 0..f {
                            num[k] += qi[k] * r;
                            den[k] += qi[k] * est;
                        }
                    }
                    let n = items.len() as f64;
                    for k in 0..f {
                        let d = den[k] + reg * n * p[k];
                        if d > 0.0 {
                            p[k] *= num[k] / d;
                        }
                    }
                },
            );
    }

    fn update_items(&mut self, train: &SparseRatings, reg: f64) {
        let f = self.factors;
        let p = &self.user_factors;
        self.item_factors
            .par_chunks_mut(f)
            .enumerate()
            .for_each_init(
                || (vec![0.0; f], vec![0.0; f]),
                |(num, den), (i, q)| {
                    let (users, vals) = train.item_col(i as u32);
                    if users.is_empty() {
                        return;
                    }
                    num.fill(0.0);
                    den.fill(0.0);
                    for (&u, &r) in users.iter().zip(vals) {
                        let pu = &p[u as usize * f..(u as usize + 1) * f];
                        let est = dot(pu, q);
                        for k in 0..f {
                            num[k] += pu[k] * r;
                            den[k] += pu[k] * est;
                        }
                    }
                    let n = users.len() as f64;
                    for k in 0..f {
                        let d = den[k] + reg * n * q[k];
                        if d > 0.0 {
                            q[k] *= num[k] / d;
                        }
                    }
                },
            );
    }

    pub fn user_vector(&self, u: u32) -> &[f64] {
        &self.user_factors[u as usize * self.factors..(u as usize + 1) * self.factors]
    }

    pub fn item_vector(&self, i: u32) -> &[f64] {
        &self.item_factors[i as usize * self.factors..(i as usize + 1) * self.factors]
    }

    pub(super) fn estimate(&self, u: u32, i: u32) -> f64 {
        dot(self.user_vector(u), self.item_vector(i))
    }

    /// Squared error on the training entries plus the count-weighted L2
    /// penalties the updates minimize.
    pub fn objective(&self, train: &SparseRatings, reg_user: f64, reg_item: f64) -> f64 {
        let sse: f64 = train
            .iter()
            .map(|r| {
                let e = r.value - self.estimate(r.user, r.item);
                e * e
            })
            .sum();
        let pen_u: f64 = (0..train.n_users() as u32)
            .map(|u| train.user_count(u) as f64 * dot(self.user_vector(u), self.user_vector(u)))
            .sum();
        let pen_i: f64 = (0..train.n_items() as u32)
            .map(|i| train.item_count(i) as f64 * dot(self.item_vector(i), self.item_vector(i)))
            .sum();
        sse + reg_user * pen_u + reg_item * pen_i
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::ingest::{Rating, RatingRange};
    use crate::recommenders::{AlgorithmSpec, SparseRatings};
    use proptest::prelude::*;

    fn full_matrix(values: &[Vec<f64>], range: RatingRange) -> SparseRatings {
        let n_items = values[0].len();
        SparseRatings::from_ratings(
            values.len(),
            n_items,
            values.iter().enumerate().flat_map(|(u, row)| {
                row.iter().enumerate().map(move |(i, &v)| Rating {
                    user: u as u32,
                    item: i as u32,
                    value: v,
                })
            }),
            range,
        )
        .unwrap()
    }

    #[test]
    fn zero_epochs_gives_initial_inner_products() {
        let range = RatingRange::new(0.0, 10.0).unwrap();
        let t = full_matrix(&[vec![1.0, 2.0], vec![3.0, 4.0]], range);
        let p = NmfParams { factors: 3, epochs: 0, seed: 7, ..Default::default() };
        let m = NmfModel::fit(&t, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let init: Vec<f64> = (0..12).map(|_| 1.0 - rng.random::<f64>()).collect();
        let expect = dot(&init[0..3], &init[6..9]);
        assert_eq!(m.estimate(0, 0), expect);
        assert!(m.user_factors.iter().chain(&m.item_factors).all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn rank_one_recovery() {
        let a = [1.0, 2.0, 3.0, 1.5, 2.5];
        let b = [1.0, 0.5, 2.0, 1.2];
        let rows: Vec<Vec<f64>> = a.iter().map(|x| b.iter().map(|y| x * y).collect()).collect();
        let t = full_matrix(&rows, RatingRange::new(0.0, 10.0).unwrap());
        let p = NmfParams { factors: 1, epochs: 200, reg_user: 0.0, reg_item: 0.0, seed: 3 };
        let m = NmfModel::fit(&t, &p).unwrap();
        let mse: f64 = t
            .iter()
            .map(|r| (r.value - m.estimate(r.user, r.item)).powi(2))
            .sum::<f64>()
            / t.n_ratings() as f64;
        assert!(mse.sqrt() <= 1e-2, "rmse {}", mse.sqrt());
    }

    #[test]
    fn invalid_params() {
        let t = full_matrix(&[vec![1.0]], RatingRange::new(0.0, 5.0).unwrap());
        assert!(NmfModel::fit(&t, &NmfParams { factors: 0, ..Default::default() }).is_err());
        assert!(NmfModel::fit(&t, &NmfParams { reg_user: -1.0, ..Default::default() }).is_err());
    }

    #[test]
    fn seed_changes_init_only_through_seed() {
        let t = full_matrix(&[vec![1.0, 2.0], vec![3.0, 4.0]], RatingRange::new(1.0, 5.0).unwrap());
        let a = AlgorithmSpec::Nmf(NmfParams { seed: 1, ..Default::default() }).fit(&t).unwrap();
        let b = AlgorithmSpec::Nmf(NmfParams { seed: 1, ..Default::default() }).fit(&t).unwrap();
        let c = AlgorithmSpec::Nmf(NmfParams { seed: 2, ..Default::default() }).fit(&t).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn objective_non_increasing_and_positive(
            rows in (2usize..6, 2usize..6).prop_flat_map(|(nu, ni)| {
                prop::collection::vec(prop::collection::vec(1.0f64..5.0, ni), nu)
            }),
            factors in 1usize..4,
            reg in 0.0f64..0.2,
            seed in any::<u64>(),
        ) {
            let t = full_matrix(&rows, RatingRange::new(1.0, 5.0).unwrap());
            let p = NmfParams { factors, epochs: 30, reg_user: reg, reg_item: reg, seed };
            let (m, hist) = NmfModel::fit_with_history(&t, &p).unwrap();
            for w in hist.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9, "objective rose {} -> {}", w[0], w[1]);
            }
            prop_assert!(m.user_factors.iter().chain(&m.item_factors).all(|&v| v > 0.0));
        }
    }
}
