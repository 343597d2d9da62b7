//! Seeded generator of popularity-skewed rating data.
//!
//! Items follow a Zipf-like popularity curve. Each user has an inclination
//! θ ∈ [0, 1]: users near 0 sample items almost uniformly, keep larger
//! profiles and rate with more noise; users near 1 sample from the full Zipf
//! curve. Popular items get a rating bonus of up to `popularity_boost`.

use std::io::Write;
use std::path::Path;

use rand::seq::index::sample_weighted;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::{write_dataset, RatingDataset, RatingRange};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub min_profile: usize,
    pub max_profile: usize,
    /// Zipf exponent of the item popularity curve.
    pub zipf_exponent: f64,
    pub rating_range: RatingRange,
    /// Rating noise standard deviation for the most mainstream users.
    pub noise: f64,
    /// Extra noise factor applied to the least mainstream users.
    pub niche_noise: f64,
    /// Rating bonus of the most popular item over the least popular one.
    pub popularity_boost: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_users: 300,
            n_items: 400,
            min_profile: 20,
            max_profile: 120,
            zipf_exponent: 1.0,
            rating_range: RatingRange { min: 1.0, max: 5.0 },
            noise: 0.6,
            niche_noise: 1.0,
            popularity_boost: 1.5,
            seed: 7,
        }
    }
}

/// Standard normal draw (Box-Muller).
fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn generate(cfg: &SyntheticConfig) -> Result<RatingDataset> {
    if cfg.n_users == 0 || cfg.n_items == 0 {
        return Err(Error::invalid("synthetic data needs users and items"));
    }
    if cfg.min_profile == 0 || cfg.max_profile < cfg.min_profile || cfg.max_profile > cfg.n_items {
        return Err(Error::invalid(format!(
            "profile bounds {}..={} invalid for {} items",
            cfg.min_profile, cfg.max_profile, cfg.n_items
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let RatingRange { min, max } = cfg.rating_range;
    let mid = 0.5 * (min + max);
    let spread = 0.25 * (max - min);
    let quality: Vec<f64> = (0..cfg.n_items)
        .map(|i| {
            let rank = i as f64 / cfg.n_items as f64;
            cfg.popularity_boost * (0.5 - rank) + spread * normal(&mut rng)
        })
        .collect();
    let width = cfg.n_users.to_string().len().max(cfg.n_items.to_string().len());

    let mut triples = Vec::new();
    for u in 0..cfg.n_users {
        let theta: f64 = rng.random();
        let span = (cfg.max_profile - cfg.min_profile) as f64;
        let size = cfg.min_profile + ((1.0 - theta) * span * rng.random_range(0.6..=1.0)).round() as usize;
        let exponent = cfg.zipf_exponent * theta;
        let picked = sample_weighted(
            &mut rng,
            cfg.n_items,
            |i| ((i + 1) as f64).powf(-exponent),
            size.min(cfg.n_items),
        )
        .map_err(|e| Error::invalid(format!("weighted sampling: {e}")))?;
        let bias = 0.5 * spread * normal(&mut rng);
        let sigma = cfg.noise * (1.0 + cfg.niche_noise * (1.0 - theta));
        for i in picked.into_iter() {
            let v = (mid + quality[i] + bias + sigma * normal(&mut rng)).round().clamp(min, max);
            triples.push((format!("u{u:0width$}"), format!("i{i:0width$}"), v));
        }
    }
    RatingDataset::from_triples(triples, cfg.rating_range)
}

/// Writes a generated dataset as `user_id,item_id,rating` CSV.
pub fn write_csv(ds: &RatingDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    write_dataset(ds, &mut out, b',')?;
    out.flush().map_err(|e| Error::io(path, e))
}
