//! Generate a popularity-skewed rating dataset and write it as CSV.

use popbias::ingest::{dataset_stats, parse_ratings, RatingRange, Schema};
use popbias::synthetic::{generate, write_csv, SyntheticConfig};

pub fn run_example() -> popbias::Result<()> {
    let config = SyntheticConfig {
        n_users: 500,
        n_items: 1_000,
        rating_range: RatingRange::new(1.0, 10.0)?,
        ..SyntheticConfig::default()
    };
    let ds = generate(&config)?;
    let dir = tempfile::tempdir().map_err(|e| popbias::Error::Io {
        path: "tempdir".into(),
        source: e,
    })?;
    let path = dir.path().join("synthetic.csv");
    write_csv(&ds, &path)?;

    let back = parse_ratings(&path, &Schema::new(config.rating_range))?;
    assert_eq!(back, ds);
    println!("{}", dataset_stats(&back)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> popbias::Result<()> {
    run_example()
}
