//! Fit the four rating predictors and query them.

use popbias::ingest::{RatingDataset, RatingRange};
use popbias::recommenders::{Algorithm, AlgorithmSpec, SparseRatings, TrainedModel};

pub fn run_example() -> popbias::Result<()> {
    let ds = RatingDataset::from_triples(
        [
            ("A", "i1", 4.0),
            ("B", "i1", 5.0),
            ("B", "i2", 3.0),
            ("C", "i1", 1.0),
            ("C", "i2", 2.0),
        ],
        RatingRange::new(1.0, 5.0)?,
    )?;
    let train = SparseRatings::from_dataset(&ds)?;
    let (a, i2) = (ds.user_index("A").unwrap(), ds.item_index("i2").unwrap());

    for algorithm in Algorithm::ALL {
        let model = AlgorithmSpec::default_for(algorithm).fit(&train)?;
        println!("{algorithm:<13} r(A, i2) = {:.4}", model.predict(a, i2));
    }

    // Models serialize to a versioned JSON artifact.
    let model = AlgorithmSpec::default_for(Algorithm::UserKnnAvg).fit(&train)?;
    let restored = TrainedModel::from_json(&model.to_json()?)?;
    assert_eq!(restored.predict(a, i2), model.predict(a, i2));
    Ok(())
}

#[allow(dead_code)]
fn main() -> popbias::Result<()> {
    run_example()
}
