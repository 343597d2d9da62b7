//! Count how often items land in top-10 lists per user group and regress the
//! counts on item popularity.

use popbias::bias_analysis::{group_regressions, BiasConfig, RecFrequencyBuilder};
use popbias::evaluation::{evaluate_with, make_folds};
use popbias::popularity::{equal_group_sizes, split_groups, Group, PopularityProfile};
use popbias::recommenders::{Algorithm, AlgorithmSpec};
use popbias::synthetic::{generate, SyntheticConfig};

pub fn run_example() -> popbias::Result<()> {
    let ds = generate(&SyntheticConfig::default())?;
    let profile = PopularityProfile::compute(&ds, 0.2, false)?;
    let scores: Vec<Option<f64>> = profile.user_pop_ratio.iter().map(|&p| Some(p)).collect();
    let groups = split_groups(&scores, equal_group_sizes(ds.n_users()))?;
    let folds = make_folds(&ds, 5, 11)?;

    let config = BiasConfig::default();
    let spec = AlgorithmSpec::default_for(Algorithm::UserKnnAvg);
    let mut counts = RecFrequencyBuilder::new(ds.n_items(), spec.algorithm(), &groups, config.clone())?;
    evaluate_with(&ds, &spec, &groups, &folds, |fold, model, train| {
        counts.add_fold(fold, model, train)
    })?;
    let table = counts.finish();

    let fits = group_regressions(&table, &profile.item_pop, config.include_zero_counts);
    for (g, fit) in Group::ALL.iter().zip(fits) {
        let fit = fit?;
        println!(
            "{g:<8} lists {:>4}  slope {:>9.2}  r {:.3}  points {}",
            table.lists[g.index()],
            fit.slope,
            fit.pearson_r,
            fit.n_points
        );
    }
    println!("candidate policy: {}", table.provenance.candidate_policy);
    Ok(())
}

#[allow(dead_code)]
fn main() -> popbias::Result<()> {
    run_example()
}
