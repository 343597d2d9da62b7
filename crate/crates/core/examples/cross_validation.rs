//! Five-fold cross-validation with per-group MAE and the all-folds
//! significance rule.

use popbias::evaluation::{evaluate, make_folds, welch_t_test};
use popbias::popularity::{equal_group_sizes, split_groups, Group, PopularityProfile};
use popbias::recommenders::{Algorithm, AlgorithmSpec, NmfParams};
use popbias::synthetic::{generate, SyntheticConfig};

pub fn run_example() -> popbias::Result<()> {
    let ds = generate(&SyntheticConfig::default())?;
    let profile = PopularityProfile::compute(&ds, 0.2, false)?;
    let scores: Vec<Option<f64>> = profile.user_pop_ratio.iter().map(|&p| Some(p)).collect();
    let groups = split_groups(&scores, equal_group_sizes(ds.n_users()))?;
    let folds = make_folds(&ds, 5, 1)?;

    let specs = [
        AlgorithmSpec::default_for(Algorithm::UserKnn),
        AlgorithmSpec::Nmf(NmfParams { epochs: 20, ..NmfParams::default() }),
    ];
    for spec in &specs {
        let report = evaluate(&ds, spec, &groups, &folds)?;
        let flag = report.significance.as_ref().map_or("n/a", |s| s.flag.marker());
        print!("{:<8}", report.algorithm.to_string());
        for g in Group::ALL {
            print!(" {g} {:.3}", report.grand(g).unwrap_or(f64::NAN));
        }
        println!("  LowPop flag {flag:?}");
    }

    let t = welch_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0])?;
    println!("welch t = {:.3}, p = {:.4}, df = {:.1}", t.t, t.p, t.df);
    Ok(())
}

#[allow(dead_code)]
fn main() -> popbias::Result<()> {
    run_example()
}
