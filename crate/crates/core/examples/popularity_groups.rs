//! Item and user popularity measures, LowPop/MedPop/HighPop grouping, and the
//! profile-size versus popularity correlation.

use popbias::bias_analysis::profile_size_popularity_correlation;
use popbias::popularity::{equal_group_sizes, kendall_tau, split_groups, Group, PopularityProfile};
use popbias::synthetic::{generate, SyntheticConfig};

pub fn run_example() -> popbias::Result<()> {
    let ds = generate(&SyntheticConfig::default())?;
    let profile = PopularityProfile::compute(&ds, 0.2, true)?;
    println!(
        "{} popular items out of {}",
        profile.popular_set.len(),
        ds.n_items()
    );

    let scores: Vec<Option<f64>> = profile.user_pop_ratio.iter().map(|&p| Some(p)).collect();
    let groups = split_groups(&scores, equal_group_sizes(ds.n_users()))?;
    for g in Group::ALL {
        let members = groups.members(g);
        let mean = members
            .iter()
            .map(|&u| profile.user_pop_ratio[u as usize])
            .sum::<f64>()
            / members.len() as f64;
        println!("{g:<8} {:>4} users, mean Pop_u {mean:.3}", members.len());
    }

    let corr = profile_size_popularity_correlation(&ds, &profile, &groups)?;
    println!("profile size vs Pop_(i,u): r = {:.3}", corr.overall.pearson_r);

    let defined = profile
        .user_mainstreaminess
        .as_ref()
        .map_or(0, |m| m.iter().flatten().count());
    println!("mainstreaminess defined for {defined} users");
    println!(
        "tau-b of (1,1,2,3,3,2) vs (1,2,2,3,1,1) = {:.6}",
        kendall_tau(&[1.0, 1.0, 2.0, 3.0, 3.0, 2.0], &[1.0, 2.0, 2.0, 3.0, 1.0, 1.0])?
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> popbias::Result<()> {
    run_example()
}
