//! End-to-end run from a TOML config, then a check of the summary against a
//! reference table.

use popbias::runner::{run_experiment, verify_against_reference, ExperimentConfig, ReferenceTable};
use popbias::synthetic::{generate, write_csv, SyntheticConfig};

pub fn run_example() -> popbias::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| popbias::Error::Io {
        path: "tempdir".into(),
        source: e,
    })?;
    let data = dir.path().join("ratings.csv");
    write_csv(&generate(&SyntheticConfig::default())?, &data)?;

    let config = ExperimentConfig::from_toml_str(&format!(
        r#"
        seed = 5

        [dataset]
        name = "synthetic"
        path = "{data}"
        rating_min = 1
        rating_max = 5

        [evaluation]
        folds = 5
        nmf = {{ epochs = 20 }}

        [bias]
        top_n = 10

        [output]
        dir = "{out}"
        "#,
        data = data.display(),
        out = dir.path().join("report").display(),
    ))?;
    let outcome = run_experiment(&config)?;
    println!("wrote {:?}", outcome.files);

    // A reference with the run's own values passes every check.
    let summary = outcome.summary.expect("full runs produce a summary");
    let mut csv = String::from("dataset,algorithm,group,mae,marker,tolerance\n");
    for row in &summary.results {
        for (group, v) in [
            ("LowPop", row.grand_mae.low_pop),
            ("MedPop", row.grand_mae.med_pop),
            ("HighPop", row.grand_mae.high_pop),
        ] {
            csv += &format!("synthetic,{},{group},{},,0.1\n", row.algorithm, v.unwrap());
        }
    }
    let reference = ReferenceTable::from_reader(csv.as_bytes())?;
    let report = verify_against_reference(&summary, &reference, None)?;
    println!("{report}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> popbias::Result<()> {
    run_example()
}
