use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use popbias::runner::{
    run_plan, verify_against_reference, ExperimentConfig, Plan, ReferenceTable, Summary,
};
use popbias::{Error, Result};

#[derive(Parser)]
#[command(name = "popbias", version, about = "Popularity-bias audit for collaborative filtering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML), or a manifest.json from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and preprocess the dataset; write stats and a canonical dump.
    Ingest(Common),
    /// Compute popularity measures and user groups.
    Popularity(Common),
    /// Cross-validate the configured algorithms.
    Evaluate(Common),
    /// Top-N recommendation frequency analysis.
    Bias(Common),
    /// Full pipeline.
    Run(Common),
    /// Check a summary against published reference values.
    Verify {
        /// Config whose output directory holds summary.json.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Reference CSV; the shipped table by default.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Relative tolerance overriding the per-cell values.
        #[arg(long)]
        tolerance: Option<f64>,
    },
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(j) = c.jobs {
        cfg.jobs = j;
    }
    if let Some(o) = &c.out {
        cfg.output.dir = o.clone();
    }
    Ok(cfg)
}

fn stage(c: &Common, plan: Plan) -> Result<bool> {
    let cfg = load(c)?;
    let outcome = run_plan(&cfg, plan)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(s) = &outcome.summary {
        for row in &s.results {
            let v = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
            println!(
                "{:<13} LowPop {}{:<3} MedPop {} HighPop {}",
                row.algorithm.to_string(),
                v(row.grand_mae.low_pop),
                row.significance.map(|s| s.marker()).unwrap_or(""),
                v(row.grand_mae.med_pop),
                v(row.grand_mae.high_pop)
            );
        }
    }
    println!("wrote {}", outcome.out_dir.display());
    Ok(true)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Ingest(c) => stage(&c, Plan::INGEST),
        Command::Popularity(c) => stage(&c, Plan::POPULARITY),
        Command::Evaluate(c) => stage(&c, Plan::EVALUATE),
        Command::Bias(c) => stage(&c, Plan::BIAS),
        Command::Run(c) => stage(&c, Plan::FULL),
        Command::Verify {
            config,
            out,
            summary,
            reference,
            tolerance,
        } => {
            let path = match (summary, out, config) {
                (Some(s), _, _) => s,
                (None, Some(o), _) => o.join("summary.json"),
                (None, None, Some(c)) => ExperimentConfig::load(c)?.output.dir.join("summary.json"),
                (None, None, None) => {
                    return Err(Error::Config("verify needs --summary, --out or --config".into()))
                }
            };
            let summary = Summary::load(path)?;
            let table = match reference {
                Some(p) => ReferenceTable::load(p)?,
                None => ReferenceTable::builtin(),
            };
            let report = verify_against_reference(&summary, &table, tolerance)?;
            println!("{report}");
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
