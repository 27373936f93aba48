use std::fmt::Write as _;
use std::path::PathBuf;

use anchormi::analysis::classify_information;
use anchormi::sim::{run_study, SimConfig, StudyResult};

use crate::error::CliResult;
use crate::manifest::RunManifest;

pub const ANCHORING_HEADER: &str =
    "strategy,dropout_pct,v_rubin,v_anchored,relative_gap,v_sensitivity_full,v_design_applied,classification";

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    /// Key-value study config; see docs/config.md.
    #[arg(long)]
    pub config: PathBuf,
    /// Override the config's replicate count.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Override the config's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Per strategy and level: mean Rubin against mean anchored variance, with
/// the verdict from the ratio of mean variances.
pub fn anchoring_table(study: &StudyResult) -> String {
    let mut s = String::from(ANCHORING_HEADER);
    s.push('\n');
    let c = &study.config;
    for strategy in &c.strategies {
        let label = strategy.to_string();
        for &pct in &c.dropout_pct {
            let mean = |e: &str| study.row(&label, pct, e).map_or(f64::NAN, |r| r.mean);
            let (rubin, anchored) = (mean("v_rubin"), mean("v_anchored"));
            let verdict = classify_information(
                mean("v_primary_full") / mean("v_primary_obs"),
                mean("v_sensitivity_full") / rubin,
                c.tolerance,
            );
            let _ = writeln!(
                s,
                "{label},{pct},{rubin},{anchored},{},{},{},{verdict}",
                (rubin - anchored) / anchored,
                mean("v_sensitivity_full"),
                mean("v_design_applied"),
            );
        }
    }
    s
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let mut config = SimConfig::from_path(&args.config)?;
    if let Some(r) = args.replicates {
        config.replicates = r;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    config.validate()?;
    let mut manifest = RunManifest::start("simulate", Some(config.seed));
    manifest.add_input(&args.config)?;
    manifest.set("replicates", config.replicates);
    manifest.set("threads", rayon::current_num_threads());
    let study = run_study(&config)?;
    std::fs::create_dir_all(&args.out)?;
    let outputs = [
        (args.out.join("study.csv"), study.to_csv()),
        (args.out.join("anchoring.csv"), anchoring_table(&study)),
        (args.out.join("failures.txt"), study.failure_report()),
        (args.out.join("config.txt"), config.to_kv().render()),
    ];
    for (path, text) in &outputs {
        std::fs::write(path, text)?;
    }
    let paths: Vec<PathBuf> = outputs.into_iter().map(|(p, _)| p).collect();
    manifest.finish(&args.out, &paths)?;
    crate::emit(&format!(
        "{} of {} replicates succeeded; results in {}\n",
        study.replicates.len(),
        config.replicates,
        args.out.display()
    ))?;
    Ok(())
}
