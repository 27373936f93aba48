use std::path::PathBuf;

use anchormi::impute::write_imputed_set;
use anchormi::io::read_dataset_path;
use anchormi::{run_controlled_mi, ChainConfig, ImputationStrategy, MiConfig};

use crate::error::CliResult;
use crate::manifest::RunManifest;

#[derive(Debug, clap::Args)]
pub struct ImputeArgs {
    /// Wide CSV: `id,arm,y1,...,yJ`.
    #[arg(long)]
    pub data: PathBuf,
    /// Strategy spec, e.g. `j2r`, `delta:-0.5`, `delta:-0.21~0.46`.
    #[arg(long, allow_hyphen_values = true)]
    pub strategy: String,
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = ChainConfig::default().burn_in)]
    pub burn_in: usize,
    #[arg(long, default_value_t = ChainConfig::default().thin)]
    pub thin: usize,
}

pub fn run(args: &ImputeArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("impute", Some(args.seed));
    manifest.add_input(&args.data)?;
    let data = read_dataset_path(&args.data)?;
    let strategy: ImputationStrategy = args.strategy.parse()?;
    let config = MiConfig {
        k: args.k,
        chain: ChainConfig {
            burn_in: args.burn_in,
            thin: args.thin,
        },
        seed: args.seed,
    };
    let set = run_controlled_mi(&data, &strategy, config)?;
    manifest.set("strategy", strategy);
    manifest.set("k", args.k);
    manifest.set("burn_in", args.burn_in);
    manifest.set("thin", args.thin);
    let written = write_imputed_set(&set, &args.out)?;
    manifest.finish(&args.out, &written)?;
    crate::emit(&format!("wrote {} imputations to {}\n", set.k(), args.out.display()))?;
    Ok(())
}
