use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anchormi::analysis::{information_loss_fraction, pool_rubin, PooledEstimate, DEFAULT_TOLERANCE};
use anchormi::impute::read_manifest;
use anchormi::io::read_dataset_path;
use anchormi::{ancova, AnchoringReport, ChainConfig, ImputationEngine, ImputationStrategy, MiConfig};

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

pub const REPORT_HEADER: &str =
    "strategy,k,theta,se,ci_lower,ci_upper,df,within,between,v_rubin,v_primary_obs,variance_ratio,info_loss_vs_primary";

#[derive(Debug, clap::Args)]
pub struct AnalyzeArgs {
    /// Observed data; imputed here with every `--strategy` plus MAR.
    #[arg(long, conflicts_with = "imputed")]
    pub data: Option<PathBuf>,
    /// Directories written by `impute`; a MAR set, if present, is the primary.
    #[arg(long, num_args = 1..)]
    pub imputed: Vec<PathBuf>,
    #[arg(long = "strategy", allow_hyphen_values = true)]
    pub strategies: Vec<String>,
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = ChainConfig::default().burn_in)]
    pub burn_in: usize,
    #[arg(long, default_value_t = ChainConfig::default().thin)]
    pub thin: usize,
    /// Confidence level of the reported interval.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// One analysed strategy.
struct Row {
    label: String,
    pooled: PooledEstimate,
}

fn fits_to_pooled(fits: Vec<(f64, f64)>) -> CliResult<PooledEstimate> {
    Ok(pool_rubin(&fits)?)
}

fn from_data(args: &AnalyzeArgs, path: &Path, manifest: &mut RunManifest) -> CliResult<Vec<Row>> {
    manifest.add_input(path)?;
    let data = read_dataset_path(path)?;
    let mut strategies = vec![ImputationStrategy::mar()];
    for s in &args.strategies {
        let s: ImputationStrategy = s.parse()?;
        if !strategies.contains(&s) {
            strategies.push(s);
        }
    }
    let config = MiConfig {
        k: args.k,
        chain: ChainConfig {
            burn_in: args.burn_in,
            thin: args.thin,
        },
        seed: args.seed,
    };
    let engine = ImputationEngine::new(&data, config)?;
    strategies
        .iter()
        .map(|s| {
            s.validate(data.n_in_arm(s.reference_arm))?;
            let fits = (0..args.k)
                .map(|k| {
                    let (completed, _) = engine.complete(s, k)?;
                    let fit = ancova(&completed)?;
                    Ok((fit.effect, fit.variance))
                })
                .collect::<anchormi::Result<Vec<_>>>()?;
            Ok(Row {
                label: s.to_string(),
                pooled: fits_to_pooled(fits)?,
            })
        })
        .collect()
}

fn from_imputed(dirs: &[PathBuf], manifest: &mut RunManifest) -> CliResult<Vec<Row>> {
    let mut rows = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let mpath = dir.join(anchormi::impute::MANIFEST_FILE);
        manifest.add_input(&mpath)?;
        let m = read_manifest(&mpath)?;
        let fits = m
            .files
            .iter()
            .map(|f| {
                let fit = ancova(&read_dataset_path(&dir.join(f))?)?;
                Ok((fit.effect, fit.variance))
            })
            .collect::<anchormi::Result<Vec<_>>>()?;
        rows.push(Row {
            label: m.strategy.to_string(),
            pooled: fits_to_pooled(fits)?,
        });
    }
    Ok(rows)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn render(rows: &[Row], level: f64) -> CliResult<(String, String)> {
    let primary = rows.iter().find(|r| r.label == "mar").map(|r| r.pooled);
    let mut csv = String::from(REPORT_HEADER);
    csv.push('\n');
    let mut summary = String::new();
    for r in rows {
        let p = &r.pooled;
        let (lo, hi) = p.confidence_interval(level);
        let report = primary
            .map(|m| AnchoringReport::observed(m.total, p, DEFAULT_TOLERANCE))
            .transpose()?;
        let ratio = primary.map(|m| p.total / m.total);
        let loss = primary.map(|m| information_loss_fraction(m.se(), p.se())).transpose()?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.label,
            p.k,
            p.theta,
            p.se(),
            lo,
            hi,
            p.df,
            p.within,
            p.between,
            p.total,
            opt(report.map(|r| r.v_primary_obs)),
            opt(ratio),
            opt(loss),
        );
        let _ = write!(summary, "{:<18} theta {:>9.5}  se {:.5}  ci [{:.5}, {:.5}]", r.label, p.theta, p.se(), lo, hi);
        if let Some(l) = loss {
            let _ = write!(summary, "  info loss vs MAR {:.1}%", 100.0 * l);
        }
        summary.push('\n');
    }
    Ok((csv, summary))
}

pub fn run(args: &AnalyzeArgs) -> CliResult<()> {
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(CliError::Usage(format!("--level must lie in (0, 1), got {}", args.level)));
    }
    let seed = args.data.as_ref().map(|_| args.seed);
    let mut manifest = RunManifest::start("analyze", seed);
    let rows = match (&args.data, args.imputed.is_empty()) {
        (Some(path), true) => from_data(args, path, &mut manifest)?,
        (None, false) => from_imputed(&args.imputed, &mut manifest)?,
        _ => return Err(CliError::Usage("give exactly one of --data or --imputed".into())),
    };
    let (csv, summary) = render(&rows, args.level)?;
    std::fs::create_dir_all(&args.out)?;
    let report = args.out.join("report.csv");
    let text = args.out.join("summary.txt");
    std::fs::write(&report, csv)?;
    std::fs::write(&text, &summary)?;
    manifest.set("strategies", rows.iter().map(|r| r.label.as_str()).collect::<Vec<_>>().join(", "));
    manifest.set("level", args.level);
    if args.data.is_some() {
        manifest.set("k", args.k);
        manifest.set("burn_in", args.burn_in);
        manifest.set("thin", args.thin);
    }
    manifest.finish(&args.out, &[report, text])?;
    crate::emit(&summary)?;
    Ok(())
}
