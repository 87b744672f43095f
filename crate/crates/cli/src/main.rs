//! `hemon` command line: synthetic data, network construction, tree
//! extraction, trunk decomposition, training, evaluation and reporting.
//!
//! Exit status: 0 on success, 1 for usage errors, 2 for data errors and 3 for
//! numeric failures.

mod config;
mod report;
mod stages;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::RunConfig;
use stages::{Aggregate, DataInputs, NetworkOptions, StageError, Variant};

#[derive(Debug, Parser)]
#[command(name = "hemon", version, about = "Hierarchical emotional-network toolkit")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic time series, ratings and atlas over a planted tree.
    Synth,
    /// Correlate ROI time series into a weighted functional network.
    BuildNetwork(NetworkArgs),
    /// Maximum spanning tree of a network edge list.
    ExtractTree {
        #[arg(long)]
        network: PathBuf,
        /// Use |w| as the edge weight.
        #[arg(long)]
        abs_weights: bool,
    },
    /// Trunk decomposition of a tree into emotional areas.
    Decompose {
        #[arg(long)]
        tree: PathBuf,
        /// ROI atlas JSON; adds the per-level system composition.
        #[arg(long)]
        atlas: Option<PathBuf>,
    },
    /// Closed-form node influence against the random-walk oracle.
    Influence {
        #[arg(long)]
        tree: PathBuf,
    },
    /// Train one model variant.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        tree: PathBuf,
        #[arg(long, value_enum, default_value = "hemon")]
        variant: Variant,
    },
    /// Evaluate a checkpoint on the test split or on all samples.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_parser = ["test", "all"], default_value = "test")]
        split: String,
    },
    /// Summarize the artifacts of a run directory.
    Report {
        /// Run directory; defaults to the output directory.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Run every stage end to end, synthesizing data when none is given.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    timeseries: PathBuf,
    #[arg(long)]
    ratings: PathBuf,
}

#[derive(Debug, Args)]
struct NetworkArgs {
    /// Time-series CSV, one per subject.
    #[arg(long, required = true)]
    timeseries: Vec<PathBuf>,
    /// Ratings CSV used for emotion-epoch selection.
    #[arg(long)]
    ratings: Option<PathBuf>,
    /// Rating category (name or index) whose high epochs are kept.
    #[arg(long, requires = "ratings")]
    category: Option<String>,
    /// Keep time points rated at or above this quantile.
    #[arg(long)]
    quantile: Option<f64>,
    /// `mean` or `subject:<k>` (0-based).
    #[arg(long)]
    aggregate: Option<Aggregate>,
    /// Average correlations in Fisher-z space.
    #[arg(long)]
    fisher_z: bool,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Time-series CSV; synthesized when omitted.
    #[arg(long, requires = "ratings")]
    timeseries: Option<PathBuf>,
    #[arg(long, requires = "timeseries")]
    ratings: Option<PathBuf>,
    #[arg(long)]
    atlas: Option<PathBuf>,
    /// Variants to train; defaults to the config list or all four.
    #[arg(long, value_enum)]
    variant: Vec<Variant>,
}

struct RunContext {
    config: RunConfig,
    seed: u64,
    out: PathBuf,
}

impl RunContext {
    fn data(&self, timeseries: &Path, ratings: &Path) -> DataInputs {
        DataInputs {
            timeseries: timeseries.to_path_buf(),
            ratings: ratings.to_path_buf(),
            max_rating: self.config.max_rating(),
            test_fraction: self.config.test_fraction(),
            val_fraction: self.config.val_fraction(),
        }
    }

    fn network_options(&self, timeseries: Vec<PathBuf>, ratings: Option<PathBuf>) -> Result<NetworkOptions> {
        let n = &self.config.network;
        let aggregate = match &n.aggregate {
            Some(a) => a.parse().map_err(anyhow::Error::msg).context("in [network] aggregate")?,
            None => Aggregate::Mean,
        };
        Ok(NetworkOptions {
            timeseries,
            epoch_category: if ratings.is_some() { n.epoch_category.clone() } else { None },
            ratings,
            epoch_quantile: n.epoch_quantile.unwrap_or(0.5),
            aggregate,
            fisher_z: n.fisher_z.unwrap_or(false),
            max_rating: self.config.max_rating(),
        })
    }

    fn train(&self, data: &DataInputs, tree: &Path, variant: Variant) -> Result<Vec<PathBuf>> {
        stages::train(data, tree, variant, |c| self.config.model_config(c, self.seed), &self.out)
    }

    fn variants(&self, requested: &[Variant]) -> Result<Vec<Variant>> {
        if !requested.is_empty() {
            return Ok(requested.to_vec());
        }
        match &self.config.model.variants {
            Some(names) => names.iter().map(|n| Variant::parse(n)).collect(),
            None => Ok(Variant::ALL.to_vec()),
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = RunConfig::load(cli.config.as_deref())?;
    let ctx = RunContext {
        seed: cli.seed.or(config.seed).unwrap_or(0),
        out: cli
            .out
            .or_else(|| config.out.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out")),
        config,
    };
    let out = &ctx.out;
    let written = match cli.command {
        Command::Synth => stages::synth(&ctx.config.synthetic_spec(ctx.seed), out)?,
        Command::BuildNetwork(a) => {
            let mut opts = ctx.network_options(a.timeseries, a.ratings)?;
            opts.epoch_category = a.category.or(opts.epoch_category);
            opts.epoch_quantile = a.quantile.unwrap_or(opts.epoch_quantile);
            opts.aggregate = a.aggregate.unwrap_or(opts.aggregate);
            opts.fisher_z |= a.fisher_z;
            stages::build_network(&opts, out)?
        }
        Command::ExtractTree { network, abs_weights } => stages::extract_tree(
            &network,
            abs_weights || ctx.config.network.abs_weights.unwrap_or(false),
            out,
        )?,
        Command::Decompose { tree, atlas } => stages::decompose(&tree, atlas.as_deref(), out)?,
        Command::Influence { tree } => stages::influence(&tree, out)?,
        Command::Train { data, tree, variant } => ctx.train(&ctx.data(&data.timeseries, &data.ratings), &tree, variant)?,
        Command::Eval { checkpoint, data, split } => stages::eval(
            &checkpoint,
            &ctx.data(&data.timeseries, &data.ratings),
            split == "all",
            out,
        )?,
        Command::Report { dir } => stages::report(dir.as_deref().unwrap_or(out), out)?,
        Command::Pipeline(a) => pipeline(&ctx, a)?,
    };
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn pipeline(ctx: &RunContext, a: PipelineArgs) -> Result<Vec<PathBuf>> {
    let out = &ctx.out;
    let variants = ctx.variants(&a.variant)?;
    let mut written = Vec::new();
    let (timeseries, ratings, atlas) = match (a.timeseries, a.ratings) {
        (Some(ts), Some(r)) => (ts, r, a.atlas),
        _ => {
            written.extend(stages::synth(&ctx.config.synthetic_spec(ctx.seed), out)?);
            (out.join("timeseries.csv"), out.join("ratings.csv"), Some(out.join("atlas.json")))
        }
    };
    let inputs: Vec<(String, String)> = [Some(&timeseries), Some(&ratings), atlas.as_ref()]
        .into_iter()
        .flatten()
        .map(|p| (p.display().to_string(), stages::digest(&[p])))
        .collect();

    written.extend(stages::build_network(&ctx.network_options(vec![timeseries.clone()], Some(ratings.clone()))?, out)?);
    written.extend(stages::extract_tree(
        &out.join("network.txt"),
        ctx.config.network.abs_weights.unwrap_or(false),
        out,
    )?);
    let tree = out.join("tree.txt");
    written.extend(stages::decompose(&tree, atlas.as_deref(), out)?);
    let data = ctx.data(&timeseries, &ratings);
    for v in &variants {
        written.extend(ctx.train(&data, &tree, *v)?);
        let checkpoint = out.join(format!("checkpoint_{}.json", v.label()));
        written.extend(stages::eval(&checkpoint, &data, false, out)?);
    }
    written.extend(stages::report(out, out)?);

    let artifacts: Vec<_> = written
        .iter()
        .map(|p| {
            json!({
                "file": p.file_name().map(|n| n.to_string_lossy().into_owned()),
                "sha256": stages::digest(&[p]),
            })
        })
        .collect();
    let manifest = json!({
        "seed": ctx.seed,
        "config": ctx.config,
        "variants": variants.iter().map(|v| v.label()).collect::<Vec<_>>(),
        "inputs": inputs.iter().map(|(p, d)| json!({ "path": p, "sha256": d })).collect::<Vec<_>>(),
        "artifacts": artifacts,
    });
    let path = out.join("run.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("cannot write `{}`", path.display()))?;
    written.push(path);
    Ok(written)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<StageError>().map_or(1, |s| s.kind.exit_code());
            ExitCode::from(code as u8)
        }
    }
}
