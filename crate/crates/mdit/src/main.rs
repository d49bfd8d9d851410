use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mdit::config::{validate_config, PipelineConfig};
use mdit::error::{Error, Result};
use mdit::pipeline::{self, SweepAxis};

#[derive(Parser)]
#[command(name = "mdit", about = "Synthesize, select, and train on interpolated instruction data")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Args, Debug, Clone)]
struct CommonOpts {
    /// JSON pipeline configuration.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Task mapping NAME=PATH; repeatable. Extends or overrides the config's tasks.
    #[arg(long = "task", value_name = "NAME=PATH")]
    tasks: Vec<String>,

    /// Beta distribution shape for the interpolation weight.
    #[arg(long)]
    alpha: Option<f64>,

    /// Generated samples per original sample pair.
    #[arg(long = "t")]
    per_pair: Option<usize>,

    #[arg(long)]
    bucket_width: Option<usize>,

    /// K-Means cluster count.
    #[arg(long)]
    clusters: Option<usize>,

    /// Selection budget (final training-set size).
    #[arg(long)]
    budget: Option<usize>,

    /// Train on the full original + generated pool, skipping selection.
    #[arg(long)]
    no_cluster_selection: bool,

    #[arg(long)]
    seed: Option<u64>,

    #[arg(long = "out")]
    out_dir: Option<PathBuf>,

    /// Learning rate 2e-5, batch size 16, 3 epochs.
    #[arg(long)]
    paper_preset: bool,
}

#[derive(Subcommand)]
enum Commands {
    /// Load corpora, build the vocabulary, embed, and generate interpolated samples.
    Generate(CommonOpts),
    /// Cluster the saved pool and write the diversity selection.
    Select(CommonOpts),
    /// Train the built-in model on the saved selection.
    Train(CommonOpts),
    /// Full pipeline: generate, select, train, project, report.
    Run(CommonOpts),
    /// One pipeline run per value along one axis.
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        /// alpha, t, or budget.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Export 2-D PCA coordinates of the saved pool.
    Project(CommonOpts),
}

fn build_config(opts: &CommonOpts) -> Result<PipelineConfig> {
    let mut config = match &opts.config {
        Some(path) => validate_config(path)?,
        None => PipelineConfig::from_tasks(BTreeMap::new()),
    };
    for entry in &opts.tasks {
        let (name, path) = entry.split_once('=').ok_or_else(|| {
            Error::Config(format!("--task expects NAME=PATH, got {entry}"))
        })?;
        config.tasks.insert(name.to_string(), PathBuf::from(path));
    }
    if let Some(alpha) = opts.alpha {
        config.interpolation.alpha = alpha;
    }
    if let Some(t) = opts.per_pair {
        config.interpolation.per_pair = t;
    }
    if let Some(w) = opts.bucket_width {
        config.interpolation.bucket_width = w;
    }
    if let Some(m) = opts.clusters {
        config.clustering.cluster_count = Some(m);
    }
    if let Some(b) = opts.budget {
        config.clustering.budget = Some(b);
    }
    if opts.no_cluster_selection {
        config.clustering.selection_enabled = false;
    }
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    if let Some(out) = &opts.out_dir {
        config.out_dir = out.clone();
    }
    if opts.paper_preset {
        config.apply_paper_preset();
    }
    config.validate()?;
    Ok(config)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Commands::Generate(opts) => {
            let config = build_config(&opts)?;
            let prepared = pipeline::prepare(&config)?;
            pipeline::save_prepared(&config, &prepared)?;
            println!(
                "generated {} samples from {} originals -> {}",
                prepared.n_generated(),
                prepared.n_originals,
                config.out_dir.display()
            );
            Ok(())
        }
        Commands::Select(opts) => {
            let config = build_config(&opts)?;
            pipeline::run_select(&config)?;
            println!("selection written to {}", config.out_dir.join("selection").display());
            Ok(())
        }
        Commands::Train(opts) => {
            let config = build_config(&opts)?;
            pipeline::run_train(&config)?;
            println!("model and metrics written to {}", config.out_dir.join("train").display());
            Ok(())
        }
        Commands::Run(opts) => {
            let config = build_config(&opts)?;
            let report = pipeline::run_pipeline(&config)?;
            println!(
                "originals={} generated={} selected={} nll={:.4} accuracy={:.4}",
                report.counts.originals,
                report.counts.generated,
                report.counts.selected,
                report.metrics.nll,
                report.metrics.accuracy
            );
            Ok(())
        }
        Commands::Sweep {
            common,
            axis,
            values,
        } => {
            let config = build_config(&common)?;
            let axis = SweepAxis::parse(&axis)?;
            let rows = pipeline::sweep(&config, axis, &values)?;
            for r in &rows {
                println!("{}={} {}", r.axis, r.value, r.status);
            }
            println!(
                "table written to {}",
                config
                    .out_dir
                    .join(format!("sweep_{}.csv", axis.name()))
                    .display()
            );
            Ok(())
        }
        Commands::Project(opts) => {
            let config = build_config(&opts)?;
            pipeline::run_project(&config)?;
            println!("projection written to {}", config.out_dir.join("projection.csv").display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
