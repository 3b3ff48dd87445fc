//! `qc`: quality control for structural MRI cohorts.
//!
//! ```text
//! qc <output_name> <input_dir> [-t tags.txt] [-c True|False] [--seed N]
//!    [--jobs N] [--weights W1,W2] [--out-root DIR] [--no-thumbnails]
//! qc analyze-batch <results.tsv> <sites.tsv> -k K [--seed N]
//!    [--iterations N] [--subsample F] [--out-dir DIR]
//! ```
//!
//! Exit status: 0 all datasets processed, 2 some datasets failed, 3 no
//! datasets found, 1 fatal or usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{ArgAction, Args, Parser, Subcommand};
use cohortqc::batch::{ConsensusConfig, DEFAULT_ITERATIONS, DEFAULT_SUBSAMPLE};
use cohortqc::foreground::Weights;
use cohortqc::pipeline::{self, BatchConfig, RunConfig, DEFAULT_OUT_ROOT};

#[derive(Parser, Debug)]
#[command(
    name = "qc",
    version,
    about = "Quality control for structural MRI cohorts"
)]
#[command(args_conflicts_with_subcommands = true, subcommand_negates_reqs = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Name of the output folder under the output root
    #[arg(required = true)]
    output_name: Option<String>,
    /// Directory of datasets, or a single volume file
    #[arg(required = true)]
    input_dir: Option<PathBuf>,
    /// File listing extra header tags, one per line
    #[arg(short = 't', long = "tags")]
    tags: Option<PathBuf>,
    /// Measure every foreground object separately (True/False)
    #[arg(short = 'c', long = "per-object", value_name = "True|False", action = ArgAction::Set, value_parser = parse_flag, default_value = "False")]
    per_object: bool,
    /// Global seed for patch sampling and embeddings
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = one per core)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Foreground blend weights of the original and equalized slice, "w1,w2"
    #[arg(long, value_parser = parse_weights)]
    weights: Option<Weights>,
    /// Root directory for outputs
    #[arg(long, default_value = DEFAULT_OUT_ROOT)]
    out_root: PathBuf,
    /// Skip writing slice thumbnails
    #[arg(long)]
    no_thumbnails: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Consensus clustering of a results table against acquisition sites
    AnalyzeBatch(BatchArgs),
}

#[derive(Args, Debug)]
struct BatchArgs {
    /// results.tsv written by a previous run
    results: PathBuf,
    /// Two-column TSV: dataset id, site
    sites: PathBuf,
    /// Number of clusters (normally the number of sites)
    #[arg(short = 'k')]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iterations: usize,
    /// Fraction of datasets drawn in every iteration
    #[arg(long, default_value_t = DEFAULT_SUBSAMPLE)]
    subsample: f64,
    /// Output directory (default: next to the results table)
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn parse_flag(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("expected True or False, got {s:?}")),
    }
}

fn parse_weights(s: &str) -> Result<Weights, String> {
    let (a, b) = s
        .split_once(',')
        .ok_or("expected two comma-separated weights")?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad weight {v:?}"))
    };
    Weights::new(parse(a)?, parse(b)?).map_err(|e| e.to_string())
}

fn run(args: RunArgs) -> anyhow::Result<i32> {
    let (Some(name), Some(input)) = (args.output_name, args.input_dir) else {
        bail!("output name and input directory are required");
    };
    let config = RunConfig {
        tags_file: args.tags,
        per_object: args.per_object,
        seed: args.seed,
        weights: args.weights.unwrap_or_default(),
        jobs: args.jobs,
        out_root: args.out_root,
        thumbnails: !args.no_thumbnails,
        ..RunConfig::new(name, input)
    };
    let summary = pipeline::run(&config).context("run failed")?;
    if let Some(p) = &summary.results {
        println!("{}", p.display());
    }
    if summary.failed > 0 {
        eprintln!(
            "{} dataset(s) failed; see the status column",
            summary.failed
        );
    }
    Ok(summary.status.exit_code())
}

fn analyze(args: BatchArgs) -> anyhow::Result<i32> {
    let config = BatchConfig {
        results: args.results,
        sites: args.sites,
        consensus: ConsensusConfig {
            k: args.k,
            iterations: args.iterations,
            subsample: args.subsample,
            seed: args.seed,
        },
        out_dir: args.out_dir,
    };
    let outcome = pipeline::analyze_batch(&config).context("batch analysis failed")?;
    for (site, acc) in &outcome.overlap.accuracy {
        println!("{site}\t{acc:.4}");
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // clap exits with 2 on usage errors, which would read as a partial run
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Some(Command::AnalyzeBatch(args)) => analyze(args),
        None => run(cli.run),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
