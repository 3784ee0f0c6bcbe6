use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chatprov::pipeline::{
    cmd_align, cmd_clone, cmd_ingest, cmd_run, cmd_stats, cmd_survive, ConfigFile, PipelineError,
    StageReport,
};

#[derive(Debug, Parser)]
#[command(name = "chatprov", version, about)]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Args)]
struct Opts {
    /// JSON config file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset JSON file
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Clone cache directory
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Line similarity threshold
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Diff context lines
    #[arg(long, global = true)]
    context: Option<u32>,
    /// Worker threads
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Main branch name, instead of auto-detection
    #[arg(long, global = true)]
    main_branch: Option<String>,
    /// Fetch repositories that are already cached
    #[arg(long, global = true)]
    refresh: bool,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Validate the dataset and write the normalized records
    Ingest,
    /// Clone or update the referenced repositories
    Clone,
    /// Align diffs with conversations
    Align,
    /// Trace labelled lines forward and estimate survival
    Survive,
    /// Category summaries, bins and KS tests
    Stats,
    /// All stages in order
    Run,
}

fn config(opts: &Opts) -> Result<chatprov::pipeline::PipelineConfig, PipelineError> {
    let base = match &opts.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let flags = ConfigFile {
        dataset_path: opts.dataset.clone(),
        clone_cache_dir: opts.cache.clone(),
        output_dir: opts.out.clone(),
        threshold: opts.threshold,
        diff_context: opts.context,
        main_branch_override: opts.main_branch.clone(),
        parallelism: opts.jobs,
        normalize_whitespace: None,
    };
    let mut cfg = base.overlay(flags).resolve()?;
    cfg.refresh = opts.refresh;
    Ok(cfg)
}

fn report(r: &StageReport) {
    log::info!("{}: wrote {} files, {} skipped", r.stage, r.files.len(), r.skipped);
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = config(&cli.opts).and_then(|cfg| match cli.command {
        Cmd::Ingest => cmd_ingest(&cfg).map(|r| vec![r]),
        Cmd::Clone => cmd_clone(&cfg).map(|r| vec![r]),
        Cmd::Align => cmd_align(&cfg).map(|r| vec![r]),
        Cmd::Survive => cmd_survive(&cfg).map(|r| vec![r]),
        Cmd::Stats => cmd_stats(&cfg).map(|r| vec![r]),
        Cmd::Run => cmd_run(&cfg),
    });
    match result {
        Ok(reports) => {
            reports.iter().for_each(report);
            ExitCode::from(reports.iter().map(StageReport::exit_code).max().unwrap_or(0))
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
