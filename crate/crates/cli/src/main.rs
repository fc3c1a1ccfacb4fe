//! Command-line pipeline: mine methods from git clones, curate testbeds,
//! evaluate prompt treatments through a replay cache and estimate their
//! causal effects.

mod commands;
mod config;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use codecause_core::ingest::IngestError;
use codecause_core::llm_eval::{ClientMode, EvalError};

use commands::Ctx;
use config::PipelineConfig;

/// A usage error: bad flags, bad config, or commands run out of order.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Parser)]
#[command(name = "codecause", version, about = "Curate code testbeds and estimate prompt treatment effects")]
struct Cli {
    /// Pipeline configuration (JSON); defaults apply when the file is absent.
    #[arg(long, short, global = true, default_value = "codecause.json")]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Replay,
    Live,
}

#[derive(Subcommand)]
enum Command {
    /// Harvest methods from the local clones.
    Mine {
        /// Query the repository search API first and write the catalog.
        #[arg(long)]
        search: bool,
    },
    /// Compute method features.
    Extract,
    /// Keep points inside the date window with valid code and docstrings.
    Validate,
    /// Train the tokenizer, build raw testbeds and near-dedup task samples.
    Dedup {
        /// Jaccard similarity at or above which a point is a near-duplicate
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Cut and write the task testbeds.
    BuildTestbeds,
    /// Render treatment prompts for the evaluated testbed.
    Prompt,
    /// Query the model (or the replay cache) and score completions.
    Eval {
        /// Answer from the recorded cache only, or call the endpoint and record
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Performance summaries and correlations.
    Correlate,
    /// Treatment effects and refutations.
    Ate,
    /// Tables and figure data.
    Report,
    /// Every step in order.
    RunAll {
        /// Jaccard similarity at or above which a point is a near-duplicate
        #[arg(long)]
        threshold: Option<f64>,
        /// Answer from the recorded cache only, or call the endpoint and record
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<EvalError>() {
            if upstream_eval(e) {
                return 3;
            }
        }
        if let Some(IngestError::Http { .. } | IngestError::SearchResponse { .. }) = cause.downcast_ref::<IngestError>() {
            return 3;
        }
    }
    2
}

fn upstream_eval(e: &EvalError) -> bool {
    match e {
        EvalError::Http { .. } | EvalError::Auth(_) | EvalError::MissingEndpoint => true,
        EvalError::Point { source, .. } => upstream_eval(source),
        _ => false,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let (threshold, mode) = match &cli.command {
        Command::Dedup { threshold } => (*threshold, None),
        Command::Eval { mode } => (None, *mode),
        Command::RunAll { threshold, mode } => (*threshold, *mode),
        _ => (None, None),
    };
    if let Some(t) = threshold {
        cfg.testbeds.threshold = t;
    }
    if let Some(m) = mode {
        cfg.llm.mode = match m {
            Mode::Replay => ClientMode::Replay,
            Mode::Live => ClientMode::Live,
        };
    }
    cfg.validate()?;
    let base = cli
        .config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let ctx = Ctx { cfg, base, jobs };
    match cli.command {
        Command::Mine { search } => commands::mine(&ctx, search),
        Command::Extract => commands::extract(&ctx),
        Command::Validate => commands::validate(&ctx),
        Command::Dedup { .. } => commands::dedup(&ctx),
        Command::BuildTestbeds => commands::build_testbeds(&ctx),
        Command::Prompt => commands::prompt(&ctx),
        Command::Eval { .. } => commands::eval(&ctx),
        Command::Correlate => commands::correlate(&ctx),
        Command::Ate => commands::ate(&ctx),
        Command::Report => commands::report(&ctx),
        Command::RunAll { .. } => commands::run_all(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
