//! Command-line pipeline: one run configuration, one subcommand per stage.
//!
//! Exit codes are 0 on success, 1 on runtime failure and 2 on an invalid
//! configuration or command line.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] stylo::Error),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "stylo", version, about = "Character n-gram authorship attribution pipeline")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "stylo.toml")]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    pub log_level: log::LevelFilter,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect candidate reused sentences and write a review file.
    Reuse {
        /// Extra manifest searched together with the training corpus.
        #[arg(long)]
        target: Option<PathBuf>,
    },
    /// Apply a reviewed decisions file and write the redacted manifest.
    Redact {
        #[arg(long)]
        decisions: PathBuf,
    },
    /// Leave-one-out evaluation of a subcorpus.
    Evaluate {
        #[arg(long, default_value = "large")]
        subcorpus: String,
    },
    /// Train a model on a subcorpus.
    Train {
        #[arg(long, default_value = "large")]
        subcorpus: String,
    },
    /// Score rolling windows of a target with a trained model.
    Roll {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        target: PathBuf,
    },
    /// Largest positive and negative coefficients of one class.
    Coef {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        class: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Two-class correspondence analysis with target windows as
    /// supplementary rows.
    Ca {
        /// Two classes, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        classes: Vec<String>,
        #[arg(long)]
        target: Option<PathBuf>,
        /// Defaults to `ca.subcorpus` from the config.
        #[arg(long)]
        subcorpus: Option<String>,
    },
}

/// Parse `args` (program name first) and run. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .try_init();
    match execute(&cli) {
        Ok(written) => {
            for p in written {
                log::info!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let loaded = config::load(&cli.config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    let ctx = commands::Context::new(loaded, cli.out.clone())?;
    pool.install(|| commands::dispatch(&ctx, &cli.command))
}
