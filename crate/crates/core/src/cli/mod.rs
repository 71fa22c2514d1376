//! The `sraal` command-line tool.
//!
//! Every file written embeds the config hash and master seed in its first
//! line, and reruns with the same inputs produce identical bytes.

mod config;
mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{hex_digest, DatasetConfig, RunConfig};
pub use output::{curve_csv, curve_file_name, score_table, summarize, Summary};

use crate::alcore::Strategy;
use crate::error::Error;

/// Environment variable overriding the number of worker threads of `run`.
pub const WORKERS_ENV: &str = "SRAAL_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "sraal", version, about = "State-relabeling adversarial active learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run active-learning trials and write learning curves plus a summary.
    Run(RunArgs),
    /// Append uncertainty indicators to a CSV of probability vectors.
    Score(ScoreArgs),
    /// Choose an initial labeled pool with greedy k-center.
    Init(InitArgs),
    /// Check every training loss against central differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML experiment config; defaults are used when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "N")]
    pub trials: Option<usize>,
    /// Comma-separated strategy names.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub strategies: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// CSV with a header row and one probability vector per row.
    pub input: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    /// Embedding CSV (`f0..f{d-1}`, optional leading `id` column).
    pub embeddings: PathBuf,
    /// Number of centers to choose.
    #[arg(long, short = 'm')]
    pub m: usize,
    /// Random starting points.
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0, value_name = "N")]
    pub seed: u64,
    /// Explicit starting ids instead of random ones.
    #[arg(long, value_name = "ID", value_delimiter = ',')]
    pub start: Option<Vec<usize>>,
    /// Output file; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0, value_name = "N")]
    pub seed: u64,
    /// Random initializations per loss.
    #[arg(long, default_value_t = 20, value_name = "N")]
    pub trials: usize,
    /// Perturb the analytic gradient (negative control).
    #[arg(long, hide = true)]
    pub corrupt: bool,
}

/// Failure of a command together with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config { .. } => EXIT_CONFIG,
            Error::Data { .. } | Error::Io(_) | Error::InvalidArgument(_) | Error::NonFinite { .. } => EXIT_DATA,
            Error::Shape { .. } | Error::LabelLeak(_) => EXIT_INTERNAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config_failure(path: &str, msg: impl Into<String>) -> Failure {
    Error::Config {
        path: path.into(),
        msg: msg.into(),
    }
    .into()
}

/// Resolves the config file plus command-line overrides.
pub fn resolve_config(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(list) = &args.strategies {
        cfg.strategies = list
            .iter()
            .map(|s| s.trim().parse::<Strategy>())
            .collect::<Result<_, _>>()
            .map_err(|e| config_failure("strategies", e.to_string()))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn workers() -> Result<usize, Failure> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(config_failure(WORKERS_ENV, format!("`{v}` is not a positive integer"))),
        },
    }
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(Error::from)?,
        None => std::io::stdout().write_all(text.as_bytes()).map_err(Error::from)?,
    }
    Ok(())
}

pub fn cmd_run(args: &RunArgs) -> Result<Summary, Failure> {
    let cfg = resolve_config(args)?;
    let n_workers = workers()?;
    output::run_trials(&cfg, n_workers)
}

pub fn cmd_score(args: &ScoreArgs) -> Result<(), Failure> {
    let bytes = std::fs::read(&args.input).map_err(Error::from)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Data {
        line: 0,
        msg: "input is not UTF-8".into(),
    })?;
    let table = score_table(&text)?;
    write_output(args.out.as_ref(), &table)
}

pub fn cmd_init(args: &InitArgs) -> Result<(), Failure> {
    let text = output::init_table(args)?;
    write_output(args.out.as_ref(), &text)
}

/// Prints one line per loss; fails with [`EXIT_CHECK`] when any exceeds the tolerance.
pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<(), Failure> {
    if args.trials == 0 {
        return Err(config_failure("trials", "must be >= 1"));
    }
    let checks = crate::gradsuite::run_gradcheck(args.seed, args.trials, args.corrupt)?;
    let mut failed = Vec::new();
    for c in &checks {
        let verdict = if c.passed() { "ok" } else { "FAIL" };
        println!(
            "{:<10} max_rel_error={:.3e} trials={} {verdict}",
            c.name, c.max_rel_error, c.trials
        );
        if !c.passed() {
            failed.push(c.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_CHECK,
            message: format!(
                "gradient check failed for {} (tolerance {:e})",
                failed.join(", "),
                crate::gradsuite::GRADCHECK_TOLERANCE
            ),
        })
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a).map(|s| {
            eprintln!("wrote {} curves and summary.json to {}", s.cells, s.out.display());
        }),
        Command::Score(a) => cmd_score(a),
        Command::Init(a) => cmd_init(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn main() -> i32 {
    run_from(std::env::args_os())
}
