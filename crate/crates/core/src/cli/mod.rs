//! Command-line entry point.
//!
//! Machine-readable output is JSON lines; `--pretty` switches to tables.
//! Exit status is 0 on success, 1 for input or usage errors and 2 when the
//! scoring backend fails.

mod commands;
mod inputs;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use thiserror::Error;

use crate::detector::{Directions, OverlapPolicy};

pub use inputs::{parse_bitext, BackendSpec, BitextRow};

/// Environment variable consulted when no `--backend` is given.
pub const BACKEND_ENV: &str = "COVCON_BACKEND";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Backend(_) => 2,
        }
    }
}

pub(crate) fn input_error(context: impl std::fmt::Display, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(
    name = "covcon",
    version,
    about = "Find omitted and added content in machine translation"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of segments processed concurrently.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// TOML file with defaults; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Human-readable tables instead of JSON lines.
    #[arg(long, global = true)]
    pub pretty: bool,
    /// Report zero wall time so output is byte-identical across runs.
    #[arg(long, global = true)]
    pub no_timing: bool,
    /// Write output here instead of stdout.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LangArgs {
    #[arg(long)]
    pub src_lang: Option<String>,
    #[arg(long)]
    pub tgt_lang: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SpanArgs {
    /// Comma-separated UPOS tags that make a subtree a candidate.
    #[arg(long, conflicts_with = "pos_file")]
    pub pos: Option<String>,
    /// File listing UPOS tags.
    #[arg(long)]
    pub pos_file: Option<PathBuf>,
    /// Use every single token as a candidate instead of subtrees.
    #[arg(long)]
    pub token_level: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    /// `lexicon:PATH`, `cmd:COMMAND` or `tcp:HOST:PORT`.
    #[arg(long, env = BACKEND_ENV)]
    pub backend: Option<String>,
    /// Lexicon backend: penalty per unmatched conditioning token.
    #[arg(long)]
    pub lambda_src: Option<f64>,
    /// Lexicon backend: penalty per unmatched scored token.
    #[arg(long)]
    pub lambda_tgt: Option<f64>,
    /// Service backends: seconds to wait for a response.
    #[arg(long)]
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Parsed source sentences.
    #[arg(long)]
    pub src_conllu: Option<PathBuf>,
    /// Parsed translations.
    #[arg(long)]
    pub tgt_conllu: Option<PathBuf>,
    /// Tab-separated `source<TAB>translation` or `id<TAB>source<TAB>translation`.
    #[arg(long)]
    pub bitext: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionArg {
    Omission,
    Addition,
    Both,
}

impl From<DirectionArg> for Directions {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Omission => Directions::Omission,
            DirectionArg::Addition => Directions::Addition,
            DirectionArg::Both => Directions::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OverlapArg {
    All,
    MaxDelta,
}

impl From<OverlapArg> for OverlapPolicy {
    fn from(o: OverlapArg) -> Self {
        match o {
            OverlapArg::All => OverlapPolicy::ReportAll,
            OverlapArg::MaxDelta => OverlapPolicy::MaximalDeltaNonoverlapping,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub inputs: InputArgs,
    #[command(flatten)]
    pub langs: LangArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub spans: SpanArgs,
    /// Minimum score gain for a span to be flagged.
    #[arg(long)]
    pub margin: Option<f64>,
    /// How overlapping detections are reported.
    #[arg(long, value_enum)]
    pub overlap_policy: Option<OverlapArg>,
    #[arg(long, value_enum)]
    pub direction: Option<DirectionArg>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List candidate spans for each parsed sentence.
    Spans {
        #[arg(long)]
        conllu: PathBuf,
        #[command(flatten)]
        spans: SpanArgs,
    },
    /// Flag omissions and/or additions.
    Detect(DetectArgs),
    /// Count scores and time per segment with a cold cache.
    Bench(DetectArgs),
    /// Build a synthetic dataset by deleting subtrees before translation.
    Synth {
        #[arg(long)]
        conllu: PathBuf,
        #[command(flatten)]
        langs: LangArgs,
        /// Lookup table `source<TAB>translation` for whole sentences.
        #[arg(long, group = "translator")]
        translations: Option<PathBuf>,
        /// Translate word by word with a `source<TAB>target` lexicon.
        #[arg(long, group = "translator")]
        substitution_lexicon: Option<PathBuf>,
        /// Translate through a service (`cmd:COMMAND` or `tcp:HOST:PORT`).
        #[arg(long, group = "translator")]
        translate_backend: Option<String>,
        /// Probability of deleting each candidate span.
        #[arg(long)]
        deletion_prob: Option<f64>,
        #[arg(long, conflicts_with = "pos_file")]
        pos: Option<String>,
        #[arg(long)]
        pos_file: Option<PathBuf>,
        /// Also write `src`, `mt`, `src.tags` and `mt.tags` files here.
        #[arg(long)]
        tags_dir: Option<PathBuf>,
    },
    /// Score predictions against gold annotations or synthetic labels.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        /// Gold annotation TSV.
        #[arg(long, group = "reference")]
        gold: Option<PathBuf>,
        /// Synthetic samples (JSON lines).
        #[arg(long, group = "reference")]
        samples: Option<PathBuf>,
        /// Drop gold segments where a rater has at least this many marks.
        #[arg(long, default_value_t = 5)]
        truncation_marks: usize,
        #[arg(long)]
        no_truncation_filter: bool,
        #[arg(long)]
        keep_multi_sentence: bool,
        #[command(flatten)]
        langs: LangArgs,
    },
    /// Segment and token counts of a synthetic dataset.
    Stats {
        #[arg(long)]
        samples: PathBuf,
    },
    /// Sample positive predictions into a review session.
    Tasks {
        #[arg(long)]
        predictions: PathBuf,
        /// Comma-separated rater ids.
        #[arg(long, value_delimiter = ',', required = true)]
        raters: Vec<String>,
        /// Fraction of tasks given to two raters.
        #[arg(long, default_value_t = 0.0)]
        overlap: f64,
        /// Number of tasks; all positive predictions by default.
        #[arg(long)]
        sample: Option<usize>,
        /// JSON answer taxonomy.
        #[arg(long)]
        taxonomy: Option<PathBuf>,
    },
    /// Run the review service.
    Serve {
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        answers: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Directory with the built review UI.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
}

/// Values that may come from `--config`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub backend: Option<String>,
    pub src_lang: Option<String>,
    pub tgt_lang: Option<String>,
    pub margin: Option<f64>,
    pub overlap_policy: Option<OverlapPolicy>,
    pub direction: Option<DirectionArg>,
    pub pos: Option<Vec<String>>,
    pub lambda_src: Option<f64>,
    pub lambda_tgt: Option<f64>,
    pub timeout_secs: Option<u64>,
    pub deletion_prob: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| input_error(path.display(), e))?;
        toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

/// Where command output goes.
pub(crate) struct Output {
    path: Option<PathBuf>,
}

impl Output {
    pub(crate) fn write(&self, text: &str) -> Result<(), CliError> {
        match &self.path {
            Some(p) => std::fs::write(p, text).map_err(|e| input_error(p.display(), e)),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())
                    .and_then(|_| out.flush())
                    .map_err(|e| CliError::Input(format!("stdout: {e}")))
            }
        }
    }
}

/// Parses `argv` (program name first) and runs the command. Returns the
/// process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.global.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let jobs = cli.global.jobs.or(config.jobs);
    if jobs == Some(0) {
        return Err(CliError::Input("--jobs must be at least 1".into()));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Input(format!("cannot start worker pool: {e}")))?;
    let ctx = commands::Context {
        seed: cli.global.seed.or(config.seed).unwrap_or(0),
        pretty: cli.global.pretty,
        timing: !cli.global.no_timing,
        out: Output {
            path: cli.global.output.clone(),
        },
        config,
    };
    pool.install(|| commands::dispatch(&ctx, cli.command))
}
