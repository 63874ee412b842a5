//! `newsrag` command line and HTTP service.

pub mod commands;
pub mod config;
pub mod logging;
pub mod server;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use newsrag::{Error, ErrorCategory, Language};

pub use config::{LogLevel, ServiceConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "newsrag", version, about = "Question answering over broadcast-news transcripts")]
pub struct Cli {
    /// TOML config file; `NEWSRAG_*` variables override its keys.
    #[arg(long, global = true, env = "NEWSRAG_CONFIG")]
    pub config: Option<PathBuf>,

    /// Overrides `log_level` from the config.
    #[arg(long, global = true)]
    pub log_level: Option<LogLevel>,

    #[arg(long, global = true, value_enum, default_value_t = LogFormat::Text)]
    pub log_format: LogFormat,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogFormat {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a directory of transcripts into a documents JSONL file.
    Ingest(IngestArgs),
    /// Split documents into overlapping chunks.
    Chunk(ChunkArgs),
    /// Build, export or import the vector index.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Answer a question.
    Ask(AskArgs),
    /// Generate question/answer pairs from transcripts with the chat model.
    ExtractQa(ExtractQaArgs),
    /// Score the engine on an evaluation set.
    Evaluate(EvaluateArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory scanned recursively for transcripts.
    pub dir: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Keep only recordings in this language (ISO 639-1).
    #[arg(long)]
    pub language: Option<Language>,
    /// Also write the per-language corpus manifest here.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Exit with a validation failure if any file was rejected.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct ChunkArgs {
    /// Documents JSONL, or a transcript directory.
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long)]
    pub max_chars: Option<usize>,
    #[arg(long)]
    pub overlap_chars: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Embed chunks and write a snapshot.
    Build {
        /// Chunks JSONL.
        chunks: PathBuf,
        /// Defaults to `snapshot_path` from the config.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Dump a snapshot as JSONL (`{"chunk":..,"vector":..}` per line).
    Export {
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Load an exported JSONL file into a new snapshot.
    Import {
        input: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct AskArgs {
    pub question: String,
    /// Answer without retrieval.
    #[arg(long)]
    pub no_rag: bool,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub language: Option<String>,
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    /// Print the answer as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ExtractQaArgs {
    /// Transcript directory or documents JSONL.
    pub corpus: PathBuf,
    /// Receives fine_tune.jsonl, evaluation.jsonl and manifest.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Recordings starting at or after this RFC 3339 instant form the evaluation split.
    #[arg(long)]
    pub eval_from: Option<chrono::DateTime<chrono::Utc>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SettingChoice {
    Rag,
    NoRag,
    Both,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Alpaca-style JSONL of question/answer pairs.
    pub eval_set: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SettingChoice::Both)]
    pub setting: SettingChoice,
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err.category() {
        ErrorCategory::Validation => EXIT_VALIDATION,
        ErrorCategory::Io | ErrorCategory::Endpoint => EXIT_IO,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut cfg = match ServiceConfig::from_env(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if let Some(l) = cli.log_level {
        cfg.log_level = l;
    }
    logging::init(cfg.log_level, cli.log_format);
    match commands::dispatch(cli.command, cfg) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            tracing::error!(code = e.code(), error = %e, "command failed");
            eprintln!("error [{}]: {e}", e.code());
            exit_code(&e)
        }
    }
}
