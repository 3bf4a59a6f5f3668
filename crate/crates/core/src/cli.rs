//! Batch front end: `ingest`, `mine`, `graph` and `serve`.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags, invalid mining
//! config), 2 on data errors (unreadable input, unknown user, bad taxonomy).
//! Outputs are the library serializations, byte for byte, written atomically.

use std::ffi::OsString;
use std::fmt;
use std::io::{self, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::ingest::{ingest_file, Ingested};
use crate::miner::{patterns_to_json, MinSupport, MiningConfig, DEFAULT_MAX_PATTERN_LENGTH};
use crate::pipeline::{UserData, DEFAULT_SUMMARY_MIN_SUPPORT};
use crate::sessionize::SessionOptions;
use crate::store::{DatasetStore, DEFAULT_MAX_UPLOAD_BYTES};
use crate::taxonomy::{load_taxonomy, LabelTaxonomy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mobility", version, about = "Mine and serve individual mobility patterns from check-in histories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a check-in file and report line accounting.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Mine one user's frequent patterns.
    Mine {
        #[command(flatten)]
        source: Source,
        /// Absolute count (e.g. 2) or fraction of sessions (e.g. 0.25).
        #[arg(long)]
        min_support: MinSupport,
        #[arg(long, default_value_t = DEFAULT_MAX_PATTERN_LENGTH)]
        max_len: usize,
        /// Maximum skipped items between consecutive pattern elements.
        #[arg(long)]
        max_gap: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build one user's mobility graph.
    Graph {
        #[command(flatten)]
        source: Source,
        /// Threshold for the length-2 pattern support attached to edges.
        #[arg(long, default_value_t = MinSupport::Absolute(DEFAULT_SUMMARY_MIN_SUPPORT))]
        min_support: MinSupport,
        #[arg(long)]
        max_gap: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API over the ingested dataset.
    Serve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Persist accepted uploads here and replay them at startup.
        #[arg(long)]
        upload_dir: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MAX_UPLOAD_BYTES)]
        max_upload_bytes: usize,
    },
}

#[derive(Debug, Args)]
struct Source {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    #[arg(long)]
    user: String,
    /// Keep repeated consecutive check-ins at the same label.
    #[arg(long)]
    keep_duplicates: bool,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    fn data(err: impl fmt::Display) -> Self {
        Failure::Data(err.to_string())
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("mobility: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(msg)) => {
            eprintln!("mobility: {msg}");
            EXIT_DATA
        }
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Ingest { input, report } => {
            let ingested = read_input(&input)?;
            for err in &ingested.errors {
                eprintln!("mobility: rejected {err}");
            }
            emit(report.as_deref(), &ingested.report.to_json())
        }
        Command::Mine {
            source,
            min_support,
            max_len,
            max_gap,
            out,
        } => {
            let config = MiningConfig::new(min_support)
                .with_max_pattern_length(max_len)
                .with_max_gap(max_gap);
            // Reject a bad config before touching the data.
            config.validate(1).map_err(|e| Failure::Usage(e.to_string()))?;
            let user = load_user(&source)?;
            let patterns = user
                .patterns(&config)
                .map_err(|e| Failure::Usage(e.to_string()))?;
            emit(out.as_deref(), &patterns_to_json(&patterns))
        }
        Command::Graph {
            source,
            min_support,
            max_gap,
            out,
        } => {
            min_support
                .resolve(1)
                .map_err(|e| Failure::Usage(e.to_string()))?;
            let user = load_user(&source)?;
            let graph = user.graph(min_support, max_gap).map_err(Failure::data)?;
            emit(out.as_deref(), &graph.to_json())
        }
        Command::Serve {
            input,
            taxonomy,
            bind,
            port,
            upload_dir,
            max_upload_bytes,
        } => {
            let ingested = read_input(&input)?;
            let taxonomy = read_taxonomy(taxonomy.as_deref())?;
            let mut store =
                DatasetStore::from_ingested(ingested, taxonomy).with_max_upload_bytes(max_upload_bytes);
            if let Some(dir) = upload_dir {
                store = store.with_upload_dir(&dir);
                let replayed = store.replay_uploads(&dir).map_err(Failure::data)?;
                if replayed > 0 {
                    eprintln!("mobility: replayed {replayed} upload(s) from {}", dir.display());
                }
            }
            let runtime = tokio::runtime::Runtime::new().map_err(Failure::data)?;
            runtime
                .block_on(crate::service::serve(Arc::new(store), SocketAddr::new(bind, port)))
                .map_err(Failure::data)
        }
    }
}

fn read_input(path: &Path) -> Result<Ingested, Failure> {
    ingest_file(path).map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))
}

fn read_taxonomy(path: Option<&Path>) -> Result<LabelTaxonomy, Failure> {
    match path {
        Some(path) => load_taxonomy(path).map_err(Failure::data),
        None => Ok(LabelTaxonomy::identity()),
    }
}

fn load_user(source: &Source) -> Result<UserData, Failure> {
    let taxonomy = read_taxonomy(source.taxonomy.as_deref())?;
    let mut ingested = read_input(&source.input)?;
    let history = ingested
        .users
        .remove(&source.user)
        .ok_or_else(|| Failure::Data(format!("unknown user {:?}", source.user)))?;
    let options = SessionOptions {
        collapse_adjacent_duplicates: !source.keep_duplicates,
    };
    Ok(UserData::build(history, &taxonomy, options))
}

/// Writes to `path` through a temporary file in the same directory, or to
/// stdout when no path is given.
fn emit(path: Option<&Path>, content: &str) -> Result<(), Failure> {
    match path {
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .and_then(|_| stdout.write_all(b"\n"))
                .map_err(Failure::data)
        }
        Some(path) => write_atomic(path, content.as_bytes())
            .map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display()))),
    }
}

fn write_atomic(path: &Path, content: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(content)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
