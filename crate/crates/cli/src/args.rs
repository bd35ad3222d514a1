use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cnindex_core::IndexKind;

/// Cross-database customer identity index.
///
/// Exit codes: 0 success (a search with no results is a success), 1 other
/// errors, 2 source config not found, 3 duplicate record keys, 4 empty query,
/// 5 benchmark result mismatch.
#[derive(Debug, Parser)]
#[command(name = "cnindex", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read every source export, build the index and write a snapshot.
    Build(BuildArgs),
    /// Search a snapshot by name and/or address.
    Search(SearchArgs),
    /// Add new records to a snapshot and append to the audit log.
    Update(UpdateArgs),
    /// Serve search, update, stats and snapshot-save over HTTP (JSON bodies).
    Serve(ServeArgs),
    /// Time indexed search against a linear scan of the sources.
    Bench(BenchArgs),
    /// Generate a synthetic dirty corpus with a truth file.
    Gen(GenArgs),
    /// Print index statistics for a snapshot.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct SnapshotArg {
    /// Snapshot file.
    #[arg(long, short = 's', env = "CNINDEX_SNAPSHOT")]
    pub snapshot: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Source config (TOML list of `[[source]]` fid/path entries).
    #[arg(long, env = "CNINDEX_SOURCES")]
    pub sources: PathBuf,
    /// Abbreviation table (VARIANT<TAB>CANONICAL per line); built-in table if absent.
    #[arg(long, env = "CNINDEX_ABBREV")]
    pub abbrev: Option<PathBuf>,
    /// Where to write the snapshot.
    #[arg(long, short = 'o', env = "CNINDEX_SNAPSHOT")]
    pub snapshot: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Keys, then the extracted records.
    Human,
    /// One `FID|MATCHED|CID|TYPE|...|COUNTRY` line per result.
    Machine,
    /// The same JSON body the service returns.
    Json,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub snapshot: SnapshotArg,
    /// Customer or company name words.
    #[arg(long, short = 'n')]
    pub name: Option<String>,
    /// Address words.
    #[arg(long, short = 'a')]
    pub address: Option<String>,
    /// Restrict to one country (records without a country are always searched).
    #[arg(long, short = 'c')]
    pub country: Option<String>,
    /// Restrict to one customer type: corporate or individual (joint = individual).
    #[arg(long, short = 't', value_parser = parse_kind)]
    pub r#type: Option<IndexKind>,
    /// Match company names starting with the given words.
    #[arg(long, short = 'p')]
    pub prefix: bool,
    #[arg(long, short = 'f', value_enum, default_value_t = Format::Human)]
    pub format: Format,
}

fn parse_kind(s: &str) -> Result<IndexKind, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct UpdateArgs {
    #[command(flatten)]
    pub snapshot: SnapshotArg,
    /// A record file of new rows for one database (needs --fid).
    #[arg(long, requires = "fid", conflicts_with = "sources")]
    pub file: Option<PathBuf>,
    /// Database the --file rows belong to.
    #[arg(long)]
    pub fid: Option<String>,
    /// Rescan every source and insert the rows not yet indexed.
    #[arg(long, env = "CNINDEX_SOURCES")]
    pub sources: Option<PathBuf>,
    /// Audit log to append to; defaults to `<snapshot>.audit`.
    #[arg(long, env = "CNINDEX_AUDIT")]
    pub audit_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub snapshot: SnapshotArg,
    #[arg(long, short = 'l', env = "CNINDEX_LISTEN", default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    /// Sources to rescan for new rows (with --rescan-secs).
    #[arg(long, env = "CNINDEX_SOURCES")]
    pub sources: Option<PathBuf>,
    /// Rescan sources on this interval, in seconds.
    #[arg(long, requires = "sources", value_parser = clap::value_parser!(u64).range(1..))]
    pub rescan_secs: Option<u64>,
    /// Audit log to append to; defaults to `<snapshot>.audit`.
    #[arg(long, env = "CNINDEX_AUDIT")]
    pub audit_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Source config; the baseline scans these rows.
    #[arg(long, env = "CNINDEX_SOURCES")]
    pub sources: PathBuf,
    /// Snapshot to benchmark; built from the sources if absent.
    #[arg(long, short = 's')]
    pub snapshot: Option<PathBuf>,
    /// Abbreviation table used when building from the sources.
    #[arg(long, env = "CNINDEX_ABBREV")]
    pub abbrev: Option<PathBuf>,
    /// Number of generated queries.
    #[arg(long, default_value_t = 500)]
    pub queries: usize,
    /// Repetitions per query (the median is reported).
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    /// Seed for the query battery.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Output directory for `<fid>.psv`, `truth.psv` and `sources.toml`.
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    /// Generator parameters as TOML (any subset of fields); flags override.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub fids: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Zero every defect rate.
    #[arg(long)]
    pub clean: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub snapshot: SnapshotArg,
    #[arg(long)]
    pub json: bool,
}
