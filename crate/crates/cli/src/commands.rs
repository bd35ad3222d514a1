use std::fmt::{self, Write as _};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use cnindex_core::bench::{generate_battery, run_bench, BenchError};
use cnindex_core::ingest::{self, generate, GeneratorParams, IngestError, SourceConfig};
use cnindex_core::normalize::TableError;
use cnindex_core::persist::{self, PersistError};
use cnindex_core::render;
use cnindex_core::{AbbreviationTable, GlobalIndex, IndexError, IndexStats, RawRecord, SearchRequest, UpdateReport};

use crate::args::{BenchArgs, BuildArgs, Cli, Command, Format, GenArgs, SearchArgs, StatsArgs, UpdateArgs};
use crate::SearchResponse;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG_NOT_FOUND: u8 = 2;
pub const EXIT_DUPLICATE_KEYS: u8 = 3;
pub const EXIT_EMPTY_QUERY: u8 = 4;
pub const EXIT_BENCH_MISMATCH: u8 = 5;

/// A failed command: the message for stderr and the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        let code = match e {
            IngestError::ConfigNotFound(_) => EXIT_CONFIG_NOT_FOUND,
            _ => EXIT_FAILURE,
        };
        Self::new(code, e.to_string())
    }
}

impl From<IndexError> for CliError {
    fn from(e: IndexError) -> Self {
        let code = match e {
            IndexError::DuplicateKeys(_) => EXIT_DUPLICATE_KEYS,
            IndexError::EmptyQuery => EXIT_EMPTY_QUERY,
            _ => EXIT_FAILURE,
        };
        Self::new(code, e.to_string())
    }
}

impl From<PersistError> for CliError {
    fn from(e: PersistError) -> Self {
        Self::new(EXIT_FAILURE, e.to_string())
    }
}

impl From<TableError> for CliError {
    fn from(e: TableError) -> Self {
        Self::new(EXIT_FAILURE, format!("abbreviation table: {e}"))
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Mismatch { .. } => Self::new(EXIT_BENCH_MISMATCH, format!("benchmark mismatch: {e}")),
            BenchError::Query(q) => q.into(),
            BenchError::EmptyBattery => Self::new(EXIT_FAILURE, e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(EXIT_FAILURE, e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Build(a) => build(&a, out),
        Command::Search(a) => search(&a, out),
        Command::Update(a) => update(&a, out),
        Command::Serve(a) => crate::service::run(a),
        Command::Bench(a) => bench(&a, out),
        Command::Gen(a) => gen(&a, out),
        Command::Stats(a) => stats(&a, out),
    }
}

pub fn load_table(path: Option<&Path>) -> Result<AbbreviationTable> {
    Ok(match path {
        Some(p) => AbbreviationTable::load(p)?,
        None => AbbreviationTable::builtin(),
    })
}

pub fn default_audit_path(snapshot: &Path) -> PathBuf {
    let mut name = snapshot.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".audit");
    snapshot.with_file_name(name)
}

pub fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn build(a: &BuildArgs, out: &mut dyn Write) -> Result<()> {
    let table = load_table(a.abbrev.as_deref())?;
    let cfg = SourceConfig::load(&a.sources)?;
    let started = Instant::now();
    let records = ingest::load_sources(&cfg)?;
    let index = GlobalIndex::build(records, table)?;
    let elapsed = started.elapsed();
    persist::save(&index, &a.snapshot)?;
    writeln!(
        out,
        "indexed {} records from {} sources in {:.3} s",
        index.len(),
        cfg.sources.len(),
        elapsed.as_secs_f64()
    )?;
    out.write_all(render_stats(&index.stats()).as_bytes())?;
    writeln!(out, "snapshot written to {}", a.snapshot.display())?;
    Ok(())
}

pub fn request_from(a: &SearchArgs) -> SearchRequest {
    let mut req = SearchRequest::from_text(a.name.as_deref(), a.address.as_deref()).with_prefix(a.prefix);
    req.country = a.country.clone();
    req.customer_type = a.r#type;
    req
}

fn search(a: &SearchArgs, out: &mut dyn Write) -> Result<()> {
    let index = persist::load(&a.snapshot.snapshot)?;
    let results = index.search(&request_from(a))?;
    match a.format {
        Format::Human => out.write_all(render::human(&index, &results).as_bytes())?,
        Format::Machine => {
            if results.is_empty() {
                eprintln!("0 results");
            }
            out.write_all(render::machine_lines(&index, &results).as_bytes())?
        }
        Format::Json => {
            let body = SearchResponse::new(&index, results);
            writeln!(out, "{}", serde_json::to_string(&body).expect("response serializes"))?;
        }
    }
    Ok(())
}

/// Rows from `cfg` whose keys the index does not hold yet.
pub fn new_rows(index: &GlobalIndex, cfg: &SourceConfig) -> Result<Vec<RawRecord>> {
    let mut rows = ingest::load_sources(cfg)?;
    rows.retain(|r| !index.contains(&r.key()));
    Ok(rows)
}

fn update(a: &UpdateArgs, out: &mut dyn Write) -> Result<()> {
    let path = &a.snapshot.snapshot;
    let mut index = persist::load(path)?;
    let rows = match (&a.file, &a.fid, &a.sources) {
        (Some(file), Some(fid), _) => ingest::read_record_file(file, fid)?,
        (None, _, Some(sources)) => new_rows(&index, &SourceConfig::load(sources)?)?,
        _ => return Err(CliError::new(EXIT_FAILURE, "update needs --file with --fid, or --sources")),
    };
    let report = index.update_at(rows, now_secs());
    let audit = a.audit_log.clone().unwrap_or_else(|| default_audit_path(path));
    // the audit trail is written first: it may list an event the snapshot
    // lacks after a crash, but never the reverse
    persist::append_audit(&audit, &index.take_audit_events())?;
    persist::save(&index, path)?;
    out.write_all(render_update(&report).as_bytes())?;
    Ok(())
}

pub fn render_update(r: &UpdateReport) -> String {
    let mut s = format!("inserted {}, rejected {}\n", r.inserted, r.rejected.len());
    for rej in &r.rejected {
        let _ = writeln!(s, "  rejected {}/{}: {}", rej.fid, rej.cid, rej.reason);
    }
    if !r.unindexable.is_empty() {
        let _ = writeln!(s, "  {} stored without any name or address words", r.unindexable.len());
    }
    s
}

fn stats(a: &StatsArgs, out: &mut dyn Write) -> Result<()> {
    let index = persist::load(&a.snapshot.snapshot)?;
    let stats = index.stats();
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&stats).expect("stats serialize"))?;
    } else {
        out.write_all(render_stats(&stats).as_bytes())?;
    }
    Ok(())
}

pub fn render_stats(s: &IndexStats) -> String {
    let mut out = format!(
        "{} records ({} unindexable), {} partitions, {} distinct words, ~{} KiB\n",
        s.records,
        s.unindexable,
        s.partition_count,
        s.tokens,
        s.approx_memory_bytes / 1024
    );
    if !s.partitions.is_empty() {
        let _ = writeln!(
            out,
            "  {:<10} {:<10} {:>8} {:>8} {:>10} {:>10} {:>10} {:>6}",
            "country", "kind", "records", "names", "name-items", "addr-words", "addr-posts", "height"
        );
    }
    for p in &s.partitions {
        let _ = writeln!(
            out,
            "  {:<10} {:<10} {:>8} {:>8} {:>10} {:>10} {:>10} {:>6}",
            p.country,
            p.kind.as_str(),
            p.records,
            p.name_count,
            p.name_items,
            p.address_tokens,
            p.address_postings,
            p.tree_height
        );
    }
    out
}

fn bench(a: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = SourceConfig::load(&a.sources)?;
    let records = ingest::load_sources(&cfg)?;
    let index = match &a.snapshot {
        Some(p) => persist::load(p)?,
        None => GlobalIndex::build(records.clone(), load_table(a.abbrev.as_deref())?)?,
    };
    let battery = generate_battery(&records, index.table(), a.queries, a.seed);
    let report = run_bench(&index, &records, &battery, a.reps)?;
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("report serializes"))?;
        return Ok(());
    }
    // a corpus made by `gen` carries its parameters; report them with the timings
    let params = a.sources.parent().map(|d| d.join(GENERATOR_FILE));
    if let Some(text) = params.and_then(|p| std::fs::read_to_string(p).ok()) {
        if let Ok(p) = toml::from_str::<GeneratorParams>(&text) {
            out.write_all(describe_params(&p).as_bytes())?;
        }
    }
    out.write_all(report.render().as_bytes())?;
    Ok(())
}

/// Written next to a generated corpus so later reports can state how it was made.
pub const GENERATOR_FILE: &str = "generator.toml";

pub fn describe_params(p: &GeneratorParams) -> String {
    let countries: Vec<String> = p.countries.iter().map(|(c, w)| format!("{c}:{w}")).collect();
    format!(
        "generator: {} records, {} sources, seed {}, corporate {}, countries {}\n\
         defect rates: missing {} typo {} abbreviation {} transposition {} duplicate {} incoherent {} no-country {}, group expansion {}\n",
        p.count,
        p.fids,
        p.seed,
        p.corporate_fraction,
        countries.join(" "),
        p.missing_rate,
        p.typo_rate,
        p.abbreviation_rate,
        p.transposition_rate,
        p.duplicate_rate,
        p.incoherent_rate,
        p.unknown_country_rate,
        p.group_expansion
    )
}

fn gen(a: &GenArgs, out: &mut dyn Write) -> Result<()> {
    let mut params = match &a.params {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::new(EXIT_FAILURE, format!("{}: {e}", p.display())))?;
            toml::from_str::<GeneratorParams>(&text)
                .map_err(|e| CliError::new(EXIT_FAILURE, format!("{}: {e}", p.display())))?
        }
        None => GeneratorParams::default(),
    };
    if a.clean {
        params = GeneratorParams {
            countries: params.countries,
            corporate_fraction: params.corporate_fraction,
            group_expansion: params.group_expansion,
            fids: params.fids,
            ..GeneratorParams::clean(params.count, params.seed)
        };
    }
    params.count = a.count.unwrap_or(params.count);
    params.fids = a.fids.unwrap_or(params.fids);
    params.seed = a.seed.unwrap_or(params.seed);
    let corpus = generate(&params)?;
    let cfg = corpus.write_to(&a.out)?;
    writeln!(
        out,
        "generated {} records across {} sources (seed {})",
        corpus.len(),
        corpus.sources.len(),
        params.seed
    )?;
    out.write_all(describe_params(&params).as_bytes())?;
    let params_path = a.out.join(GENERATOR_FILE);
    std::fs::write(&params_path, toml::to_string(&params).expect("params serialize"))
        .map_err(|e| CliError::new(EXIT_FAILURE, format!("{}: {e}", params_path.display())))?;
    writeln!(out, "source config: {}", cfg.display())?;
    Ok(())
}
