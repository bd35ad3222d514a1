//! Reading customer exports and generating synthetic dirty corpora.
//!
//! Each logical database is exported as one UTF-8 file:
//!
//! ```text
//! CID|TYPE|FIRST_NAME|LAST_NAME|COMPANY_NAME|STREET|TOWN|ZIP|COUNTRY_CODE|COUNTRY
//! 12345|I|John|Smith||123, Main Street|Springfield|||US
//! ```
//!
//! `TYPE` is `C`, `I` or `J`; an empty column is a missing value. The fid of a
//! file is not in the file: it comes from the source config.

mod generate;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{non_empty, CustomerType, RawRecord};

pub use generate::{generate, Defects, GeneratedCorpus, GeneratorParams, TruthRow, TRUTH_HEADER};

pub const RECORD_HEADER: &str =
    "CID|TYPE|FIRST_NAME|LAST_NAME|COMPANY_NAME|STREET|TOWN|ZIP|COUNTRY_CODE|COUNTRY";
const COLUMNS: usize = 10;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("source config not found: {0}")]
    ConfigNotFound(PathBuf),
    #[error("invalid source config {path}: {reason}")]
    BadConfig { path: PathBuf, reason: String },
    #[error("fid {0:?} is listed more than once")]
    DuplicateFid(String),
    #[error("cannot read {path}: {source}")]
    SourceUnreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("field contains '|': {0:?}")]
    DelimiterInField(String),
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub fid: String,
    pub path: PathBuf,
}

/// The set of logical databases to index: one `(fid, file)` per database.
///
/// On disk this is TOML:
///
/// ```toml
/// [[source]]
/// fid = "Abba"
/// path = "abba.psv"
/// ```
///
/// Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceConfig {
    #[serde(rename = "source", default)]
    pub sources: Vec<SourceSpec>,
}

impl SourceConfig {
    pub fn new<I, F, P>(pairs: I) -> Result<Self, IngestError>
    where
        I: IntoIterator<Item = (F, P)>,
        F: Into<String>,
        P: Into<PathBuf>,
    {
        let cfg = Self {
            sources: pairs
                .into_iter()
                .map(|(fid, path)| SourceSpec {
                    fid: fid.into(),
                    path: path.into(),
                })
                .collect(),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), IngestError> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.sources {
            if !seen.insert(s.fid.as_str()) {
                return Err(IngestError::DuplicateFid(s.fid.clone()));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(IngestError::ConfigNotFound(path.to_path_buf()))
            }
            Err(source) => {
                return Err(IngestError::SourceUnreadable {
                    path: path.to_path_buf(),
                    source,
                })
            }
        };
        let mut cfg: Self = toml::from_str(&text).map_err(|e| IngestError::BadConfig {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for s in &mut cfg.sources {
            if s.path.is_relative() {
                s.path = base.join(&s.path);
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("source config serializes")
    }
}

/// Read every source file (in parallel, one thread per file) and stamp each
/// row with its file's fid. Output follows config order, then file order.
pub fn load_sources(cfg: &SourceConfig) -> Result<Vec<RawRecord>, IngestError> {
    cfg.check()?;
    let per_file: Vec<Result<Vec<RawRecord>, IngestError>> = std::thread::scope(|s| {
        let handles: Vec<_> = cfg
            .sources
            .iter()
            .map(|spec| s.spawn(move || read_record_file(&spec.path, &spec.fid)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("loader thread panicked"))
            .collect()
    });
    let mut out = Vec::new();
    for records in per_file {
        out.extend(records?);
    }
    Ok(out)
}

pub fn read_record_file(path: &Path, fid: &str) -> Result<Vec<RawRecord>, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::SourceUnreadable {
        path: path.to_path_buf(),
        source,
    })?;
    parse_records(&text, fid, path)
}

/// Parse file contents. `path` is only used in error locations.
pub fn parse_records(text: &str, fid: &str, path: &Path) -> Result<Vec<RawRecord>, IngestError> {
    let malformed = |line: usize, reason: String| IngestError::MalformedRow {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text.lines().enumerate();
    match lines.next() {
        None => return Ok(Vec::new()),
        Some((_, header)) if header.trim_end_matches('\r') == RECORD_HEADER => {}
        Some(_) => return Err(malformed(1, format!("expected header {RECORD_HEADER:?}"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('|').collect();
        if cols.len() != COLUMNS {
            return Err(malformed(i + 1, format!("expected {COLUMNS} columns, found {}", cols.len())));
        }
        if cols[0].is_empty() {
            return Err(malformed(i + 1, "missing CID".into()));
        }
        let customer_type = CustomerType::from_code(cols[1])
            .ok_or_else(|| malformed(i + 1, format!("unknown TYPE {:?}", cols[1])))?;
        let mut rec = RawRecord::new(fid, cols[0], customer_type);
        for (slot, value) in rec.optional_fields_mut().into_iter().zip(&cols[2..]) {
            *slot = non_empty(value);
        }
        out.push(rec);
    }
    Ok(out)
}

/// The record's columns in file order, without a trailing newline.
pub fn format_record_line(rec: &RawRecord) -> String {
    let mut line = format!("{}|{}", rec.cid, rec.customer_type.code());
    for f in rec.optional_fields() {
        line.push('|');
        line.push_str(f.as_deref().unwrap_or(""));
    }
    line
}

/// Render a complete record file. Fails if any value contains the delimiter
/// or a line break.
pub fn format_records<'a, I>(records: I) -> Result<String, IngestError>
where
    I: IntoIterator<Item = &'a RawRecord>,
{
    let mut out = String::from(RECORD_HEADER);
    out.push('\n');
    for rec in records {
        check_fields(rec)?;
        let _ = writeln!(out, "{}", format_record_line(rec));
    }
    Ok(out)
}

pub(crate) fn check_fields(rec: &RawRecord) -> Result<(), IngestError> {
    let values = std::iter::once(Some(&rec.cid)).chain(rec.optional_fields().into_iter().map(Option::as_ref));
    for v in values.flatten() {
        if v.contains(['|', '\n', '\r']) {
            return Err(IngestError::DelimiterInField(v.clone()));
        }
    }
    Ok(())
}

pub fn write_record_file(path: &Path, records: &[RawRecord]) -> Result<(), IngestError> {
    let text = format_records(records)?;
    std::fs::write(path, text).map_err(|source| IngestError::Write {
        path: path.to_path_buf(),
        source,
    })
}
