//! Text renderings of search results shared by the CLI and the service.

use std::fmt::Write;

use crate::global_index::{GlobalIndex, ResultSet};
use crate::ingest::format_record_line;

/// One line per hit: `FID|MATCHED|CID|TYPE|FIRST_NAME|...|COUNTRY`, i.e. the
/// fid and match kind followed by the stored row's columns. Output depends
/// only on the index contents and the result set.
pub fn machine_lines(index: &GlobalIndex, results: &ResultSet) -> String {
    let mut out = String::new();
    for hit in &results.hits {
        let row = index
            .get(&hit.key)
            .map(format_record_line)
            .unwrap_or_else(|| "?".to_string());
        let _ = writeln!(out, "{}|{}|{}", hit.key.fid, hit.matched(), row);
    }
    out
}

/// Human-readable listing: keys first, then the extracted rows.
pub fn human(index: &GlobalIndex, results: &ResultSet) -> String {
    let mut out = String::new();
    let n = results.len();
    let _ = writeln!(out, "{n} result{}", if n == 1 { "" } else { "s" });
    for hit in &results.hits {
        let _ = writeln!(out, "  {{{}, {}}}  matched on {}", hit.key.fid, hit.key.cid, hit.matched());
    }
    if n > 0 {
        let _ = writeln!(out, "records:");
        let keys = results.keys();
        for (key, rec) in keys.iter().zip(index.extract(&keys)) {
            match rec {
                Ok(r) => {
                    let _ = writeln!(out, "  {}|{}", key.fid, format_record_line(r));
                }
                Err(e) => {
                    let _ = writeln!(out, "  {e}");
                }
            }
        }
    }
    out
}
