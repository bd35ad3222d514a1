//! Command-line front end and HTTP service for `cnindex-core`.

pub mod args;
pub mod commands;
pub mod service;

use cnindex_core::{GlobalIndex, RawRecord, ResultSet};
use serde::{Deserialize, Serialize};

/// Search answer shared by `search --format json` and `POST /search`: the
/// matched keys, then the stored rows in the same order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub results: ResultSet,
    pub records: Vec<RawRecord>,
}

impl SearchResponse {
    pub fn new(index: &GlobalIndex, results: ResultSet) -> Self {
        let records = index
            .extract(&results.keys())
            .into_iter()
            .filter_map(Result::ok)
            .cloned()
            .collect();
        Self { results, records }
    }
}
