//! Linear-scan baseline: answers a search by cleaning and checking every source
//! row, with no index. Uses the same normalization as the index, so any
//! difference in results is an index bug.

use crate::global_index::{IndexError, PreparedQuery, ResultSet, SearchRequest};
use crate::model::RawRecord;
use crate::normalize::{normalize_record, AbbreviationTable};

pub fn scan(
    records: &[RawRecord],
    table: &AbbreviationTable,
    req: &SearchRequest,
) -> Result<ResultSet, IndexError> {
    let q = PreparedQuery::new(req, table)?;
    let keys = records
        .iter()
        .filter_map(|raw| normalize_record(raw, table).ok())
        .filter(|n| q.matches(n))
        .map(|n| n.key)
        .collect();
    Ok(ResultSet::from_keys(keys, &q))
}
