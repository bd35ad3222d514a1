//! Cross-database customer identity index.
//!
//! Customer rows exported from many independent databases are cleaned
//! ([`normalize`]), then indexed per (country, customer kind) partition: a
//! word-level company-name tree for corporate names ([`cn_tree`]) and inverted
//! lists for individual names and merged addresses ([`inverted_index`]). The
//! [`global_index`] answers identity searches over all databases at once and
//! returns `(fid, cid)` keys plus the original rows. Indexes can be saved and
//! reloaded ([`persist`]), compared against a linear scan ([`scan`], [`bench`]),
//! and exercised on synthetic dirty corpora ([`ingest::generate`]).

pub mod bench;
pub mod cn_tree;
pub mod dict;
pub mod global_index;
pub mod ingest;
pub mod inverted_index;
pub mod model;
pub mod normalize;
pub mod persist;
pub mod postings;
pub mod render;
pub mod scan;

pub use global_index::{
    GlobalIndex, Hit, IndexError, IndexStats, ResultSet, SearchRequest, SharedIndex, UpdateReport,
};
pub use model::{CustomerType, IndexKind, PartitionKey, RawRecord, RecordKey};
pub use normalize::AbbreviationTable;
