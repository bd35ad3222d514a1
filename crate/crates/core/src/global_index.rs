//! The global index: per-(country, customer kind) partitions, each holding a
//! name structure and an address index, plus the record store used for
//! extraction and the audit trail of updates.
//!
//! Corporate partitions index names in a [`CompanyNameTree`] (word order
//! matters); individual partitions use an inverted list over name words (word
//! order does not). Every partition has an inverted list over address words.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cn_tree::CompanyNameTree;
use crate::dict::TokenDictionary;
use crate::inverted_index::PostingsIndex;
use crate::model::{IndexKind, NormalizedRecord, PartitionKey, RawRecord, RecordKey, UNKNOWN_COUNTRY};
use crate::normalize::{normalize_record, normalize_text, token_set, AbbreviationTable, NormalizeError};
use crate::postings::{intersect, Postings};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IndexError {
    #[error("duplicate record keys: {}", list_keys(.0))]
    DuplicateKeys(Vec<RecordKey>),
    #[error("record #{position}: {source}")]
    MissingIdentity {
        position: usize,
        #[source]
        source: NormalizeError,
    },
    #[error("search request has neither a name nor an address")]
    EmptyQuery,
    #[error("unknown record key {0}")]
    UnknownKey(RecordKey),
}

fn list_keys(keys: &[RecordKey]) -> String {
    keys.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NameIndex {
    Tree(CompanyNameTree),
    Inverted(PostingsIndex),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub(crate) names: NameIndex,
    pub(crate) address: PostingsIndex,
    pub(crate) records: usize,
}

impl Partition {
    fn new(kind: IndexKind) -> Self {
        let names = match kind {
            IndexKind::Corporate => NameIndex::Tree(CompanyNameTree::new()),
            IndexKind::Individual => NameIndex::Inverted(PostingsIndex::new()),
        };
        Self {
            names,
            address: PostingsIndex::new(),
            records: 0,
        }
    }

    pub fn names(&self) -> &NameIndex {
        &self.names
    }

    pub fn address(&self) -> &PostingsIndex {
        &self.address
    }

    pub fn tree(&self) -> Option<&CompanyNameTree> {
        match &self.names {
            NameIndex::Tree(t) => Some(t),
            NameIndex::Inverted(_) => None,
        }
    }

    pub fn name_index(&self) -> Option<&PostingsIndex> {
        match &self.names {
            NameIndex::Inverted(i) => Some(i),
            NameIndex::Tree(_) => None,
        }
    }

    pub fn record_count(&self) -> usize {
        self.records
    }
}

/// What an analyst asks for. Tokens are normalized again at search time, so
/// raw words ("Account", "smith") are fine here.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchRequest {
    #[serde(default)]
    pub name: Option<Vec<String>>,
    #[serde(default)]
    pub address: Option<Vec<String>>,
    #[serde(default)]
    pub country: Option<String>,
    #[serde(default)]
    pub customer_type: Option<IndexKind>,
    /// Corporate names: match every name starting with the given words.
    #[serde(default)]
    pub prefix: bool,
}

impl SearchRequest {
    /// Build a request from free text fields; each field is split into words.
    pub fn from_text(name: Option<&str>, address: Option<&str>) -> Self {
        let split = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
        Self {
            name: name.map(split),
            address: address.map(split),
            ..Self::default()
        }
    }

    pub fn with_country(mut self, country: &str) -> Self {
        self.country = Some(country.to_string());
        self
    }

    pub fn with_type(mut self, kind: IndexKind) -> Self {
        self.customer_type = Some(kind);
        self
    }

    pub fn with_prefix(mut self, prefix: bool) -> Self {
        self.prefix = prefix;
        self
    }
}

/// A request after normalization against an abbreviation table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedQuery {
    /// Ordered name words, for the company-name tree.
    pub name_sequence: Option<Vec<String>>,
    /// Deduplicated name words, for the customer-name index.
    pub name_set: Option<Vec<String>>,
    pub address_set: Option<Vec<String>>,
    pub country: Option<String>,
    pub kind: Option<IndexKind>,
    pub prefix: bool,
}

impl PreparedQuery {
    pub fn new(req: &SearchRequest, table: &AbbreviationTable) -> Result<Self, IndexError> {
        let norm = |words: &Option<Vec<String>>| {
            words
                .as_ref()
                .map(|w| normalize_text(&w.join(" "), table))
                .filter(|t| !t.is_empty())
        };
        let name_sequence = norm(&req.name);
        let address_set = norm(&req.address).map(token_set);
        if name_sequence.is_none() && address_set.is_none() {
            return Err(IndexError::EmptyQuery);
        }
        let country = req
            .country
            .as_deref()
            .map(|c| c.trim().to_uppercase())
            .filter(|c| !c.is_empty());
        Ok(Self {
            name_set: name_sequence.clone().map(token_set),
            name_sequence,
            address_set,
            country,
            kind: req.customer_type,
            prefix: req.prefix,
        })
    }

    /// Whether a partition takes part in this search. The UNKNOWN-country
    /// partition is always included.
    pub fn admits(&self, part: &PartitionKey) -> bool {
        let country_ok = match &self.country {
            None => true,
            Some(c) => part.country == *c || part.country == UNKNOWN_COUNTRY,
        };
        country_ok && self.kind.is_none_or(|k| k == part.kind)
    }

    /// Field-by-field match against one normalized record, without any index.
    pub fn matches(&self, rec: &NormalizedRecord) -> bool {
        if !self.admits(&rec.partition()) {
            return false;
        }
        if let Some(words) = &self.name_sequence {
            let ok = match rec.customer_type.index_kind() {
                IndexKind::Corporate if self.prefix => rec.name_tokens.starts_with(words),
                IndexKind::Corporate => rec.name_tokens == *words,
                IndexKind::Individual => contains_all(&rec.name_tokens, self.name_set.as_deref().unwrap_or(&[])),
            };
            if !ok {
                return false;
            }
        }
        match &self.address_set {
            Some(words) => contains_all(&rec.address_tokens, words),
            None => true,
        }
    }
}

/// `haystack` and `needles` are sorted sets.
fn contains_all(haystack: &[String], needles: &[String]) -> bool {
    needles.iter().all(|n| haystack.binary_search(n).is_ok())
}

/// One matched key and which sub-indexes produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hit {
    pub key: RecordKey,
    pub name: bool,
    pub address: bool,
}

impl Hit {
    pub fn matched(&self) -> &'static str {
        match (self.name, self.address) {
            (true, true) => "name+address",
            (true, false) => "name",
            (false, true) => "address",
            (false, false) => "none",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultSet {
    pub hits: Vec<Hit>,
}

impl ResultSet {
    pub(crate) fn from_keys(keys: Vec<RecordKey>, q: &PreparedQuery) -> Self {
        let (name, address) = (q.name_sequence.is_some(), q.address_set.is_some());
        let mut keys = keys;
        keys.sort_unstable();
        keys.dedup();
        Self {
            hits: keys.into_iter().map(|key| Hit { key, name, address }).collect(),
        }
    }

    pub fn keys(&self) -> Vec<RecordKey> {
        self.hits.iter().map(|h| h.key.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditAction {
    Insert,
    Reject,
}

impl AuditAction {
    pub fn as_str(self) -> &'static str {
        match self {
            AuditAction::Insert => "insert",
            AuditAction::Reject => "reject",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEvent {
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub fid: String,
    pub cid: String,
    pub action: AuditAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub fid: String,
    pub cid: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub inserted: usize,
    pub rejected: Vec<Rejection>,
    /// Inserted into the record store but with no name or address words.
    pub unindexable: Vec<RecordKey>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionStats {
    pub country: String,
    pub kind: IndexKind,
    pub records: usize,
    /// Corporate: distinct company names. Individual: distinct name words.
    pub name_count: usize,
    /// Corporate: tree elements. Individual: name postings entries.
    pub name_items: usize,
    pub address_tokens: usize,
    pub address_postings: usize,
    /// Corporate only.
    pub tree_height: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexStats {
    pub records: usize,
    pub unindexable: usize,
    pub partition_count: usize,
    pub countries: Vec<String>,
    pub tokens: usize,
    pub partitions: Vec<PartitionStats>,
    /// Content-derived estimate of the in-memory size, in bytes.
    pub approx_memory_bytes: usize,
}

#[derive(Debug, Clone, Default)]
pub struct GlobalIndex {
    pub(crate) dict: TokenDictionary,
    pub(crate) table: AbbreviationTable,
    pub(crate) partitions: BTreeMap<PartitionKey, Partition>,
    pub(crate) records: BTreeMap<RecordKey, RawRecord>,
    pub(crate) unindexable: BTreeSet<RecordKey>,
    /// Total audit events ever produced by this index lineage.
    pub(crate) audit_position: u64,
    pub(crate) pending_audit: Vec<AuditEvent>,
}

impl GlobalIndex {
    pub fn new(table: AbbreviationTable) -> Self {
        Self {
            table,
            ..Self::default()
        }
    }

    /// Index a full export. Input order does not matter; duplicate keys or
    /// rows without an identity fail the whole build.
    pub fn build<I>(records: I, table: AbbreviationTable) -> Result<Self, IndexError>
    where
        I: IntoIterator<Item = RawRecord>,
    {
        let mut normalized = Vec::new();
        for (position, raw) in records.into_iter().enumerate() {
            let n = normalize_record(&raw, &table)
                .map_err(|source| IndexError::MissingIdentity { position, source })?;
            normalized.push(n);
        }
        normalized.sort_unstable_by(|a, b| a.key.cmp(&b.key));
        let dups: BTreeSet<RecordKey> = normalized
            .windows(2)
            .filter(|w| w[0].key == w[1].key)
            .map(|w| w[0].key.clone())
            .collect();
        if !dups.is_empty() {
            return Err(IndexError::DuplicateKeys(dups.into_iter().collect()));
        }
        let mut index = Self::new(table);
        for n in normalized {
            index.insert_normalized(n);
        }
        Ok(index)
    }

    fn insert_normalized(&mut self, n: NormalizedRecord) -> bool {
        let key = n.key.clone();
        let indexable = !n.is_unindexable();
        if indexable {
            let kind = n.customer_type.index_kind();
            let part = self
                .partitions
                .entry(n.partition())
                .or_insert_with(|| Partition::new(kind));
            if !n.name_tokens.is_empty() {
                match &mut part.names {
                    NameIndex::Tree(tree) => {
                        tree.insert(&mut self.dict, &n.name_tokens, key.clone())
                            .expect("name tokens checked non-empty");
                    }
                    NameIndex::Inverted(idx) => idx.add(&mut self.dict, &n.name_tokens, &key),
                }
            }
            part.address.add(&mut self.dict, &n.address_tokens, &key);
            part.records += 1;
        } else {
            self.unindexable.insert(key.clone());
        }
        self.records.insert(key, n.raw);
        indexable
    }

    /// Add new customers. Existing keys and rows without identity are rejected
    /// one by one; the rest of the batch still goes in. Each row produces one
    /// audit event.
    pub fn update<I>(&mut self, new_records: I) -> UpdateReport
    where
        I: IntoIterator<Item = RawRecord>,
    {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.update_at(new_records, now)
    }

    /// [`update`](Self::update) with an explicit audit timestamp.
    pub fn update_at<I>(&mut self, new_records: I, timestamp: u64) -> UpdateReport
    where
        I: IntoIterator<Item = RawRecord>,
    {
        let mut report = UpdateReport::default();
        for raw in new_records {
            let rejection = match normalize_record(&raw, &self.table) {
                Err(e) => Some(e.to_string()),
                Ok(n) if self.records.contains_key(&n.key) => {
                    Some(IndexError::DuplicateKeys(vec![n.key]).to_string())
                }
                Ok(n) => {
                    let key = n.key.clone();
                    if !self.insert_normalized(n) {
                        report.unindexable.push(key);
                    }
                    report.inserted += 1;
                    None
                }
            };
            let action = match rejection {
                Some(reason) => {
                    report.rejected.push(Rejection {
                        fid: raw.fid.clone(),
                        cid: raw.cid.clone(),
                        reason,
                    });
                    AuditAction::Reject
                }
                None => AuditAction::Insert,
            };
            self.pending_audit.push(AuditEvent {
                timestamp,
                fid: raw.fid,
                cid: raw.cid,
                action,
            });
            self.audit_position += 1;
        }
        report
    }

    pub fn search(&self, req: &SearchRequest) -> Result<ResultSet, IndexError> {
        self.search_with(req, false)
    }

    /// Same results as [`search`](Self::search); the name probe and the address
    /// probe run on two threads.
    pub fn search_parallel(&self, req: &SearchRequest) -> Result<ResultSet, IndexError> {
        self.search_with(req, true)
    }

    fn search_with(&self, req: &SearchRequest, parallel: bool) -> Result<ResultSet, IndexError> {
        let q = PreparedQuery::new(req, &self.table)?;
        let parts: Vec<&Partition> = self
            .partitions
            .iter()
            .filter(|(k, _)| q.admits(k))
            .map(|(_, p)| p)
            .collect();
        let name_probe = || -> Option<Vec<Vec<RecordKey>>> {
            q.name_sequence.as_ref()?;
            Some(parts.iter().map(|p| self.probe_names(p, &q)).collect())
        };
        let address_probe = || -> Option<Vec<Vec<RecordKey>>> {
            let words = q.address_set.as_ref()?;
            Some(
                parts
                    .iter()
                    .map(|p| p.address.query_all(&self.dict, words).unwrap_or_default())
                    .collect(),
            )
        };
        let (names, addresses) = if parallel && q.name_sequence.is_some() && q.address_set.is_some() {
            std::thread::scope(|s| {
                let handle = s.spawn(name_probe);
                let addresses = address_probe();
                (handle.join().expect("name probe panicked"), addresses)
            })
        } else {
            (name_probe(), address_probe())
        };
        let keys: Vec<RecordKey> = match (names, addresses) {
            (Some(n), Some(a)) => n
                .iter()
                .zip(&a)
                .flat_map(|(n, a)| intersect(n, a))
                .collect(),
            (Some(only), None) | (None, Some(only)) => only.into_iter().flatten().collect(),
            (None, None) => unreachable!("prepared query has at least one field"),
        };
        Ok(ResultSet::from_keys(keys, &q))
    }

    fn probe_names(&self, part: &Partition, q: &PreparedQuery) -> Vec<RecordKey> {
        match &part.names {
            NameIndex::Tree(tree) => {
                let words = q.name_sequence.as_deref().unwrap_or(&[]);
                if q.prefix {
                    tree.search_prefix(&self.dict, words)
                } else {
                    tree.search_exact(&self.dict, words)
                }
            }
            NameIndex::Inverted(idx) => idx
                .query_all(&self.dict, q.name_set.as_deref().unwrap_or(&[]))
                .unwrap_or_default(),
        }
    }

    /// Stored rows for `keys`, in request order.
    pub fn extract(&self, keys: &[RecordKey]) -> Vec<Result<&RawRecord, IndexError>> {
        keys.iter()
            .map(|k| self.records.get(k).ok_or_else(|| IndexError::UnknownKey(k.clone())))
            .collect()
    }

    pub fn get(&self, key: &RecordKey) -> Option<&RawRecord> {
        self.records.get(key)
    }

    pub fn contains(&self, key: &RecordKey) -> bool {
        self.records.contains_key(key)
    }

    pub fn records(&self) -> impl Iterator<Item = &RawRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn table(&self) -> &AbbreviationTable {
        &self.table
    }

    pub fn dictionary(&self) -> &TokenDictionary {
        &self.dict
    }

    pub fn partition(&self, key: &PartitionKey) -> Option<&Partition> {
        self.partitions.get(key)
    }

    pub fn partitions(&self) -> impl Iterator<Item = (&PartitionKey, &Partition)> {
        self.partitions.iter()
    }

    /// Countries that have at least one partition, sorted.
    pub fn country_list(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.partitions.keys().map(|k| k.country.as_str()).collect();
        out.dedup();
        out
    }

    pub fn unindexable(&self) -> impl Iterator<Item = &RecordKey> {
        self.unindexable.iter()
    }

    pub fn audit_position(&self) -> u64 {
        self.audit_position
    }

    /// Audit events produced since the last call. Callers append them to the
    /// audit log file.
    pub fn take_audit_events(&mut self) -> Vec<AuditEvent> {
        std::mem::take(&mut self.pending_audit)
    }

    pub fn stats(&self) -> IndexStats {
        let key_size = std::mem::size_of::<RecordKey>();
        let mut memory = self.dict.text_bytes() + self.dict.len() * 40;
        let partitions: Vec<PartitionStats> = self
            .partitions
            .iter()
            .map(|(k, p)| {
                let (name_count, name_items, tree_height, name_postings) = match &p.names {
                    NameIndex::Tree(t) => {
                        let (elements, postings) = t.sizes();
                        (t.name_count(), elements, t.height(), postings)
                    }
                    NameIndex::Inverted(i) => (i.len(), i.postings_total(), 0, i.postings_total()),
                };
                let address_postings = p.address.postings_total();
                memory += name_items * 40
                    + (name_postings + address_postings) * key_size
                    + (p.address.len() + if tree_height == 0 { name_count } else { 0 }) * 40;
                PartitionStats {
                    country: k.country.clone(),
                    kind: k.kind,
                    records: p.records,
                    name_count,
                    name_items,
                    address_tokens: p.address.len(),
                    address_postings,
                    tree_height,
                }
            })
            .collect();
        for (k, r) in &self.records {
            memory += k.fid.len() + k.cid.len() + std::mem::size_of::<RawRecord>();
            memory += r.optional_fields().iter().filter_map(|f| f.as_ref()).map(String::len).sum::<usize>();
        }
        IndexStats {
            records: self.records.len(),
            unindexable: self.unindexable.len(),
            partition_count: self.partitions.len(),
            countries: self.country_list().into_iter().map(str::to_string).collect(),
            tokens: self.dict.len(),
            partitions,
            approx_memory_bytes: memory,
        }
    }

    /// Checks cross-structure invariants: every indexed key is stored, lives
    /// in the partition matching its row, and every list is sorted.
    pub fn validate(&self) -> Result<(), String> {
        for (pk, part) in &self.partitions {
            let mut keys: BTreeSet<RecordKey> = part
                .address
                .items(&self.dict)
                .into_iter()
                .flat_map(|(_, p)| p.iter().cloned())
                .collect();
            match &part.names {
                NameIndex::Tree(t) if pk.kind == IndexKind::Corporate => {
                    t.validate(&self.dict)?;
                    keys.extend(t.enumerate(&self.dict).into_iter().flat_map(|(_, p)| p));
                }
                NameIndex::Inverted(i) if pk.kind == IndexKind::Individual => {
                    keys.extend(i.items(&self.dict).into_iter().flat_map(|(_, p)| p.iter().cloned()));
                }
                _ => return Err(format!("partition {pk} holds the wrong name structure")),
            }
            if keys.len() != part.records {
                return Err(format!("partition {pk} counts {} records, indexes {}", part.records, keys.len()));
            }
            for k in &keys {
                let raw = self.records.get(k).ok_or_else(|| format!("key {k} not in record store"))?;
                let n = normalize_record(raw, &self.table).map_err(|e| e.to_string())?;
                if n.partition() != *pk {
                    return Err(format!("key {k} indexed in {pk}, belongs to {}", n.partition()));
                }
            }
        }
        for k in &self.unindexable {
            if !self.records.contains_key(k) {
                return Err(format!("unindexable key {k} not in record store"));
            }
        }
        Ok(())
    }
}

/// A shared index: readers grab the current immutable snapshot, writers build
/// the next one off to the side and swap it in.
#[derive(Debug)]
pub struct SharedIndex {
    current: RwLock<Arc<GlobalIndex>>,
    writer: Mutex<()>,
}

impl SharedIndex {
    pub fn new(index: GlobalIndex) -> Self {
        Self {
            current: RwLock::new(Arc::new(index)),
            writer: Mutex::new(()),
        }
    }

    pub fn snapshot(&self) -> Arc<GlobalIndex> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Apply an update to a copy of the current index and publish it. Returns
    /// the report and the audit events the update produced.
    pub fn update<I>(&self, records: I) -> (UpdateReport, Vec<AuditEvent>)
    where
        I: IntoIterator<Item = RawRecord>,
    {
        let _guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let mut next = (*self.snapshot()).clone();
        let report = next.update(records);
        let events = next.take_audit_events();
        self.publish(next);
        (report, events)
    }

    pub fn replace(&self, index: GlobalIndex) {
        let _guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        self.publish(index);
    }

    fn publish(&self, index: GlobalIndex) {
        *self.current.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(index);
    }
}

/// Sorted keys of a postings-like slice; helper for callers comparing results.
pub fn sorted_keys(keys: &[RecordKey]) -> Vec<RecordKey> {
    Postings::from_unsorted(keys.to_vec()).into_vec()
}
