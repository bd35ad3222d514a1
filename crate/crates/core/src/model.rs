//! Domain types shared by every index structure.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Partition country used for records whose country fields are both empty.
pub const UNKNOWN_COUNTRY: &str = "UNKNOWN";

/// Global identity of one customer row: the logical database (`fid`) plus the
/// customer id inside it (`cid`). A `cid` alone is not unique across databases.
///
/// Both parts are opaque text compared byte-wise; the derived ordering is
/// lexicographic on `fid`, then `cid`, which is the order every postings list
/// and result set is kept in.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordKey {
    pub fid: Arc<str>,
    pub cid: Arc<str>,
}

impl RecordKey {
    pub fn new(fid: impl AsRef<str>, cid: impl AsRef<str>) -> Self {
        Self {
            fid: Arc::from(fid.as_ref()),
            cid: Arc::from(cid.as_ref()),
        }
    }

    pub fn fid(&self) -> &str {
        &self.fid
    }

    pub fn cid(&self) -> &str {
        &self.cid
    }
}

impl fmt::Debug for RecordKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}, {:?})", &*self.fid, &*self.cid)
    }
}

impl fmt::Display for RecordKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.fid, self.cid)
    }
}

/// Total order on record keys: `fid` first, then `cid`.
pub fn key_order(a: &RecordKey, b: &RecordKey) -> std::cmp::Ordering {
    a.cmp(b)
}

/// Customer type as carried by the source row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CustomerType {
    Corporate,
    Individual,
    Joint,
}

impl CustomerType {
    /// Joint accounts carry person names and are indexed as individuals.
    pub fn index_kind(self) -> IndexKind {
        match self {
            CustomerType::Corporate => IndexKind::Corporate,
            CustomerType::Individual | CustomerType::Joint => IndexKind::Individual,
        }
    }

    /// Single-letter code used in record files.
    pub fn code(self) -> char {
        match self {
            CustomerType::Corporate => 'C',
            CustomerType::Individual => 'I',
            CustomerType::Joint => 'J',
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "C" => Some(CustomerType::Corporate),
            "I" => Some(CustomerType::Individual),
            "J" => Some(CustomerType::Joint),
            _ => None,
        }
    }
}

/// The two index paths: company-name tree or customer-name inverted list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Corporate,
    Individual,
}

impl IndexKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IndexKind::Corporate => "corporate",
            IndexKind::Individual => "individual",
        }
    }
}

impl fmt::Display for IndexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for IndexKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "corporate" | "c" => Ok(IndexKind::Corporate),
            "individual" | "i" | "joint" | "j" => Ok(IndexKind::Individual),
            other => Err(format!("unknown customer type {other:?}")),
        }
    }
}

/// One customer row exactly as exported by a source database.
///
/// Everything except the identity and the customer type may be missing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub fid: String,
    pub cid: String,
    pub customer_type: CustomerType,
    pub first_name: Option<String>,
    pub last_name: Option<String>,
    pub company_name: Option<String>,
    pub street: Option<String>,
    pub town: Option<String>,
    pub zip: Option<String>,
    pub country_code: Option<String>,
    pub country: Option<String>,
}

impl RawRecord {
    /// A record with only identity and type set.
    pub fn new(fid: impl Into<String>, cid: impl Into<String>, customer_type: CustomerType) -> Self {
        Self {
            fid: fid.into(),
            cid: cid.into(),
            customer_type,
            first_name: None,
            last_name: None,
            company_name: None,
            street: None,
            town: None,
            zip: None,
            country_code: None,
            country: None,
        }
    }

    pub fn corporate(fid: &str, cid: &str, company: &str) -> Self {
        let mut r = Self::new(fid, cid, CustomerType::Corporate);
        r.company_name = non_empty(company);
        r
    }

    pub fn individual(fid: &str, cid: &str, first: &str, last: &str) -> Self {
        let mut r = Self::new(fid, cid, CustomerType::Individual);
        r.first_name = non_empty(first);
        r.last_name = non_empty(last);
        r
    }

    pub fn with_address(mut self, street: &str, town: &str, zip: &str) -> Self {
        self.street = non_empty(street);
        self.town = non_empty(town);
        self.zip = non_empty(zip);
        self
    }

    pub fn with_country(mut self, country_code: &str, country: &str) -> Self {
        self.country_code = non_empty(country_code);
        self.country = non_empty(country);
        self
    }

    pub fn key(&self) -> RecordKey {
        RecordKey::new(&self.fid, &self.cid)
    }

    /// The eight optional columns in file order.
    pub fn optional_fields(&self) -> [&Option<String>; 8] {
        [
            &self.first_name,
            &self.last_name,
            &self.company_name,
            &self.street,
            &self.town,
            &self.zip,
            &self.country_code,
            &self.country,
        ]
    }

    pub fn optional_fields_mut(&mut self) -> [&mut Option<String>; 8] {
        [
            &mut self.first_name,
            &mut self.last_name,
            &mut self.company_name,
            &mut self.street,
            &mut self.town,
            &mut self.zip,
            &mut self.country_code,
            &mut self.country,
        ]
    }
}

/// `None` for empty text, `Some(owned)` otherwise.
pub fn non_empty(s: &str) -> Option<String> {
    if s.is_empty() {
        None
    } else {
        Some(s.to_string())
    }
}

/// A record after cleaning: merged, tokenized and canonicalized fields.
///
/// `name_tokens` keeps word order for corporate records (order matters for the
/// company-name tree) and is a sorted, deduplicated set for individuals.
/// `address_tokens` is always a sorted, deduplicated set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedRecord {
    pub key: RecordKey,
    pub customer_type: CustomerType,
    pub name_tokens: Vec<String>,
    pub address_tokens: Vec<String>,
    pub country: String,
    pub raw: RawRecord,
}

impl NormalizedRecord {
    pub fn partition(&self) -> PartitionKey {
        PartitionKey {
            country: self.country.clone(),
            kind: self.customer_type.index_kind(),
        }
    }

    /// True when neither name nor address produced any token.
    pub fn is_unindexable(&self) -> bool {
        self.name_tokens.is_empty() && self.address_tokens.is_empty()
    }
}

/// A (country, customer kind) bucket of the global index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PartitionKey {
    pub country: String,
    pub kind: IndexKind,
}

impl PartitionKey {
    pub fn new(country: impl Into<String>, kind: IndexKind) -> Self {
        Self {
            country: country.into(),
            kind,
        }
    }
}

impl fmt::Display for PartitionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.country, self.kind)
    }
}
