//! Record cleaning: field merging, tokenization and abbreviation canonicalization.
//!
//! Queries and records go through the same functions, so whatever variant of a
//! word a source database used, the index and the query agree on one spelling.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::model::{CustomerType, NormalizedRecord, RawRecord, RecordKey, UNKNOWN_COUNTRY};

const STRIP: &[char] = &['.', ',', ';', ':', '\'', '"'];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormalizeError {
    #[error("record has an empty {0} and cannot be identified")]
    MissingIdentity(&'static str),
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("cannot read abbreviation table {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected VARIANT<TAB>CANONICAL")]
    Syntax { line: usize },
    #[error("canonical form {0:?} is not a single token")]
    NotAToken(String),
    #[error("variant {variant:?} maps to both {first:?} and {second:?}")]
    Conflict {
        variant: String,
        first: String,
        second: String,
    },
    #[error("canonical form {0:?} is itself rewritten by the table")]
    Chained(String),
}

/// Split free text into uppercase word tokens.
///
/// Separators are whitespace, `,` and `;`. Hyphens and slashes inside a word
/// are kept (`A/C`, `11-1101`); `.,;:'"` are stripped from both ends.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| c.is_whitespace() || c == ',' || c == ';')
        .filter_map(clean_token)
        .collect()
}

fn clean_token(word: &str) -> Option<String> {
    let trimmed = word.trim_matches(STRIP);
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed.to_uppercase())
    }
}

/// Maps spelling variants onto one canonical token.
///
/// Entries are stored in token form: `"AC."` is looked up as `"AC"` because the
/// tokenizer strips the dot before any lookup happens. The original spelling of
/// each variant is kept for round-tripping and for the synthetic data generator.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AbbreviationTable {
    map: BTreeMap<String, String>,
    pairs: Vec<(String, String)>,
}

impl AbbreviationTable {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Build from (variant, canonical) pairs, validating the table.
    pub fn from_pairs<I, A, B>(pairs: I) -> Result<Self, TableError>
    where
        I: IntoIterator<Item = (A, B)>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let mut table = Self::default();
        for (variant, canonical) in pairs {
            table.insert(variant.as_ref(), canonical.as_ref())?;
        }
        table.check_fixed_points()?;
        table.pairs.sort();
        table.pairs.dedup();
        Ok(table)
    }

    fn insert(&mut self, variant: &str, canonical: &str) -> Result<(), TableError> {
        let canon = match tokenize(canonical).as_slice() {
            [one] if tokenize(one).as_slice() == std::slice::from_ref(one) => one.clone(),
            _ => return Err(TableError::NotAToken(canonical.to_string())),
        };
        self.pairs.push((variant.trim().to_string(), canon.clone()));
        // A multi-word variant can never match a single token; only the
        // single-token form takes part in lookups.
        let Some(key) = single_token(variant) else {
            return Ok(());
        };
        if key == canon {
            return Ok(());
        }
        match self.map.get(&key) {
            Some(existing) if *existing != canon => Err(TableError::Conflict {
                variant: key,
                first: existing.clone(),
                second: canon,
            }),
            _ => {
                self.map.insert(key, canon);
                Ok(())
            }
        }
    }

    fn check_fixed_points(&self) -> Result<(), TableError> {
        for canon in self.map.values() {
            if self.map.contains_key(canon) {
                return Err(TableError::Chained(canon.clone()));
            }
        }
        Ok(())
    }

    /// Parse the tab-separated file format; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(v), Some(c), None) if !v.trim().is_empty() && !c.trim().is_empty() => {
                    pairs.push((v.to_string(), c.to_string()))
                }
                _ => return Err(TableError::Syntax { line: i + 1 }),
            }
        }
        Self::from_pairs(pairs)
    }

    pub fn load(path: &Path) -> Result<Self, TableError> {
        let text = std::fs::read_to_string(path).map_err(|source| TableError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Serialize back to the file format.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# VARIANT\tCANONICAL\n");
        for (v, c) in &self.pairs {
            out.push_str(v);
            out.push('\t');
            out.push_str(c);
            out.push('\n');
        }
        out
    }

    /// The (variant as written, canonical token) pairs, sorted.
    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn canonical<'a>(&'a self, token: &'a str) -> &'a str {
        self.map.get(token).map(String::as_str).unwrap_or(token)
    }

    /// Variant spellings (as written in the table) of a canonical token.
    pub fn variants_of(&self, canonical: &str) -> Vec<&str> {
        self.pairs
            .iter()
            .filter(|(v, c)| c == canonical && v.as_str() != canonical)
            .map(|(v, _)| v.as_str())
            .collect()
    }

    /// Canonical tokens that have at least one variant.
    pub fn canonical_tokens(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.map.values().map(String::as_str).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

fn single_token(text: &str) -> Option<String> {
    let mut toks = tokenize(text);
    if toks.len() == 1 {
        toks.pop()
    } else {
        None
    }
}

/// Built-in table. The `A/C` group is the one every source uses; the rest are
/// common corporate and street suffixes.
pub const DEFAULT_ABBREVIATIONS: &[(&str, &str)] = &[
    ("A.C", "A/C"),
    ("AC", "A/C"),
    ("AC.", "A/C"),
    ("ACCOUNT", "A/C"),
    ("ACCT", "A/C"),
    ("LIMITED", "LTD"),
    ("LTD.", "LTD"),
    ("CORP.", "CORP"),
    ("INCORPORATED", "INC"),
    ("ST", "STREET"),
    ("STR", "STREET"),
    ("RD", "ROAD"),
    ("AVE", "AVENUE"),
    ("AV", "AVENUE"),
    ("SQ", "SQUARE"),
];

impl AbbreviationTable {
    pub fn builtin() -> Self {
        Self::from_pairs(DEFAULT_ABBREVIATIONS.iter().copied()).expect("built-in table is valid")
    }
}

/// Replace every token by its canonical form. Length is preserved.
pub fn canonicalize(tokens: Vec<String>, table: &AbbreviationTable) -> Vec<String> {
    tokens
        .into_iter()
        .map(|t| match table.map.get(&t) {
            Some(c) => c.clone(),
            None => t,
        })
        .collect()
}

fn join_present(parts: &[Option<&str>]) -> String {
    parts
        .iter()
        .flatten()
        .filter(|p| !p.trim().is_empty())
        .copied()
        .collect::<Vec<_>>()
        .join(" ")
}

/// "first last", skipping missing parts. Covers rows where one field holds the
/// whole name and the other is empty.
pub fn merge_name(first: Option<&str>, last: Option<&str>) -> String {
    join_present(&[first, last])
}

/// Street, town, zip and country code joined with single spaces. The country
/// itself is the partition key and is not merged.
pub fn merge_address(
    street: Option<&str>,
    town: Option<&str>,
    zip: Option<&str>,
    country_code: Option<&str>,
) -> String {
    join_present(&[street, town, zip, country_code])
}

/// Tokenize and canonicalize free text as a query or field value.
pub fn normalize_text(text: &str, table: &AbbreviationTable) -> Vec<String> {
    canonicalize(tokenize(text), table)
}

/// Sorted, duplicate-free token set.
pub fn token_set(mut tokens: Vec<String>) -> Vec<String> {
    tokens.sort_unstable();
    tokens.dedup();
    tokens
}

/// Partition country: `country` if present, else `country_code`, else UNKNOWN.
pub fn resolve_country(country: Option<&str>, country_code: Option<&str>) -> String {
    [country, country_code]
        .into_iter()
        .flatten()
        .map(str::trim)
        .find(|c| !c.is_empty())
        .map(str::to_uppercase)
        .unwrap_or_else(|| UNKNOWN_COUNTRY.to_string())
}

pub fn normalize_record(
    raw: &RawRecord,
    table: &AbbreviationTable,
) -> Result<NormalizedRecord, NormalizeError> {
    if raw.fid.is_empty() {
        return Err(NormalizeError::MissingIdentity("fid"));
    }
    if raw.cid.is_empty() {
        return Err(NormalizeError::MissingIdentity("cid"));
    }
    let name_tokens = match raw.customer_type {
        CustomerType::Corporate => normalize_text(raw.company_name.as_deref().unwrap_or(""), table),
        CustomerType::Individual | CustomerType::Joint => token_set(normalize_text(
            &merge_name(raw.first_name.as_deref(), raw.last_name.as_deref()),
            table,
        )),
    };
    let address = merge_address(
        raw.street.as_deref(),
        raw.town.as_deref(),
        raw.zip.as_deref(),
        raw.country_code.as_deref(),
    );
    Ok(NormalizedRecord {
        key: RecordKey::new(&raw.fid, &raw.cid),
        customer_type: raw.customer_type,
        name_tokens,
        address_tokens: token_set(normalize_text(&address, table)),
        country: resolve_country(raw.country.as_deref(), raw.country_code.as_deref()),
        raw: raw.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::IndexKind;
    use proptest::prelude::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("John Smith"), toks(&["JOHN", "SMITH"]));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("123, Main Street"), toks(&["123", "MAIN", "STREET"]));
    }

    #[test]
    fn tokenize_keeps_slash_and_hyphen_words() {
        assert_eq!(tokenize("Bloggs A/C 001"), toks(&["BLOGGS", "A/C", "001"]));
        assert_eq!(tokenize("11-1101;x"), toks(&["11-1101", "X"]));
        assert_eq!(tokenize("\"Macao\". ,, ;"), toks(&["MACAO"]));
        assert_eq!(tokenize(" A.C "), toks(&["A.C"]));
    }

    #[test]
    fn canonicalize_examples() {
        let t = AbbreviationTable::builtin();
        assert_eq!(
            canonicalize(toks(&["BLOGGS", "CORPORATION", "ACCOUNT", "001"]), &t),
            toks(&["BLOGGS", "CORPORATION", "A/C", "001"])
        );
        assert!(canonicalize(vec![], &t).is_empty());
        assert_eq!(canonicalize(toks(&["A/C"]), &t), toks(&["A/C"]));
    }

    #[test]
    fn every_account_spelling_is_uniform() {
        let t = AbbreviationTable::builtin();
        for v in ["A.C", "Account", "AC.", "ac", "A/C"] {
            assert_eq!(normalize_text(v, &t), toks(&["A/C"]), "{v}");
        }
        assert_eq!(normalize_text("Limited", &t), toks(&["LTD"]));
        assert_eq!(normalize_text("Corp.", &t), toks(&["CORP"]));
    }

    #[test]
    fn table_validation() {
        assert!(matches!(
            AbbreviationTable::from_pairs([("X", "A B")]),
            Err(TableError::NotAToken(_))
        ));
        assert!(matches!(
            AbbreviationTable::from_pairs([("X", "A"), ("X", "B")]),
            Err(TableError::Conflict { .. })
        ));
        assert!(matches!(
            AbbreviationTable::from_pairs([("X", "Y"), ("Y", "Z")]),
            Err(TableError::Chained(_))
        ));
        assert!(matches!(AbbreviationTable::parse("AC A/C\n"), Err(TableError::Syntax { line: 1 })));
    }

    #[test]
    fn table_text_round_trip() {
        let t = AbbreviationTable::builtin();
        let back = AbbreviationTable::parse(&t.to_text()).unwrap();
        assert_eq!(back, t);
        assert!(t.variants_of("A/C").contains(&"AC."));
    }

    #[test]
    fn merge_name_examples() {
        assert_eq!(merge_name(Some("John Smith"), Some("")), "John Smith");
        assert_eq!(merge_name(Some("John"), Some("Smith")), "John Smith");
        assert_eq!(merge_name(Some(""), Some("")), "");
        assert_eq!(merge_name(None, Some("Smith")), "Smith");
    }

    #[test]
    fn merge_address_examples() {
        assert_eq!(
            merge_address(Some("123, Main Street"), Some("Springfield"), Some(""), Some("")),
            "123, Main Street Springfield"
        );
        assert_eq!(merge_address(Some(""), Some(""), Some(""), Some("")), "");
        let merged = merge_address(Some("Sunset Avenue"), Some(""), Some("123"), Some(""));
        assert_eq!(merged, "Sunset Avenue 123");
        assert_eq!(tokenize(&merged), toks(&["SUNSET", "AVENUE", "123"]));
    }

    #[test]
    fn normalize_corporate() {
        let raw = RawRecord::corporate("Abba", "1", "FIRST COMMERCIAL BANK LTD").with_country("", "US");
        let n = normalize_record(&raw, &AbbreviationTable::builtin()).unwrap();
        assert_eq!(n.name_tokens, toks(&["FIRST", "COMMERCIAL", "BANK", "LTD"]));
        assert_eq!(n.partition().country, "US");
        assert_eq!(n.partition().kind, IndexKind::Corporate);
    }

    #[test]
    fn normalize_individual_without_country() {
        let raw = RawRecord::individual("Abba", "1234", "John", "Smith");
        let n = normalize_record(&raw, &AbbreviationTable::builtin()).unwrap();
        assert_eq!(n.name_tokens, toks(&["JOHN", "SMITH"]));
        assert!(n.address_tokens.is_empty());
        assert_eq!(n.country, UNKNOWN_COUNTRY);
        assert_eq!(n.partition().kind, IndexKind::Individual);
    }

    #[test]
    fn normalize_rejects_missing_identity() {
        let raw = RawRecord::individual("", "1", "A", "B");
        assert_eq!(
            normalize_record(&raw, &AbbreviationTable::builtin()),
            Err(NormalizeError::MissingIdentity("fid"))
        );
        let raw = RawRecord::individual("F", "", "A", "B");
        assert_eq!(
            normalize_record(&raw, &AbbreviationTable::builtin()),
            Err(NormalizeError::MissingIdentity("cid"))
        );
    }

    #[test]
    fn country_falls_back_to_code() {
        assert_eq!(resolve_country(Some("ie"), Some("XX")), "IE");
        assert_eq!(resolve_country(Some("  "), Some("mo")), "MO");
        assert_eq!(resolve_country(None, None), UNKNOWN_COUNTRY);
    }

    proptest! {
        #[test]
        fn tokenize_output_is_clean(s in "\\PC{0,40}") {
            for t in tokenize(&s) {
                prop_assert!(!t.is_empty());
                prop_assert!(t.chars().all(|c| c.to_uppercase().eq(std::iter::once(c))), "{t:?}");
            }
        }

        #[test]
        fn normalization_is_idempotent(s in "[a-zA-Z0-9 ,;./:'\"-]{0,40}") {
            let t = AbbreviationTable::builtin();
            let once = normalize_text(&s, &t);
            prop_assert_eq!(normalize_text(&once.join(" "), &t), once);
        }

        #[test]
        fn canonicalize_only_emits_input_or_canonical(words in proptest::collection::vec("[A-Z/.]{1,8}", 0..8)) {
            let t = AbbreviationTable::builtin();
            let canon = t.canonical_tokens();
            let out = canonicalize(words.clone(), &t);
            prop_assert_eq!(out.len(), words.len());
            for w in out {
                prop_assert!(words.contains(&w) || canon.contains(&w.as_str()));
            }
        }

        #[test]
        fn word_order_does_not_change_the_set(a in "[a-z]{1,8}", b in "[a-z]{1,8}") {
            prop_assert_eq!(token_set(tokenize(&format!("{a} {b}"))), token_set(tokenize(&format!("{b} {a}"))));
        }
    }
}
