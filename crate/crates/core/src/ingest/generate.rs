//! Synthetic customer corpora with injected data-quality defects.
//!
//! Every row starts from a clean identity (recorded in the truth file) and then
//! independently, with the configured per-row probabilities, gets: a spelling
//! variant from the abbreviation table, a word transposition, street text moved
//! into the zip column, a one-character typo, and a blanked or dummy field.
//! Some rows are near-duplicates of an earlier identity placed in another
//! database under a new cid.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_fields, format_record_line, format_records, IngestError, SourceConfig};
use crate::model::{CustomerType, RawRecord, RecordKey};
use crate::normalize::AbbreviationTable;

pub const TRUTH_HEADER: &str = "FID|CID|TYPE|FIRST_NAME|LAST_NAME|COMPANY_NAME|STREET|TOWN|ZIP|COUNTRY_CODE|COUNTRY|DUPLICATE_OF|DEFECTS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    /// Total rows across all databases.
    pub count: usize,
    /// Number of logical databases (fids).
    pub fids: usize,
    pub corporate_fraction: f64,
    /// Country codes with relative weights.
    pub countries: Vec<(String, f64)>,
    pub missing_rate: f64,
    pub typo_rate: f64,
    pub abbreviation_rate: f64,
    pub transposition_rate: f64,
    pub duplicate_rate: f64,
    pub incoherent_rate: f64,
    /// Probability that a new company joins an existing company name group
    /// ("X BANK LTD" -> "X BANK LTD TRUST A/C TA 505055").
    pub group_expansion: f64,
    /// Probability that both country columns are blank.
    pub unknown_country_rate: f64,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            count: 32_000,
            fids: 16,
            corporate_fraction: 0.4,
            countries: [("IE", 3.0), ("GB", 2.0), ("US", 2.0), ("LU", 1.0), ("MO", 1.0), ("FR", 1.0)]
                .iter()
                .map(|(c, w)| (c.to_string(), *w))
                .collect(),
            missing_rate: 0.05,
            typo_rate: 0.03,
            abbreviation_rate: 0.10,
            transposition_rate: 0.05,
            duplicate_rate: 0.05,
            incoherent_rate: 0.03,
            group_expansion: 0.30,
            unknown_country_rate: 0.005,
            seed: 2009,
        }
    }
}

impl GeneratorParams {
    /// All defect rates set to zero.
    pub fn clean(count: usize, seed: u64) -> Self {
        Self {
            count,
            seed,
            missing_rate: 0.0,
            typo_rate: 0.0,
            abbreviation_rate: 0.0,
            transposition_rate: 0.0,
            duplicate_rate: 0.0,
            incoherent_rate: 0.0,
            unknown_country_rate: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: String| Err(IngestError::InvalidParams(m));
        if self.count == 0 {
            return bad("count must be positive".into());
        }
        if self.fids == 0 {
            return bad("fids must be positive".into());
        }
        let rates = [
            ("corporate_fraction", self.corporate_fraction),
            ("missing_rate", self.missing_rate),
            ("typo_rate", self.typo_rate),
            ("abbreviation_rate", self.abbreviation_rate),
            ("transposition_rate", self.transposition_rate),
            ("duplicate_rate", self.duplicate_rate),
            ("incoherent_rate", self.incoherent_rate),
            ("group_expansion", self.group_expansion),
            ("unknown_country_rate", self.unknown_country_rate),
        ];
        for (name, r) in rates {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} = {r} is outside [0, 1]"));
            }
        }
        if self.countries.is_empty()
            || self.countries.iter().any(|(c, w)| c.is_empty() || c.contains('|') || w.is_nan() || *w < 0.0)
            || self.countries.iter().map(|(_, w)| w).sum::<f64>() <= 0.0
        {
            return bad("countries need non-empty codes and positive total weight".into());
        }
        Ok(())
    }
}

/// Which defects were injected into one row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Defects(u8);

impl Defects {
    pub const MISSING: Defects = Defects(1);
    pub const TYPO: Defects = Defects(1 << 1);
    pub const ABBREVIATION: Defects = Defects(1 << 2);
    pub const TRANSPOSITION: Defects = Defects(1 << 3);
    pub const DUPLICATE: Defects = Defects(1 << 4);
    pub const INCOHERENT: Defects = Defects(1 << 5);
    pub const NO_COUNTRY: Defects = Defects(1 << 6);

    const NAMES: [(Defects, &'static str); 7] = [
        (Self::MISSING, "missing"),
        (Self::TYPO, "typo"),
        (Self::ABBREVIATION, "abbreviation"),
        (Self::TRANSPOSITION, "transposition"),
        (Self::DUPLICATE, "duplicate"),
        (Self::INCOHERENT, "incoherent"),
        (Self::NO_COUNTRY, "no_country"),
    ];

    pub fn contains(self, other: Defects) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    fn set(&mut self, other: Defects) {
        self.0 |= other.0;
    }

    pub fn names(self) -> Vec<&'static str> {
        Self::NAMES
            .iter()
            .filter(|(d, _)| self.contains(*d))
            .map(|(_, n)| *n)
            .collect()
    }
}

/// Clean version of one generated row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthRow {
    pub clean: RawRecord,
    pub duplicate_of: Option<RecordKey>,
    pub defects: Defects,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedCorpus {
    /// One entry per fid, in fid order, with that database's rows.
    pub sources: Vec<(String, Vec<RawRecord>)>,
    /// One row per generated record, in generation order.
    pub truth: Vec<TruthRow>,
}

impl GeneratedCorpus {
    pub fn records(&self) -> Vec<RawRecord> {
        self.sources.iter().flat_map(|(_, r)| r.iter().cloned()).collect()
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn truth_text(&self) -> String {
        let mut out = String::from(TRUTH_HEADER);
        out.push('\n');
        for t in &self.truth {
            let dup = t.duplicate_of.as_ref().map(ToString::to_string).unwrap_or_default();
            let _ = writeln!(
                out,
                "{}|{}|{}|{}",
                t.clean.fid,
                format_record_line(&t.clean),
                dup,
                t.defects.names().join(",")
            );
        }
        out
    }

    /// Write `<fid>.psv` per database, `truth.psv` and `sources.toml` into
    /// `dir`. Returns the path of the source config.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf, IngestError> {
        let write = |path: PathBuf, text: String| {
            std::fs::write(&path, text).map_err(|source| IngestError::Write { path, source })
        };
        std::fs::create_dir_all(dir).map_err(|source| IngestError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut pairs = Vec::new();
        for (fid, recs) in &self.sources {
            let file = format!("{}.psv", fid.to_lowercase());
            write(dir.join(&file), format_records(recs)?)?;
            pairs.push((fid.clone(), PathBuf::from(file)));
        }
        write(dir.join("truth.psv"), self.truth_text())?;
        let cfg = SourceConfig::new(pairs)?;
        let cfg_path = dir.join("sources.toml");
        write(cfg_path.clone(), cfg.to_toml())?;
        Ok(cfg_path)
    }
}

const FID_NAMES: &[&str] = &[
    "Abba", "Merlu", "Skada", "Tarn", "Vesta", "Orla", "Brisk", "Caddo", "Delve", "Elm", "Fable",
    "Gully", "Hollo", "Ivar", "Jetty", "Kelp",
];

const COMPANY_HEADS: &[&str] = &[
    "FIRST", "ABC", "INTERNATIONAL", "GLOBAL", "ATLANTIC", "PACIFIC", "NORTHERN", "ROYAL", "UNITED",
    "GOLDEN", "SILVER", "EASTERN", "CENTRAL", "METRO", "OCEAN", "SUMMIT", "PIONEER", "HARBOUR",
    "CROWN", "EMERALD", "ALPINE", "BLUE", "CELTIC", "DELTA",
];
const COMPANY_CORES: &[&str] = &[
    "COMMERCIAL", "CAPITAL", "AMERICA", "DDD", "TRADING", "HOLDINGS", "INVEST", "SECURITIES",
    "ASSET", "PARTNERS", "VENTURES", "FINANCE", "MARITIME", "ENERGY", "PROPERTY", "INSURANCE",
    "MINING", "SHIPPING", "EQUITY", "RESOURCES", "MERCHANT", "PACKAGING",
];
const COMPANY_TAILS: &[&str] = &[
    "BANK LTD", "GROUP", "LTD", "CORP", "INC", "HOLDINGS LTD", "PLC", "SA", "BANK", "FUND LTD",
    "NOMINEES LTD",
];
const GROUP_SUFFIXES: &[&str] = &[
    "OBB A/C", "TRUST A/C TA", "NEW YORK BRANCH", "NOMINEES A/C", "A/C", "LONDON BRANCH",
    "PENSION FUND A/C", "CLIENT A/C",
];
const FIRST_NAMES: &[&str] = &[
    "John", "Peter", "Mary", "Anne", "Michael", "Sarah", "David", "Laura", "James", "Emma",
    "Patrick", "Siobhan", "Liam", "Aoife", "Chen", "Wei", "Maria", "Jose", "Luc", "Claire",
    "Hans", "Greta", "Omar", "Fatima", "Ivan", "Olga", "Tom", "Rita", "Sean", "Niamh", "Paul",
    "Grace", "Kevin", "Helen", "Mark", "Julia", "Brian", "Eileen", "Ken", "Lucy",
];
const LAST_NAMES: &[&str] = &[
    "Smith", "Murphy", "Chang", "Kelly", "Byrne", "Walsh", "Ryan", "OBrien", "Doyle", "Lynch",
    "Martin", "Bernard", "Dubois", "Muller", "Schmidt", "Rossi", "Silva", "Santos", "Wong", "Lee",
    "Tan", "Garcia", "Lopez", "Novak", "Ivanov", "Brown", "Taylor", "Wilson", "Evans", "Moore",
    "Clarke", "Hughes", "Price", "Bloggs", "Nolan", "Quinn", "Keane", "Burke", "Fitzgerald",
    "Power", "Daly", "Foley", "Hayes", "Regan", "Carroll", "Brady", "Farrell", "Dunne", "Ho",
    "Leung", "Cheung", "Lam", "Yip", "Fong", "Kwan", "Hui", "Chow", "Ng", "Lau", "Mak",
];
const STREET_NAMES: &[&str] = &[
    "Main", "Sunset", "Harbour", "Church", "Mill", "King", "Queen", "Park", "Station", "Bridge",
    "High", "Castle", "Green", "Abbey", "Market", "Dock", "Chapel", "Orchard", "Meadow", "Lake",
    "River", "Hill", "Forest", "Garden", "Victoria", "Albert", "George", "Camden", "Pearse",
    "Grafton",
];
const STREET_TYPES: &[&str] = &["Street", "Road", "Avenue", "Square"];
const TOWNS: &[&str] = &[
    "Dublin", "Cork", "Galway", "London", "Leeds", "Springfield", "Boston", "Luxembourg", "Macao",
    "Paris", "Lyon", "Limerick", "Manchester", "Chicago", "Esch", "Taipa", "Nice", "Sligo",
];
const DUMMIES: &[&str] = &["N/A", "-", "XXX"];

struct Identity {
    clean: RawRecord,
    key: RecordKey,
    company_base: Option<String>,
}

/// Generate a corpus. The same parameters always give the same corpus.
pub fn generate(params: &GeneratorParams) -> Result<GeneratedCorpus, IngestError> {
    params.validate()?;
    let table = AbbreviationTable::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let fids: Vec<String> = (0..params.fids)
        .map(|i| match FID_NAMES.get(i) {
            Some(n) => n.to_string(),
            None => format!("F{i:03}"),
        })
        .collect();
    let mut next_cid = vec![100u64; fids.len()];
    let mut sources: Vec<(String, Vec<RawRecord>)> = fids.iter().map(|f| (f.clone(), Vec::new())).collect();
    let mut identities: Vec<Identity> = Vec::new();
    let mut truth = Vec::with_capacity(params.count);
    let total_weight: f64 = params.countries.iter().map(|(_, w)| w).sum();

    for _ in 0..params.count {
        let fid_idx = rng.random_range(0..fids.len());
        let n = next_cid[fid_idx];
        next_cid[fid_idx] += 1;
        let cid = if fid_idx % 3 == 1 { format!("B{n}") } else { n.to_string() };
        let fid = &fids[fid_idx];

        let mut defects = Defects::default();
        let (mut clean, duplicate_of, company_base) =
            if !identities.is_empty() && rng.random_bool(params.duplicate_rate) {
                let orig = &identities[rng.random_range(0..identities.len())];
                defects.set(Defects::DUPLICATE);
                (orig.clean.clone(), Some(orig.key.clone()), None)
            } else {
                let country = pick_country(&mut rng, &params.countries, total_weight);
                let (clean, base) = new_identity(&mut rng, params, &identities, &country);
                (clean, None, base)
            };
        clean.fid = fid.clone();
        clean.cid = cid.clone();
        if duplicate_of.is_none() {
            identities.push(Identity {
                key: clean.key(),
                clean: clean.clone(),
                company_base,
            });
        }

        let mut rec = clean.clone();
        if defects.contains(Defects::DUPLICATE) && rec.customer_type != CustomerType::Corporate && rng.random_bool(0.5) {
            // "John Smith" vs "J. Smith"
            if let Some(first) = rec.first_name.as_mut() {
                if let Some(c) = first.chars().next() {
                    *first = format!("{c}.");
                }
            }
        }
        if rng.random_bool(params.abbreviation_rate) && abbreviate(&mut rng, &mut rec, &table) {
            defects.set(Defects::ABBREVIATION);
        }
        if rng.random_bool(params.transposition_rate) && transpose(&mut rec) {
            defects.set(Defects::TRANSPOSITION);
        }
        if rng.random_bool(params.incoherent_rate) && rec.street.is_some() {
            std::mem::swap(&mut rec.street, &mut rec.zip);
            defects.set(Defects::INCOHERENT);
        }
        if rng.random_bool(params.typo_rate) && typo(&mut rng, &mut rec) {
            defects.set(Defects::TYPO);
        }
        if rng.random_bool(params.missing_rate) && blank_field(&mut rng, &mut rec) {
            defects.set(Defects::MISSING);
        }
        if rng.random_bool(params.unknown_country_rate) {
            rec.country = None;
            rec.country_code = None;
            defects.set(Defects::NO_COUNTRY);
        }
        check_fields(&rec)?;
        sources[fid_idx].1.push(rec);
        truth.push(TruthRow {
            clean,
            duplicate_of,
            defects,
        });
    }
    Ok(GeneratedCorpus { sources, truth })
}

fn pick_country(rng: &mut ChaCha8Rng, countries: &[(String, f64)], total: f64) -> String {
    let mut pick = rng.random_range(0.0..total);
    for (c, w) in countries {
        if pick < *w {
            return c.clone();
        }
        pick -= w;
    }
    countries.last().map(|(c, _)| c.clone()).unwrap_or_default()
}

fn new_identity(
    rng: &mut ChaCha8Rng,
    params: &GeneratorParams,
    identities: &[Identity],
    country: &str,
) -> (RawRecord, Option<String>) {
    let corporate = rng.random_bool(params.corporate_fraction);
    let kind = if corporate {
        CustomerType::Corporate
    } else if rng.random_bool(0.1) {
        CustomerType::Joint
    } else {
        CustomerType::Individual
    };
    let mut rec = RawRecord::new("", "", kind);
    let mut base_out = None;
    if corporate {
        let group_base = if rng.random_bool(params.group_expansion) {
            let bases: Vec<&str> = identities
                .iter()
                .rev()
                .take(200)
                .filter(|i| i.clean.country.as_deref() == Some(country))
                .filter_map(|i| i.company_base.as_deref())
                .collect();
            bases.choose(rng).map(|b| b.to_string())
        } else {
            None
        };
        let name = match group_base {
            Some(base) => {
                let suffix = *GROUP_SUFFIXES.choose(rng).unwrap();
                let name = if suffix.ends_with("TA") {
                    format!("{base} {suffix} {}", rng.random_range(100_000..1_000_000))
                } else {
                    format!("{base} {suffix}")
                };
                base_out = Some(base);
                name
            }
            None => {
                let mut parts = vec![*COMPANY_HEADS.choose(rng).unwrap()];
                if rng.random_bool(0.4) {
                    parts.push(*COMPANY_CORES.choose(rng).unwrap());
                }
                parts.push(*COMPANY_CORES.choose(rng).unwrap());
                parts.push(*COMPANY_TAILS.choose(rng).unwrap());
                let base = parts.join(" ");
                base_out = Some(base.clone());
                base
            }
        };
        rec.company_name = Some(name);
    } else {
        rec.first_name = Some(FIRST_NAMES.choose(rng).unwrap().to_string());
        rec.last_name = Some(LAST_NAMES.choose(rng).unwrap().to_string());
    }
    let number = rng.random_range(1..400);
    let street = format!(
        "{number}, {} {}",
        STREET_NAMES.choose(rng).unwrap(),
        STREET_TYPES.choose(rng).unwrap()
    );
    rec.street = Some(street);
    rec.town = Some(TOWNS.choose(rng).unwrap().to_string());
    rec.zip = Some(format!("{:02} {:04}", rng.random_range(1..100), rng.random_range(0..10_000)));
    rec.country_code = Some(country.to_string());
    rec.country = Some(country.to_string());
    (rec, base_out)
}

/// Replace one word that has spelling variants with one of them.
fn abbreviate(rng: &mut ChaCha8Rng, rec: &mut RawRecord, table: &AbbreviationTable) -> bool {
    let mut candidates: Vec<(usize, usize, Vec<&str>)> = Vec::new();
    for (field_idx, field) in [rec.company_name.as_deref(), rec.street.as_deref()].into_iter().enumerate() {
        let Some(text) = field else { continue };
        for (word_idx, word) in text.split(' ').enumerate() {
            let variants = table.variants_of(&word.to_uppercase());
            if !variants.is_empty() {
                candidates.push((field_idx, word_idx, variants));
            }
        }
    }
    let Some((field_idx, word_idx, variants)) = candidates.choose(rng).cloned() else {
        return false;
    };
    let variant = variants.choose(rng).unwrap().to_string();
    let field = if field_idx == 0 { &mut rec.company_name } else { &mut rec.street };
    if let Some(text) = field.as_mut() {
        let mut words: Vec<String> = text.split(' ').map(str::to_string).collect();
        words[word_idx] = variant;
        *text = words.join(" ");
    }
    true
}

/// Individuals: swap first and last name. Corporates: "12, Main Street" ->
/// "Main Street, 12".
fn transpose(rec: &mut RawRecord) -> bool {
    if rec.customer_type != CustomerType::Corporate {
        if rec.first_name.is_some() && rec.last_name.is_some() {
            std::mem::swap(&mut rec.first_name, &mut rec.last_name);
            return true;
        }
        return false;
    }
    let Some(street) = rec.street.as_mut() else {
        return false;
    };
    match street.split_once(", ") {
        Some((num, rest)) => {
            *street = format!("{rest}, {num}");
            true
        }
        None => false,
    }
}

const TYPO_ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ";

fn typo(rng: &mut ChaCha8Rng, rec: &mut RawRecord) -> bool {
    let slots: Vec<usize> = [0usize, 1, 2, 3, 4, 5]
        .into_iter()
        .filter(|&i| rec.optional_fields()[i].as_deref().is_some_and(|s| s.chars().any(|c| c.is_ascii_alphanumeric())))
        .collect();
    let Some(&slot) = slots.choose(rng) else {
        return false;
    };
    let field = rec.optional_fields_mut()[slot].as_mut().unwrap();
    if slot == 5 && rng.random_bool(0.5) && field.contains([' ', '-']) {
        // "11 1101" vs "11-1101"
        *field = if field.contains(' ') { field.replacen(' ', "-", 1) } else { field.replacen('-', " ", 1) };
        return true;
    }
    let mut chars: Vec<char> = field.chars().collect();
    let positions: Vec<usize> = (0..chars.len()).filter(|&i| chars[i].is_ascii_alphanumeric()).collect();
    let pos = *positions.choose(rng).unwrap();
    let original = chars[pos];
    let replacement = loop {
        let c = if original.is_ascii_digit() {
            char::from(b'0' + rng.random_range(0..10u8))
        } else {
            let c = char::from(*TYPO_ALPHABET.choose(rng).unwrap());
            if original.is_ascii_lowercase() { c.to_ascii_lowercase() } else { c }
        };
        if c != original {
            break c;
        }
    };
    match rng.random_range(0..3) {
        0 => chars[pos] = replacement,
        1 if positions.len() > 1 => {
            chars.remove(pos);
        }
        _ => chars.insert(pos, replacement),
    }
    *field = chars.into_iter().collect();
    true
}

fn blank_field(rng: &mut ChaCha8Rng, rec: &mut RawRecord) -> bool {
    // first/last name special case: whole name crammed into the first field
    let merge = rec.customer_type != CustomerType::Corporate
        && rec.first_name.is_some()
        && rec.last_name.is_some()
        && rng.random_bool(0.3);
    if merge {
        if let (Some(first), Some(last)) = (rec.first_name.as_mut(), rec.last_name.take()) {
            first.push(' ');
            first.push_str(&last);
            return true;
        }
    }
    let slots: Vec<usize> = [0usize, 1, 2, 3, 4, 5, 6]
        .into_iter()
        .filter(|&i| rec.optional_fields()[i].is_some())
        .collect();
    let Some(&slot) = slots.choose(rng) else {
        return false;
    };
    let field = rec.optional_fields_mut().into_iter().nth(slot).unwrap();
    *field = if rng.random_bool(0.2) {
        Some(DUMMIES.choose(rng).unwrap().to_string())
    } else {
        None
    };
    true
}
