//! Property tests of the whole index over small generated corpora.

use std::collections::BTreeSet;

use cnindex_core::ingest::{generate, GeneratorParams};
use cnindex_core::normalize::{normalize_record, normalize_text};
use cnindex_core::{AbbreviationTable, GlobalIndex, IndexKind, RawRecord, SearchRequest};
use proptest::prelude::*;

fn corpus(seed: u64, count: usize) -> Vec<RawRecord> {
    generate(&GeneratorParams {
        count,
        fids: 4,
        seed,
        missing_rate: 0.2,
        abbreviation_rate: 0.3,
        transposition_rate: 0.2,
        unknown_country_rate: 0.1,
        ..GeneratorParams::default()
    })
    .unwrap()
    .records()
}

/// A request built from words of one record, plus filters.
fn request(records: &[RawRecord], pick: usize, shape: u8, prefix: bool) -> SearchRequest {
    let r = &records[pick % records.len()];
    let words = |s: &Option<String>| -> Vec<String> {
        s.as_deref().unwrap_or("").split_whitespace().map(str::to_string).collect()
    };
    let name: Vec<String> = [words(&r.company_name), words(&r.last_name)].concat();
    let address: Vec<String> = words(&r.street).into_iter().take(2).collect();
    let mut req = SearchRequest::default();
    match shape % 3 {
        0 => req.name = Some(name),
        1 => req.address = Some(address),
        _ => {
            req.name = Some(name);
            req.address = Some(address);
        }
    }
    req.prefix = prefix;
    req
}

fn params() -> impl Strategy<Value = (u64, usize, Vec<(usize, u8, bool)>)> {
    (0u64..1000, 20usize..150, prop::collection::vec((0usize..1000, 0u8..3, any::<bool>()), 1..20))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn filters_only_narrow_results((seed, count, reqs) in params()) {
        let recs = corpus(seed, count);
        let idx = GlobalIndex::build(recs.clone(), AbbreviationTable::builtin()).unwrap();
        for (pick, shape, prefix) in reqs {
            let req = request(&recs, pick, shape, prefix);
            let Ok(all) = idx.search(&req) else { continue };
            let all: BTreeSet<_> = all.keys().into_iter().collect();
            for country in ["IE", "US", "UNKNOWN", "ZZ"] {
                let narrowed = idx.search(&req.clone().with_country(country)).unwrap();
                prop_assert!(narrowed.keys().iter().all(|k| all.contains(k)));
            }
            for kind in [IndexKind::Corporate, IndexKind::Individual] {
                let narrowed = idx.search(&req.clone().with_type(kind)).unwrap();
                prop_assert!(narrowed.keys().iter().all(|k| all.contains(k)));
            }
        }
    }

    #[test]
    fn incremental_update_equals_batch((seed, count, reqs) in params(), cut in 0usize..150) {
        let recs = corpus(seed, count);
        let table = AbbreviationTable::builtin();
        let cut = cut.min(recs.len());
        let batch = GlobalIndex::build(recs.clone(), table.clone()).unwrap();
        let mut inc = GlobalIndex::build(recs[..cut].to_vec(), table).unwrap();
        let report = inc.update(recs[cut..].to_vec());
        prop_assert_eq!(report.inserted, recs.len() - cut);
        prop_assert_eq!(inc.stats(), batch.stats());
        for (pick, shape, prefix) in reqs {
            let req = request(&recs, pick, shape, prefix);
            prop_assert_eq!(inc.search(&req), batch.search(&req));
        }
    }

    #[test]
    fn extracted_records_contain_the_query((seed, count, reqs) in params()) {
        let recs = corpus(seed, count);
        let table = AbbreviationTable::builtin();
        let idx = GlobalIndex::build(recs.clone(), table.clone()).unwrap();
        for raw in &recs {
            prop_assert_eq!(idx.get(&raw.key()), Some(raw));
        }
        for (pick, shape, prefix) in reqs {
            let req = request(&recs, pick, shape, prefix);
            let Ok(results) = idx.search(&req) else { continue };
            let keys = results.keys();
            for row in idx.extract(&keys) {
                let n = normalize_record(row.unwrap(), &table).unwrap();
                if let Some(words) = &req.address {
                    for w in normalize_text(&words.join(" "), &table) {
                        prop_assert!(n.address_tokens.contains(&w));
                    }
                }
                if let Some(words) = &req.name {
                    for w in normalize_text(&words.join(" "), &table) {
                        prop_assert!(n.name_tokens.contains(&w));
                    }
                }
            }
        }
    }
}

#[test]
fn generated_corpus_survives_files_snapshot_and_reload() {
    let params = GeneratorParams { count: 600, seed: 3, ..GeneratorParams::default() };
    let dir = tempfile::tempdir().unwrap();
    let cfg = generate(&params).unwrap().write_to(dir.path()).unwrap();
    let cfg = cnindex_core::ingest::SourceConfig::load(&cfg).unwrap();
    let recs = cnindex_core::ingest::load_sources(&cfg).unwrap();
    assert_eq!(recs.len(), 600);
    let table = AbbreviationTable::builtin();
    let idx = GlobalIndex::build(recs.clone(), table.clone()).unwrap();
    let snap = dir.path().join("index.cnix");
    cnindex_core::persist::save(&idx, &snap).unwrap();
    let back = cnindex_core::persist::load(&snap).unwrap();
    for req in cnindex_core::bench::generate_battery(&recs, &table, 200, 1) {
        let want = cnindex_core::scan::scan(&recs, &table, &req).unwrap();
        assert_eq!(back.search(&req).unwrap(), want, "{req:?}");
    }
}
