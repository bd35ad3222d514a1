//! Indexed search versus the linear-scan baseline.
//!
//! Every query runs down both paths and the result sets must agree; a
//! difference is a correctness failure ([`BenchError::Mismatch`]), never a
//! timing artifact. The indexed path is split into in-index lookup and record
//! extraction.

use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::global_index::{GlobalIndex, IndexError, PreparedQuery, SearchRequest};
use crate::model::{IndexKind, RawRecord};
use crate::normalize::{merge_address, merge_name, resolve_country, tokenize, AbbreviationTable};
use crate::scan::scan;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("query {query} ({request:?}): index returned {indexed} keys, baseline {baseline}")]
    Mismatch {
        query: usize,
        request: SearchRequest,
        indexed: usize,
        baseline: usize,
    },
    #[error(transparent)]
    Query(#[from] IndexError),
    #[error("empty query battery")]
    EmptyBattery,
}

/// Distribution of per-query times, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median_ms: f64,
    pub p90_ms: f64,
    pub mean_ms: f64,
    pub max_ms: f64,
}

impl Summary {
    pub fn of(samples: &[Duration]) -> Self {
        let mut ms: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        Self {
            median_ms: percentile(&ms, 0.5),
            p90_ms: percentile(&ms, 0.9),
            mean_ms: ms.iter().sum::<f64>() / ms.len().max(1) as f64,
            max_ms: ms.last().copied().unwrap_or(0.0),
        }
    }
}

/// Nearest-rank percentile of sorted values; 0 when empty.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub records: usize,
    pub sources: usize,
    pub queries: usize,
    pub repetitions: usize,
    pub total_hits: usize,
    pub lookup: Summary,
    pub extraction: Summary,
    pub end_to_end: Summary,
    pub baseline: Summary,
    /// Median baseline time over median end-to-end indexed time.
    pub speedup: f64,
    /// Median and 10th percentile of the per-query speedups.
    pub per_query_speedup_median: f64,
    pub per_query_speedup_p10: f64,
}

impl BenchReport {
    pub fn render(&self) -> String {
        let line = |name: &str, s: &Summary| {
            format!(
                "  {name:<11} median {:>9.3} ms   p90 {:>9.3} ms   mean {:>9.3} ms   max {:>9.3} ms\n",
                s.median_ms, s.p90_ms, s.mean_ms, s.max_ms
            )
        };
        let mut out = format!(
            "{} records from {} sources, {} queries x {} repetitions, {} hits in total\n",
            self.records, self.sources, self.queries, self.repetitions, self.total_hits
        );
        out += &line("lookup", &self.lookup);
        out += &line("extraction", &self.extraction);
        out += &line("indexed", &self.end_to_end);
        out += &line("baseline", &self.baseline);
        out += &format!(
            "  speedup     {:.1}x (median per query {:.1}x, p10 {:.1}x); all results identical\n",
            self.speedup, self.per_query_speedup_median, self.per_query_speedup_p10
        );
        out
    }
}

/// A mixed query battery drawn from the records themselves: exact and prefix
/// company names, partial individual names, address fragments, country and
/// type filters (right and wrong), and words that match nothing.
pub fn generate_battery(records: &[RawRecord], table: &AbbreviationTable, n: usize, seed: u64) -> Vec<SearchRequest> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    if records.is_empty() {
        return out;
    }
    let mut attempts = 0;
    while out.len() < n && attempts < n * 20 {
        attempts += 1;
        let rec = &records[rng.random_range(0..records.len())];
        let req = query_for(&mut rng, rec);
        if PreparedQuery::new(&req, table).is_ok() {
            out.push(req);
        }
    }
    out
}

fn pick_subset(rng: &mut ChaCha8Rng, tokens: &[String]) -> Vec<String> {
    let k = rng.random_range(1..=tokens.len().min(3));
    let mut picked: Vec<String> = tokens.choose_multiple(rng, k).cloned().collect();
    if rng.random_bool(0.5) {
        picked.reverse();
    }
    picked
}

fn query_for(rng: &mut ChaCha8Rng, rec: &RawRecord) -> SearchRequest {
    let kind = rec.customer_type.index_kind();
    let company = rec.company_name.as_deref().map(tokenize).unwrap_or_default();
    let person = tokenize(&merge_name(rec.first_name.as_deref(), rec.last_name.as_deref()));
    let address = tokenize(&merge_address(
        rec.street.as_deref(),
        rec.town.as_deref(),
        rec.zip.as_deref(),
        rec.country_code.as_deref(),
    ));

    let mut req = SearchRequest::default();
    let name_tokens = match kind {
        IndexKind::Corporate => company,
        IndexKind::Individual => person,
    };
    match rng.random_range(0..10) {
        // name only
        0..=3 if !name_tokens.is_empty() => req.name = Some(name_tokens.clone()),
        // name and address
        4..=5 if !name_tokens.is_empty() && !address.is_empty() => {
            req.name = Some(name_tokens.clone());
            req.address = Some(pick_subset(rng, &address));
        }
        // address only
        6..=7 if !address.is_empty() => req.address = Some(pick_subset(rng, &address)),
        // a word nobody has
        8 => {
            req.name = Some(vec![format!("ZQX{}", rng.random_range(0..1000u32))]);
        }
        _ => {
            req.name = Some(if name_tokens.is_empty() { vec!["SMITH".into()] } else { name_tokens.clone() });
        }
    }
    if let Some(name) = &mut req.name {
        match kind {
            IndexKind::Corporate => {
                if rng.random_bool(0.4) && name.len() > 1 {
                    name.truncate(rng.random_range(1..name.len()));
                    req.prefix = true;
                } else {
                    req.prefix = rng.random_bool(0.2);
                }
            }
            IndexKind::Individual => {
                let subset = pick_subset(rng, name);
                *name = subset;
            }
        }
    }
    req.customer_type = match rng.random_range(0..4) {
        0 | 1 => None,
        2 => Some(kind),
        _ => Some(match kind {
            IndexKind::Corporate => IndexKind::Individual,
            IndexKind::Individual => IndexKind::Corporate,
        }),
    };
    req.country = match rng.random_range(0..4) {
        0 | 1 => None,
        2 => Some(resolve_country(rec.country.as_deref(), rec.country_code.as_deref())),
        _ => Some(["IE", "GB", "US", "LU", "FR", "ZZ"].choose(rng).unwrap().to_string()),
    };
    req
}

/// Run `battery` through the index and the baseline, `reps` times each, and
/// compare every result set.
pub fn run_bench(
    index: &GlobalIndex,
    records: &[RawRecord],
    battery: &[SearchRequest],
    reps: usize,
) -> Result<BenchReport, BenchError> {
    if battery.is_empty() {
        return Err(BenchError::EmptyBattery);
    }
    let reps = reps.max(1);
    let (mut lookup, mut extraction, mut end_to_end, mut baseline) = (vec![], vec![], vec![], vec![]);
    let mut speedups = Vec::with_capacity(battery.len());
    let mut total_hits = 0;
    for (i, req) in battery.iter().enumerate() {
        let (mut l, mut x, mut b) = (vec![], vec![], vec![]);
        let mut indexed = None;
        let mut scanned = None;
        for _ in 0..reps {
            let t0 = Instant::now();
            let results = index.search(req)?;
            let t1 = Instant::now();
            let keys = results.keys();
            let rows = index.extract(&keys);
            std::hint::black_box(&rows);
            let t2 = Instant::now();
            drop(rows);
            l.push(t1 - t0);
            x.push(t2 - t1);
            indexed = Some(results);

            let t3 = Instant::now();
            let s = scan(records, index.table(), req)?;
            b.push(t3.elapsed());
            scanned = Some(s);
        }
        let (indexed, scanned) = (indexed.unwrap(), scanned.unwrap());
        if indexed != scanned {
            return Err(BenchError::Mismatch {
                query: i,
                request: req.clone(),
                indexed: indexed.len(),
                baseline: scanned.len(),
            });
        }
        total_hits += indexed.len();
        let (l, x, b) = (median(&mut l), median(&mut x), median(&mut b));
        lookup.push(l);
        extraction.push(x);
        end_to_end.push(l + x);
        baseline.push(b);
        speedups.push(b.as_secs_f64() / (l + x).as_secs_f64().max(1e-9));
    }
    speedups.sort_by(f64::total_cmp);
    let end_to_end_s = Summary::of(&end_to_end);
    let baseline_s = Summary::of(&baseline);
    let mut fids: Vec<&str> = records.iter().map(|r| r.fid.as_str()).collect();
    fids.sort_unstable();
    fids.dedup();
    Ok(BenchReport {
        records: records.len(),
        sources: fids.len(),
        queries: battery.len(),
        repetitions: reps,
        total_hits,
        lookup: Summary::of(&lookup),
        extraction: Summary::of(&extraction),
        end_to_end: end_to_end_s,
        baseline: baseline_s,
        speedup: baseline_s.median_ms / end_to_end_s.median_ms.max(1e-6),
        per_query_speedup_median: percentile(&speedups, 0.5),
        per_query_speedup_p10: percentile(&speedups, 0.1),
    })
}

fn median(samples: &mut [Duration]) -> Duration {
    samples.sort();
    samples[(samples.len() - 1) / 2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate, GeneratorParams};

    #[test]
    fn percentile_is_nearest_rank() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        assert_eq!(percentile(&v, 0.5), 5.0);
        assert_eq!(percentile(&v, 0.9), 9.0);
        assert_eq!(percentile(&v, 0.1), 1.0);
        assert_eq!(percentile(&[], 0.5), 0.0);
    }

    #[test]
    fn single_trivial_query() {
        let recs: Vec<RawRecord> = (0..10)
            .map(|i| RawRecord::individual("F", &i.to_string(), "John", &format!("Smith{i}")))
            .collect();
        let table = AbbreviationTable::builtin();
        let idx = GlobalIndex::build(recs.clone(), table).unwrap();
        let battery = [SearchRequest::from_text(Some("john smith3"), None)];
        let report = run_bench(&idx, &recs, &battery, 2).unwrap();
        assert_eq!(report.queries, 1);
        assert_eq!(report.total_hits, 1);
        assert!(report.render().contains("all results identical"));
    }

    #[test]
    fn corrupted_index_is_a_mismatch() {
        let recs = vec![
            RawRecord::individual("F", "1", "John", "Smith"),
            RawRecord::individual("F", "2", "Jane", "Smith"),
        ];
        let idx = GlobalIndex::build(recs[..1].to_vec(), AbbreviationTable::builtin()).unwrap();
        let battery = [SearchRequest::from_text(Some("smith"), None)];
        match run_bench(&idx, &recs, &battery, 1) {
            Err(BenchError::Mismatch { indexed: 1, baseline: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn battery_is_deterministic_and_valid() {
        let corpus = generate(&GeneratorParams { count: 400, ..GeneratorParams::default() }).unwrap();
        let recs = corpus.records();
        let table = AbbreviationTable::builtin();
        let a = generate_battery(&recs, &table, 200, 7);
        assert_eq!(a, generate_battery(&recs, &table, 200, 7));
        assert_eq!(a.len(), 200);
        assert!(a.iter().any(|q| q.prefix));
        assert!(a.iter().any(|q| q.address.is_some() && q.name.is_none()));
        let idx = GlobalIndex::build(recs.clone(), table).unwrap();
        let report = run_bench(&idx, &recs, &a, 1).unwrap();
        assert!(report.total_hits > 0);
    }
}
