//! Sorted, duplicate-free lists of record keys and the set operations on them.

use crate::model::RecordKey;

/// A postings list. Always sorted by key order with no duplicates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Postings(Vec<RecordKey>);

impl Postings {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    /// Sorts and deduplicates arbitrary input.
    pub fn from_unsorted(mut keys: Vec<RecordKey>) -> Self {
        keys.sort_unstable();
        keys.dedup();
        Self(keys)
    }

    /// Caller guarantees `keys` is strictly increasing.
    pub(crate) fn from_sorted_unchecked(keys: Vec<RecordKey>) -> Self {
        debug_assert!(keys.windows(2).all(|w| w[0] < w[1]));
        Self(keys)
    }

    /// Returns false if the key was already present.
    pub fn insert(&mut self, key: RecordKey) -> bool {
        // Fast path: build inserts in key order, so most inserts append.
        match self.0.last() {
            Some(last) if *last < key => {
                self.0.push(key);
                true
            }
            None => {
                self.0.push(key);
                true
            }
            _ => match self.0.binary_search(&key) {
                Ok(_) => false,
                Err(pos) => {
                    self.0.insert(pos, key);
                    true
                }
            },
        }
    }

    pub fn contains(&self, key: &RecordKey) -> bool {
        self.0.binary_search(key).is_ok()
    }

    pub fn as_slice(&self) -> &[RecordKey] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<RecordKey> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, RecordKey> {
        self.0.iter()
    }
}

impl<'a> IntoIterator for &'a Postings {
    type Item = &'a RecordKey;
    type IntoIter = std::slice::Iter<'a, RecordKey>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Intersection of two sorted lists. Gallops through the longer list when the
/// sizes are lopsided.
pub fn intersect(a: &[RecordKey], b: &[RecordKey]) -> Vec<RecordKey> {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut out = Vec::with_capacity(small.len());
    if small.is_empty() {
        return out;
    }
    if large.len() / small.len() >= 16 {
        let mut rest = large;
        for k in small {
            match rest.binary_search(k) {
                Ok(i) => {
                    out.push(k.clone());
                    rest = &rest[i + 1..];
                }
                Err(i) => rest = &rest[i..],
            }
            if rest.is_empty() {
                break;
            }
        }
        return out;
    }
    let (mut i, mut j) = (0, 0);
    while i < small.len() && j < large.len() {
        match small[i].cmp(&large[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(small[i].clone());
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Intersect many lists, smallest first. Empty input yields an empty result.
pub fn intersect_all(mut lists: Vec<&[RecordKey]>) -> Vec<RecordKey> {
    if lists.is_empty() {
        return Vec::new();
    }
    lists.sort_by_key(|l| l.len());
    let mut acc = lists[0].to_vec();
    for l in &lists[1..] {
        if acc.is_empty() {
            break;
        }
        acc = intersect(&acc, l);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn k(n: u32) -> RecordKey {
        RecordKey::new("F", format!("{n:05}"))
    }

    #[test]
    fn insert_keeps_order_and_dedups() {
        let mut p = Postings::new();
        for n in [5, 1, 3, 1, 9, 3] {
            p.insert(k(n));
        }
        assert_eq!(p.as_slice(), &[k(1), k(3), k(5), k(9)]);
        assert!(!p.insert(k(5)));
    }

    proptest! {
        #[test]
        fn intersect_matches_set_semantics(
            a in proptest::collection::btree_set(0u32..400, 0..60),
            b in proptest::collection::btree_set(0u32..400, 0..300),
        ) {
            let av: Vec<_> = a.iter().map(|&n| k(n)).collect();
            let bv: Vec<_> = b.iter().map(|&n| k(n)).collect();
            let expect: Vec<_> = a.intersection(&b).map(|&n| k(n)).collect();
            prop_assert_eq!(intersect(&av, &bv), expect.clone());
            prop_assert_eq!(intersect(&bv, &av), expect);
        }

        #[test]
        fn intersect_all_is_order_insensitive(sets in proptest::collection::vec(proptest::collection::btree_set(0u32..50, 0..40), 1..5)) {
            let lists: Vec<Vec<RecordKey>> = sets.iter().map(|s| s.iter().map(|&n| k(n)).collect()).collect();
            let mut expect: BTreeSet<u32> = sets[0].clone();
            for s in &sets[1..] {
                expect = expect.intersection(s).copied().collect();
            }
            let expect: Vec<_> = expect.into_iter().map(k).collect();
            let fwd = intersect_all(lists.iter().map(|v| v.as_slice()).collect());
            let rev = intersect_all(lists.iter().rev().map(|v| v.as_slice()).collect());
            prop_assert_eq!(&fwd, &expect);
            prop_assert_eq!(&rev, &expect);
        }
    }
}
