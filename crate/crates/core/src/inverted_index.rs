//! Inverted lists for customer names and addresses: word -> postings.

use std::collections::HashMap;

use thiserror::Error;

use crate::dict::{TokenDictionary, TokenId};
use crate::model::RecordKey;
use crate::postings::{intersect_all, Postings};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("query has no tokens")]
    EmptyQuery,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PostingsIndex {
    entries: HashMap<TokenId, Postings>,
}

impl PostingsIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record `key` under every token. An empty token set is a no-op.
    pub fn add<S: AsRef<str>>(&mut self, dict: &mut TokenDictionary, tokens: &[S], key: &RecordKey) {
        for t in tokens {
            let id = dict.intern(t.as_ref());
            self.entries.entry(id).or_default().insert(key.clone());
        }
    }

    pub(crate) fn insert_list(&mut self, token: TokenId, postings: Postings) {
        debug_assert!(!postings.is_empty());
        self.entries.insert(token, postings);
    }

    pub fn postings(&self, dict: &TokenDictionary, token: &str) -> &[RecordKey] {
        dict.get(token)
            .and_then(|id| self.entries.get(&id))
            .map(Postings::as_slice)
            .unwrap_or(&[])
    }

    /// Keys whose token set contains every query token.
    pub fn query_all<S: AsRef<str>>(
        &self,
        dict: &TokenDictionary,
        tokens: &[S],
    ) -> Result<Vec<RecordKey>, QueryError> {
        if tokens.is_empty() {
            return Err(QueryError::EmptyQuery);
        }
        let mut lists = Vec::with_capacity(tokens.len());
        for t in tokens {
            let list = self.postings(dict, t.as_ref());
            if list.is_empty() {
                return Ok(Vec::new());
            }
            lists.push(list);
        }
        Ok(intersect_all(lists))
    }

    /// (token, postings) pairs in lexical token order.
    pub fn items<'a>(&'a self, dict: &'a TokenDictionary) -> Vec<(&'a str, &'a Postings)> {
        let mut items: Vec<_> = self
            .entries
            .iter()
            .map(|(id, p)| (dict.resolve(*id), p))
            .collect();
        items.sort_unstable_by(|a, b| a.0.cmp(b.0));
        items
    }

    /// (token id, postings) in lexical token order.
    pub(crate) fn entries_sorted(&self, dict: &TokenDictionary) -> Vec<(TokenId, &Postings)> {
        let mut items: Vec<_> = self.entries.iter().map(|(id, p)| (*id, p)).collect();
        items.sort_unstable_by(|a, b| dict.resolve(a.0).cmp(dict.resolve(b.0)));
        items
    }

    /// Number of distinct tokens.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn postings_total(&self) -> usize {
        self.entries.values().map(Postings::len).sum()
    }
}
