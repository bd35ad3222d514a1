//! Token dictionary: every distinct word is stored once and referenced by id.

use std::collections::HashMap;
use std::sync::Arc;

/// Dense token id handed out by [`TokenDictionary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenId(pub u32);

/// Collision-free interner. Ids are assigned in first-seen order and never reused.
#[derive(Debug, Clone, Default)]
pub struct TokenDictionary {
    words: Vec<Arc<str>>,
    lookup: HashMap<Arc<str>, TokenId>,
}

impl TokenDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, word: &str) -> TokenId {
        if let Some(&id) = self.lookup.get(word) {
            return id;
        }
        let id = TokenId(u32::try_from(self.words.len()).expect("token dictionary overflow"));
        let word: Arc<str> = Arc::from(word);
        self.words.push(word.clone());
        self.lookup.insert(word, id);
        id
    }

    pub fn get(&self, word: &str) -> Option<TokenId> {
        self.lookup.get(word).copied()
    }

    /// Panics on an id that did not come from this dictionary.
    pub fn resolve(&self, id: TokenId) -> &str {
        &self.words[id.0 as usize]
    }

    pub fn try_resolve(&self, id: TokenId) -> Option<&str> {
        self.words.get(id.0 as usize).map(|w| &**w)
    }

    /// Words in id order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(|w| &**w)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn text_bytes(&self) -> usize {
        self.words.iter().map(|w| w.len()).sum()
    }
}
