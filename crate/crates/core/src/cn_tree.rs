//! Word-level company-name tree.
//!
//! Level 0 is a single node holding the first word of every company name. Each
//! element is keyed by one word and links to the node holding every word that
//! follows it in some inserted name, so a root-to-element path spells a name.
//! Elements where a name ends carry that name's postings. An element can both
//! end a name and continue into longer ones ("FIRST COMMERCIAL BANK LTD" and
//! "FIRST COMMERCIAL BANK LTD OBB A/C").
//!
//! Elements store interned token ids; element lists are ordered by the word
//! text so lookups inside a node are binary searches.

use std::cmp::Ordering;

use thiserror::Error;

use crate::dict::{TokenDictionary, TokenId};
use crate::model::RecordKey;
use crate::postings::Postings;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("company name has no tokens")]
    EmptyName,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Node {
    elements: Vec<Element>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    token: TokenId,
    child: Option<Box<Node>>,
    postings: Option<Postings>,
}

impl Node {
    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    fn find(&self, dict: &TokenDictionary, word: &str) -> Result<usize, usize> {
        self.elements
            .binary_search_by(|e| dict.resolve(e.token).cmp(word))
    }

    pub(crate) fn from_elements(elements: Vec<Element>) -> Self {
        Self { elements }
    }
}

impl Element {
    pub fn token(&self) -> TokenId {
        self.token
    }

    pub fn child(&self) -> Option<&Node> {
        self.child.as_deref()
    }

    pub fn postings(&self) -> Option<&Postings> {
        self.postings.as_ref()
    }

    pub(crate) fn from_parts(token: TokenId, child: Option<Node>, postings: Option<Postings>) -> Self {
        Self {
            token,
            child: child.map(Box::new),
            postings,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompanyNameTree {
    root: Option<Node>,
    height: usize,
    name_count: usize,
}

impl CompanyNameTree {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuild from a decoded root node, recomputing the counters.
    pub(crate) fn from_root(root: Option<Node>) -> Self {
        let mut tree = Self {
            root,
            height: 0,
            name_count: 0,
        };
        if let Some(root) = &tree.root {
            let (mut h, mut n) = (0, 0);
            count(root, 1, &mut h, &mut n);
            tree.height = h;
            tree.name_count = n;
        }
        tree
    }

    pub fn root(&self) -> Option<&Node> {
        self.root.as_ref()
    }

    /// Longest inserted name, in words.
    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of distinct names (token sequences).
    pub fn name_count(&self) -> usize {
        self.name_count
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_none()
    }

    /// Add `key` under `name`. Returns false if the key was already there.
    pub fn insert<S: AsRef<str>>(
        &mut self,
        dict: &mut TokenDictionary,
        name: &[S],
        key: RecordKey,
    ) -> Result<bool, TreeError> {
        let (last, init) = name.split_last().ok_or(TreeError::EmptyName)?;
        let mut node = self.root.get_or_insert_with(Node::default);
        for word in init {
            let idx = descend_or_create(node, dict, word.as_ref());
            node = node.elements[idx]
                .child
                .get_or_insert_with(Box::default)
                .as_mut();
        }
        let idx = descend_or_create(node, dict, last.as_ref());
        let postings = &mut node.elements[idx].postings;
        if postings.is_none() {
            self.name_count += 1;
        }
        self.height = self.height.max(name.len());
        Ok(postings.get_or_insert_with(Postings::new).insert(key))
    }

    fn walk<S: AsRef<str>>(&self, dict: &TokenDictionary, words: &[S]) -> Option<&Element> {
        let (last, init) = words.split_last()?;
        let mut node = self.root.as_ref()?;
        for word in init {
            let idx = node.find(dict, word.as_ref()).ok()?;
            node = node.elements[idx].child.as_deref()?;
        }
        let idx = node.find(dict, last.as_ref()).ok()?;
        Some(&node.elements[idx])
    }

    /// Postings of the name spelled exactly by `name`.
    pub fn search_exact<S: AsRef<str>>(&self, dict: &TokenDictionary, name: &[S]) -> Vec<RecordKey> {
        self.walk(dict, name)
            .and_then(|e| e.postings.as_ref())
            .map(|p| p.as_slice().to_vec())
            .unwrap_or_default()
    }

    /// Postings of every name starting with the words in `prefix`.
    pub fn search_prefix<S: AsRef<str>>(&self, dict: &TokenDictionary, prefix: &[S]) -> Vec<RecordKey> {
        let Some(elem) = self.walk(dict, prefix) else {
            return Vec::new();
        };
        let mut keys = Vec::new();
        collect_postings(elem, &mut keys);
        Postings::from_unsorted(keys).into_vec()
    }

    /// Every inserted name with its postings, depth-first in word order.
    pub fn enumerate(&self, dict: &TokenDictionary) -> Vec<(Vec<String>, Vec<RecordKey>)> {
        let mut out = Vec::new();
        if let Some(root) = &self.root {
            let mut path = Vec::new();
            enumerate_node(root, dict, &mut path, &mut out);
        }
        out
    }

    /// Words of the level-0 node, in stored order.
    pub fn root_words<'d>(&self, dict: &'d TokenDictionary) -> Vec<&'d str> {
        self.root
            .iter()
            .flat_map(|r| r.elements.iter())
            .map(|e| dict.resolve(e.token))
            .collect()
    }

    /// (elements, postings entries) over the whole tree.
    pub fn sizes(&self) -> (usize, usize) {
        let mut sizes = (0, 0);
        if let Some(root) = &self.root {
            node_sizes(root, &mut sizes);
        }
        sizes
    }

    /// Checks the structural invariants; used after decoding untrusted bytes.
    pub fn validate(&self, dict: &TokenDictionary) -> Result<(), String> {
        match &self.root {
            None => Ok(()),
            Some(root) => validate_node(root, dict),
        }
    }
}

fn descend_or_create(node: &mut Node, dict: &mut TokenDictionary, word: &str) -> usize {
    match node.find(dict, word) {
        Ok(i) => i,
        Err(i) => {
            let token = dict.intern(word);
            node.elements.insert(
                i,
                Element {
                    token,
                    child: None,
                    postings: None,
                },
            );
            i
        }
    }
}

fn collect_postings(elem: &Element, out: &mut Vec<RecordKey>) {
    if let Some(p) = &elem.postings {
        out.extend(p.iter().cloned());
    }
    if let Some(child) = &elem.child {
        for e in &child.elements {
            collect_postings(e, out);
        }
    }
}

fn enumerate_node(
    node: &Node,
    dict: &TokenDictionary,
    path: &mut Vec<String>,
    out: &mut Vec<(Vec<String>, Vec<RecordKey>)>,
) {
    for e in &node.elements {
        path.push(dict.resolve(e.token).to_string());
        if let Some(p) = &e.postings {
            out.push((path.clone(), p.as_slice().to_vec()));
        }
        if let Some(child) = &e.child {
            enumerate_node(child, dict, path, out);
        }
        path.pop();
    }
}

fn count(node: &Node, depth: usize, height: &mut usize, names: &mut usize) {
    for e in &node.elements {
        if e.postings.is_some() {
            *names += 1;
            *height = (*height).max(depth);
        }
        if let Some(child) = &e.child {
            count(child, depth + 1, height, names);
        }
    }
}

fn node_sizes(node: &Node, sizes: &mut (usize, usize)) {
    for e in &node.elements {
        sizes.0 += 1;
        sizes.1 += e.postings.as_ref().map_or(0, Postings::len);
        if let Some(child) = &e.child {
            node_sizes(child, sizes);
        }
    }
}

fn validate_node(node: &Node, dict: &TokenDictionary) -> Result<(), String> {
    if node.elements.is_empty() {
        return Err("empty tree node".into());
    }
    for pair in node.elements.windows(2) {
        let (a, b) = (dict.try_resolve(pair[0].token), dict.try_resolve(pair[1].token));
        match (a, b) {
            (Some(a), Some(b)) if a.cmp(b) == Ordering::Less => {}
            _ => return Err("tree node elements out of order".into()),
        }
    }
    for e in &node.elements {
        if dict.try_resolve(e.token).is_none() {
            return Err(format!("unknown token id {}", e.token.0));
        }
        match (&e.child, &e.postings) {
            (None, None) => return Err("tree element with neither child nor postings".into()),
            (_, Some(p)) if p.is_empty() => return Err("empty postings at tree element".into()),
            _ => {}
        }
        if let Some(child) = &e.child {
            validate_node(child, dict)?;
        }
    }
    Ok(())
}
