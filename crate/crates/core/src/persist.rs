//! Snapshot files and the audit log.
//!
//! Snapshot layout (integers little-endian, `varint` = unsigned LEB128,
//! `str` = varint length + UTF-8 bytes):
//!
//! ```text
//! "CNIX" | version: u8
//! section*:  tag: [u8; 4] | len: u64 | payload
//!   DICT  varint n, str * n (token id order)
//!         varint m, (str variant, str canonical) * m (abbreviation table)
//!   PART  varint n, partition * n (partition key order)
//!         partition = str country | u8 kind | names | address-index
//!         names     = tree (kind 0) or address-index layout (kind 1)
//!         tree      = u8 has_root | node       (pre-order)
//!         node      = varint n, (varint token | u8 flags | [postings] | [node]) * n
//!                     flags: 1 = postings follow, 2 = child node follows
//!         address-index = varint n, (varint token | postings) * n (lexical token order)
//!         postings  = varint n, varint gap * n   (record ordinals, gap = ord - prev - 1)
//!   RECS  varint n, record * n (key order), u64 audit position
//!         record = str fid | str cid | u8 type | (u8 present | str) * 8 | u8 unindexable
//!   CSUM  u32 CRC-32 of every byte before this section
//! ```
//!
//! Saving writes to a sibling temp file and renames it over the target, so a
//! crash mid-save leaves the previous snapshot untouched.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::cn_tree::{CompanyNameTree, Element, Node};
use crate::dict::{TokenDictionary, TokenId};
use crate::global_index::{AuditAction, AuditEvent, GlobalIndex, NameIndex, Partition};
use crate::inverted_index::PostingsIndex;
use crate::model::{CustomerType, IndexKind, PartitionKey, RawRecord, RecordKey};
use crate::normalize::AbbreviationTable;
use crate::postings::Postings;

pub const MAGIC: &[u8; 4] = b"CNIX";
pub const VERSION: u8 = 1;

const TAG_DICT: &[u8; 4] = b"DICT";
const TAG_PART: &[u8; 4] = b"PART";
const TAG_RECS: &[u8; 4] = b"RECS";
const TAG_CSUM: &[u8; 4] = b"CSUM";
const MAX_TREE_DEPTH: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Corruption {
    #[error("not a snapshot (bad magic bytes)")]
    BadMagic,
    #[error("unsupported version: expected {expected}, found {found}")]
    Version { expected: u8, found: u8 },
    #[error("file is truncated")]
    Truncated,
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("{0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(#[from] Corruption),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PersistError + '_ {
    move |source| PersistError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn malformed(msg: impl Into<String>) -> Corruption {
    Corruption::Malformed(msg.into())
}

// ---------------------------------------------------------------- encoding

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn varint(&mut self, mut v: u64) {
        loop {
            let byte = (v & 0x7f) as u8;
            v >>= 7;
            if v == 0 {
                self.buf.push(byte);
                return;
            }
            self.buf.push(byte | 0x80);
        }
    }

    fn str(&mut self, s: &str) {
        self.varint(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn section(&mut self, tag: &[u8; 4], payload: Writer) {
        self.buf.extend_from_slice(tag);
        self.buf.extend_from_slice(&(payload.buf.len() as u64).to_le_bytes());
        self.buf.extend_from_slice(&payload.buf);
    }
}

struct Encoder<'a> {
    dict: &'a TokenDictionary,
    ordinals: HashMap<&'a RecordKey, u64>,
}

impl Encoder<'_> {
    fn postings(&self, w: &mut Writer, p: &Postings) {
        w.varint(p.len() as u64);
        let mut next = 0u64;
        for key in p {
            let ord = self.ordinals[key];
            w.varint(ord - next);
            next = ord + 1;
        }
    }

    fn node(&self, w: &mut Writer, node: &Node) {
        w.varint(node.elements().len() as u64);
        for e in node.elements() {
            w.varint(u64::from(e.token().0));
            let flags = u8::from(e.postings().is_some()) | (u8::from(e.child().is_some()) << 1);
            w.u8(flags);
            if let Some(p) = e.postings() {
                self.postings(w, p);
            }
            if let Some(child) = e.child() {
                self.node(w, child);
            }
        }
    }

    fn inverted(&self, w: &mut Writer, idx: &PostingsIndex) {
        let entries = idx.entries_sorted(self.dict);
        w.varint(entries.len() as u64);
        for (token, p) in entries {
            w.varint(u64::from(token.0));
            self.postings(w, p);
        }
    }
}

/// Serialize an index. Equal index states give identical bytes.
pub fn encode(index: &GlobalIndex) -> Vec<u8> {
    let mut out = Writer::default();
    out.buf.extend_from_slice(MAGIC);
    out.u8(VERSION);

    let mut dict = Writer::default();
    dict.varint(index.dict.len() as u64);
    for word in index.dict.words() {
        dict.str(word);
    }
    let pairs = index.table.pairs();
    dict.varint(pairs.len() as u64);
    for (v, c) in pairs {
        dict.str(v);
        dict.str(c);
    }
    out.section(TAG_DICT, dict);

    let enc = Encoder {
        dict: &index.dict,
        ordinals: index.records.keys().zip(0u64..).collect(),
    };
    let mut parts = Writer::default();
    parts.varint(index.partitions.len() as u64);
    for (key, part) in &index.partitions {
        parts.str(&key.country);
        match &part.names {
            NameIndex::Tree(tree) => {
                parts.u8(0);
                match tree.root() {
                    Some(root) => {
                        parts.u8(1);
                        enc.node(&mut parts, root);
                    }
                    None => parts.u8(0),
                }
            }
            NameIndex::Inverted(idx) => {
                parts.u8(1);
                enc.inverted(&mut parts, idx);
            }
        }
        enc.inverted(&mut parts, &part.address);
    }
    out.section(TAG_PART, parts);

    let mut recs = Writer::default();
    recs.varint(index.records.len() as u64);
    for (key, raw) in &index.records {
        recs.str(&key.fid);
        recs.str(&key.cid);
        recs.u8(type_code(raw.customer_type));
        for field in raw.optional_fields() {
            match field {
                Some(v) => {
                    recs.u8(1);
                    recs.str(v);
                }
                None => recs.u8(0),
            }
        }
        recs.u8(u8::from(index.unindexable.contains(key)));
    }
    recs.buf.extend_from_slice(&index.audit_position.to_le_bytes());
    out.section(TAG_RECS, recs);

    let crc = crc32fast::hash(&out.buf);
    let mut sum = Writer::default();
    sum.buf.extend_from_slice(&crc.to_le_bytes());
    out.section(TAG_CSUM, sum);
    out.buf
}

fn type_code(t: CustomerType) -> u8 {
    match t {
        CustomerType::Corporate => 0,
        CustomerType::Individual => 1,
        CustomerType::Joint => 2,
    }
}

// ---------------------------------------------------------------- decoding

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8], Corruption> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(Corruption::Truncated)?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, Corruption> {
        Ok(self.bytes(1)?[0])
    }

    fn u64_le(&mut self) -> Result<u64, Corruption> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn varint(&mut self) -> Result<u64, Corruption> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.u8()?;
            v |= u64::from(b & 0x7f) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(malformed("varint overflow"))
    }

    /// A length or count, bounded by the bytes left so hostile input cannot
    /// trigger huge allocations.
    fn count(&mut self) -> Result<usize, Corruption> {
        let n = self.varint()?;
        if n > (self.buf.len() - self.pos) as u64 {
            return Err(Corruption::Truncated);
        }
        Ok(n as usize)
    }

    fn str(&mut self) -> Result<&'a str, Corruption> {
        let n = self.count()?;
        std::str::from_utf8(self.bytes(n)?).map_err(|_| malformed("invalid UTF-8"))
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

struct Decoder<'a> {
    dict: &'a TokenDictionary,
    keys: &'a [RecordKey],
}

impl Decoder<'_> {
    fn token(&self, r: &mut Reader) -> Result<TokenId, Corruption> {
        let id = r.varint()?;
        if id >= self.dict.len() as u64 {
            return Err(malformed(format!("token id {id} out of range")));
        }
        Ok(TokenId(id as u32))
    }

    fn postings(&self, r: &mut Reader) -> Result<Postings, Corruption> {
        let n = r.count()?;
        if n == 0 {
            return Err(malformed("empty postings list"));
        }
        let mut keys = Vec::with_capacity(n);
        let mut next = 0u64;
        for _ in 0..n {
            let ord = next
                .checked_add(r.varint()?)
                .filter(|&o| o < self.keys.len() as u64)
                .ok_or_else(|| malformed("postings ordinal out of range"))?;
            keys.push(self.keys[ord as usize].clone());
            next = ord + 1;
        }
        Ok(Postings::from_sorted_unchecked(keys))
    }

    fn node(&self, r: &mut Reader, depth: usize) -> Result<Node, Corruption> {
        if depth > MAX_TREE_DEPTH {
            return Err(malformed("tree too deep"));
        }
        let n = r.count()?;
        let mut elements = Vec::with_capacity(n);
        for _ in 0..n {
            let token = self.token(r)?;
            let flags = r.u8()?;
            if flags > 3 {
                return Err(malformed("bad element flags"));
            }
            let postings = if flags & 1 != 0 { Some(self.postings(r)?) } else { None };
            let child = if flags & 2 != 0 { Some(self.node(r, depth + 1)?) } else { None };
            elements.push(Element::from_parts(token, child, postings));
        }
        Ok(Node::from_elements(elements))
    }

    fn inverted(&self, r: &mut Reader) -> Result<PostingsIndex, Corruption> {
        let n = r.count()?;
        let mut idx = PostingsIndex::new();
        let mut prev: Option<&str> = None;
        for _ in 0..n {
            let token = self.token(r)?;
            let word = self.dict.resolve(token);
            if prev.is_some_and(|p| p >= word) {
                return Err(malformed("index items out of lexical order"));
            }
            prev = Some(word);
            idx.insert_list(token, self.postings(r)?);
        }
        Ok(idx)
    }
}

fn decode_dict(r: &mut Reader) -> Result<(TokenDictionary, AbbreviationTable), Corruption> {
    let n = r.count()?;
    let mut dict = TokenDictionary::new();
    for i in 0..n {
        if dict.intern(r.str()?).0 as usize != i {
            return Err(malformed("duplicate token in dictionary"));
        }
    }
    let m = r.count()?;
    let mut pairs = Vec::with_capacity(m);
    for _ in 0..m {
        pairs.push((r.str()?, r.str()?));
    }
    let table = AbbreviationTable::from_pairs(pairs).map_err(|e| malformed(format!("abbreviation table: {e}")))?;
    Ok((dict, table))
}

type Records = (BTreeMap<RecordKey, RawRecord>, BTreeSet<RecordKey>, u64);

fn decode_records(r: &mut Reader) -> Result<Records, Corruption> {
    let n = r.count()?;
    let mut records = BTreeMap::new();
    let mut unindexable = BTreeSet::new();
    let mut prev: Option<RecordKey> = None;
    for _ in 0..n {
        let (fid, cid) = (r.str()?, r.str()?);
        let customer_type = match r.u8()? {
            0 => CustomerType::Corporate,
            1 => CustomerType::Individual,
            2 => CustomerType::Joint,
            t => return Err(malformed(format!("unknown customer type {t}"))),
        };
        let mut raw = RawRecord::new(fid, cid, customer_type);
        for slot in raw.optional_fields_mut() {
            *slot = match r.u8()? {
                0 => None,
                1 => Some(r.str()?.to_string()),
                _ => return Err(malformed("bad field flag")),
            };
        }
        let key = raw.key();
        if prev.as_ref().is_some_and(|p| *p >= key) {
            return Err(malformed("records out of key order"));
        }
        match r.u8()? {
            0 => {}
            1 => {
                unindexable.insert(key.clone());
            }
            _ => return Err(malformed("bad unindexable flag")),
        }
        prev = Some(key.clone());
        records.insert(key, raw);
    }
    let audit_position = r.u64_le()?;
    Ok((records, unindexable, audit_position))
}

/// Parse snapshot bytes. Magic and version are checked before anything else.
pub fn decode(bytes: &[u8]) -> Result<GlobalIndex, Corruption> {
    let mut r = Reader::new(bytes);
    if r.bytes(4).map_err(|_| Corruption::BadMagic)? != MAGIC {
        return Err(Corruption::BadMagic);
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(Corruption::Version {
            expected: VERSION,
            found: version,
        });
    }
    let mut sections: Vec<(&[u8], &[u8])> = Vec::new();
    loop {
        let section_start = r.pos;
        let tag = r.bytes(4)?;
        let len = r.u64_le()?;
        let len = usize::try_from(len).map_err(|_| Corruption::Truncated)?;
        let payload = r.bytes(len)?;
        if tag == TAG_CSUM {
            if len != 4 {
                return Err(malformed("bad checksum section"));
            }
            let stored = u32::from_le_bytes(payload.try_into().unwrap());
            let computed = crc32fast::hash(&bytes[..section_start]);
            if stored != computed {
                return Err(Corruption::Checksum { stored, computed });
            }
            if !r.done() {
                return Err(malformed("trailing bytes after checksum"));
            }
            break;
        }
        sections.push((tag, payload));
    }
    let [(t1, dict_bytes), (t2, part_bytes), (t3, rec_bytes)] = sections[..] else {
        return Err(malformed("expected DICT, PART and RECS sections"));
    };
    if (t1, t2, t3) != (&TAG_DICT[..], &TAG_PART[..], &TAG_RECS[..]) {
        return Err(malformed("sections out of order"));
    }

    let mut r = Reader::new(dict_bytes);
    let (dict, table) = decode_dict(&mut r)?;
    ensure_done(&r, "DICT")?;

    let mut r = Reader::new(rec_bytes);
    let (records, unindexable, audit_position) = decode_records(&mut r)?;
    ensure_done(&r, "RECS")?;
    let keys: Vec<RecordKey> = records.keys().cloned().collect();

    let dec = Decoder { dict: &dict, keys: &keys };
    let mut r = Reader::new(part_bytes);
    let n = r.count()?;
    let mut partitions = BTreeMap::new();
    let mut prev: Option<PartitionKey> = None;
    for _ in 0..n {
        let country = r.str()?.to_string();
        let (kind, names) = match r.u8()? {
            0 => {
                let root = match r.u8()? {
                    0 => None,
                    1 => Some(dec.node(&mut r, 0)?),
                    _ => return Err(malformed("bad tree flag")),
                };
                (IndexKind::Corporate, NameIndex::Tree(CompanyNameTree::from_root(root)))
            }
            1 => (IndexKind::Individual, NameIndex::Inverted(dec.inverted(&mut r)?)),
            k => return Err(malformed(format!("unknown partition kind {k}"))),
        };
        let address = dec.inverted(&mut r)?;
        let key = PartitionKey::new(country, kind);
        if prev.as_ref().is_some_and(|p| *p >= key) {
            return Err(malformed("partitions out of order"));
        }
        prev = Some(key.clone());
        let records = count_partition_records(&names, &address, &dict);
        partitions.insert(key, Partition { names, address, records });
    }
    ensure_done(&r, "PART")?;

    let index = GlobalIndex {
        dict,
        table,
        partitions,
        records,
        unindexable,
        audit_position,
        pending_audit: Vec::new(),
    };
    index.validate().map_err(malformed)?;
    Ok(index)
}

fn ensure_done(r: &Reader, section: &str) -> Result<(), Corruption> {
    if r.done() {
        Ok(())
    } else {
        Err(malformed(format!("trailing bytes in {section} section")))
    }
}

fn count_partition_records(names: &NameIndex, address: &PostingsIndex, dict: &TokenDictionary) -> usize {
    let mut keys: BTreeSet<RecordKey> = address.items(dict).into_iter().flat_map(|(_, p)| p.iter().cloned()).collect();
    match names {
        NameIndex::Tree(t) => keys.extend(t.enumerate(dict).into_iter().flat_map(|(_, p)| p)),
        NameIndex::Inverted(i) => keys.extend(i.items(dict).into_iter().flat_map(|(_, p)| p.iter().cloned())),
    }
    keys.len()
}

// ---------------------------------------------------------------- files

/// Write `bytes` to `path` through a temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PersistError> {
    let tmp = temp_path(path);
    let result = (|| {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(io_err(path))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        // Persist the rename itself; not supported everywhere.
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

/// Sibling path a save writes to before renaming.
pub fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

pub fn save(index: &GlobalIndex, path: &Path) -> Result<(), PersistError> {
    write_atomic(path, &encode(index))
}

pub fn load(path: &Path) -> Result<GlobalIndex, PersistError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(decode(&bytes)?)
}

/// Append events to the audit log, one `timestamp|fid|cid|action` line each.
pub fn append_audit(path: &Path, events: &[AuditEvent]) -> Result<(), PersistError> {
    if events.is_empty() {
        return Ok(());
    }
    let mut text = String::new();
    for e in events {
        text.push_str(&format!("{}|{}|{}|{}\n", e.timestamp, e.fid, e.cid, e.action.as_str()));
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))?;
    f.sync_data().map_err(io_err(path))
}

pub fn read_audit(path: &Path) -> Result<Vec<AuditEvent>, PersistError> {
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let bad = || PersistError::CorruptSnapshot(malformed(format!("audit log line {}", i + 1)));
        let mut parts = line.splitn(4, '|');
        let (Some(ts), Some(fid), Some(cid), Some(action)) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad());
        };
        out.push(AuditEvent {
            timestamp: ts.parse().map_err(|_| bad())?,
            fid: fid.to_string(),
            cid: cid.to_string(),
            action: match action {
                "insert" => AuditAction::Insert,
                "reject" => AuditAction::Reject,
                _ => return Err(bad()),
            },
        });
    }
    Ok(out)
}
